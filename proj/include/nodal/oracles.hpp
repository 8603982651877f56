#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "nodal/grid.hpp"

namespace nodal::oracle {

using cplx = std::complex<double>;

/// Bump P(t) = (1 - t^2)^2 on [-1, 1], zero elsewhere.
inline double bump(double t) { return std::abs(t) < 1.0 ? (1 - t * t) * (1 - t * t) : 0.0; }

/// Poisson extension of `bump` to the upper half-plane. Writes the Cauchy
/// integral of P(t)/(t - z) as a polynomial part plus P(z) log((1-z)/(-1-z));
/// the polynomial part is integrated exactly by Gauss-Legendre.
inline double halfplane_poisson_bump(double x, double y) {
  if (y <= 0.0) return y == 0.0 ? bump(x) : 0.0;
  const cplx z(x, y);
  auto P = [](cplx t) { return (1.0 - t * t) * (1.0 - t * t); };
  cplx q = 0.0;
  for (const auto& [t, w] : gauss_legendre(4)) q += w * (P(t) - P(z)) / (t - z);
  const cplx total = q + P(z) * (std::log(1.0 - z) - std::log(-1.0 - z));
  return total.imag() / std::numbers::pi;
}

/// Harmonic measure of [a, b] on the real axis seen from (x, y), y > 0.
inline double halfplane_measure(double x, double y, double a, double b) {
  return (std::atan((b - x) / y) - std::atan((a - x) / y)) / std::numbers::pi;
}

/// Harmonic measure of the diameter piece [a, b] of the upper half-disk of
/// radius R, seen from (x, y). z -> ((R+z)/(R-z))^2 maps the half-disk onto
/// the upper half-plane and the diameter onto the positive axis.
inline double halfdisk_measure(double R, double x, double y, double a, double b) {
  auto F = [R](cplx z) {
    const cplx m = (R + z) / (R - z);
    return m * m;
  };
  const cplx w = F(cplx(x, y));
  const double fa = F(cplx(a, 0)).real(), fb = F(cplx(b, 0)).real();
  return (std::arg(w - fb) - std::arg(w - fa)) / std::numbers::pi;
}

/// Mean harmonic-measure density of the half-disk over [a, b].
inline double halfdisk_density(double R, double x, double y, double a, double b) {
  return halfdisk_measure(R, x, y, a, b) / (b - a);
}

/// Seeded linear combination of Re z^k, Im z^k for k = 1..degree.
struct RandomHarmonic {
  std::vector<double> re, im;  // index k-1

  RandomHarmonic(int degree, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    // raw 53-bit draws so the coefficients do not depend on the library's distributions
    auto draw = [&rng] { return 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0; };
    for (int k = 1; k <= degree; ++k) {
      re.push_back(draw());
      im.push_back(draw());
    }
  }

  double operator()(double x, double y) const {
    cplx z(x, y), p = 1.0;
    double v = 0.0;
    for (std::size_t k = 0; k < re.size(); ++k) {
      p *= z;
      v += re[k] * p.real() + im[k] * p.imag();
    }
    return v;
  }
  double operator()(const Point& p) const { return (*this)(p[0], p[1]); }
};

}  // namespace nodal::oracle
