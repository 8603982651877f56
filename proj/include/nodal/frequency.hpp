#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "nodal/geometry.hpp"
#include "nodal/grid.hpp"

namespace nodal {

// ---------------------------------------------------------------------------
// ball quadrature

namespace detail {

/// Area of [x0,x1]x[y0,y1] inside the disk of radius r centered at the origin.
inline double rect_disk_area(double x0, double x1, double y0, double y1, double r) {
  auto G = [r](double x) {
    const double c = std::clamp(x / r, -1.0, 1.0);
    return 0.5 * (x * std::sqrt(std::max(0.0, r * r - x * x)) + r * r * std::asin(c));
  };
  std::vector<double> br{x0, x1};
  auto add = [&](double v) {
    if (v > x0 && v < x1) br.push_back(v);
  };
  add(-r);
  add(r);
  for (double y : {y0, y1})
    if (std::abs(y) < r) {
      const double s = std::sqrt(r * r - y * y);
      add(-s);
      add(s);
    }
  std::sort(br.begin(), br.end());
  double area = 0.0;
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    const double a = br[k], b = br[k + 1];
    if (b <= a) continue;
    const double m = 0.5 * (a + b);
    if (std::abs(m) >= r) continue;
    const double g = std::sqrt(r * r - m * m);
    if (std::min(y1, g) <= std::max(y0, -g)) continue;
    const double upper = y1 < g ? y1 * (b - a) : G(b) - G(a);
    const double lower = y0 > -g ? y0 * (b - a) : -(G(b) - G(a));
    area += upper - lower;
  }
  return area;
}

}  // namespace detail

/// Integral over a ball of a pointwise integrand by cell midpoint quadrature.
/// Cells cut by the sphere are split into 4^dim subcells weighted by the
/// exact covered area (2D) or by the subcell-center test (3D).
template <class F>
double ball_integral(const GridSpec& g, const Ball& b, F&& integrand) {
  const double h = g.spacing, r = b.radius;
  for (int d = 0; d < g.dim; ++d)
    if (b.center[d] - r < g.origin[d] - 1e-12 || b.center[d] + r > g.origin[d] + (g.counts[d] - 1) * h + 1e-12)
      throw Error(ErrorKind::OutOfDomain, "integration ball leaves the grid box");
  std::array<std::size_t, 3> lo{0, 0, 0}, hi{0, 0, 0};
  for (int d = 0; d < g.dim; ++d) {
    const double top = static_cast<double>(g.counts[d] - 2);
    lo[d] = static_cast<std::size_t>(std::clamp(std::floor((b.center[d] - r - g.origin[d]) / h), 0.0, top));
    hi[d] = static_cast<std::size_t>(std::clamp(std::floor((b.center[d] + r - g.origin[d]) / h), 0.0, top));
  }
  const double cell_volume = std::pow(h, g.dim);
  const int sub = 4;
  const double hs = h / sub;
  double total = 0.0;
  for (std::size_t i = lo[0]; i <= hi[0]; ++i)
    for (std::size_t j = lo[1]; j <= hi[1]; ++j)
      for (std::size_t k = lo[2]; k <= hi[2]; ++k) {
        const Point c0 = g.node(Index3{i, j, k});
        double near2 = 0.0, far2 = 0.0;
        for (int d = 0; d < g.dim; ++d) {
          const double a = c0[d] - b.center[d], e = a + h;
          const double nd = a > 0.0 ? a : (e < 0.0 ? -e : 0.0);
          const double fd = std::max(std::abs(a), std::abs(e));
          near2 += nd * nd;
          far2 += fd * fd;
        }
        if (near2 >= r * r) continue;
        if (far2 <= r * r) {
          Point m = c0;
          for (int d = 0; d < g.dim; ++d) m[d] += 0.5 * h;
          total += cell_volume * integrand(m);
          continue;
        }
        const int nk = g.dim == 3 ? sub : 1;
        for (int a = 0; a < sub; ++a)
          for (int bb = 0; bb < sub; ++bb)
            for (int q = 0; q < nk; ++q) {
              Point m = c0;
              m[0] += (a + 0.5) * hs;
              m[1] += (bb + 0.5) * hs;
              if (g.dim == 3) m[2] += (q + 0.5) * hs;
              double weight;
              if (g.dim == 2) {
                const double x0 = c0[0] + a * hs - b.center[0], y0 = c0[1] + bb * hs - b.center[1];
                weight = detail::rect_disk_area(x0, x0 + hs, y0, y0 + hs, r);
              } else {
                weight = distance(m, b.center) <= r ? hs * hs * hs : 0.0;
              }
              if (weight > 0.0) total += weight * integrand(m);
            }
      }
  return total;
}

/// Integral of <A grad w, grad w> over the ball (gradient of the interpolant).
inline double dirichlet_energy(const ScalarField& w, const CoefficientField& op, const Ball& b) {
  const int dim = w.grid().dim;
  const bool id = op.is_identity();
  return ball_integral(w.grid(), b, [&](const Point& p) {
    const Point gr = w.interp_gradient(p);
    return id ? dot(gr, gr) : op.at(p).quad(gr, dim);
  });
}

inline double l2_squared(const ScalarField& w, const Ball& b) {
  return ball_integral(w.grid(), b, [&](const Point& p) {
    const double v = w.eval(p);
    return v * v;
  });
}

inline double gradient_l2_squared(const ScalarField& w, const Ball& b) {
  return ball_integral(w.grid(), b, [&](const Point& p) {
    const Point gr = w.interp_gradient(p);
    return dot(gr, gr);
  });
}

inline double ball_volume(int dim, double r) {
  return dim == 2 ? std::numbers::pi * r * r : 4.0 / 3.0 * std::numbers::pi * r * r * r;
}

inline int default_sphere_points(int dim) { return dim == 2 ? 512 : 2048; }

/// Integral of mu*w^2 over the sphere, mu centered at the ball center.
inline double sphere_mu_mass(const ScalarField& w, const CoefficientField& op, const Ball& b, int points = 0) {
  const int dim = w.grid().dim;
  const SphereRule rule = sphere_rule(dim, points > 0 ? points : default_sphere_points(dim));
  const bool id = op.is_identity();
  double acc = 0.0;
  for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
    const Point p = b.center + b.radius * rule.nodes[q];
    if (!w.grid().contains(p)) throw Error(ErrorKind::OutOfDomain, "sphere leaves the grid box");
    const double v = w.eval(p);
    acc += rule.weights[q] * (id ? 1.0 : op.mu(p, b.center)) * v * v;
  }
  return acc * std::pow(b.radius, dim - 1);
}

/// H(x0, r) = r^{1-n} * integral over the sphere of mu*w^2.
inline double height(const ScalarField& w, const CoefficientField& op, const Point& center, double r) {
  return sphere_mu_mass(w, op, {center, r}) / std::pow(r, w.grid().dim - 1);
}

// ---------------------------------------------------------------------------
// doubling index

inline double doubling_index(const ScalarField& w, const Ball& b, int per_circle = 256) {
  if (b.radius < 8.0 * w.grid().spacing - 1e-12)
    throw Error(ErrorKind::Precondition, "doubling index needs radius >= 8h");
  const double top = sup_norm_on_ball(w, b, per_circle);
  const double half = sup_norm_on_ball(w, {b.center, 0.5 * b.radius}, per_circle);
  if (half == 0.0) throw Error(ErrorKind::ZeroDenominator, "field vanishes on the half ball");
  return std::log2(top / half);
}

/// Sup of doubling indices over B_s(y) inside B_r(x): y on the 9^dim lattice
/// with spacing r/4 around x, s in {r, r/2, r/4, r/8} with s >= 8h.
inline double max_doubling_index(const ScalarField& w, const Ball& b, int per_circle = 256) {
  const GridSpec& g = w.grid();
  double best = -std::numeric_limits<double>::infinity();
  const int nk = g.dim == 3 ? 9 : 1;
  for (int k = 0; k < 4; ++k) {
    const double s = b.radius * std::ldexp(1.0, -k);
    if (s < 8.0 * g.spacing - 1e-12) break;
    for (int i = 0; i < 9; ++i)
      for (int j = 0; j < 9; ++j)
        for (int l = 0; l < nk; ++l) {
          Point y = b.center;
          y[0] += (i - 4) * b.radius / 4.0;
          y[1] += (j - 4) * b.radius / 4.0;
          if (g.dim == 3) y[2] += (l - 4) * b.radius / 4.0;
          if (distance(y, b.center) + s > b.radius * (1.0 + 1e-12)) continue;
          const double half = sup_norm_on_ball(w, {y, 0.5 * s}, per_circle);
          if (half == 0.0) continue;
          best = std::max(best, std::log2(sup_norm_on_ball(w, {y, s}, per_circle) / half));
        }
  }
  if (!std::isfinite(best)) throw Error(ErrorKind::ZeroDenominator, "no subball with a nonzero half-ball sup");
  return best;
}

// ---------------------------------------------------------------------------
// frequency profile

struct FrequencyProfile {
  Point center{};
  std::vector<double> radii;
  std::vector<double> H_values;
  std::vector<double> N_values;
  std::vector<double> ND_values;
  double NDtilde = 0.0;
  bool mu_weight_used = false;
};

inline FrequencyProfile frequency_and_H(const ScalarField& w, const CoefficientField& op, const Point& center,
                                        const std::vector<double>& radii, bool with_tilde = false) {
  const GridSpec& g = w.grid();
  if (!g.same_as(op.grid())) throw Error(ErrorKind::GridMismatch, "field and operator grids differ");
  FrequencyProfile prof;
  prof.center = center;
  prof.mu_weight_used = !op.is_identity();
  for (std::size_t k = 0; k < radii.size(); ++k) {
    const double r = radii[k];
    if (k > 0 && !(r > radii[k - 1])) throw Error(ErrorKind::Precondition, "radii must increase strictly");
    if (r < 4.0 * g.spacing - 1e-12) throw Error(ErrorKind::Precondition, "radius below 4h");
    const Ball b{center, r};
    const double surf = sphere_mu_mass(w, op, b);
    if (surf == 0.0)
      throw Error(ErrorKind::ZeroDenominator, "field vanishes on the sphere of radius " + std::to_string(r));
    const double vol = dirichlet_energy(w, op, b);
    prof.radii.push_back(r);
    prof.H_values.push_back(surf / std::pow(r, g.dim - 1));
    prof.N_values.push_back(r * vol / surf);
    prof.ND_values.push_back(r >= 8.0 * g.spacing - 1e-12 ? doubling_index(w, b)
                                                            : std::numeric_limits<double>::quiet_NaN());
  }
  if (with_tilde && !radii.empty()) prof.NDtilde = max_doubling_index(w, {center, radii.back()});
  return prof;
}

inline void write_profile_csv(std::ostream& os, const FrequencyProfile& p) {
  os << "radius,H,N,N_D\n";
  os.precision(17);
  for (std::size_t k = 0; k < p.radii.size(); ++k)
    os << p.radii[k] << ',' << p.H_values[k] << ',' << p.N_values[k] << ',' << p.ND_values[k] << '\n';
}

// ---------------------------------------------------------------------------
// certificates

/// Sup of |grad w| over nodes in the ball and interpolated sphere samples.
inline double sup_gradient_on_ball(const ScalarField& w, const Ball& b, int per_circle = 256) {
  const GridSpec& g = w.grid();
  double m = 0.0;
  for_each_node_in_ball(g, b, [&](std::size_t i, const Point&) { m = std::max(m, norm(w.node_gradient(i))); });
  for (const Point& d : sphere_directions(g.dim, per_circle)) {
    const Point p = b.center + b.radius * d;
    if (!g.contains(p)) throw Error(ErrorKind::OutOfDomain, "ball leaves the grid box");
    m = std::max(m, norm(w.eval_with_gradient(p).gradient));
  }
  return m;
}

struct ThreeSphereSample {
  double S1 = 0.0;  // sup over B_1
  double S2 = 0.0;  // sup over B_2
  double sx = 0.0;  // sup over B_{1/8}(x)
};

struct ThreeSphereFit {
  double K = 0.0;
  double alpha = 0.0;
  std::size_t samples = 0;
  bool holds = false;
};

/// Sample points x in B_scale on a lattice of spacing scale/2.
inline std::vector<Point> three_sphere_points(int dim, double scale) {
  std::vector<Point> pts;
  const int nk = dim == 3 ? 5 : 1;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      for (int k = 0; k < nk; ++k) {
        Point x{(i - 2) * 0.5 * scale, (j - 2) * 0.5 * scale, dim == 3 ? (k - 2) * 0.5 * scale : 0.0};
        if (norm(x) <= scale * (1.0 + 1e-12)) pts.push_back(x);
      }
  return pts;
}

inline std::vector<ThreeSphereSample> three_sphere_samples(const ScalarField& w, double scale, bool gradient) {
  auto sup = [&](const Ball& b) { return gradient ? sup_gradient_on_ball(w, b) : sup_norm_on_ball(w, b); };
  const Point o{0.0, 0.0, 0.0};
  const double S1 = sup({o, scale}), S2 = sup({o, 2.0 * scale});
  std::vector<ThreeSphereSample> out;
  for (const Point& x : three_sphere_points(w.grid().dim, scale)) out.push_back({S1, S2, sup({x, scale / 8.0})});
  return out;
}

/// Smallest K making S1 <= K sx^alpha S2^(1-alpha) hold on every sample.
inline double three_sphere_constant(const std::vector<ThreeSphereSample>& s, double alpha) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& q : s) worst = std::max(worst, std::log(q.S1 / q.S2) - alpha * std::log(q.sx / q.S2));
  return std::exp(worst);
}

/// Least-squares slope of log(S1/S2) against log(sx/S2) gives alpha; K is
/// then the tightest constant for which every sample satisfies the bound.
inline ThreeSphereFit fit_three_spheres(const std::vector<ThreeSphereSample>& s) {
  ThreeSphereFit fit;
  fit.samples = s.size();
  std::vector<double> t, y;
  for (const auto& q : s) {
    if (!(q.sx > 0.0 && q.S1 > 0.0 && q.S2 > 0.0)) continue;
    t.push_back(std::log(q.sx / q.S2));
    y.push_back(std::log(q.S1 / q.S2));
  }
  if (t.size() < 2) throw Error(ErrorKind::InsufficientData, "three-sphere fit needs two nonzero samples");
  double mt = 0, my = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    mt += t[i];
    my += y[i];
  }
  mt /= t.size();
  my /= t.size();
  double stt = 0, sty = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    stt += (t[i] - mt) * (t[i] - mt);
    sty += (t[i] - mt) * (y[i] - my);
  }
  fit.alpha = stt > 0.0 ? sty / stt : 0.0;
  fit.K = three_sphere_constant(s, fit.alpha);
  fit.holds = true;
  for (const auto& q : s)
    fit.holds = fit.holds && q.S1 <= fit.K * std::pow(q.sx, fit.alpha) * std::pow(q.S2, 1.0 - fit.alpha) * (1 + 1e-12);
  return fit;
}

struct CertificateOptions {
  double N0 = 0.0;          // declared frequency bound; <= 0 uses the largest profile N
  double scale = 1.0;
  double monotone_tol = 1e-2;
  double doubling_C1_cap = 1.0;
};

struct CertificateReport {
  bool monotone_ok = false;
  double C2 = 0.0;
  double worst_violation = 0.0;  // with C2 = 0
  bool doubling_ok = false;
  double doubling_C = 2.0 * std::numbers::ln2;
  double doubling_C1 = 0.0;
  double K1 = 0.0;
  double K2 = 0.0;
  bool double_ok = false;
  ThreeSphereFit three1;
  ThreeSphereFit three2;
  double c1 = 0.0;
  double c2 = 0.0;
  bool norm_equiv_ok = false;
};

inline double monotonicity_violation(const FrequencyProfile& p, double C2) {
  double v = 0.0;
  for (std::size_t k = 0; k + 1 < p.radii.size(); ++k)
    v = std::max(v, std::exp(C2 * p.radii[k]) * p.N_values[k] - std::exp(C2 * p.radii[k + 1]) * p.N_values[k + 1]);
  return v;
}

inline CertificateReport frequency_checks(const FrequencyProfile& prof, const ScalarField& w,
                                          const CoefficientField& op, const CertificateOptions& opt = {}) {
  const double s = opt.scale;
  if (prof.radii.size() < 2 || prof.radii.front() > s / 8.0 * (1 + 1e-9) || prof.radii.back() < 2.0 * s * (1 - 1e-9))
    throw Error(ErrorKind::InsufficientData, "profile radii must span [1/8, 2] times the scale");
  CertificateReport rep;
  rep.worst_violation = monotonicity_violation(prof, 0.0);
  rep.C2 = std::numeric_limits<double>::quiet_NaN();
  for (int k = 0; k <= 100; ++k)
    if (monotonicity_violation(prof, 0.01 * k) <= opt.monotone_tol) {
      rep.C2 = 0.01 * k;
      rep.monotone_ok = true;
      break;
    }

  // log(H(2R)/H(R)) <= 2 ln2 N(2R) + C1 R when exp(C2 r) N is nondecreasing
  rep.doubling_C1 = 0.0;
  bool paired = false;
  for (std::size_t a = 0; a < prof.radii.size(); ++a)
    for (std::size_t b = a + 1; b < prof.radii.size(); ++b) {
      const double R = prof.radii[a];
      if (std::abs(prof.radii[b] - 2.0 * R) > 1e-9 * R) continue;
      paired = true;
      const double excess = std::log(prof.H_values[b] / prof.H_values[a]) - rep.doubling_C * prof.N_values[b];
      rep.doubling_C1 = std::max(rep.doubling_C1, excess / R);
    }
  rep.doubling_ok = paired && rep.doubling_C1 <= opt.doubling_C1_cap;

  double N0 = opt.N0;
  if (N0 <= 0.0) N0 = *std::max_element(prof.N_values.begin(), prof.N_values.end());
  const int dim = w.grid().dim;
  rep.K1 = rep.K2 = 0.0;
  bool finite = N0 > 0.0;
  for (const Point& x : three_sphere_points(dim, 2.0 * s)) {
    for (double R : {s / 8.0, s / 4.0, s / 2.0}) {
      const double a2 = l2_squared(w, {x, 2 * R}), a1 = l2_squared(w, {x, R});
      const double g2 = gradient_l2_squared(w, {x, 2 * R}), g1 = gradient_l2_squared(w, {x, R});
      if (a1 <= 0.0 || g1 <= 0.0) {
        finite = false;
        continue;
      }
      rep.K1 = std::max(rep.K1, std::log2(a2 / a1) / N0);
      rep.K2 = std::max(rep.K2, std::log2(g2 / g1) / N0);
    }
  }
  rep.double_ok = finite;

  std::vector<ThreeSphereSample> t1, t2;
  for (double q : {s / 4.0, s / 2.0, s}) {
    auto a = three_sphere_samples(w, q, false), b = three_sphere_samples(w, q, true);
    t1.insert(t1.end(), a.begin(), a.end());
    t2.insert(t2.end(), b.begin(), b.end());
  }
  rep.three1 = fit_three_spheres(t1);
  rep.three2 = fit_three_spheres(t2);

  // sup^2 over B_r <= c1 * mean of w^2 over B_{3r/2} <= c2 * H(x0, 2r)
  double c1 = 0.0, ratio = 0.0;
  bool ok = true;
  for (const Point& x0 : three_sphere_points(dim, s / 2.0))
    for (double r : {s / 4.0, s / 2.0, s}) {
      const double sup = sup_norm_on_ball(w, {x0, r});
      const double mean = l2_squared(w, {x0, 1.5 * r}) / ball_volume(dim, 1.5 * r);
      const double H = height(w, op, x0, 2.0 * r);
      if (!(mean > 0.0 && H > 0.0)) {
        ok = false;
        continue;
      }
      c1 = std::max(c1, sup * sup / mean);
      ratio = std::max(ratio, mean / H);
    }
  rep.c1 = c1;
  rep.c2 = c1 * ratio;
  rep.norm_equiv_ok = ok && std::isfinite(rep.c2);
  return rep;
}

// ---------------------------------------------------------------------------
// growth envelope

struct GrowthFit {
  double lower_exponent = 0.0;  // slope of the 1% envelope of log|w| against log delta
  double upper_exponent = 0.0;  // slope of the 99% envelope
  double A1 = 0.0;
  double A2 = 0.0;
  std::size_t samples = 0;
  bool lower_ok = false;
  bool upper_ok = false;
};

/// Quantile envelopes of log|w| against log delta over nodes in the region
/// with delta in [4h, 1]; `normalizer` plays sup over B_8 of |w|.
inline GrowthFit growth_envelope(const ScalarField& w, const DistanceField& delta, const Ball& region, double N0,
                                 double normalizer, double alpha0 = 0.0, double tol = 0.05, int bins = 16,
                                 const std::vector<std::uint8_t>* mask = nullptr) {
  const GridSpec& g = w.grid();
  if (!(normalizer > 0.0)) throw Error(ErrorKind::Precondition, "normalizer must be positive");
  const double lo = std::log(4.0 * g.spacing), hi = 0.0;
  std::vector<std::vector<std::pair<double, double>>> bucket(static_cast<std::size_t>(bins));
  std::size_t n = 0;
  for_each_node_in_ball(g, region, [&](std::size_t i, const Point&) {
    const double d = delta[i];
    if (d < 4.0 * g.spacing || d > 1.0 || w[i] == 0.0 || (mask && !(*mask)[i])) return;
    const double ld = std::log(d);
    const int b = std::clamp(static_cast<int>((ld - lo) / (hi - lo) * bins), 0, bins - 1);
    bucket[static_cast<std::size_t>(b)].push_back({std::log(std::abs(w[i]) / normalizer), ld});
    ++n;
  });
  if (n < 100) throw Error(ErrorKind::InsufficientData, "fewer than 100 nodes for the growth envelope");
  // each bin contributes the quantile node itself, at its own log delta
  std::vector<double> xl, xu, ql, qu;
  for (int b = 0; b < bins; ++b) {
    auto& v = bucket[static_cast<std::size_t>(b)];
    if (v.size() < 5) continue;
    std::sort(v.begin(), v.end());
    auto q = [&](double p) { return v[static_cast<std::size_t>(std::floor(p * (v.size() - 1)))]; };
    xl.push_back(q(0.01).second);
    ql.push_back(q(0.01).first);
    xu.push_back(q(0.99).second);
    qu.push_back(q(0.99).first);
  }
  if (xl.size() < 2) throw Error(ErrorKind::InsufficientData, "too few populated distance bins");
  auto fit = [&](const std::vector<double>& xs, const std::vector<double>& y, double& slope, double& icpt) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += y[i];
    }
    mx /= xs.size();
    my /= xs.size();
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      sxy += (xs[i] - mx) * (y[i] - my);
    }
    slope = sxy / sxx;
    icpt = my - slope * mx;
  };
  GrowthFit gf;
  gf.samples = n;
  double il, iu;
  fit(xl, ql, gf.lower_exponent, il);
  fit(xu, qu, gf.upper_exponent, iu);
  gf.A2 = std::exp(il);
  gf.A1 = std::exp(iu);
  gf.lower_ok = gf.lower_exponent <= N0 + tol;
  gf.upper_ok = gf.upper_exponent >= alpha0;
  return gf;
}

}  // namespace nodal
