#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "nodal/elliptic.hpp"
#include "nodal/frequency.hpp"
#include "nodal/geometry.hpp"
#include "nodal/grid.hpp"

namespace nodal {

namespace detail {

inline std::string where(const Point& p, int dim) {
  std::ostringstream os;
  os.precision(6);
  os << '(' << p[0] << ", " << p[1];
  if (dim == 3) os << ", " << p[2];
  os << ')';
  return os.str();
}

inline std::size_t nearest_node(const GridSpec& g, const Point& p) {
  Index3 ijk{0, 0, 0};
  for (int d = 0; d < g.dim; ++d) {
    const double s = std::round((p[d] - g.origin[d]) / g.spacing);
    ijk[d] = static_cast<std::size_t>(std::clamp(s, 0.0, static_cast<double>(g.counts[d] - 1)));
  }
  return g.index(ijk[0], ijk[1], ijk[2]);
}

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace detail

// ---------------------------------------------------------------------------
// nodal-set inclusion

struct InclusionResult {
  bool ok = true;
  Point witness{};    // facet midpoint of Z(u) farthest from Z(v)
  double gap = 0.0;   // its distance to Z(v)
  std::size_t checked = 0;
};

/// Every facet of Z(u) with midpoint in `region` must lie within `tol` of Z(v).
inline InclusionResult zero_set_inclusion(const DistanceField& delta_u, const DistanceField& delta_v,
                                          const Ball& region, double tol) {
  InclusionResult r;
  const int dim = delta_u.grid().dim;
  for (const Facet& f : delta_u.facets()) {
    const Point m = f.midpoint(dim);
    if (!region.contains(m)) continue;
    ++r.checked;
    const double d = delta_v.at(m);
    if (d > r.gap) {
      r.gap = d;
      r.witness = m;
    }
  }
  r.ok = r.gap <= tol;
  return r;
}

inline void require_inclusion(const DistanceField& du, const DistanceField& dv, const Ball& region, double tol) {
  const auto r = zero_set_inclusion(du, dv, region, tol);
  if (!r.ok)
    throw Error(ErrorKind::InclusionViolation, "facet of Z(u) at " + detail::where(r.witness, du.grid().dim) +
                                                   " lies " + detail::sci(r.gap) + " from Z(v)");
}

inline void require_equality(const DistanceField& du, const DistanceField& dv, const Ball& region, double tol) {
  for (int pass = 0; pass < 2; ++pass) {
    const auto r = pass == 0 ? zero_set_inclusion(du, dv, region, tol) : zero_set_inclusion(dv, du, region, tol);
    if (!r.ok)
      throw Error(ErrorKind::EqualityViolation, std::string(pass == 0 ? "facet of Z(u)" : "facet of Z(v)") + " at " +
                                                    detail::where(r.witness, du.grid().dim) + " lies " +
                                                    detail::sci(r.gap) + " from the other zero set");
  }
}

// ---------------------------------------------------------------------------
// ratio field

struct RatioField {
  GridSpec grid;
  std::vector<double> values;      // v/u on the mask, NaN elsewhere
  std::vector<std::uint8_t> mask;  // delta_u >= 2h and u != 0
  bool divergent = false;          // Z(u) not inside Z(v) near the checked region

  /// Multilinear interpolation of the nodal ratios; defined only when every
  /// corner of the containing cell is on the mask.
  std::optional<double> eval(const Point& p) const {
    if (!grid.contains(p)) return std::nullopt;
    Index3 base{0, 0, 0};
    std::array<double, 3> t{0, 0, 0};
    for (int d = 0; d < grid.dim; ++d) {
      const double s = (p[d] - grid.origin[d]) / grid.spacing;
      const double i = std::clamp(std::floor(s), 0.0, static_cast<double>(grid.counts[d] - 2));
      base[d] = static_cast<std::size_t>(i);
      t[d] = s - i;
    }
    double acc = 0.0;
    const int corners = grid.dim == 3 ? 8 : 4;
    for (int c = 0; c < corners; ++c) {
      Index3 ijk = base;
      double wgt = 1.0;
      for (int d = 0; d < grid.dim; ++d) {
        const int bit = (c >> d) & 1;
        ijk[d] += static_cast<std::size_t>(bit);
        wgt *= bit ? t[d] : 1.0 - t[d];
      }
      const std::size_t i = grid.index(ijk[0], ijk[1], ijk[2]);
      if (!mask[i]) return std::nullopt;
      acc += wgt * values[i];
    }
    return acc;
  }

  double sup(const Ball& b) const { return extreme(b, true).value; }
  double inf(const Ball& b) const { return extreme(b, false).value; }
  double sup_abs(const Ball& b) const { return std::max(std::abs(sup(b)), std::abs(inf(b))); }

  struct Extreme {
    double value;
    Point where;
  };
  /// Max (or min) over mask nodes in the ball and over interpolated samples of
  /// its sphere; the first candidate wins ties.
  Extreme extreme(const Ball& b, bool max, int per_circle = 1024) const {
    double best = max ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    Point at{};
    bool found = false;
    auto offer = [&](double v, const Point& p) {
      if (max ? v > best : v < best) {
        best = v;
        at = p;
        found = true;
      }
    };
    for_each_node_in_ball(grid, b, [&](std::size_t i, const Point& p) {
      if (mask[i]) offer(values[i], p);
    });
    for (const Point& d : sphere_directions(grid.dim, grid.dim == 2 ? per_circle : per_circle / 4)) {
      const Point p = b.center + b.radius * d;
      if (const auto v = eval(p)) offer(*v, p);
    }
    if (!found) throw Error(ErrorKind::EmptyIntersection, "ratio mask misses the ball");
    return {best, at};
  }
};

inline RatioField ratio_field(const ScalarField& v, const ScalarField& u, const DistanceField& delta_u,
                              const DistanceField* delta_v = nullptr, const Ball& check = {{0, 0, 0}, 1.0}) {
  require_same_grid(u, v);
  if (u.max_abs() == 0.0) throw Error(ErrorKind::DegenerateField, "u vanishes identically");
  const GridSpec& g = u.grid();
  RatioField r;
  r.grid = g;
  r.values.assign(g.size(), detail::kNaN);
  r.mask.assign(g.size(), 0);
  const double band = 2.0 * g.spacing;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (delta_u[i] >= band && u[i] != 0.0) {
      r.mask[i] = 1;
      r.values[i] = v[i] / u[i];
    }
  if (delta_v) r.divergent = !zero_set_inclusion(delta_u, *delta_v, check, band).ok;
  return r;
}

// ---------------------------------------------------------------------------
// boundedness

struct UpperBound {
  double sup_ratio = 0.0;  // sup over the B_1 mask of |v/u|
  double sup8_v = 0.0;
  double sup8_u = 0.0;
  double C_emp = 0.0;
};

inline UpperBound upper_bound_constant(const ScalarField& v, const ScalarField& u, const RatioField& ratio,
                                       const Ball& inner = {{0, 0, 0}, 1.0}, const Ball& outer = {{0, 0, 0}, 8.0}) {
  UpperBound b;
  b.sup_ratio = ratio.sup_abs(inner);
  b.sup8_v = sup_norm_on_ball(v, outer);
  b.sup8_u = sup_norm_on_ball(u, outer);
  if (b.sup8_v == 0.0) throw Error(ErrorKind::ZeroDenominator, "v vanishes on the outer ball");
  b.C_emp = b.sup_ratio / (b.sup8_v / b.sup8_u);
  return b;
}

struct TwoSided {
  double C_vu = 0.0;
  double C_uv = 0.0;
  double two_sided_C = 0.0;   // max of the two upper-bound constants
  double ratio_spread = 0.0;  // sup|v/u| * sup|u/v| on B_1
};

inline TwoSided two_sided_constant(const ScalarField& u, const ScalarField& v, const DistanceField& du,
                                   const DistanceField& dv, const Ball& inner = {{0, 0, 0}, 1.0},
                                   const Ball& outer = {{0, 0, 0}, 8.0}) {
  require_equality(du, dv, inner, 2.0 * u.grid().spacing);
  const RatioField vu = ratio_field(v, u, du), uv = ratio_field(u, v, dv);
  const auto a = upper_bound_constant(v, u, vu, inner, outer), b = upper_bound_constant(u, v, uv, inner, outer);
  return {a.C_emp, b.C_emp, std::max(a.C_emp, b.C_emp), a.sup_ratio * b.sup_ratio};
}

// ---------------------------------------------------------------------------
// strong maximum principle

struct StrongMax {
  bool constant = false;
  double osc = 0.0;
  Point sup_location{};
  double interior_gap = 0.0;
  bool on_boundary = false;  // interior_gap <= 2h
};

inline StrongMax strong_max_check(const RatioField& ratio, const Ball& ball) {
  StrongMax s;
  const auto [hi, at] = ratio.extreme(ball, true);
  const double lo = ratio.inf(ball);
  s.osc = hi - lo;
  s.sup_location = at;
  s.interior_gap = ball.radius - distance(s.sup_location, ball.center);
  s.constant = s.osc <= 1e-8 * std::max(1.0, std::abs(hi));
  s.on_boundary = s.interior_gap <= 2.0 * ratio.grid.spacing;
  return s;
}

// ---------------------------------------------------------------------------
// oscillation decay

struct OscillationProfile {
  Point center{};
  std::vector<double> scales;
  std::vector<double> osc;
  std::vector<double> decay_factors;  // osc[k+1] / osc[k]
  double alpha_fit = detail::kNaN;
  bool constant = false;
};

inline double oscillation(const RatioField& ratio, const Ball& b) { return ratio.sup(b) - ratio.inf(b); }

inline OscillationProfile holder_probe(const RatioField& ratio, const DistanceField& delta_u, const Point& center,
                                       const std::vector<double>& scales) {
  const GridSpec& g = ratio.grid;
  if (delta_u.at(center) > 2.0 * g.spacing) throw Error(ErrorKind::Precondition, "center is not on Z(u)");
  OscillationProfile p;
  p.center = center;
  for (double r : scales) {
    if (r < 8.0 * g.spacing || !g.contains(center + Point{r, r, g.dim == 3 ? r : 0.0}) ||
        !g.contains(center - Point{r, r, g.dim == 3 ? r : 0.0}))
      continue;
    p.scales.push_back(r);
    p.osc.push_back(oscillation(ratio, {center, r}));
  }
  if (p.scales.size() < 3) throw Error(ErrorKind::InsufficientData, "fewer than 3 usable scales");
  const double top = *std::max_element(p.osc.begin(), p.osc.end());
  double ref = 0.0;
  for (std::size_t k = 0; k < p.scales.size(); ++k) ref = std::max(ref, std::abs(ratio.sup({center, p.scales[k]})));
  p.constant = top <= 1e-8 * std::max(1.0, ref);
  for (std::size_t k = 0; k + 1 < p.osc.size(); ++k)
    p.decay_factors.push_back(p.osc[k] > 0.0 ? p.osc[k + 1] / p.osc[k] : 0.0);
  if (!p.constant) {
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < p.osc.size(); ++k)
      if (p.osc[k] > 0.0) {
        xs.push_back(std::log(p.scales[k]));
        ys.push_back(std::log(p.osc[k]));
      }
    if (xs.size() >= 2) {
      double mx = 0, my = 0;
      for (std::size_t k = 0; k < xs.size(); ++k) {
        mx += xs[k];
        my += ys[k];
      }
      mx /= xs.size();
      my /= xs.size();
      double sxx = 0, sxy = 0;
      for (std::size_t k = 0; k < xs.size(); ++k) {
        sxx += (xs[k] - mx) * (xs[k] - mx);
        sxy += (xs[k] - mx) * (ys[k] - my);
      }
      p.alpha_fit = sxy / sxx;
    }
  }
  return p;
}

inline void write_oscillation_csv(std::ostream& os, const OscillationProfile& p) {
  os.precision(17);
  os << "scale,osc\n";
  for (std::size_t k = 0; k < p.scales.size(); ++k) os << p.scales[k] << ',' << p.osc[k] << '\n';
}

// ---------------------------------------------------------------------------
// frequency transfer

struct TransferResult {
  double D_emp = 0.0;
  double ND_u = 0.0;
  double residual_u = 0.0;
  double residual_v = 0.0;
  bool certified = false;
  bool pass = false;
};

inline TransferResult frequency_transfer_check(const ScalarField& u, const ScalarField& v, const CoefficientField& op_u,
                                               const CoefficientField& op_v, const DistanceField& du,
                                               const DistanceField& dv, double N0, double cap,
                                               double residual_tol = 1e-8) {
  const Point o{0, 0, 0};
  require_equality(du, dv, {o, 1.0}, 2.0 * u.grid().spacing);
  TransferResult t;
  t.residual_u = residual_norm(u, op_u);
  t.residual_v = residual_norm(v, op_v);
  t.certified = t.residual_u <= residual_tol && t.residual_v <= residual_tol;
  t.ND_u = doubling_index(u, {o, 1.0});
  t.D_emp = doubling_index(v, {o, 1.0});
  t.pass = t.certified && t.ND_u <= N0 + 0.05 && t.D_emp <= cap;
  return t;
}

// ---------------------------------------------------------------------------
// single nodal domain

namespace detail {

/// Sup of v over domain nodes in the ball plus sphere samples whose nearest
/// node is a domain node, restricted to delta >= dmin.
inline double domain_sup(const ScalarField& v, const NodalDomain& dom, const DistanceField& delta, const Ball& b,
                         double dmin, bool* any = nullptr) {
  const GridSpec& g = v.grid();
  double m = -std::numeric_limits<double>::infinity();
  bool found = false;
  for_each_node_in_ball(g, b, [&](std::size_t i, const Point&) {
    if (dom.contains(i) && delta[i] >= dmin) {
      m = std::max(m, v[i]);
      found = true;
    }
  });
  for (const Point& d : sphere_directions(g.dim, 256)) {
    const Point p = b.center + b.radius * d;
    if (!g.contains(p) || !dom.contains(nearest_node(g, p)) || delta.at(p) < dmin) continue;
    m = std::max(m, v.eval(p));
    found = true;
  }
  if (any) *any = found;
  return m;
}

/// Max |v| over zero-set facet vertices in the ball. Vertices sit on grid
/// edges, where the interpolant is linear.
inline double trace_max(const ScalarField& v, const DistanceField& delta, const Ball& b) {
  const int dim = v.grid().dim;
  double m = 0.0;
  for (const Facet& f : delta.facets())
    for (int k = 0; k < dim; ++k)
      if (b.contains(f.v[k]) && v.grid().contains(f.v[k])) m = std::max(m, std::abs(v.eval(f.v[k])));
  return m;
}

}  // namespace detail

struct CarlesonResult {
  double M_emp = 0.0;
  double sup_inner = 0.0;
  double sup_far = 0.0;
  double trace_max = 0.0;
  bool trace_ok = false;
};

/// sup over B_{1/2} of v divided by sup over {delta >= c} in B_2, both in the domain.
inline CarlesonResult carleson_check(const ScalarField& v, const NodalDomain& dom, const DistanceField& delta, double c,
                                     const Point& center = {0, 0, 0}) {
  const GridSpec& g = v.grid();
  if (!(c > 4.0 * g.spacing)) throw Error(ErrorKind::Precondition, "c must exceed 4h");
  CarlesonResult r;
  bool any = false;
  r.sup_far = detail::domain_sup(v, dom, delta, {center, 2.0}, c, &any);
  if (!any) throw Error(ErrorKind::CorkscrewFailure, "no domain point in B_2 with delta >= " + detail::sci(c));
  r.sup_inner = detail::domain_sup(v, dom, delta, {center, 0.5}, 0.0);
  r.M_emp = r.sup_inner / r.sup_far;
  double sup3 = 0.0;
  for_each_node_in_ball(g, {center, 3.0}, [&](std::size_t i, const Point&) {
    if (dom.contains(i)) sup3 = std::max(sup3, std::abs(v[i]));
  });
  r.trace_max = detail::trace_max(v, delta, {center, 3.0});
  r.trace_ok = r.trace_max <= 1e-6 * sup3;
  return r;
}

struct SingleDomain {
  double r = 0.0;
  double C1 = 0.0;  // min of u, v on the far set
  double C2 = 0.0;  // max of u, v on the far set
  double spread = 0.0;  // C2 / C1
  double inf_ratio = detail::kNaN;
  double sup_ratio = detail::kNaN;
  double M = detail::kNaN;  // smallest M with (C1/C2) M^-2 <= v/u <= (C2/C1) M^2 on the inner ball
  std::size_t far_nodes = 0;
};

inline SingleDomain single_domain_constant(const ScalarField& u, const ScalarField& v, const NodalDomain& dom,
                                           const DistanceField& delta, double r,
                                           const Ball& far_ball = {{0, 0, 0}, 2.0},
                                           const Ball& inner = {{0, 0, 0}, 0.25}) {
  require_same_grid(u, v);
  const GridSpec& g = u.grid();
  SingleDomain s;
  s.r = r;
  s.C1 = std::numeric_limits<double>::infinity();
  s.C2 = -std::numeric_limits<double>::infinity();
  for_each_node_in_ball(g, far_ball, [&](std::size_t i, const Point&) {
    if (!dom.contains(i) || delta[i] < r) return;
    ++s.far_nodes;
    s.C1 = std::min({s.C1, u[i], v[i]});
    s.C2 = std::max({s.C2, u[i], v[i]});
  });
  if (s.far_nodes == 0) throw Error(ErrorKind::CorkscrewFailure, "far set {delta >= r} is empty");
  if (!(s.C1 > 0.0)) throw Error(ErrorKind::Precondition, "u and v must be positive on the far set");
  s.spread = s.C2 / s.C1;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for_each_node_in_ball(g, inner, [&](std::size_t i, const Point&) {
    if (!dom.contains(i) || delta[i] < 2.0 * g.spacing || u[i] <= 0.0) return;
    lo = std::min(lo, v[i] / u[i]);
    hi = std::max(hi, v[i] / u[i]);
  });
  if (hi > 0.0) {
    s.inf_ratio = lo;
    s.sup_ratio = hi;
    s.M = std::sqrt(std::max({1.0, hi / s.spread, s.spread / lo}));
  }
  return s;
}

/// sup over the inner ball of v/u divided by the max of v/u at chunk representatives.
inline double chunk_bound_constant(const ScalarField& u, const ScalarField& v, const NodalDomain& dom,
                                   const DistanceField& delta, double r, const Ball& chunk_ball = {{0, 0, 0}, 2.0},
                                   const Ball& inner = {{0, 0, 0}, 0.25}) {
  const auto chunks = big_chunks(dom, delta, r, chunk_ball);
  if (chunks.empty()) throw Error(ErrorKind::CorkscrewFailure, "no big chunks at this r");
  double rep = 0.0;
  for (const Chunk& c : chunks) rep = std::max(rep, v[c.representative_node] / u[c.representative_node]);
  const GridSpec& g = u.grid();
  double sup = 0.0;
  for_each_node_in_ball(g, inner, [&](std::size_t i, const Point&) {
    if (dom.contains(i) && delta[i] >= 2.0 * g.spacing && u[i] > 0.0) sup = std::max(sup, v[i] / u[i]);
  });
  return sup / rep;
}

// ---------------------------------------------------------------------------
// iteration decay

struct DecayResult {
  double a_emp = 0.0;
  bool pass = false;
  double min_A_half = 0.0;
  double min_K_half = 0.0;
  std::vector<std::string> violated;  // unmet preconditions, reported only
};

/// K_s = domain nodes in the cube of half-side s, A_s = {x in K_s : delta >= dlt s}.
inline DecayResult iteration_decay_probe(const ScalarField& w, const NodalDomain& dom, const DistanceField& delta,
                                         double M0, double dlt, const Point& center = {0, 0, 0}) {
  const GridSpec& g = w.grid();
  auto in_cube = [&](const Point& p, double s) {
    for (int d = 0; d < g.dim; ++d)
      if (std::abs(p[d] - center[d]) > s) return false;
    return true;
  };
  double minA1 = std::numeric_limits<double>::infinity(), minK1 = minA1, minAh = minA1, minKh = minA1, sup = 0.0;
  std::size_t nA = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!dom.contains(i)) continue;
    const Point p = g.node(i);
    if (!in_cube(p, 1.0)) continue;
    sup = std::max(sup, std::abs(w[i]));
    minK1 = std::min(minK1, w[i]);
    if (delta[i] >= dlt) minA1 = std::min(minA1, w[i]);
    if (in_cube(p, 0.5)) {
      minKh = std::min(minKh, w[i]);
      if (delta[i] >= 0.5 * dlt) {
        minAh = std::min(minAh, w[i]);
        ++nA;
      }
    }
  }
  DecayResult r;
  if (nA == 0) throw Error(ErrorKind::EmptyIntersection, "A_1/2 has no nodes");
  if (detail::trace_max(w, delta, {center, 1.0}) > 1e-6 * sup) r.violated.push_back("w does not vanish on the boundary in B_1");
  if (minA1 < M0) r.violated.push_back("w < M0 somewhere on A_1");
  if (minK1 < -1.0) r.violated.push_back("w < -1 somewhere on K_1");
  r.min_A_half = minAh;
  r.min_K_half = minKh;
  r.a_emp = minAh / M0;
  r.pass = r.a_emp > 0.0 && r.a_emp >= -std::min(minKh, 0.0);
  return r;
}

// ---------------------------------------------------------------------------
// Liouville probe

struct LiouvilleResult {
  std::vector<double> windows;
  std::vector<double> c_fit;
  std::vector<double> residual;  // |v - c u| / |v| on the mask
  std::string verdict;           // proportional | frequency-unbounded | not-proportional
  double nd_growth_u = detail::kNaN;
  double nd_growth_v = detail::kNaN;
};

inline LiouvilleResult liouville_probe(const ScalarField& u, const ScalarField& v, const DistanceField& du,
                                       const DistanceField& dv, const std::vector<double>& windows,
                                       const Point& center = {0, 0, 0}) {
  require_same_grid(u, v);
  const GridSpec& g = u.grid();
  if (windows.empty()) throw Error(ErrorKind::Precondition, "no windows");
  LiouvilleResult L;
  for (double r : windows) {
    for (int d = 0; d < g.dim; ++d)
      if (center[d] - r < g.origin[d] || center[d] + r > g.upper()[d])
        throw Error(ErrorKind::OutOfDomain, "window of radius " + detail::sci(r) + " leaves the grid");
    require_equality(du, dv, {center, r}, 2.0 * g.spacing);
    double uu = 0, uv = 0, vv = 0;
    for_each_node_in_ball(g, {center, r}, [&](std::size_t i, const Point&) {
      if (du[i] < 2.0 * g.spacing) return;
      uu += u[i] * u[i];
      uv += u[i] * v[i];
      vv += v[i] * v[i];
    });
    if (uu == 0.0) throw Error(ErrorKind::InsufficientData, "empty mask in window");
    const double c = uv / uu;
    double res = 0.0;
    for_each_node_in_ball(g, {center, r}, [&](std::size_t i, const Point&) {
      if (du[i] >= 2.0 * g.spacing) res += (v[i] - c * u[i]) * (v[i] - c * u[i]);
    });
    L.windows.push_back(r);
    L.c_fit.push_back(c);
    L.residual.push_back(vv > 0.0 ? std::sqrt(res / vv) : 0.0);
  }
  bool prop = true;
  for (std::size_t k = 0; k < L.windows.size(); ++k)
    prop = prop && L.residual[k] <= 1e-6 && std::abs(L.c_fit[k] - L.c_fit[0]) <= 1e-6;
  if (prop) {
    L.verdict = "proportional";
    return L;
  }
  const double r0 = L.windows.front(), r1 = L.windows.back();
  L.nd_growth_u = doubling_index(u, {center, r1}) - doubling_index(u, {center, r0});
  L.nd_growth_v = doubling_index(v, {center, r1}) - doubling_index(v, {center, r0});
  L.verdict = (L.nd_growth_u >= 0.5 && L.nd_growth_v >= 0.5) ? "frequency-unbounded" : "not-proportional";
  return L;
}

}  // namespace nodal
