#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "nodal/elliptic.hpp"
#include "nodal/geometry.hpp"
#include "nodal/grid.hpp"
#include "nodal/workers.hpp"

namespace nodal {

// ---------------------------------------------------------------------------
// domains and partitions

/// A nodal domain clipped to B_R(0) as a Dirichlet region. The two level
/// functions (sign * u0 and R^2 - |x|^2) place the cut-cell boundary.
struct ClippedDomain {
  GridSpec grid;
  Region region;
  int sign = 1;
  double radius = 5.0;
};

inline ClippedDomain clip_domain(const ScalarField& u0, const NodalDomain& dom, double radius = 5.0) {
  const GridSpec& g = u0.grid();
  if (!g.same_as(dom.grid)) throw Error(ErrorKind::GridMismatch, "domain and field grids differ");
  for (int d = 0; d < g.dim; ++d)
    if (g.origin[d] > -radius - g.spacing || g.origin[d] + (g.counts[d] - 1) * g.spacing < radius + g.spacing)
      throw Error(ErrorKind::Precondition, "grid box does not contain the clipping ball");
  ClippedDomain c;
  c.grid = g;
  c.sign = dom.sign;
  c.radius = radius;
  std::vector<double> level(g.size()), ball(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    level[i] = dom.sign * u0[i];
    const Point p = g.node(i);
    ball[i] = radius * radius - dot(p, p);
  }
  c.region = Region::from_levels(g, {std::move(level), std::move(ball)});
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!dom.contains(i)) c.region.inside[i] = 0;
  return c;
}

struct Patch {
  int id = 0;
  std::array<long, 3> key{0, 0, 0};
  Point center{};       // measure-weighted facet centroid
  double size = 0.0;    // H^{n-1}
  std::vector<std::size_t> facets;  // indices into the zero set
};

/// Boundary facets of a domain in a ball, grouped by the box of side `side`
/// (lattice through `offset`) holding their midpoint. Patch indicators are
/// tensor-product linear ramps of half-width `mollify` across box faces, so
/// the indicators of all boxes sum to one.
struct BoundaryPartition {
  int dim = 2;
  double side = 0.125;
  Point offset{};
  double mollify = 0.0;
  std::vector<Patch> patches;
  double coverage = 0.0;
  std::map<std::array<long, 3>, int> by_key;

  /// (patch id, indicator value) pairs at a boundary location.
  template <class F>
  void indicators(const Point& q, F&& f) const {
    std::array<std::array<double, 3>, 3> w{};
    std::array<long, 3> base{0, 0, 0};
    for (int d = 0; d < 3; ++d) w[d] = {0.0, 1.0, 0.0};
    for (int d = 0; d < dim; ++d) {
      const double s = (q[d] - offset[d]) / side;
      base[d] = static_cast<long>(std::floor(s));
      const double lo = (s - base[d]) * side, hi = side - lo;  // distances to the two faces
      const double tl = mollify > 0.0 ? std::clamp(0.5 - lo / (2 * mollify), 0.0, 0.5) : 0.0;
      const double th = mollify > 0.0 ? std::clamp(0.5 - hi / (2 * mollify), 0.0, 0.5) : 0.0;
      w[d] = {tl, 1.0 - tl - th, th};
    }
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        for (int c = 0; c < 3; ++c) {
          const double v = w[0][a] * w[1][b] * w[2][c];
          if (v == 0.0) continue;
          const std::array<long, 3> k{base[0] + a - 1, base[1] + (dim > 1 ? b - 1 : 0), base[2] + (dim > 2 ? c - 1 : 0)};
          const auto it = by_key.find(k);
          if (it != by_key.end()) f(it->second, v);
        }
  }
};

inline BoundaryPartition boundary_partition(const DomainPartition& part, const NodalDomain& dom, const Ball& ball,
                                            double side = 0.125, Point offset = {0.0625, 0.0625, 0.0625},
                                            double mollify = -1.0) {
  const GridSpec& g = part.grid;
  if (!(side > 0.0)) throw Error(ErrorKind::Precondition, "patch side must be positive");
  BoundaryPartition bp;
  bp.dim = g.dim;
  bp.side = side;
  bp.offset = offset;
  bp.mollify = mollify >= 0.0 ? mollify : 2.0 * g.spacing;
  if (2.0 * bp.mollify > side) throw Error(ErrorKind::Precondition, "mollification wider than a patch");
  const auto& facets = part.zero_set.facets;
  std::map<std::array<long, 3>, Patch> acc;
  double total = 0.0, covered = 0.0;
  for (std::size_t k : dom.facets) {
    const Facet& f = facets[k];
    total += clipped_measure(f, g.dim, ball);
    const Point m = f.midpoint(g.dim);
    if (!ball.contains(m)) continue;
    std::array<long, 3> key{0, 0, 0};
    for (int d = 0; d < g.dim; ++d) key[d] = static_cast<long>(std::floor((m[d] - offset[d]) / side));
    Patch& p = acc[key];
    const double a = facet_measure(f, g.dim);
    p.key = key;
    p.size += a;
    p.center = p.center + a * m;
    p.facets.push_back(k);
    covered += a;
  }
  if (acc.empty()) throw Error(ErrorKind::EmptyZeroSet, "domain has no boundary facets in the ball");
  for (auto& [key, p] : acc) {
    if (p.size > 0.0) p.center = (1.0 / p.size) * p.center;
    p.id = static_cast<int>(bp.patches.size());
    bp.by_key[key] = p.id;
    bp.patches.push_back(std::move(p));
  }
  // midpoint assignment can put slightly more than the clipped measure in patches
  bp.coverage = total > 0.0 ? std::min(1.0, covered / total) : 0.0;
  return bp;
}

inline void validate_partition(const BoundaryPartition& bp) {
  if (bp.coverage < 0.99) throw Error(ErrorKind::Precondition, "partition covers less than 99% of the boundary");
  std::vector<std::size_t> all;
  for (const auto& p : bp.patches) all.insert(all.end(), p.facets.begin(), p.facets.end());
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end())
    throw Error(ErrorKind::Precondition, "patches share a facet");
}

// ---------------------------------------------------------------------------
// harmonic measure

struct MeasureVector {
  Point pole{};
  std::vector<double> weights;   // one per patch
  double total_in_B1 = 0.0;      // all boundary mass inside B_1
  double total = 0.0;            // all boundary mass; 1 up to solver tolerance
  double min_link_weight = 0.0;  // negative only for operators with mixed entries
  ScalarField green;             // discrete Green function with pole at `pole`
  double solver_residual = 0.0;
  int iterations = 0;
};

namespace detail {

/// Multilinear interpolation weights of a point as (node, weight) pairs.
inline std::vector<std::pair<std::size_t, double>> interpolation_weights(const GridSpec& g, const Point& p) {
  if (!g.contains(p)) throw Error(ErrorKind::OutOfDomain, "point outside the grid box");
  Index3 base{0, 0, 0};
  std::array<double, 3> t{0, 0, 0};
  for (int d = 0; d < g.dim; ++d) {
    const double s = (p[d] - g.origin[d]) / g.spacing;
    const double i = std::clamp(std::floor(s), 0.0, static_cast<double>(g.counts[d] - 2));
    base[d] = static_cast<std::size_t>(i);
    t[d] = s - i;
  }
  std::vector<std::pair<std::size_t, double>> out;
  for (int c = 0; c < (1 << g.dim); ++c) {
    Index3 ijk = base;
    double w = 1.0;
    for (int d = 0; d < g.dim; ++d) {
      const int bit = (c >> d) & 1;
      ijk[d] += static_cast<std::size_t>(bit);
      w *= bit ? t[d] : 1.0 - t[d];
    }
    if (w != 0.0) out.emplace_back(g.index(ijk[0], ijk[1], ijk[2]), w);
  }
  return out;
}

}  // namespace detail

struct MeasureOptions {
  double r = 0.5;            // pole condition delta(pole) >= r/2
  double tolerance = 1e-13;  // adjoint solve, absolute flux-balance units
};

/// Harmonic measure of every patch seen from `pole`. The solution of the
/// discrete Dirichlet problem at the pole is w.K^{-1}b for interpolation
/// weights w, so one adjoint solve K z = w gives the weight z_row * kappa of
/// every boundary link; patch weights apply the mollified indicators.
inline MeasureVector harmonic_measure(const CoefficientField& op, const ClippedDomain& dom, const DistanceField& delta,
                                      const Point& pole, const BoundaryPartition& bp, const MeasureOptions& opt = {}) {
  const GridSpec& g = dom.grid;
  if (!g.same_as(op.grid())) throw Error(ErrorKind::GridMismatch, "operator and domain grids differ");
  if (!g.contains(pole) || norm(pole) >= dom.radius)
    throw Error(ErrorKind::PolePlacement, "pole outside the clipped domain");
  const double dp = delta.at(pole);
  if (dp < opt.r / 2)
    throw Error(ErrorKind::PolePlacement,
                "pole too close to the boundary: delta " + detail::sci(dp) + " < r/2 = " + detail::sci(opt.r / 2));
  op.validate();
  const DiscreteSystem sys = DiscreteSystem::assemble(op, dom.region);
  std::vector<double> w(sys.unknowns(), 0.0);
  for (const auto& [node, wt] : detail::interpolation_weights(g, pole)) {
    const std::int64_t u = sys.unknown_of(node);
    if (u < 0) throw Error(ErrorKind::PolePlacement, "pole cell is not inside the domain");
    w[static_cast<std::size_t>(u)] += wt;
  }
  const CgResult cg = conjugate_gradient(sys, w, opt.tolerance, default_iteration_cap(sys.unknowns()));
  if (!cg.converged)
    throw Error(ErrorKind::Convergence, "adjoint solve stalled at residual " + detail::sci(cg.residual_linf));

  MeasureVector mv;
  mv.pole = pole;
  mv.weights.assign(bp.patches.size(), 0.0);
  mv.solver_residual = cg.residual_linf;
  mv.iterations = cg.iterations;
  mv.min_link_weight = std::numeric_limits<double>::infinity();
  for (const auto& l : sys.links()) {
    const double om = cg.x[l.row] * l.weight;
    mv.total += om;
    mv.min_link_weight = std::min(mv.min_link_weight, om);
    if (norm(l.where) <= 1.0) mv.total_in_B1 += om;
    bp.indicators(l.where, [&](int id, double v) { mv.weights[static_cast<std::size_t>(id)] += v * om; });
  }
  std::vector<double> gvals(g.size(), 0.0);
  const double scale = std::pow(g.spacing, -g.dim);
  for (std::size_t r = 0; r < sys.unknowns(); ++r) gvals[sys.nodes()[r]] = cg.x[r] * scale;
  mv.green = ScalarField(g, std::move(gvals), "green");
  return mv;
}

inline std::vector<MeasureVector> harmonic_measures(const CoefficientField& op, const ClippedDomain& dom,
                                                    const DistanceField& delta, const std::vector<Point>& poles,
                                                    const BoundaryPartition& bp, const MeasureOptions& opt = {}) {
  std::vector<MeasureVector> out(poles.size());
  parallel_for(poles.size(), [&](std::size_t i) { out[i] = harmonic_measure(op, dom, delta, poles[i], bp, opt); });
  return out;
}

/// Largest per-patch ratio between the measures of two poles, over patches
/// where both are positive.
inline double pole_harnack_constant(const MeasureVector& a, const MeasureVector& b) {
  double c = 1.0;
  for (std::size_t p = 0; p < a.weights.size(); ++p)
    if (a.weights[p] > 0.0 && b.weights[p] > 0.0)
      c = std::max({c, a.weights[p] / b.weights[p], b.weights[p] / a.weights[p]});
  return c;
}

// ---------------------------------------------------------------------------
// comparison with |grad u0| dH^{n-1}

struct PatchComparison {
  int id = 0;
  Point center{};
  double sigma = 0.0;
  double nu = 0.0;
  double ratio = 0.0;      // nu / sigma, NaN when sigma = 0
  bool singular = false;   // box holds a point of the singular set
};

struct GreenBound {
  Point pole{};
  double C = 0.0;  // sup G(pole, x) / |u0(x)| over the checked set
  bool finite = true;
};

struct ComparisonReport {
  std::vector<PatchComparison> patches;
  double R_max = 0.0;
  double R_min = 0.0;
  double C_emp = 0.0;       // R_max / R_min
  double C_literal = 0.0;   // max(R_max, 1/R_min)
  double nu_total = 0.0;
  double sigma_total = 0.0;
  std::vector<int> continuity_violations;
  std::vector<GreenBound> green;
  std::vector<MeasureVector> measures;
  double worst_normalization = 0.0;  // max |total - 1|
};

struct ComparisonOptions {
  MeasureOptions measure;
  double threshold = 1e-6;     // absolute-continuity proxy
  bool skip_singular = true;   // leave singular patches out of R_max and R_min
  Ball green_ball{{0.0, 0.0, 0.0}, 1.0};
};

inline ComparisonReport measure_comparison(const ScalarField& u0, const CoefficientField& op, const ClippedDomain& dom,
                                           const DistanceField& delta, const std::vector<Point>& poles,
                                           const BoundaryPartition& bp, const DomainPartition& part,
                                           const ComparisonOptions& opt = {}) {
  if (poles.empty()) throw Error(ErrorKind::Precondition, "no poles");
  validate_partition(bp);
  const GridSpec& g = dom.grid;
  ComparisonReport rep;
  rep.measures = harmonic_measures(op, dom, delta, poles, bp, opt.measure);
  const auto& facets = part.zero_set.facets;
  const SingularSet sing = singular_set(u0, {{0.0, 0.0, 0.0}, 1.0 + bp.side});
  rep.R_max = 0.0;
  rep.R_min = std::numeric_limits<double>::infinity();
  for (const Patch& p : bp.patches) {
    PatchComparison pc;
    pc.id = p.id;
    pc.center = p.center;
    for (std::size_t k : p.facets) {
      const Facet& f = facets[k];
      pc.sigma += norm(u0.eval_with_gradient(f.midpoint(g.dim)).gradient) * facet_measure(f, g.dim);
    }
    for (const auto& m : rep.measures) pc.nu += m.weights[static_cast<std::size_t>(p.id)];
    for (const Point& s : sing.points) {
      bool in = true;
      for (int d = 0; d < g.dim; ++d)
        in = in && static_cast<long>(std::floor((s[d] - bp.offset[d]) / bp.side)) == p.key[d];
      pc.singular = pc.singular || in;
    }
    pc.ratio = pc.sigma > 0.0 ? pc.nu / pc.sigma : std::numeric_limits<double>::quiet_NaN();
    if ((pc.nu > 10 * opt.threshold && pc.sigma < opt.threshold) ||
        (pc.sigma > 10 * opt.threshold && pc.nu < opt.threshold))
      rep.continuity_violations.push_back(p.id);
    if (pc.sigma > 0.0 && !(opt.skip_singular && pc.singular)) {
      rep.R_max = std::max(rep.R_max, pc.ratio);
      rep.R_min = std::min(rep.R_min, pc.ratio);
    }
    rep.nu_total += pc.nu;
    rep.sigma_total += pc.sigma;
    rep.patches.push_back(pc);
  }
  if (!(rep.R_min > 0.0) || !std::isfinite(rep.R_min))
    throw Error(ErrorKind::InsufficientData, "no patch with positive measure and sigma");
  rep.C_emp = rep.R_max / rep.R_min;
  rep.C_literal = std::max(rep.R_max, 1.0 / rep.R_min);
  for (const auto& m : rep.measures) {
    rep.worst_normalization = std::max(rep.worst_normalization, std::abs(m.total - 1.0));
    GreenBound gb;
    gb.pole = m.pole;
    const double cut = opt.measure.r / 4;
    for_each_node_in_ball(g, opt.green_ball, [&](std::size_t i, const Point& x) {
      if (!dom.region.inside[i] || distance(x, m.pole) < cut || delta[i] < 2 * g.spacing) return;
      gb.C = std::max(gb.C, m.green[i] / std::abs(u0[i]));
    });
    gb.finite = std::isfinite(gb.C);
    rep.green.push_back(gb);
  }
  return rep;
}

inline void write_patch_csv(std::ostream& os, const ComparisonReport& rep) {
  os.precision(17);
  os << "patch,x,y,z,sigma,nu,ratio,singular\n";
  for (const auto& p : rep.patches)
    os << p.id << ',' << p.center[0] << ',' << p.center[1] << ',' << p.center[2] << ',' << p.sigma << ',' << p.nu
       << ',' << p.ratio << ',' << (p.singular ? 1 : 0) << '\n';
}

}  // namespace nodal
