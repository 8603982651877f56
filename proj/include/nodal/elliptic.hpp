#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <algorithm>
#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "nodal/grid.hpp"

namespace nodal {

using BoundaryData = std::function<double(const Point&)>;

namespace detail {
inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}
}  // namespace detail

/// Set of unknown nodes for a Dirichlet problem. Optional node-sampled level
/// functions (positive inside) place the boundary between an unknown and an
/// excluded neighbor at the linear zero crossing along the grid line.
struct Region {
  std::vector<std::uint8_t> inside;
  std::vector<std::vector<double>> levels;

  /// Every node off the box boundary.
  static Region box(const GridSpec& g) {
    Region r;
    r.inside.assign(g.size(), 0);
    for (std::size_t i = 0; i < g.size(); ++i) r.inside[i] = g.on_box_boundary(g.unravel(i)) ? 0 : 1;
    return r;
  }

  /// Nodes where every level function is positive; optionally restricted to
  /// the grid-connected component containing `seed`.
  static Region from_levels(const GridSpec& g, std::vector<std::vector<double>> levels,
                            std::optional<std::size_t> seed = std::nullopt) {
    Region r;
    r.levels = std::move(levels);
    r.inside.assign(g.size(), 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g.on_box_boundary(g.unravel(i))) continue;
      bool ok = true;
      for (const auto& l : r.levels) ok = ok && l[i] > 0.0;
      r.inside[i] = ok ? 1 : 0;
    }
    if (seed) r.keep_component(g, *seed);
    return r;
  }

  void keep_component(const GridSpec& g, std::size_t seed) {
    if (seed >= inside.size() || !inside[seed])
      throw Error(ErrorKind::Precondition, "region seed is not an interior node");
    std::vector<std::uint8_t> keep(inside.size(), 0);
    std::deque<std::size_t> q{seed};
    keep[seed] = 1;
    while (!q.empty()) {
      const std::size_t i = q.front();
      q.pop_front();
      const Index3 ijk = g.unravel(i);
      for (int d = 0; d < g.dim; ++d) {
        const std::size_t s = g.stride(d);
        if (ijk[d] > 0 && inside[i - s] && !keep[i - s]) {
          keep[i - s] = 1;
          q.push_back(i - s);
        }
        if (ijk[d] + 1 < g.counts[d] && inside[i + s] && !keep[i + s]) {
          keep[i + s] = 1;
          q.push_back(i + s);
        }
      }
    }
    inside = std::move(keep);
  }

  std::size_t count() const {
    std::size_t c = 0;
    for (auto b : inside) c += b;
    return c;
  }
};

struct DirichletProblem {
  CoefficientField op;
  Region region;
  BoundaryData boundary;
};

struct SolveReport {
  ScalarField solution;
  double residual_linf = 0.0;
  int iterations = 0;
  double tolerance = 0.0;
};

/// Symmetric positive-definite system of the face-flux discretization of
/// -div(A grad w) on the unknowns of a region. Face coefficients are the
/// harmonic mean of the normal diagonal entries of the adjacent nodes; mixed
/// entries use centered differences, which keeps the operator symmetric.
class DiscreteSystem {
 public:
  /// Coupling of an unknown to a boundary location carrying Dirichlet data.
  struct Link {
    std::size_t row;
    Point where;
    double weight;
  };

  static constexpr double kMinCutFraction = 1e-3;

  static DiscreteSystem assemble(const CoefficientField& op, const Region& region) {
    const GridSpec& g = op.grid();
    if (region.inside.size() != g.size()) throw Error(ErrorKind::GridMismatch, "region does not match operator grid");
    DiscreteSystem s;
    s.grid_ = g;
    s.unknown_of_.assign(g.size(), -1);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (region.inside[i]) {
        s.unknown_of_[i] = static_cast<std::int64_t>(s.nodes_.size());
        s.nodes_.push_back(i);
      }
    if (s.nodes_.empty()) throw Error(ErrorKind::Precondition, "region has no unknowns");
    const double h = g.spacing, h2 = h * h;
    const bool mixed = !op.is_diagonal();
    s.row_ptr_.push_back(0);
    std::vector<std::pair<std::size_t, double>> row;
    for (std::size_t r = 0; r < s.nodes_.size(); ++r) {
      const std::size_t i = s.nodes_[r];
      const Index3 ijk = g.unravel(i);
      row.clear();
      double diag = 0.0, plain = 0.0;
      auto couple = [&](std::size_t j, double kij) {  // K[i][j] = kij
        const std::int64_t u = s.unknown_of_[j];
        if (u >= 0) {
          row.emplace_back(static_cast<std::size_t>(u), kij);
        } else {
          s.links_.push_back({r, g.node(j), -kij});
        }
      };
      for (int d = 0; d < g.dim; ++d) {
        const std::size_t st = g.stride(d);
        for (int side = -1; side <= 1; side += 2) {
          if ((side < 0 && ijk[d] == 0) || (side > 0 && ijk[d] + 1 == g.counts[d]))
            throw Error(ErrorKind::Precondition, "unknown node on the box boundary");
          const std::size_t j = side < 0 ? i - st : i + st;
          const double ai = op.entry(i, d, d), aj = op.entry(j, d, d);
          const double af = 2.0 * ai * aj / (ai + aj);
          if (s.unknown_of_[j] >= 0) {
            row.emplace_back(static_cast<std::size_t>(s.unknown_of_[j]), -af / h2);
            diag += af / h2;
            plain += af / h2;
          } else {
            double theta = 1.0;
            for (const auto& l : region.levels)
              if (l[j] <= 0.0 && l[i] > 0.0) theta = std::min(theta, l[i] / (l[i] - l[j]));
            theta = std::max(theta, kMinCutFraction);
            const double kappa = af / (theta * h2);
            diag += kappa;
            plain += af / h2;
            Point q = g.node(i);
            q[d] += side * theta * h;
            s.links_.push_back({r, q, kappa});
          }
        }
      }
      if (mixed) {
        for (int d = 0; d < g.dim; ++d)
          for (int e = 0; e < g.dim; ++e) {
            if (d == e) continue;
            const std::size_t sd = g.stride(d), se = g.stride(e);
            const double ap = op.entry(i + sd, d, e), am = op.entry(i - sd, d, e);
            if (ap == 0.0 && am == 0.0) continue;
            const double c = 1.0 / (4.0 * h2);
            couple(i + sd + se, -ap * c);
            couple(i + sd - se, ap * c);
            couple(i - sd + se, am * c);
            couple(i - sd - se, -am * c);
          }
      }
      row.emplace_back(r, diag);
      std::sort(row.begin(), row.end());
      // merge duplicates
      std::size_t start = s.col_.size();
      for (const auto& [c, v] : row) {
        if (s.col_.size() > start && s.col_.back() == c) {
          s.val_.back() += v;
        } else {
          s.col_.push_back(c);
          s.val_.push_back(v);
        }
      }
      s.row_ptr_.push_back(s.col_.size());
      s.diag_.push_back(0.0);
      for (std::size_t k = start; k < s.col_.size(); ++k)
        if (s.col_[k] == r) s.diag_.back() = s.val_[k];
      // cut rows are measured as if the boundary sat at full spacing
      s.row_scale_.push_back(plain / diag);
    }
    return s;
  }

  const GridSpec& grid() const { return grid_; }
  std::size_t unknowns() const { return nodes_.size(); }
  const std::vector<std::size_t>& nodes() const { return nodes_; }
  std::int64_t unknown_of(std::size_t node) const { return unknown_of_[node]; }
  const std::vector<Link>& links() const { return links_; }
  const std::vector<double>& diagonal() const { return diag_; }
  /// Factor applied to a row residual to express it in flux-balance units.
  const std::vector<double>& row_scale() const { return row_scale_; }

  void apply(const std::vector<double>& x, std::vector<double>& y) const {
    y.resize(nodes_.size());
    for (std::size_t r = 0; r < nodes_.size(); ++r) {
      double acc = 0.0;
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) acc += val_[k] * x[col_[k]];
      y[r] = acc;
    }
  }

  std::vector<double> rhs(const BoundaryData& g) const {
    std::vector<double> b(nodes_.size(), 0.0);
    for (const Link& l : links_) b[l.row] += l.weight * g(l.where);
    return b;
  }

  /// Largest |data| over all boundary locations.
  double boundary_scale(const BoundaryData& g) const {
    double m = 0.0;
    for (const Link& l : links_) m = std::max(m, std::abs(g(l.where)));
    return m;
  }

 private:
  GridSpec grid_;
  std::vector<std::size_t> nodes_;
  std::vector<std::int64_t> unknown_of_;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> col_;
  std::vector<double> val_;
  std::vector<double> diag_;
  std::vector<double> row_scale_;
  std::vector<Link> links_;
};

struct CgResult {
  std::vector<double> x;
  double residual_linf = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Jacobi-preconditioned conjugate gradients; stops once the max-norm of the
/// true residual (rows weighted by row_scale) is at most `abs_tol`. Sequential loops keep results bitwise
/// reproducible.
inline CgResult conjugate_gradient(const DiscreteSystem& sys, const std::vector<double>& b, double abs_tol,
                                   int max_iterations, std::vector<double> x0 = {}) {
  const std::size_t n = sys.unknowns();
  CgResult res;
  res.x = x0.size() == n ? std::move(x0) : std::vector<double>(n, 0.0);
  std::vector<double> r(n), z(n), p(n), q(n);
  const auto& diag = sys.diagonal();
  const auto& scale = sys.row_scale();
  auto linf = [&](const std::vector<double>& v) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(v[i]) * scale[i]);
    return m;
  };
  auto true_residual = [&]() {
    sys.apply(res.x, q);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
  };
  true_residual();
  double best = linf(r);
  res.residual_linf = best;
  int it = 0;
  while (it < max_iterations) {
    if (res.residual_linf <= abs_tol) {
      res.converged = true;
      break;
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    p = z;
    double rz = 0.0;
    for (std::size_t i = 0; i < n; ++i) rz += r[i] * z[i];
    // inner CG cycle; the recursive residual is re-validated against the true one on exit
    while (it < max_iterations) {
      sys.apply(p, q);
      double pq = 0.0;
      for (std::size_t i = 0; i < n; ++i) pq += p[i] * q[i];
      if (!(pq > 0.0)) break;
      const double alpha = rz / pq;
      for (std::size_t i = 0; i < n; ++i) {
        res.x[i] += alpha * p[i];
        r[i] -= alpha * q[i];
      }
      ++it;
      if (linf(r) <= 0.5 * abs_tol) break;
      double rz_new = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        z[i] = r[i] / diag[i];
        rz_new += r[i] * z[i];
      }
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    true_residual();
    res.residual_linf = linf(r);
    if (res.residual_linf >= best && res.residual_linf > abs_tol && it >= max_iterations) break;
    best = std::min(best, res.residual_linf);
  }
  res.iterations = it;
  res.converged = res.residual_linf <= abs_tol;
  return res;
}

inline int default_iteration_cap(std::size_t unknowns) {
  return static_cast<int>(50.0 * std::sqrt(static_cast<double>(unknowns))) + 10;
}

/// Solve div(A grad w) = 0 in the region with Dirichlet data; nodes outside
/// the region carry the data evaluated at the node. `tolerance` bounds the
/// max-norm residual relative to sup|solution|.
inline SolveReport solve_dirichlet(const DirichletProblem& problem, double tolerance) {
  if (!(tolerance > 0.0)) throw Error(ErrorKind::Precondition, "tolerance must be positive");
  problem.op.validate();
  const DiscreteSystem sys = DiscreteSystem::assemble(problem.op, problem.region);
  const GridSpec& g = sys.grid();
  const std::vector<double> b = sys.rhs(problem.boundary);
  double scale = sys.boundary_scale(problem.boundary);
  if (scale == 0.0) scale = 1.0;
  const int cap = default_iteration_cap(sys.unknowns());
  CgResult cg = conjugate_gradient(sys, b, tolerance * scale, cap);

  std::vector<double> vals(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const std::int64_t u = sys.unknown_of(i);
    vals[i] = u >= 0 ? cg.x[static_cast<std::size_t>(u)] : problem.boundary(g.node(i));
  }
  double sup = 0.0;
  for (double v : vals) sup = std::max(sup, std::abs(v));
  SolveReport rep;
  rep.tolerance = tolerance;
  rep.iterations = cg.iterations;
  rep.residual_linf = cg.residual_linf / (sup > 0.0 ? sup : 1.0);
  if (rep.residual_linf > tolerance) {
    // sup|u| can fall below the boundary scale when the data is not attained on nodes
    const double abs_tol = tolerance * (sup > 0.0 ? sup : 1.0);
    cg = conjugate_gradient(sys, b, abs_tol, cap, std::move(cg.x));
    for (std::size_t r = 0; r < sys.unknowns(); ++r) vals[sys.nodes()[r]] = cg.x[r];
    rep.iterations += cg.iterations;
    rep.residual_linf = cg.residual_linf / (sup > 0.0 ? sup : 1.0);
  }
  if (rep.residual_linf > tolerance)
    throw Error(ErrorKind::Convergence,
                "solver did not reach tolerance " + detail::sci(tolerance) + "; best residual " + detail::sci(rep.residual_linf));
  rep.solution = ScalarField(g, std::move(vals), "dirichlet-solution");
  return rep;
}

/// Max over interior nodes of |div_h(A grad_h w)| relative to sup|w|, using
/// the same stencil as the solver with every neighbor a grid node.
inline double residual_norm(const ScalarField& field, const CoefficientField& op) {
  const GridSpec& g = field.grid();
  if (!g.same_as(op.grid())) throw Error(ErrorKind::GridMismatch, "field and operator grids differ");
  const double h2 = g.spacing * g.spacing;
  const auto& w = field.values();
  const bool mixed = !op.is_diagonal();
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Index3 ijk = g.unravel(i);
    if (g.on_box_boundary(ijk)) continue;
    double acc = 0.0;
    for (int d = 0; d < g.dim; ++d) {
      const std::size_t st = g.stride(d);
      const double ai = op.entry(i, d, d);
      for (std::size_t j : {i - st, i + st}) {
        const double aj = op.entry(j, d, d);
        acc += 2.0 * ai * aj / (ai + aj) * (w[j] - w[i]);
      }
    }
    if (mixed) {
      for (int d = 0; d < g.dim; ++d)
        for (int e = 0; e < g.dim; ++e) {
          if (d == e) continue;
          const std::size_t sd = g.stride(d), se = g.stride(e);
          const double ap = op.entry(i + sd, d, e), am = op.entry(i - sd, d, e);
          acc += 0.25 * (ap * (w[i + sd + se] - w[i + sd - se]) - am * (w[i - sd + se] - w[i - sd - se]));
        }
    }
    worst = std::max(worst, std::abs(acc / h2));
  }
  const double sup = field.max_abs();
  return sup > 0.0 ? worst / sup : worst;
}

}  // namespace nodal
