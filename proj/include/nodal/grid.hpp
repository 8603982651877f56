#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nodal/errors.hpp"

namespace nodal {

/// Points always carry three coordinates; in 2D the third is zero.
using Point = std::array<double, 3>;

inline Point operator+(const Point& a, const Point& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Point operator-(const Point& a, const Point& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Point operator*(double s, const Point& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Point& a, const Point& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Point& a) { return std::sqrt(dot(a, a)); }
inline double distance(const Point& a, const Point& b) { return norm(a - b); }

using Index3 = std::array<std::size_t, 3>;

/// Uniform isotropic node lattice. Node (i,j,k) sits at origin + h*(i,j,k);
/// storage is row-major with the x index slowest.
struct GridSpec {
  int dim = 2;
  Point origin{0.0, 0.0, 0.0};
  double spacing = 1.0;
  Index3 counts{2, 2, 1};

  /// Centered cube grid [-half_width, half_width]^dim (rounded outward to a
  /// whole number of cells) that has the origin as a node.
  static GridSpec centered(int dim, double half_width, double h) {
    const auto n = static_cast<std::size_t>(std::ceil(half_width / h - 1e-9));
    GridSpec g;
    g.dim = dim;
    g.spacing = h;
    for (int d = 0; d < 3; ++d) {
      if (d < dim) {
        g.origin[d] = -static_cast<double>(n) * h;
        g.counts[d] = 2 * n + 1;
      } else {
        g.origin[d] = 0.0;
        g.counts[d] = 1;
      }
    }
    g.validate();
    return g;
  }

  /// Box grid covering [lo, hi] per axis with the origin on the lattice.
  static GridSpec box(int dim, const Point& lo, const Point& hi, double h) {
    GridSpec g;
    g.dim = dim;
    g.spacing = h;
    for (int d = 0; d < 3; ++d) {
      if (d < dim) {
        const double i0 = std::floor(lo[d] / h + 1e-9);
        const double i1 = std::ceil(hi[d] / h - 1e-9);
        g.origin[d] = i0 * h;
        g.counts[d] = static_cast<std::size_t>(i1 - i0) + 1;
      } else {
        g.counts[d] = 1;
      }
    }
    g.validate();
    return g;
  }

  void validate() const {
    if (dim != 2 && dim != 3) throw Error(ErrorKind::Config, "grid dimension must be 2 or 3");
    if (!(spacing > 0.0)) throw Error(ErrorKind::Config, "grid spacing must be positive");
    for (int d = 0; d < dim; ++d)
      if (counts[d] < 2) throw Error(ErrorKind::Config, "grid needs at least 2 nodes per axis");
  }

  std::size_t size() const { return counts[0] * counts[1] * counts[2]; }

  std::size_t index(std::size_t i, std::size_t j, std::size_t k = 0) const {
    return (i * counts[1] + j) * counts[2] + k;
  }
  std::size_t index(const Index3& ijk) const { return index(ijk[0], ijk[1], ijk[2]); }

  Index3 unravel(std::size_t idx) const {
    const std::size_t k = idx % counts[2];
    const std::size_t rest = idx / counts[2];
    return {rest / counts[1], rest % counts[1], k};
  }

  /// Flat-index offset of one step along axis d.
  std::size_t stride(int d) const {
    if (d == 0) return counts[1] * counts[2];
    if (d == 1) return counts[2];
    return 1;
  }

  Point node(const Index3& ijk) const {
    Point p{0.0, 0.0, 0.0};
    for (int d = 0; d < dim; ++d) p[d] = origin[d] + spacing * static_cast<double>(ijk[d]);
    return p;
  }
  Point node(std::size_t idx) const { return node(unravel(idx)); }

  Point upper() const {
    Point p = origin;
    for (int d = 0; d < dim; ++d) p[d] = origin[d] + spacing * static_cast<double>(counts[d] - 1);
    return p;
  }

  bool contains(const Point& p, double slack = 0.0) const {
    const Point hi = upper();
    const double tol = 1e-9 * spacing + slack;
    for (int d = 0; d < dim; ++d)
      if (p[d] < origin[d] - tol || p[d] > hi[d] + tol) return false;
    return true;
  }

  /// Distance from p to the box boundary (negative outside).
  double distance_to_box_boundary(const Point& p) const {
    const Point hi = upper();
    double m = std::numeric_limits<double>::infinity();
    for (int d = 0; d < dim; ++d) m = std::min({m, p[d] - origin[d], hi[d] - p[d]});
    return m;
  }

  bool on_box_boundary(const Index3& ijk) const {
    for (int d = 0; d < dim; ++d)
      if (ijk[d] == 0 || ijk[d] + 1 == counts[d]) return true;
    return false;
  }

  bool same_as(const GridSpec& o) const {
    return dim == o.dim && origin == o.origin && spacing == o.spacing && counts == o.counts;
  }

  std::size_t cell_count() const {
    std::size_t c = 1;
    for (int d = 0; d < dim; ++d) c *= counts[d] - 1;
    return c;
  }

  /// Node index range [lo, hi] (inclusive) covering the axis-aligned box
  /// around a ball, clipped to the grid.
  std::array<Index3, 2> index_range(const Point& center, double radius) const {
    Index3 lo{0, 0, 0}, hi{0, 0, 0};
    for (int d = 0; d < dim; ++d) {
      const double a = std::ceil((center[d] - radius - origin[d]) / spacing - 1e-9);
      const double b = std::floor((center[d] + radius - origin[d]) / spacing + 1e-9);
      const double top = static_cast<double>(counts[d] - 1);
      lo[d] = static_cast<std::size_t>(std::clamp(a, 0.0, top));
      hi[d] = static_cast<std::size_t>(std::clamp(b, 0.0, top));
      if (a > top || b < 0.0) {  // empty along this axis
        lo[d] = 1;
        hi[d] = 0;
      }
    }
    return {lo, hi};
  }
};

struct Ball {
  Point center{0.0, 0.0, 0.0};
  double radius = 1.0;

  bool contains(const Point& p) const { return distance(p, center) <= radius * (1.0 + 1e-12); }
};

/// Visit every node index inside the closed ball.
template <class F>
void for_each_node_in_ball(const GridSpec& g, const Ball& b, F&& f) {
  const auto [lo, hi] = g.index_range(b.center, b.radius);
  const double r2 = b.radius * b.radius * (1.0 + 1e-12);
  for (std::size_t i = lo[0]; i <= hi[0] && lo[0] <= hi[0]; ++i)
    for (std::size_t j = lo[1]; j <= hi[1] && lo[1] <= hi[1]; ++j)
      for (std::size_t k = lo[2]; k <= hi[2] && lo[2] <= hi[2]; ++k) {
        const Index3 ijk{i, j, k};
        const Point p = g.node(ijk);
        const Point dp = p - b.center;
        if (dot(dp, dp) <= r2) f(g.index(ijk), p);
      }
}

// ---------------------------------------------------------------------------
// sphere sampling

/// Deterministic sample directions on the unit sphere. In 2D, `per_circle`
/// equally spaced angles starting at angle 0; in 3D a Fibonacci lattice of
/// per_circle^2/8 points.
inline std::vector<Point> sphere_directions(int dim, int per_circle) {
  std::vector<Point> dirs;
  if (dim == 2) {
    dirs.reserve(static_cast<std::size_t>(per_circle));
    for (int k = 0; k < per_circle; ++k) {
      const double t = 2.0 * std::numbers::pi * k / per_circle;
      dirs.push_back({std::cos(t), std::sin(t), 0.0});
    }
    return dirs;
  }
  const int n = std::max(8, per_circle * per_circle / 8);
  dirs.reserve(static_cast<std::size_t>(n));
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < n; ++k) {
    const double z = 1.0 - (2.0 * k + 1.0) / n;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * k;
    dirs.push_back({rho * std::cos(phi), rho * std::sin(phi), z});
  }
  return dirs;
}

/// Quadrature rule on the unit sphere: nodes and weights summing to the
/// sphere measure (2*pi in 2D, 4*pi in 3D). 2D uses the periodic trapezoid
/// rule; 3D uses Gauss-Legendre in cos(theta) times a uniform azimuth rule.
struct SphereRule {
  std::vector<Point> nodes;
  std::vector<double> weights;
};

inline std::vector<std::array<double, 2>> gauss_legendre(int n) {
  std::vector<std::array<double, 2>> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    out[static_cast<std::size_t>(i)] = {x, 2.0 / ((1.0 - x * x) * dp * dp)};
  }
  return out;
}

inline SphereRule sphere_rule(int dim, int points) {
  SphereRule rule;
  if (dim == 2) {
    for (int k = 0; k < points; ++k) {
      const double t = 2.0 * std::numbers::pi * k / points;
      rule.nodes.push_back({std::cos(t), std::sin(t), 0.0});
      rule.weights.push_back(2.0 * std::numbers::pi / points);
    }
    return rule;
  }
  const int nz = std::max(2, static_cast<int>(std::lround(std::sqrt(points / 2.0))));
  const int nphi = std::max(4, points / nz);
  for (const auto& [z, wz] : gauss_legendre(nz)) {
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    for (int k = 0; k < nphi; ++k) {
      const double phi = 2.0 * std::numbers::pi * k / nphi;
      rule.nodes.push_back({rho * std::cos(phi), rho * std::sin(phi), z});
      rule.weights.push_back(wz * 2.0 * std::numbers::pi / nphi);
    }
  }
  return rule;
}

// ---------------------------------------------------------------------------
// scalar fields

struct Evaluation {
  double value = 0.0;
  Point gradient{0.0, 0.0, 0.0};
  bool one_sided = false;  ///< a node gradient near the box boundary was one-sided
};

/// Node-sampled scalar field. Immutable by convention after construction.
class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(GridSpec grid, std::vector<double> values, std::string label = {})
      : grid_(grid), values_(std::move(values)), label_(std::move(label)) {
    grid_.validate();
    if (values_.size() != grid_.size())
      throw Error(ErrorKind::GridMismatch, "value count does not match grid");
    for (double v : values_)
      if (!std::isfinite(v)) throw Error(ErrorKind::Config, "field values must be finite");
  }

  template <class F>
  static ScalarField sample(const GridSpec& grid, F&& f, std::string label = {}) {
    std::vector<double> vals(grid.size());
    for (std::size_t idx = 0; idx < vals.size(); ++idx) vals[idx] = f(grid.node(idx));
    return ScalarField(grid, std::move(vals), std::move(label));
  }

  const GridSpec& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  const std::string& label() const { return label_; }
  double operator[](std::size_t idx) const { return values_[idx]; }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  ScalarField scaled(double c, std::string label = {}) const {
    std::vector<double> v(values_);
    for (double& x : v) x *= c;
    return ScalarField(grid_, std::move(v), label.empty() ? label_ : std::move(label));
  }

  /// Multilinear interpolation; exact at nodes.
  double eval(const Point& p) const {
    Cell c = locate(p);
    double acc = 0.0;
    for_corners(c, [&](std::size_t idx, double w) { acc += w * values_[idx]; });
    return acc;
  }

  /// Gradient of the multilinear interpolant inside the containing cell.
  Point interp_gradient(const Point& p) const {
    Cell c = locate(p);
    Point g{0.0, 0.0, 0.0};
    const int dim = grid_.dim;
    const std::size_t ncorner = std::size_t{1} << dim;
    for (std::size_t m = 0; m < ncorner; ++m) {
      std::size_t idx = c.base;
      for (int d = 0; d < dim; ++d)
        if (m >> d & 1u) idx += grid_.stride(d);
      for (int d = 0; d < dim; ++d) {
        double w = ((m >> d & 1u) ? 1.0 : -1.0) / grid_.spacing;
        for (int e = 0; e < dim; ++e)
          if (e != d) w *= (m >> e & 1u) ? c.t[e] : 1.0 - c.t[e];
        g[d] += w * values_[idx];
      }
    }
    return g;
  }

  /// Central-difference node gradient (one-sided at box faces).
  Point node_gradient(std::size_t idx, bool* one_sided = nullptr) const {
    const Index3 ijk = grid_.unravel(idx);
    Point g{0.0, 0.0, 0.0};
    const double h = grid_.spacing;
    for (int d = 0; d < grid_.dim; ++d) {
      const std::size_t s = grid_.stride(d);
      if (ijk[d] == 0) {
        g[d] = (values_[idx + s] - values_[idx]) / h;
        if (one_sided) *one_sided = true;
      } else if (ijk[d] + 1 == grid_.counts[d]) {
        g[d] = (values_[idx] - values_[idx - s]) / h;
        if (one_sided) *one_sided = true;
      } else {
        g[d] = (values_[idx + s] - values_[idx - s]) / (2.0 * h);
      }
    }
    return g;
  }

  /// Value by multilinear interpolation; gradient by interpolating
  /// central-difference node gradients.
  Evaluation eval_with_gradient(const Point& p) const {
    Cell c = locate(p);
    Evaluation e;
    for_corners(c, [&](std::size_t idx, double w) {
      e.value += w * values_[idx];
      const Point g = node_gradient(idx, &e.one_sided);
      for (int d = 0; d < 3; ++d) e.gradient[d] += w * g[d];
    });
    return e;
  }

 private:
  struct Cell {
    std::size_t base = 0;
    std::array<double, 3> t{0.0, 0.0, 0.0};
  };

  Cell locate(const Point& p) const {
    if (!grid_.contains(p))
      throw Error(ErrorKind::OutOfDomain, "point outside grid box");
    Cell c;
    Index3 ijk{0, 0, 0};
    for (int d = 0; d < grid_.dim; ++d) {
      const double s = (p[d] - grid_.origin[d]) / grid_.spacing;
      double i = std::floor(s);
      const double top = static_cast<double>(grid_.counts[d] - 2);
      i = std::clamp(i, 0.0, top);
      ijk[d] = static_cast<std::size_t>(i);
      c.t[d] = std::clamp(s - i, 0.0, 1.0);
    }
    c.base = grid_.index(ijk);
    return c;
  }

  template <class F>
  void for_corners(const Cell& c, F&& f) const {
    const int dim = grid_.dim;
    const std::size_t ncorner = std::size_t{1} << dim;
    for (std::size_t m = 0; m < ncorner; ++m) {
      std::size_t idx = c.base;
      double w = 1.0;
      for (int d = 0; d < dim; ++d) {
        if (m >> d & 1u) {
          idx += grid_.stride(d);
          w *= c.t[d];
        } else {
          w *= 1.0 - c.t[d];
        }
      }
      if (w != 0.0) f(idx, w);
    }
  }

  GridSpec grid_;
  std::vector<double> values_;
  std::string label_;
};

inline Evaluation eval_with_gradient(const ScalarField& f, const Point& p) { return f.eval_with_gradient(p); }

inline void require_same_grid(const ScalarField& a, const ScalarField& b) {
  if (!a.grid().same_as(b.grid())) throw Error(ErrorKind::GridMismatch, "fields live on different grids");
}

/// Largest |field| over the nodes inside the ball and interpolated samples
/// on its bounding sphere.
inline double sup_norm_on_ball(const ScalarField& f, const Ball& ball, int per_circle = 256) {
  const GridSpec& g = f.grid();
  if (!(ball.radius > 0.0)) throw Error(ErrorKind::DegenerateBall, "radius must be positive");
  double m = 0.0;
  std::size_t hits = 0;
  for_each_node_in_ball(g, ball, [&](std::size_t idx, const Point&) {
    m = std::max(m, std::abs(f[idx]));
    ++hits;
  });
  if (hits == 0 && ball.radius < g.spacing)
    throw Error(ErrorKind::DegenerateBall, "ball contains no nodes and is smaller than the spacing");
  for (const Point& d : sphere_directions(g.dim, per_circle)) {
    const Point p = ball.center + ball.radius * d;
    if (!g.contains(p)) throw Error(ErrorKind::OutOfDomain, "ball leaves the grid box");
    m = std::max(m, std::abs(f.eval(p)));
  }
  return m;
}

// ---------------------------------------------------------------------------
// coefficient fields

/// Symmetric matrix stored as its upper triangle (xx, xy, xz, yy, yz, zz).
struct SymMatrix {
  std::array<double, 6> a{1.0, 0.0, 0.0, 1.0, 0.0, 1.0};

  static constexpr int slot(int i, int j) {
    if (i > j) std::swap(i, j);
    constexpr int base[3] = {0, 3, 5};
    return base[i] + (j - i);
  }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(slot(i, j))]; }
  double& at(int i, int j) { return a[static_cast<std::size_t>(slot(i, j))]; }

  static SymMatrix identity() { return {}; }
  static SymMatrix scalar(double s) { return {{s, 0.0, 0.0, s, 0.0, s}}; }

  double quad(const Point& x, int dim) const {
    double s = 0.0;
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) s += (*this)(i, j) * x[i] * x[j];
    return s;
  }

  bool off_diagonal_zero(int dim) const {
    for (int i = 0; i < dim; ++i)
      for (int j = i + 1; j < dim; ++j)
        if ((*this)(i, j) != 0.0) return false;
    return true;
  }

  std::array<double, 2> eigen_range(int dim) const {
    if (dim == 2) {
      const double m = 0.5 * (a[0] + a[3]);
      const double r = std::hypot(0.5 * (a[0] - a[3]), a[1]);
      return {m - r, m + r};
    }
    Eigen::Matrix3d M;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) M(i, j) = (*this)(i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(M, Eigen::EigenvaluesOnly);
    return {es.eigenvalues()(0), es.eigenvalues()(2)};
  }
};

using FullMatrix = std::array<std::array<double, 3>, 3>;

/// Node-sampled symmetric coefficient field A(x) with its declared ellipticity
/// constant lambda and Lipschitz bound lambda1.
class CoefficientField {
 public:
  enum class Storage { Identity, Scalar, Full };

  CoefficientField() = default;

  static CoefficientField identity(const GridSpec& g) {
    CoefficientField c;
    c.grid_ = g;
    c.storage_ = Storage::Identity;
    c.lambda_ = 1.0;
    c.lambda1_ = 0.0;
    return c;
  }

  /// A(x) = s(x) I.
  template <class F>
  static CoefficientField scalar(const GridSpec& g, F&& s, double lambda, double lambda1) {
    CoefficientField c;
    c.grid_ = g;
    c.storage_ = Storage::Scalar;
    c.lambda_ = lambda;
    c.lambda1_ = lambda1;
    c.data_.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) c.data_[i] = s(g.node(i));
    return c;
  }

  /// General matrix field; rejects asymmetric input.
  template <class F>
  static CoefficientField full(const GridSpec& g, F&& m, double lambda, double lambda1) {
    CoefficientField c;
    c.grid_ = g;
    c.storage_ = Storage::Full;
    c.lambda_ = lambda;
    c.lambda1_ = lambda1;
    c.data_.resize(6 * g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const FullMatrix a = m(g.node(i));
      SymMatrix s;
      for (int r = 0; r < 3; ++r)
        for (int q = r; q < 3; ++q) {
          const bool active = r < g.dim && q < g.dim;
          const double v = active ? a[r][q] : (r == q ? 1.0 : 0.0);
          if (active && std::abs(a[r][q] - a[q][r]) > 1e-14 * (1.0 + std::abs(a[r][q])))
            throw Error(ErrorKind::CoefficientValidation, "coefficient matrix is not symmetric");
          s.at(r, q) = v;
        }
      std::copy(s.a.begin(), s.a.end(), c.data_.begin() + static_cast<std::ptrdiff_t>(6 * i));
    }
    return c;
  }

  const GridSpec& grid() const { return grid_; }
  Storage storage() const { return storage_; }
  double lambda() const { return lambda_; }
  double lambda1() const { return lambda1_; }
  bool is_identity() const { return storage_ == Storage::Identity; }
  bool is_diagonal() const {
    if (storage_ != Storage::Full) return true;
    for (std::size_t i = 0; i < grid_.size(); ++i)
      if (!at(i).off_diagonal_zero(grid_.dim)) return false;
    return true;
  }

  SymMatrix at(std::size_t idx) const {
    switch (storage_) {
      case Storage::Identity: return SymMatrix::identity();
      case Storage::Scalar: return SymMatrix::scalar(data_[idx]);
      case Storage::Full: {
        SymMatrix s;
        std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(6 * idx), 6, s.a.begin());
        return s;
      }
    }
    return SymMatrix::identity();
  }

  /// Entry (i,j) at a node without building the whole matrix.
  double entry(std::size_t idx, int i, int j) const {
    switch (storage_) {
      case Storage::Identity: return i == j ? 1.0 : 0.0;
      case Storage::Scalar: return i == j ? data_[idx] : 0.0;
      case Storage::Full: return data_[6 * idx + static_cast<std::size_t>(SymMatrix::slot(i, j))];
    }
    return 0.0;
  }

  /// Multilinear interpolation of the entries.
  SymMatrix at(const Point& p) const {
    if (storage_ == Storage::Identity) return SymMatrix::identity();
    if (!grid_.contains(p)) throw Error(ErrorKind::OutOfDomain, "point outside coefficient grid");
    Index3 ijk{0, 0, 0};
    std::array<double, 3> t{0.0, 0.0, 0.0};
    for (int d = 0; d < grid_.dim; ++d) {
      const double s = (p[d] - grid_.origin[d]) / grid_.spacing;
      const double i = std::clamp(std::floor(s), 0.0, static_cast<double>(grid_.counts[d] - 2));
      ijk[d] = static_cast<std::size_t>(i);
      t[d] = std::clamp(s - i, 0.0, 1.0);
    }
    const std::size_t base = grid_.index(ijk);
    SymMatrix out;
    out.a.fill(0.0);
    const std::size_t ncorner = std::size_t{1} << grid_.dim;
    for (std::size_t m = 0; m < ncorner; ++m) {
      std::size_t idx = base;
      double w = 1.0;
      for (int d = 0; d < grid_.dim; ++d) {
        if (m >> d & 1u) {
          idx += grid_.stride(d);
          w *= t[d];
        } else {
          w *= 1.0 - t[d];
        }
      }
      const SymMatrix s = at(idx);
      for (std::size_t q = 0; q < 6; ++q) out.a[q] += w * s.a[q];
    }
    return out;
  }

  /// mu(x) = <A(x)(x-c),(x-c)>/|x-c|^2 for the frequency weight.
  double mu(const Point& p, const Point& center) const {
    const Point x = p - center;
    const double r2 = dot(x, x);
    if (r2 == 0.0) return 1.0;
    return at(p).quad(x, grid_.dim) / r2;
  }

  /// Checks the spectral bounds lambda I <= A <= lambda^{-1} I and the
  /// finite-difference Lipschitz bound of every entry.
  void validate() const {
    if (!(lambda_ > 0.0 && lambda_ <= 1.0))
      throw Error(ErrorKind::CoefficientValidation, "lambda must lie in (0,1]");
    if (storage_ == Storage::Identity) return;
    const double tol = 1e-12;
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      const auto [lo, hi] = at(i).eigen_range(grid_.dim);
      if (lo < lambda_ * (1.0 - tol) || hi > (1.0 + tol) / lambda_)
        throw Error(ErrorKind::CoefficientValidation, "coefficient violates ellipticity bounds");
    }
    const int comps = storage_ == Storage::Scalar ? 1 : 6;
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      const Index3 ijk = grid_.unravel(i);
      for (int d = 0; d < grid_.dim; ++d) {
        if (ijk[d] + 1 >= grid_.counts[d]) continue;
        const std::size_t j = i + grid_.stride(d);
        for (int q = 0; q < comps; ++q) {
          const double a = data_[static_cast<std::size_t>(comps) * i + static_cast<std::size_t>(q)];
          const double b = data_[static_cast<std::size_t>(comps) * j + static_cast<std::size_t>(q)];
          if (std::abs(a - b) / grid_.spacing > lambda1_ * (1.0 + 1e-9) + 1e-12)
            throw Error(ErrorKind::CoefficientValidation, "coefficient exceeds its Lipschitz bound");
        }
      }
    }
  }

 private:
  GridSpec grid_;
  Storage storage_ = Storage::Identity;
  double lambda_ = 1.0;
  double lambda1_ = 0.0;
  std::vector<double> data_;
};

}  // namespace nodal
