#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <queue>
#include <vector>

#include "nodal/grid.hpp"

namespace nodal {

// ---------------------------------------------------------------------------
// facets

/// Segment (2D, vertices 0 and 1) or triangle (3D) of the extracted zero set.
struct Facet {
  std::array<Point, 3> v{};
  std::size_t cell = 0;  // lowest-corner node index of the owning cell

  Point midpoint(int dim) const {
    if (dim == 2) return 0.5 * (v[0] + v[1]);
    return (1.0 / 3.0) * (v[0] + v[1] + v[2]);
  }
};

inline Point cross(const Point& a, const Point& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

inline double facet_measure(const Facet& f, int dim) {
  if (dim == 2) return distance(f.v[0], f.v[1]);
  return 0.5 * norm(cross(f.v[1] - f.v[0], f.v[2] - f.v[0]));
}

/// Measure of the part of the facet inside the ball; exact for segments,
/// centroid test for triangles.
inline double clipped_measure(const Facet& f, int dim, const Ball& b) {
  if (dim == 3) return b.contains(f.midpoint(3)) ? facet_measure(f, 3) : 0.0;
  const Point d = f.v[1] - f.v[0];
  const Point m = f.v[0] - b.center;
  const double A = dot(d, d);
  if (A == 0.0) return 0.0;
  const double B = 2.0 * dot(m, d), C = dot(m, m) - b.radius * b.radius;
  const double disc = B * B - 4.0 * A * C;
  if (disc <= 0.0) return 0.0;
  const double sq = std::sqrt(disc);
  const double t0 = std::max(0.0, (-B - sq) / (2.0 * A)), t1 = std::min(1.0, (-B + sq) / (2.0 * A));
  return t1 > t0 ? (t1 - t0) * std::sqrt(A) : 0.0;
}

inline double point_segment_distance(const Point& p, const Point& a, const Point& b) {
  const Point ab = b - a;
  const double L = dot(ab, ab);
  double t = L > 0.0 ? dot(p - a, ab) / L : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, a + t * ab);
}

/// Closest point on a triangle by Voronoi-region classification.
inline double point_triangle_distance(const Point& p, const Point& a, const Point& b, const Point& c) {
  const Point ab = b - a, ac = c - a, ap = p - a;
  const double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0.0 && d2 <= 0.0) return distance(p, a);
  const Point bp = p - b;
  const double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0.0 && d4 <= d3) return distance(p, b);
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return distance(p, a + (d1 / (d1 - d3)) * ab);
  const Point cp = p - c;
  const double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0.0 && d5 <= d6) return distance(p, c);
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return distance(p, a + (d2 / (d2 - d6)) * ac);
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    return distance(p, b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b));
  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return distance(p, a + v * ab + w * ac);
}

inline double point_facet_distance(const Point& p, const Facet& f, int dim) {
  if (dim == 2) return point_segment_distance(p, f.v[0], f.v[1]);
  return point_triangle_distance(p, f.v[0], f.v[1], f.v[2]);
}

// ---------------------------------------------------------------------------
// zero set extraction

/// Relative threshold below which a node value counts as an exact zero.
inline constexpr double kZeroThreshold = 1e-12;

/// Total sign function on nodes. Exact zeros take the sign of their
/// largest-magnitude face neighbor (first in x-, x+, y-, y+, z-, z+ order on
/// ties); zeros with only zero neighbors become positive.
inline std::vector<std::int8_t> resolved_signs(const ScalarField& f) {
  const GridSpec& g = f.grid();
  const double thr = kZeroThreshold * f.max_abs();
  std::vector<std::int8_t> s(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double w = f[i];
    if (std::abs(w) > thr) {
      s[i] = w > 0.0 ? 1 : -1;
      continue;
    }
    const Index3 ijk = g.unravel(i);
    double best = 0.0;
    std::int8_t sign = 1;
    for (int d = 0; d < g.dim; ++d) {
      const std::size_t st = g.stride(d);
      if (ijk[d] > 0 && std::abs(f[i - st]) > std::max(best, thr)) {
        best = std::abs(f[i - st]);
        sign = f[i - st] > 0.0 ? 1 : -1;
      }
      if (ijk[d] + 1 < g.counts[d] && std::abs(f[i + st]) > std::max(best, thr)) {
        best = std::abs(f[i + st]);
        sign = f[i + st] > 0.0 ? 1 : -1;
      }
    }
    s[i] = sign;
  }
  return s;
}

struct ZeroSet {
  GridSpec grid;
  std::vector<Facet> facets;
  double total_area = 0.0;
};

namespace detail {

inline Point crossing(const ScalarField& f, std::size_t a, std::size_t b) {
  const GridSpec& g = f.grid();
  const double wa = f[a], wb = f[b];
  double t = wa != wb ? wa / (wa - wb) : 0.5;
  t = std::clamp(t, 0.0, 1.0);
  const Point pa = g.node(a), pb = g.node(b);
  return pa + t * (pb - pa);
}

template <class Emit>
void march_cell_2d(const ScalarField& f, const std::vector<std::int8_t>& s, std::size_t c0, Emit&& emit) {
  const GridSpec& g = f.grid();
  const std::size_t c1 = c0 + g.stride(0), c2 = c0 + g.stride(1), c3 = c1 + g.stride(1);
  const bool b = s[c0] != s[c1], r = s[c1] != s[c3], t = s[c2] != s[c3], l = s[c0] != s[c2];
  const int n = b + r + t + l;
  if (n == 0) return;
  auto P = [&](int e) {
    switch (e) {
      case 0: return crossing(f, c0, c1);
      case 1: return crossing(f, c1, c3);
      case 2: return crossing(f, c2, c3);
      default: return crossing(f, c0, c2);
    }
  };
  if (n == 2) {
    int e[2], k = 0;
    if (b) e[k++] = 0;
    if (r) e[k++] = 1;
    if (t) e[k++] = 2;
    if (l) e[k++] = 3;
    emit(Facet{{P(e[0]), P(e[1]), Point{}}, c0});
    return;
  }
  // saddle: the cell center decides which diagonal pair is joined
  const double avg = 0.25 * (f[c0] + f[c1] + f[c2] + f[c3]);
  const std::int8_t sc = avg > 0.0 ? 1 : (avg < 0.0 ? -1 : s[c0]);
  if (sc == s[c0]) {
    emit(Facet{{P(0), P(1), Point{}}, c0});
    emit(Facet{{P(3), P(2), Point{}}, c0});
  } else {
    emit(Facet{{P(3), P(0), Point{}}, c0});
    emit(Facet{{P(1), P(2), Point{}}, c0});
  }
}

template <class Emit>
void march_cell_3d(const ScalarField& f, const std::vector<std::int8_t>& s, std::size_t c0, Emit&& emit) {
  const GridSpec& g = f.grid();
  std::array<std::size_t, 8> corner;
  for (int m = 0; m < 8; ++m)
    corner[m] = c0 + (m & 1) * g.stride(0) + (m >> 1 & 1) * g.stride(1) + (m >> 2 & 1) * g.stride(2);
  bool any_change = false;
  for (int m = 1; m < 8; ++m) any_change = any_change || s[corner[m]] != s[corner[0]];
  if (!any_change) return;
  static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (const auto& p : perms) {
    const int b0 = 1 << p[0], b1 = b0 | (1 << p[1]);
    const std::array<std::size_t, 4> v{corner[0], corner[b0], corner[b1], corner[7]};
    std::array<int, 4> pos{}, neg{};
    int np = 0, nn = 0;
    for (int q = 0; q < 4; ++q) (s[v[q]] > 0 ? pos[np++] : neg[nn++]) = q;
    if (np == 0 || nn == 0) continue;
    if (np == 1 || nn == 1) {
      const int lone = np == 1 ? pos[0] : neg[0];
      const auto& others = np == 1 ? neg : pos;
      emit(Facet{{crossing(f, v[lone], v[others[0]]), crossing(f, v[lone], v[others[1]]),
                  crossing(f, v[lone], v[others[2]])},
                 c0});
    } else {
      const Point ac = crossing(f, v[pos[0]], v[neg[0]]), ad = crossing(f, v[pos[0]], v[neg[1]]);
      const Point bd = crossing(f, v[pos[1]], v[neg[1]]), bc = crossing(f, v[pos[1]], v[neg[0]]);
      emit(Facet{{ac, ad, bd}, c0});
      emit(Facet{{ac, bd, bc}, c0});
    }
  }
}

template <class Emit>
void march_all(const ScalarField& f, const std::vector<std::int8_t>& s, Emit&& emit) {
  const GridSpec& g = f.grid();
  const std::size_t nx = g.counts[0] - 1, ny = g.counts[1] - 1, nz = g.dim == 3 ? g.counts[2] - 1 : 1;
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j)
      for (std::size_t k = 0; k < nz; ++k) {
        const std::size_t c0 = g.index(i, j, k);
        if (g.dim == 2)
          march_cell_2d(f, s, c0, emit);
        else
          march_cell_3d(f, s, c0, emit);
      }
}

}  // namespace detail

/// Zero set of the interpolant over the whole grid box.
inline ZeroSet full_zero_set(const ScalarField& f) {
  ZeroSet z;
  z.grid = f.grid();
  const auto s = resolved_signs(f);
  detail::march_all(f, s, [&](const Facet& fc) {
    z.facets.push_back(fc);
    z.total_area += facet_measure(fc, z.grid.dim);
  });
  return z;
}

/// Facets meeting the region; total_area is clipped to it.
inline ZeroSet extract_zero_set(const ScalarField& f, const Ball& region) {
  const GridSpec& g = f.grid();
  double sup = 0.0;
  for_each_node_in_ball(g, region, [&](std::size_t i, const Point&) { sup = std::max(sup, std::abs(f[i])); });
  if (sup == 0.0) throw Error(ErrorKind::DegenerateField, "field vanishes identically in the region");
  ZeroSet all = full_zero_set(f);
  ZeroSet z;
  z.grid = g;
  for (const Facet& fc : all.facets) {
    const double m = clipped_measure(fc, g.dim, region);
    if (m > 0.0 || (g.dim == 3 && region.contains(fc.midpoint(3)))) {
      z.facets.push_back(fc);
      z.total_area += m;
    }
  }
  if (z.facets.empty()) throw Error(ErrorKind::DegenerateField, "field has no zeros in the region");
  return z;
}

inline void write_facets_csv(std::ostream& os, const ZeroSet& z) {
  const int dim = z.grid.dim;
  os << (dim == 2 ? "facet,x0,y0,x1,y1\n" : "facet,x0,y0,z0,x1,y1,z1,x2,y2,z2\n");
  os.precision(17);
  for (std::size_t k = 0; k < z.facets.size(); ++k) {
    os << k;
    for (int v = 0; v < dim; ++v)
      for (int d = 0; d < dim; ++d) os << ',' << z.facets[k].v[v][d];
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// distance to the zero set

/// Node distances to a facet set plus exact point queries. Node values come
/// from closest-facet propagation (exact distance to a propagated candidate);
/// point queries scan a bucket index within the bound the nodes provide.
class DistanceField {
 public:
  DistanceField() = default;

  DistanceField(const GridSpec& g, std::vector<Facet> facets) : grid_(g), facets_(std::move(facets)) {
    if (facets_.empty()) throw Error(ErrorKind::EmptyZeroSet, "no zero-set facets to measure distance from");
    build_buckets();
    propagate();
  }

  const GridSpec& grid() const { return grid_; }
  const std::vector<double>& values() const { return delta_; }
  double operator[](std::size_t idx) const { return delta_[idx]; }
  const std::vector<Facet>& facets() const { return facets_; }

  /// Exact distance from an arbitrary in-box point to the facet set.
  double at(const Point& p) const {
    if (!grid_.contains(p, 1e-9 * grid_.spacing)) throw Error(ErrorKind::OutOfDomain, "distance query outside the box");
    const GridSpec& g = grid_;
    Index3 ijk{0, 0, 0};
    for (int d = 0; d < g.dim; ++d) {
      const double t = std::round((p[d] - g.origin[d]) / g.spacing);
      ijk[d] = static_cast<std::size_t>(std::clamp(t, 0.0, static_cast<double>(g.counts[d] - 1)));
    }
    const std::size_t n = g.index(ijk[0], ijk[1], ijk[2]);
    const double bound = delta_[n] + distance(p, g.node(n)) + 1e-12;
    return nearest_within(p, bound);
  }

 private:
  GridSpec grid_;
  std::vector<Facet> facets_;
  std::vector<double> delta_;
  double bsize_ = 1.0;
  Point borigin_{};
  std::array<std::size_t, 3> bcount_{1, 1, 1};
  std::vector<std::size_t> bstart_;
  std::vector<std::uint32_t> bitems_;

  std::size_t bucket_coord(double x, int d) const {
    const double t = std::floor((x - borigin_[d]) / bsize_);
    return static_cast<std::size_t>(std::clamp(t, 0.0, static_cast<double>(bcount_[d] - 1)));
  }

  std::size_t bucket_of(const Point& p) const {
    std::size_t b = 0;
    for (int d = 0; d < 3; ++d) b = b * bcount_[d] + bucket_coord(p[d], d);
    return b;
  }

  void build_buckets() {
    const GridSpec& g = grid_;
    bsize_ = 4.0 * g.spacing;
    borigin_ = g.origin;
    for (int d = 0; d < 3; ++d)
      bcount_[d] = d < g.dim ? static_cast<std::size_t>(std::ceil((g.counts[d] - 1) * g.spacing / bsize_)) + 1 : 1;
    const std::size_t nb = bcount_[0] * bcount_[1] * bcount_[2];
    std::vector<std::size_t> count(nb + 1, 0);
    std::vector<std::size_t> where(facets_.size());
    for (std::size_t k = 0; k < facets_.size(); ++k) {
      where[k] = bucket_of(facets_[k].midpoint(g.dim));
      ++count[where[k] + 1];
    }
    std::partial_sum(count.begin(), count.end(), count.begin());
    bstart_ = count;
    bitems_.resize(facets_.size());
    std::vector<std::size_t> fill(bstart_.begin(), bstart_.end() - 1);
    for (std::size_t k = 0; k < facets_.size(); ++k) bitems_[fill[where[k]]++] = static_cast<std::uint32_t>(k);
  }

  double nearest_within(const Point& p, double bound) const {
    const int dim = grid_.dim;
    // facets are bucketed by midpoint, so widen by the largest facet radius (one cell diagonal)
    const double reach = bound + grid_.spacing * std::sqrt(static_cast<double>(dim));
    std::array<std::size_t, 3> lo{0, 0, 0}, hi{0, 0, 0};
    for (int d = 0; d < dim; ++d) {
      lo[d] = bucket_coord(p[d] - reach, d);
      hi[d] = bucket_coord(p[d] + reach, d);
    }
    double best = bound;
    for (std::size_t a = lo[0]; a <= hi[0]; ++a)
      for (std::size_t b = lo[1]; b <= hi[1]; ++b)
        for (std::size_t c = lo[2]; c <= hi[2]; ++c) {
          const std::size_t id = (a * bcount_[1] + b) * bcount_[2] + c;
          for (std::size_t q = bstart_[id]; q < bstart_[id + 1]; ++q)
            best = std::min(best, point_facet_distance(p, facets_[bitems_[q]], dim));
        }
    return best;
  }

  void propagate() {
    const GridSpec& g = grid_;
    const int dim = g.dim;
    const double inf = std::numeric_limits<double>::infinity();
    delta_.assign(g.size(), inf);
    std::vector<std::uint32_t> owner(g.size(), 0);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    for (std::size_t k = 0; k < facets_.size(); ++k) {
      const Index3 c = g.unravel(facets_[k].cell);
      Index3 lo{0, 0, 0}, hi{0, 0, 0};
      for (int d = 0; d < dim; ++d) {
        lo[d] = c[d] >= 1 ? c[d] - 1 : 0;
        hi[d] = std::min(c[d] + 2, g.counts[d] - 1);
      }
      for (std::size_t i = lo[0]; i <= hi[0]; ++i)
        for (std::size_t j = lo[1]; j <= hi[1]; ++j)
          for (std::size_t l = lo[2]; l <= hi[2]; ++l) {
            const std::size_t n = g.index(i, j, l);
            const double dd = point_facet_distance(g.node(n), facets_[k], dim);
            if (dd < delta_[n]) {
              delta_[n] = dd;
              owner[n] = static_cast<std::uint32_t>(k);
            }
          }
    }
    for (std::size_t n = 0; n < g.size(); ++n)
      if (delta_[n] < inf) pq.emplace(delta_[n], n);
    std::vector<std::ptrdiff_t> offsets;
    std::vector<std::array<int, 3>> steps;
    for (int a = -1; a <= 1; ++a)
      for (int b = -1; b <= 1; ++b)
        for (int c = -1; c <= 1; ++c) {
          if (dim == 2 && c != 0) continue;
          if (a == 0 && b == 0 && c == 0) continue;
          steps.push_back({a, b, c});
        }
    // facets grouped by owning cell, so a candidate brings its neighbors along
    std::vector<std::size_t> order(facets_.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return facets_[a].cell < facets_[b].cell; });
    auto cell_facets = [&](std::size_t cell) {
      auto lo = std::lower_bound(order.begin(), order.end(), cell,
                                 [&](std::size_t k, std::size_t c) { return facets_[k].cell < c; });
      auto hi = lo;
      while (hi != order.end() && facets_[*hi].cell == cell) ++hi;
      return std::pair{lo, hi};
    };
    const int reach = dim == 2 ? 1 : 0;
    std::vector<std::uint32_t> cand;
    while (!pq.empty()) {
      const auto [d0, n] = pq.top();
      pq.pop();
      if (d0 > delta_[n]) continue;
      const Index3 ijk = g.unravel(n);
      cand.clear();
      {
        const Index3 oc = g.unravel(facets_[owner[n]].cell);
        Index3 lo{0, 0, 0}, hi{0, 0, 0};
        for (int d = 0; d < dim; ++d) {
          lo[d] = oc[d] >= static_cast<std::size_t>(reach) ? oc[d] - reach : 0;
          hi[d] = std::min(oc[d] + reach, g.counts[d] - 1);
        }
        for (std::size_t i = lo[0]; i <= hi[0]; ++i)
          for (std::size_t j = lo[1]; j <= hi[1]; ++j)
            for (std::size_t l = lo[2]; l <= hi[2]; ++l) {
              const auto [a, b] = cell_facets(g.index(i, j, l));
              for (auto it = a; it != b; ++it) cand.push_back(static_cast<std::uint32_t>(*it));
            }
        if (cand.empty()) cand.push_back(owner[n]);
      }
      for (const auto& st : steps) {
        Index3 nb = ijk;
        bool ok = true;
        for (int d = 0; d < dim; ++d) {
          const auto v = static_cast<std::ptrdiff_t>(ijk[d]) + st[d];
          if (v < 0 || v >= static_cast<std::ptrdiff_t>(g.counts[d])) ok = false;
          nb[d] = static_cast<std::size_t>(v);
        }
        if (!ok) continue;
        const std::size_t m = g.index(nb[0], nb[1], nb[2]);
        const Point pm = g.node(m);
        double best = delta_[m] * (1.0 - 1e-14);
        std::uint32_t who = owner[m];
        for (std::uint32_t k : cand) {
          const double dd = point_facet_distance(pm, facets_[k], dim);
          if (dd < best) {
            best = dd;
            who = k;
          }
        }
        if (best < delta_[m] * (1.0 - 1e-14)) {
          delta_[m] = best;
          owner[m] = who;
          pq.emplace(best, m);
        }
      }
    }
  }
};

/// Distance to the zero set of the interpolant: extracted facets plus the
/// exact-zero nodes (as degenerate facets).
inline DistanceField distance_to_zero(const ScalarField& f) {
  ZeroSet z = full_zero_set(f);
  const GridSpec& g = f.grid();
  const double thr = kZeroThreshold * f.max_abs();
  for (std::size_t i = 0; i < g.size(); ++i)
    if (std::abs(f[i]) <= thr && thr > 0.0) {
      const Point p = g.node(i);
      z.facets.push_back(Facet{{p, p, p}, i});
    }
  if (z.facets.empty()) throw Error(ErrorKind::EmptyZeroSet, "field has no zero set in the box");
  return DistanceField(g, std::move(z.facets));
}

// ---------------------------------------------------------------------------
// nodal domains

struct NodalDomain {
  int id = 0;
  int sign = 1;
  GridSpec grid;
  std::vector<std::uint8_t> mask;     // node membership
  std::vector<std::size_t> facets;    // indices into the partition's zero set
  std::size_t node_count = 0;
  Point seed{};                       // smallest-index member node

  bool contains(std::size_t node) const { return mask[node] != 0; }
};

struct DomainPartition {
  GridSpec grid;
  Ball region;
  ZeroSet zero_set;                 // whole-box facets
  std::vector<std::int8_t> signs;   // resolved node signs
  std::vector<int> labels;          // domain id per node, -1 outside the region
  std::vector<NodalDomain> domains;
  int meeting_inner = 0;            // domains with a node in the inner ball
  double inner_radius = 1.0;

  const NodalDomain& domain_at(const Point& p) const {
    const GridSpec& g = grid;
    double best = std::numeric_limits<double>::infinity();
    int id = -1;
    for_each_node_in_ball(g, {p, g.spacing * 1.0001 * std::sqrt(static_cast<double>(g.dim))},
                          [&](std::size_t i, const Point& q) {
                            if (labels[i] >= 0 && distance(p, q) < best) {
                              best = distance(p, q);
                              id = labels[i];
                            }
                          });
    if (id < 0) throw Error(ErrorKind::EmptyIntersection, "no nodal domain at the requested point");
    return domains[static_cast<std::size_t>(id)];
  }
};

/// Sign components of the nonzero nodes inside the region (face adjacency).
/// Ids follow the smallest member node index, which is lexicographic order.
inline DomainPartition nodal_domains(const ScalarField& f, const Ball& region, double inner_radius = 1.0) {
  const GridSpec& g = f.grid();
  DomainPartition part;
  part.grid = g;
  part.region = region;
  part.inner_radius = inner_radius;
  {
    double sup = 0.0;
    for_each_node_in_ball(g, region, [&](std::size_t i, const Point&) { sup = std::max(sup, std::abs(f[i])); });
    if (sup == 0.0) throw Error(ErrorKind::DegenerateField, "field vanishes identically in the region");
  }
  part.zero_set = full_zero_set(f);
  part.signs = resolved_signs(f);
  part.labels.assign(g.size(), -2);
  // exact zeros belong to no domain; their perturbed sign only feeds extraction
  const double thr = kZeroThreshold * f.max_abs();
  for_each_node_in_ball(g, region, [&](std::size_t i, const Point&) {
    if (std::abs(f[i]) > thr) part.labels[i] = -1;
  });
  int next = 0;
  for (std::size_t s = 0; s < g.size(); ++s) {
    if (part.labels[s] != -1) continue;
    NodalDomain dom;
    dom.id = next;
    dom.sign = part.signs[s];
    dom.grid = g;
    dom.seed = g.node(s);
    dom.mask.assign(g.size(), 0);
    std::deque<std::size_t> q{s};
    part.labels[s] = next;
    while (!q.empty()) {
      const std::size_t i = q.front();
      q.pop_front();
      dom.mask[i] = 1;
      ++dom.node_count;
      const Index3 ijk = g.unravel(i);
      for (int d = 0; d < g.dim; ++d) {
        const std::size_t st = g.stride(d);
        for (int side = -1; side <= 1; side += 2) {
          if ((side < 0 && ijk[d] == 0) || (side > 0 && ijk[d] + 1 == g.counts[d])) continue;
          const std::size_t j = side < 0 ? i - st : i + st;
          if (part.labels[j] == -1 && part.signs[j] == dom.sign) {
            part.labels[j] = next;
            q.push_back(j);
          }
        }
      }
    }
    part.domains.push_back(std::move(dom));
    ++next;
  }
  for (auto& l : part.labels)
    if (l < 0) l = -1;
  // facets bordering each domain: any owning-cell corner in the domain
  for (std::size_t k = 0; k < part.zero_set.facets.size(); ++k) {
    const std::size_t c0 = part.zero_set.facets[k].cell;
    const int ncorner = g.dim == 2 ? 4 : 8;
    int seen[8];
    int nseen = 0;
    for (int m = 0; m < ncorner; ++m) {
      const std::size_t n = c0 + (m & 1) * g.stride(0) + (m >> 1 & 1) * g.stride(1) +
                            (g.dim == 3 ? (m >> 2 & 1) * g.stride(2) : 0);
      const int l = part.labels[n];
      if (l < 0 || std::find(seen, seen + nseen, l) != seen + nseen) continue;
      seen[nseen++] = l;
      part.domains[static_cast<std::size_t>(l)].facets.push_back(k);
    }
  }
  const Ball inner{region.center, inner_radius};
  std::vector<std::uint8_t> meets(part.domains.size(), 0);
  for_each_node_in_ball(g, inner, [&](std::size_t i, const Point&) {
    if (part.labels[i] >= 0) meets[static_cast<std::size_t>(part.labels[i])] = 1;
  });
  part.meeting_inner = static_cast<int>(std::count(meets.begin(), meets.end(), 1));
  return part;
}

// ---------------------------------------------------------------------------
// corkscrew

struct CorkscrewReport {
  double inradius = 0.0;
  Point witness{};
};

inline CorkscrewReport corkscrew_check(const NodalDomain& dom, const DistanceField& delta, const Ball& ball) {
  CorkscrewReport rep;
  bool any = false;
  for_each_node_in_ball(dom.grid, ball, [&](std::size_t i, const Point& p) {
    if (!dom.contains(i)) return;
    any = true;
    const double v = std::min(delta[i], ball.radius - distance(p, ball.center));
    if (v > rep.inradius) {
      rep.inradius = v;
      rep.witness = p;
    }
  });
  if (!any) throw Error(ErrorKind::EmptyIntersection, "domain does not meet the ball");
  return rep;
}

// ---------------------------------------------------------------------------
// singular set

struct SingularSet {
  std::vector<Point> points;
  double measure_proxy = 0.0;
  double eps_zero = 0.0;
  double eps_grad = 0.0;
};

/// Nodes in the ball where both |w| and |grad w| are small relative to their
/// suprema over the ball. Negative thresholds select the default h/4.
inline SingularSet singular_set(const ScalarField& f, const Ball& ball, double eps_zero = -1.0,
                                double eps_grad = -1.0) {
  const GridSpec& g = f.grid();
  SingularSet s;
  s.eps_zero = eps_zero >= 0.0 ? eps_zero : g.spacing / 4.0;
  s.eps_grad = eps_grad >= 0.0 ? eps_grad : g.spacing / 4.0;
  double sw = 0.0, sg = 0.0;
  std::vector<std::pair<std::size_t, double>> grads;
  for_each_node_in_ball(g, ball, [&](std::size_t i, const Point&) {
    const double gn = norm(f.node_gradient(i));
    grads.emplace_back(i, gn);
    sw = std::max(sw, std::abs(f[i]));
    sg = std::max(sg, gn);
  });
  for (const auto& [i, gn] : grads)
    if (std::abs(f[i]) < s.eps_zero * sw && gn < s.eps_grad * sg) s.points.push_back(g.node(i));
  s.measure_proxy = static_cast<double>(s.points.size()) * std::pow(g.spacing, g.dim - 2);
  return s;
}

// ---------------------------------------------------------------------------
// chunks and quantitative connectedness

struct Chunk {
  std::size_t cubes = 0;
  std::size_t deep_nodes = 0;
  Point representative{};
  std::size_t representative_node = 0;
};

/// Cubes of side r/10 (lattice anchored at the origin) meeting the deep set
/// {delta >= r} of the domain inside the ball, grouped by face adjacency.
inline std::vector<Chunk> big_chunks(const NodalDomain& dom, const DistanceField& delta, double r, const Ball& ball) {
  const GridSpec& g = dom.grid;
  const double side = r / 10.0;
  using Key = std::array<long, 3>;
  std::map<Key, std::vector<std::size_t>> cubes;
  for_each_node_in_ball(g, ball, [&](std::size_t i, const Point& p) {
    if (!dom.contains(i) || delta[i] < r) return;
    Key k{0, 0, 0};
    for (int d = 0; d < g.dim; ++d) k[d] = static_cast<long>(std::floor(p[d] / side));
    cubes[k].push_back(i);
  });
  std::vector<Key> keys;
  for (const auto& kv : cubes) keys.push_back(kv.first);
  std::vector<std::size_t> parent(keys.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (std::size_t a = 0; a < keys.size(); ++a)
    for (int d = 0; d < g.dim; ++d) {
      Key k = keys[a];
      ++k[d];
      const auto it = std::lower_bound(keys.begin(), keys.end(), k);
      if (it != keys.end() && *it == k) {
        const std::size_t b = static_cast<std::size_t>(it - keys.begin());
        const std::size_t ra = find(a), rb = find(b);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
      }
    }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t a = 0; a < keys.size(); ++a) groups[find(a)].push_back(a);
  std::vector<Chunk> out;
  for (const auto& [root, members] : groups) {
    Chunk c;
    c.cubes = members.size();
    Point centroid{};
    for (std::size_t a : members) {
      Point center{};
      for (int d = 0; d < g.dim; ++d) center[d] = (keys[a][d] + 0.5) * side;
      centroid = centroid + center;
      c.deep_nodes += cubes[keys[a]].size();
    }
    centroid = (1.0 / static_cast<double>(members.size())) * centroid;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a : members)
      for (std::size_t i : cubes[keys[a]]) {
        const double dd = distance(g.node(i), centroid);
        if (dd < best || (dd == best && i < c.representative_node)) {
          best = dd;
          c.representative_node = i;
        }
      }
    c.representative = g.node(c.representative_node);
    out.push_back(c);
  }
  return out;
}

struct ConnectednessProbe {
  Point center{};
  double scale = 1.0;
  std::size_t deep_points = 0;
  int components = 0;   // components of the admissible subgraph holding deep points
  bool connected = true;
};

/// Definition-style test: all points of the domain in B_s(x0) with
/// delta >= delta2*s lie in one component of {delta >= delta1*s} there.
inline ConnectednessProbe quantitative_connectedness(const NodalDomain& dom, const DistanceField& delta,
                                                     const Point& center, double s, double delta1, double delta2) {
  if (!(delta1 > 0.0 && delta1 <= delta2)) throw Error(ErrorKind::Precondition, "need 0 < delta1 <= delta2");
  const GridSpec& g = dom.grid;
  ConnectednessProbe pr;
  pr.center = center;
  pr.scale = s;
  std::vector<int> comp(g.size(), -2);
  std::vector<std::size_t> deep;
  for_each_node_in_ball(g, {center, s}, [&](std::size_t i, const Point&) {
    if (!dom.contains(i) || delta[i] < delta1 * s) return;
    comp[i] = -1;
    if (delta[i] >= delta2 * s) deep.push_back(i);
  });
  pr.deep_points = deep.size();
  int next = 0;
  std::vector<int> seen;
  for (std::size_t s0 : deep) {
    if (comp[s0] >= 0) {
      if (std::find(seen.begin(), seen.end(), comp[s0]) == seen.end()) seen.push_back(comp[s0]);
      continue;
    }
    std::deque<std::size_t> q{s0};
    comp[s0] = next;
    while (!q.empty()) {
      const std::size_t i = q.front();
      q.pop_front();
      const Index3 ijk = g.unravel(i);
      for (int d = 0; d < g.dim; ++d) {
        const std::size_t st = g.stride(d);
        if (ijk[d] > 0 && comp[i - st] == -1) {
          comp[i - st] = next;
          q.push_back(i - st);
        }
        if (ijk[d] + 1 < g.counts[d] && comp[i + st] == -1) {
          comp[i + st] = next;
          q.push_back(i + st);
        }
      }
    }
    seen.push_back(next);
    ++next;
  }
  pr.components = static_cast<int>(seen.size());
  pr.connected = pr.components <= 1;
  return pr;
}

// ---------------------------------------------------------------------------
// geometry report

struct GeometryOptions {
  Ball center_ball{{0.0, 0.0, 0.0}, 2.0};  // boundary centers sampled here
  int ahlfors_centers = 32;
  double ahlfors_top_scale = 1.0;
  int ahlfors_scales = 5;
  Ball singular_ball{{0.0, 0.0, 0.0}, 4.0};
  double eps_zero = -1.0;
  double eps_grad = -1.0;
  double chunk_r = 0.5;
  Ball chunk_ball{{0.0, 0.0, 0.0}, 2.0};
  double delta1 = 0.05;
  double delta2 = 0.1;
  std::vector<std::pair<Point, double>> probes{{{0.0, 0.0, 0.0}, 1.0}};
};

struct AhlforsSample {
  Point center{};
  double scale = 0.0;
  double ratio = 0.0;
};

struct GeometryReport {
  std::vector<AhlforsSample> ahlfors;
  double ahlfors_min = 0.0;
  double ahlfors_max = 0.0;
  SingularSet singular;
  std::vector<Chunk> chunks;
  std::vector<ConnectednessProbe> probes;
  bool quantitatively_connected = true;
};

inline GeometryReport boundary_geometry_report(const ScalarField& f, const DomainPartition& part,
                                               const NodalDomain& dom, const DistanceField& delta,
                                               const GeometryOptions& opt = {}) {
  const GridSpec& g = f.grid();
  const auto& facets = part.zero_set.facets;
  std::vector<std::size_t> candidates;
  for (std::size_t k : dom.facets)
    if (opt.center_ball.contains(facets[k].midpoint(g.dim))) candidates.push_back(k);
  if (candidates.empty()) throw Error(ErrorKind::EmptyZeroSet, "domain has no boundary in the sampling ball");
  GeometryReport rep;
  const std::size_t nc = std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(opt.ahlfors_centers));
  rep.ahlfors_min = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < nc; ++c) {
    const Point x = facets[candidates[c * candidates.size() / nc]].midpoint(g.dim);
    for (int k = 0; k < opt.ahlfors_scales; ++k) {
      const double s = opt.ahlfors_top_scale * std::ldexp(1.0, -k);
      const Ball b{x, s};
      double area = 0.0;
      for (std::size_t q : dom.facets) area += clipped_measure(facets[q], g.dim, b);
      const double ratio = area / std::pow(s, g.dim - 1);
      rep.ahlfors.push_back({x, s, ratio});
      rep.ahlfors_min = std::min(rep.ahlfors_min, ratio);
      rep.ahlfors_max = std::max(rep.ahlfors_max, ratio);
    }
  }
  rep.singular = singular_set(f, opt.singular_ball, opt.eps_zero, opt.eps_grad);
  rep.chunks = big_chunks(dom, delta, opt.chunk_r, opt.chunk_ball);
  for (const auto& [c, s] : opt.probes) {
    rep.probes.push_back(quantitative_connectedness(dom, delta, c, s, opt.delta1, opt.delta2));
    rep.quantitatively_connected = rep.quantitatively_connected && rep.probes.back().connected;
  }
  return rep;
}

}  // namespace nodal
