#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "nodal/geometry.hpp"
#include "nodal/grid.hpp"
#include "nodal/workers.hpp"

namespace nodal {

enum class Termination { LeftB2IntoB3, DeltaExceedsQuarter, LeftBox };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::LeftB2IntoB3: return "left_B2_into_B3";
    case Termination::DeltaExceedsQuarter: return "delta_exceeds_quarter";
    case Termination::LeftBox: return "left_box";
  }
  return "?";
}

struct HarnackChain {
  std::vector<Point> points;
  std::vector<double> values;  // |w(x_i)|
  std::vector<double> deltas;
  double theta_used = 0.0;
  std::vector<double> growth_ratios;
  Termination termination = Termination::DeltaExceedsQuarter;
  double terminal_delta = 0.0;
  int degenerate_steps = 0;

  std::size_t steps() const { return points.empty() ? 0 : points.size() - 1; }
};

class ChainStallError : public Error {
 public:
  ChainStallError(const std::string& what, HarnackChain partial)
      : Error(ErrorKind::ChainStall, what), partial_(std::move(partial)) {}
  const HarnackChain& partial() const { return partial_; }

 private:
  HarnackChain partial_;
};

struct EnlargeResult {
  Point point{};
  double value = 0.0;
  bool degenerate = false;  // no sample reached |w(x)|
};

inline int chain_directions(int dim) { return dim == 2 ? 512 : 2048; }

/// One enlargement step: argmax of sign(w(x)) w over the sphere of radius
/// (1-theta) delta(x) about x. Ties go to the lowest angular index.
inline EnlargeResult enlarge_step(const ScalarField& w, const DistanceField& delta, const Point& x, double theta) {
  if (!(theta > 0.0 && theta <= 0.25)) throw Error(ErrorKind::Precondition, "theta must lie in (0, 1/4]");
  if (norm(x) > 2.0) throw Error(ErrorKind::Precondition, "point outside B_2");
  const double wx = w.eval(x);
  if (wx == 0.0) throw Error(ErrorKind::Precondition, "w vanishes at the start point");
  const double d = delta.at(x);
  if (d > 0.25) throw Error(ErrorKind::Precondition, "delta exceeds 1/4");
  const int dim = w.grid().dim;
  static thread_local std::vector<Point> dirs2 = sphere_directions(2, 512);
  static thread_local std::vector<Point> dirs3 = sphere_directions(3, 128);
  const std::vector<Point>& dirs = dim == 2 ? dirs2 : dirs3;
  const double s = wx > 0.0 ? 1.0 : -1.0;
  const double rad = (1.0 - theta) * d;
  EnlargeResult best;
  double top = -std::numeric_limits<double>::infinity();
  for (const Point& u : dirs) {
    const Point p = x + rad * u;
    if (!w.grid().contains(p)) continue;
    const double v = s * w.eval(p);
    if (v > top) {
      top = v;
      best.point = p;
    }
  }
  if (!std::isfinite(top)) throw Error(ErrorKind::OutOfDomain, "enlarge sphere leaves the grid box");
  best.value = s * top;
  best.degenerate = top < std::abs(wx);
  return best;
}

inline int default_step_cap(double delta0) { return static_cast<int>(std::ceil(10.0 * (-std::log2(delta0) + 10.0))); }

inline HarnackChain build_chain(const ScalarField& w, const DistanceField& delta, const Point& x0, double theta,
                                int step_cap = 0) {
  HarnackChain c;
  c.theta_used = theta;
  const double d0 = delta.at(x0);
  if (w.eval(x0) == 0.0 || d0 == 0.0) throw Error(ErrorKind::Precondition, "w vanishes at the start point");
  if (d0 > 0.25 || norm(x0) > 2.0) throw Error(ErrorKind::Precondition, "start point violates delta <= 1/4 in B_2");
  if (step_cap <= 0) step_cap = default_step_cap(d0);
  Point x = x0;
  double d = d0;
  c.points.push_back(x);
  c.values.push_back(std::abs(w.eval(x)));
  c.deltas.push_back(d);
  for (;;) {
    if (norm(x) > 2.0) {
      c.termination = Termination::LeftB2IntoB3;
      break;
    }
    if (d > 0.25) {
      c.termination = Termination::DeltaExceedsQuarter;
      break;
    }
    if (static_cast<int>(c.steps()) >= step_cap) {
      c.terminal_delta = d;
      throw ChainStallError("step cap " + std::to_string(step_cap) + " reached", c);
    }
    EnlargeResult r;
    try {
      r = enlarge_step(w, delta, x, theta);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::OutOfDomain) throw;
      c.termination = Termination::LeftBox;
      break;
    }
    if (r.degenerate) ++c.degenerate_steps;
    c.growth_ratios.push_back(std::abs(r.value) / c.values.back());
    x = r.point;
    if (!delta.grid().contains(x)) {
      c.termination = Termination::LeftBox;
      break;
    }
    d = delta.at(x);
    c.points.push_back(x);
    c.values.push_back(std::abs(r.value));
    c.deltas.push_back(d);
  }
  c.terminal_delta = c.deltas.back();
  return c;
}

inline void write_chain_csv(std::ostream& os, const HarnackChain& c) {
  os.precision(17);
  os << "step,x,y,z,abs_w,delta,ratio\n";
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    os << i << ',' << c.points[i][0] << ',' << c.points[i][1] << ',' << c.points[i][2] << ',' << c.values[i] << ','
       << c.deltas[i] << ',';
    if (i > 0) os << c.growth_ratios[i - 1];
    os << '\n';
  }
}

struct ChainBatch {
  double theta = 0.0;
  std::vector<HarnackChain> chains;
  double xi1 = 0.0;
  double xi2 = 0.0;
  double r_squared = 0.0;
  double c4 = 0.0;  // min terminal delta
  double min_ratio = 0.0;
  bool signs_constant = true;
  bool values_increasing = true;
};

/// Least-squares fit m = xi1 * (-ln delta0) + xi2 with R^2.
inline void fit_chain_lengths(ChainBatch& b) {
  const std::size_t n = b.chains.size();
  if (n < 2) throw Error(ErrorKind::InsufficientData, "length fit needs two chains");
  double mx = 0, my = 0;
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = -std::log(b.chains[i].deltas.front());
    ys[i] = static_cast<double>(b.chains[i].steps());
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) throw Error(ErrorKind::InsufficientData, "start points share one delta");
  b.xi1 = sxy / sxx;
  b.xi2 = my - b.xi1 * mx;
  b.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
}

/// Chains from every start point (in parallel, ordered by index) plus fits.
inline ChainBatch run_chains(const ScalarField& w, const DistanceField& delta, const std::vector<Point>& starts,
                             double theta) {
  ChainBatch b;
  b.theta = theta;
  b.chains.resize(starts.size());
  parallel_for(starts.size(), [&](std::size_t i) { b.chains[i] = build_chain(w, delta, starts[i], theta); });
  b.c4 = std::numeric_limits<double>::infinity();
  b.min_ratio = std::numeric_limits<double>::infinity();
  for (const auto& c : b.chains) {
    b.c4 = std::min(b.c4, c.terminal_delta);
    for (double r : c.growth_ratios) b.min_ratio = std::min(b.min_ratio, r);
    const double s0 = w.eval(c.points.front()) > 0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      if (s0 * w.eval(c.points[i]) <= 0.0) b.signs_constant = false;
      if (i > 0 && !(c.values[i] > c.values[i - 1])) b.values_increasing = false;
    }
  }
  if (b.chains.size() >= 2) fit_chain_lengths(b);
  return b;
}

inline const std::vector<double>& theta_candidates() {
  static const std::vector<double> t{0.05, 0.1, 0.15, 0.2};
  return t;
}

/// Smallest theta in {0.05, 0.1, 0.15, 0.2} whose minimal per-step ratio
/// exceeds `min_ratio`; falls back to the largest candidate.
inline ChainBatch calibrate_and_run(const ScalarField& w, const DistanceField& delta, const std::vector<Point>& starts,
                                    double min_ratio = 1.05) {
  ChainBatch last;
  for (double t : theta_candidates()) {
    last = run_chains(w, delta, starts, t);
    if (last.min_ratio > min_ratio) return last;
  }
  return last;
}

/// Predicted length slope for w = x: delta grows by (2 - theta) per step.
inline double linear_xi1_prediction(double theta) { return 1.0 / std::log(2.0 - theta); }

}  // namespace nodal
