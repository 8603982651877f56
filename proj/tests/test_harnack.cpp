#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "nodal/harnack.hpp"

using namespace nodal;

namespace {

struct Setup {
  ScalarField w;
  DistanceField delta;
};

template <class F>
Setup make(F f, double h = 1.0 / 64) {
  ScalarField w = ScalarField::sample(GridSpec::centered(2, 3.5, h), [f](const Point& p) { return f(p[0], p[1]); });
  DistanceField d = distance_to_zero(w);
  return {std::move(w), std::move(d)};
}

double fx(double x, double) { return x; }
double fxy(double x, double y) { return x * y; }

}  // namespace

TEST(Enlarge, LinearStepsAlongGradient) {
  auto s = make(fx);
  const auto r = enlarge_step(s.w, s.delta, {0.1, 0, 0}, 0.05);
  EXPECT_NEAR(r.point[0], 0.195, 1e-12);
  EXPECT_NEAR(r.point[1], 0.0, 1e-12);
  EXPECT_NEAR(r.value / 0.1, 1.95, 1e-10);
  EXPECT_FALSE(r.degenerate);
}

TEST(Enlarge, SaddleStepsAlongDiagonal) {
  auto s = make(fxy);
  const auto r = enlarge_step(s.w, s.delta, {0.1, 0.1, 0}, 0.05);
  // 1D maximization of (0.1 + a cos t)(0.1 + a sin t) over t
  const double a = 0.095;
  double best = 0;
  for (int k = 0; k < 100000; ++k) {
    const double t = 2 * std::numbers::pi * k / 100000;
    best = std::max(best, (0.1 + a * std::cos(t)) * (0.1 + a * std::sin(t)));
  }
  EXPECT_NEAR(r.point[0], r.point[1], 1e-12);
  EXPECT_NEAR(r.value / 0.01, best / 0.01, 1e-6);
  EXPECT_NEAR(r.value / 0.01, std::pow(0.1 + a / std::sqrt(2.0), 2) / 0.01, 1e-9);
}

TEST(Enlarge, NegativeSideFollowsSign) {
  auto s = make(fx);
  const auto r = enlarge_step(s.w, s.delta, {-0.1, 0.3, 0}, 0.05);
  EXPECT_NEAR(r.point[0], -0.195, 1e-12);
  EXPECT_LT(r.value, 0.0);
}

TEST(Enlarge, Preconditions) {
  auto s = make(fx);
  EXPECT_THROW(enlarge_step(s.w, s.delta, {0.5, 0, 0}, 0.05), Error);
  EXPECT_THROW(enlarge_step(s.w, s.delta, {0.1, 2.5, 0}, 0.05), Error);
  EXPECT_THROW(enlarge_step(s.w, s.delta, {0.0, 0.5, 0}, 0.05), Error);
  EXPECT_THROW(enlarge_step(s.w, s.delta, {0.1, 0, 0}, 0.0), Error);
}

TEST(Chain, LinearLengthMatchesGeometricRecursion) {
  auto s = make(fx);
  const double d0 = std::ldexp(1.0, -10);
  const auto c = build_chain(s.w, s.delta, {d0, 0, 0}, 0.05);
  // delta_k = d0 * 1.95^k must exceed 1/4
  const int predicted = static_cast<int>(std::floor(std::log(0.25 / d0) / std::log(1.95))) + 1;
  EXPECT_NEAR(static_cast<double>(c.steps()), predicted, 1.0);
  EXPECT_EQ(c.termination, Termination::DeltaExceedsQuarter);
  EXPECT_GT(c.terminal_delta, 0.25);
  for (std::size_t i = 0; i + 1 < c.points.size(); ++i)
    EXPECT_LE(distance(c.points[i + 1], c.points[i]), (1 - 0.05) * c.deltas[i] + 1e-12);
}

TEST(Chain, SaddleDiagonal) {
  auto s = make(fxy);
  const double t = std::ldexp(1.0, -8);
  const auto c = build_chain(s.w, s.delta, {t, t, 0}, 0.05);
  EXPECT_GE(c.terminal_delta, 0.25);
  EXPECT_LE(c.steps(), 25u);
  for (double r : c.growth_ratios) EXPECT_GT(r, 2.7);
}

TEST(Chain, ZeroStartIsPrecondition) {
  auto s = make(fx);
  EXPECT_THROW(build_chain(s.w, s.delta, {0, 0.3, 0}, 0.05), Error);
}

TEST(Chain, StallCarriesPartialChain) {
  auto s = make(fx);
  try {
    build_chain(s.w, s.delta, {std::ldexp(1.0, -10), 0, 0}, 0.05, 3);
    FAIL();
  } catch (const ChainStallError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ChainStall);
    EXPECT_EQ(e.partial().steps(), 3u);
  }
}

TEST(Chain, CsvHasOneRowPerPoint) {
  auto s = make(fx);
  const auto c = build_chain(s.w, s.delta, {0.01, 0, 0}, 0.05);
  std::ostringstream os;
  write_chain_csv(os, c);
  const std::string out = os.str();
  EXPECT_EQ(static_cast<std::size_t>(std::count(out.begin(), out.end(), '\n')), c.points.size() + 1);
}

namespace {

std::vector<Point> log_spaced_starts(int n, bool diagonal) {
  std::vector<Point> s;
  for (int i = 0; i < n; ++i) {
    const double d = std::exp2(-12.0 + 9.0 * i / (n - 1));
    const double y = -0.8 + 1.6 * ((i * 7) % n) / (n - 1);
    s.push_back(diagonal ? Point{d, d, 0} : Point{d, y, 0});
  }
  return s;
}

}  // namespace

TEST(Batch, LinearLengthLaw) {
  auto s = make(fx);
  const auto b = calibrate_and_run(s.w, s.delta, log_spaced_starts(50, false));
  EXPECT_EQ(b.theta, 0.05);
  EXPECT_GT(b.min_ratio, 1.05);
  EXPECT_GE(b.r_squared, 0.9);
  EXPECT_NEAR(b.xi1 / linear_xi1_prediction(b.theta), 1.0, 0.2);
  EXPECT_TRUE(b.signs_constant);
  EXPECT_TRUE(b.values_increasing);
  EXPECT_GT(b.c4, 0.25);
}

TEST(Batch, SaddleLengthLaw) {
  auto s = make(fxy);
  const auto b = calibrate_and_run(s.w, s.delta, log_spaced_starts(50, true));
  EXPECT_GE(b.r_squared, 0.9);
  EXPECT_GT(b.min_ratio, 1.05);
  EXPECT_TRUE(b.signs_constant);
  EXPECT_GT(b.c4, 0.0);
}

TEST(Batch, ScalingInvariance) {
  // u(rho x) with rho = 2: starts scaled by 1/rho give the same lengths law
  auto s1 = make(fxy);
  auto s2 = make([](double x, double y) { return 4 * x * y; });
  auto starts = log_spaced_starts(50, true);
  const auto a = run_chains(s1.w, s1.delta, starts, 0.05);
  const auto b = run_chains(s2.w, s2.delta, starts, 0.05);
  EXPECT_NEAR(a.xi1 / b.xi1, 1.0, 0.1);
}

TEST(Batch, DeterministicAcrossWorkerCounts) {
  auto s = make(fxy);
  auto starts = log_spaced_starts(20, true);
  ChainBatch a, b;
  a.chains.resize(starts.size());
  b.chains.resize(starts.size());
  parallel_for(starts.size(), [&](std::size_t i) { a.chains[i] = build_chain(s.w, s.delta, starts[i], 0.1); }, 1);
  parallel_for(starts.size(), [&](std::size_t i) { b.chains[i] = build_chain(s.w, s.delta, starts[i], 0.1); }, 4);
  for (std::size_t i = 0; i < starts.size(); ++i) EXPECT_EQ(a.chains[i].points, b.chains[i].points);
}
