#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "nodal/boundary_harnack.hpp"
#include "nodal/elliptic.hpp"
#include "nodal/oracles.hpp"

using namespace nodal;

namespace {

const Point O{0, 0, 0};

template <class F>
ScalarField field2(const GridSpec& g, F f) {
  return ScalarField::sample(g, [f](const Point& p) { return f(p[0], p[1]); });
}

double fxy(double x, double y) { return x * y; }
double fquartic(double x, double y) { return x * y * (x * x - y * y); }

}  // namespace

TEST(Ratio, ConstantMultiple) {
  const auto g = GridSpec::centered(2, 2, 1.0 / 32);
  auto u = field2(g, fxy);
  auto v = field2(g, [](double x, double y) { return 3 * x * y; });
  const auto du = distance_to_zero(u);
  const auto r = ratio_field(v, u, du);
  std::size_t n = 0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (r.mask[i]) {
      EXPECT_NEAR(r.values[i], 3.0, 1e-14);
      ++n;
      EXPECT_GE(du[i], 2 * g.spacing);
    }
  EXPECT_GT(n, 0u);
}

TEST(Ratio, AlgebraicQuotient) {
  const auto g = GridSpec::centered(2, 2, 1.0 / 32);
  auto u = field2(g, fxy), v = field2(g, fquartic);
  const auto du = distance_to_zero(u), dv = distance_to_zero(v);
  const auto r = ratio_field(v, u, du, &dv);
  EXPECT_FALSE(r.divergent);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (r.mask[i]) {
      const Point p = g.node(i);
      EXPECT_NEAR(r.values[i], p[0] * p[0] - p[1] * p[1], 1e-10);
    }
}

TEST(Ratio, DivergenceFlagWhenZeroSetsDiffer) {
  const auto g = GridSpec::centered(2, 2, 1.0 / 32);
  auto u = field2(g, fxy), v = field2(g, [](double x, double) { return x; });
  const auto du = distance_to_zero(u), dv = distance_to_zero(v);
  const auto r = ratio_field(v, u, du, &dv);
  EXPECT_TRUE(r.divergent);
  // v/u = 1/y grows like 1/(2h) at the band edge
  EXPECT_GT(r.sup_abs({O, 1.0}), 0.25 / g.spacing);
  EXPECT_THROW(require_inclusion(du, dv, {O, 1.0}, 2 * g.spacing), Error);
  EXPECT_NO_THROW(require_inclusion(dv, du, {O, 1.0}, 2 * g.spacing));
}

TEST(Ratio, ZeroDenominatorField) {
  const auto g = GridSpec::centered(2, 1, 1.0 / 16);
  auto u = field2(g, [](double, double) { return 0.0; });
  auto v = field2(g, fxy);
  const auto dv = distance_to_zero(v);
  EXPECT_THROW(ratio_field(v, u, dv), Error);
}

TEST(Boundedness, ProductPairClosedForm) {
  const auto g = GridSpec::centered(2, 8.25, 1.0 / 64);
  auto u = field2(g, fxy), v = field2(g, fquartic);
  const auto du = distance_to_zero(u);
  const auto r = ratio_field(v, u, du);
  const auto b = upper_bound_constant(v, u, r);
  EXPECT_NEAR(b.sup_ratio, 1.0, 0.01);
  EXPECT_NEAR(b.sup8_v / 1024.0, 1.0, 1e-4);
  EXPECT_NEAR(b.sup8_u, 32.0, 1e-9);
  EXPECT_NEAR(b.C_emp / (1.0 / 32), 1.0, 0.05);
}

TEST(Boundedness, TwoSidedIdentical) {
  const auto g = GridSpec::centered(2, 8.25, 1.0 / 16);
  auto u = field2(g, fxy);
  const auto du = distance_to_zero(u);
  const auto t = two_sided_constant(u, u, du, du);
  EXPECT_DOUBLE_EQ(t.two_sided_C, 1.0);
  EXPECT_DOUBLE_EQ(t.ratio_spread, 1.0);
}

TEST(Boundedness, PolynomialMultiplierSpread) {
  // v = (2 + x) u: spread = sup(2+x) / inf(2+x) on B_1 = 3
  const auto g = GridSpec::centered(2, 8.25, 1.0 / 64);
  auto u = field2(g, fxy), v = field2(g, [](double x, double y) { return (2 + x) * x * y; });
  const auto du = distance_to_zero(u), dv = distance_to_zero(v);
  const auto t = two_sided_constant(u, v, du, dv);
  EXPECT_NEAR(t.ratio_spread / 3.0, 1.0, 0.02);
  EXPECT_GE(t.two_sided_C, std::sqrt(t.ratio_spread) - 1e-12);
}

TEST(Boundedness, ScalingLeavesConstantsAlone) {
  const auto g = GridSpec::centered(2, 8.25, 1.0 / 16);
  auto u = field2(g, fxy), v = field2(g, fquartic);
  const auto du = distance_to_zero(u);
  const auto a = upper_bound_constant(v, u, ratio_field(v, u, du));
  const auto us = u.scaled(-3.0), vs = v.scaled(0.25);
  const auto b = upper_bound_constant(vs, us, ratio_field(vs, us, du));
  EXPECT_NEAR(a.C_emp, b.C_emp, 1e-12 * a.C_emp);
}

TEST(StrongMax, NonconstantRatioPeaksOnBoundary) {
  const auto g = GridSpec::centered(2, 1.5, 1.0 / 64);
  auto u = field2(g, fxy);
  const auto du = distance_to_zero(u);
  const auto s1 = strong_max_check(ratio_field(field2(g, fquartic), u, du), {O, 1.0});
  EXPECT_FALSE(s1.constant);
  EXPECT_TRUE(s1.on_boundary);
  EXPECT_LE(s1.interior_gap, 2 * g.spacing);
  const auto s2 = strong_max_check(ratio_field(field2(g, [](double x, double y) { return (2 + x) * x * y; }), u, du),
                                   {O, 1.0});
  EXPECT_TRUE(s2.on_boundary);
  EXPECT_GT(s2.sup_location[0], 0.95);
  const auto s3 = strong_max_check(ratio_field(u.scaled(3.0), u, du), {O, 1.0});
  EXPECT_TRUE(s3.constant);
}

TEST(Holder, QuadraticRatioDecay) {
  const auto g = GridSpec::centered(2, 1.05, 1.0 / 512);
  auto u = field2(g, fxy);
  const auto du = distance_to_zero(u);
  const auto r = ratio_field(field2(g, fquartic), u, du);
  const auto p = holder_probe(r, du, O, {1, 0.5, 0.25, 0.125, 0.0625});
  ASSERT_EQ(p.scales.size(), 5u);
  EXPECT_NEAR(p.alpha_fit, 2.0, 0.05);
  for (std::size_t k = 0; k < p.scales.size(); ++k) EXPECT_NEAR(p.osc[k] / (2 * p.scales[k] * p.scales[k]), 1.0, 0.05);
  for (double f : p.decay_factors) EXPECT_LT(f, 1.0);
}

TEST(Holder, AffineRatioDecay) {
  const auto g = GridSpec::centered(2, 1.05, 1.0 / 256);
  auto u = field2(g, fxy);
  const auto du = distance_to_zero(u);
  const auto r = ratio_field(field2(g, [](double x, double y) { return (2 + x) * x * y; }), u, du);
  const auto p = holder_probe(r, du, O, {1, 0.5, 0.25, 0.125});
  EXPECT_NEAR(p.alpha_fit, 1.0, 0.05);
}

TEST(Holder, ConstantRatioAndErrors) {
  const auto g = GridSpec::centered(2, 1.05, 1.0 / 64);
  auto u = field2(g, fxy);
  const auto du = distance_to_zero(u);
  const auto r = ratio_field(u.scaled(3.0), u, du);
  const auto p = holder_probe(r, du, O, {1, 0.5, 0.25});
  EXPECT_TRUE(p.constant);
  for (double o : p.osc) EXPECT_LE(o, 1e-12);
  EXPECT_THROW(holder_probe(r, du, O, {1, 0.5}), Error);
  EXPECT_THROW(holder_probe(r, du, {0.5, 0.5, 0}, {1, 0.5, 0.25}), Error);
}

TEST(Transfer, SameFieldAndInequalZeroSets) {
  const auto g = GridSpec::centered(2, 2, 1.0 / 64);
  auto u = field2(g, fxy);
  const auto op = CoefficientField::identity(g);
  const auto du = distance_to_zero(u);
  const auto t = frequency_transfer_check(u, u, op, op, du, du, 2.0, 2.5);
  EXPECT_NEAR(t.D_emp, 2.0, 1e-9);
  EXPECT_TRUE(t.certified);
  EXPECT_TRUE(t.pass);
  auto v = field2(g, [](double x, double) { return x; });
  const auto dv = distance_to_zero(v);
  try {
    frequency_transfer_check(u, v, op, op, du, dv, 2.0, 2.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EqualityViolation);
  }
}

TEST(Transfer, OperatorPairSolved) {
  // v solves div((2 + tanh(x^2 - y^2)) grad v) = 0 with data xy; xy is an exact solution
  const auto g = GridSpec::centered(2, 2, 1.0 / 64);
  auto u = field2(g, fxy);
  const auto opu = CoefficientField::identity(g);
  const auto opv = CoefficientField::scalar(
      g, [](const Point& p) { return 2.0 + std::tanh(p[0] * p[0] - p[1] * p[1]); }, 0.3, 20.0);
  const auto sol = solve_dirichlet({opv, Region::box(g), [](const Point& p) { return p[0] * p[1]; }}, 1e-10);
  const auto du = distance_to_zero(u), dv = distance_to_zero(sol.solution);
  const auto t = frequency_transfer_check(u, sol.solution, opu, opv, du, dv, 2.0, 2.5);
  EXPECT_TRUE(t.certified);
  EXPECT_NEAR(t.D_emp, 2.0, 0.05);
  EXPECT_TRUE(t.pass);
}

TEST(Carleson, QuadrantAndHalfPlane) {
  const auto g = GridSpec::centered(2, 3.5, 1.0 / 32);
  auto q = field2(g, fxy);
  const auto dq = distance_to_zero(q);
  const auto part = nodal_domains(q, {O, 3.25});
  const auto& quad = part.domain_at({1, 1, 0});
  const auto c = carleson_check(q, quad, dq, 0.5);
  EXPECT_NEAR(c.sup_inner, 0.125, 1e-3);
  EXPECT_NEAR(c.sup_far, 2.0, 1e-3);
  EXPECT_LE(c.M_emp, 0.125);
  EXPECT_TRUE(c.trace_ok);
  try {
    carleson_check(q, quad, dq, 3.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CorkscrewFailure);
  }
  EXPECT_THROW(carleson_check(q, quad, dq, 0.1), Error);

  auto y = field2(g, [](double, double y) { return y; });
  const auto dy = distance_to_zero(y);
  const auto hp = nodal_domains(y, {O, 3.25}).domain_at({0, 1, 0});
  const auto ch = carleson_check(y, hp, dy, 0.5);
  EXPECT_NEAR(ch.M_emp, 0.25, 1e-9);
}

TEST(Carleson, StableUnderRefinement) {
  double m[2];
  for (int k = 0; k < 2; ++k) {
    const auto g = GridSpec::centered(2, 3.5, 1.0 / (16 << k));
    auto q = field2(g, fxy);
    const auto dq = distance_to_zero(q);
    m[k] = carleson_check(q, nodal_domains(q, {O, 3.25}).domain_at({1, 1, 0}), dq, 0.5).M_emp;
  }
  EXPECT_NEAR(m[1] / m[0], 1.0, 0.1);
}

namespace {

struct HalfPlane {
  GridSpec g;
  ScalarField u0, v;
  DistanceField delta;
  DomainPartition part;
};

HalfPlane poisson_halfplane(double h) {
  const GridSpec g = GridSpec::box(2, {-3, -1, 0}, {3, 3, 0}, h);
  auto u0 = field2(g, [](double, double y) { return y; });
  std::vector<double> lv(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) lv[i] = g.node(i)[1];
  const auto sol = solve_dirichlet(
      {CoefficientField::identity(g), Region::from_levels(g, {lv}),
       [](const Point& p) { return p[1] <= 0.0 ? oracle::bump(p[0]) : oracle::halfplane_poisson_bump(p[0], p[1]); }},
      1e-10);
  auto delta = distance_to_zero(u0);
  auto part = nodal_domains(u0, {O, 2.9});
  return {g, u0, sol.solution, std::move(delta), std::move(part)};
}

}  // namespace

TEST(SingleDomain, HalfPlanePoissonQuotient) {
  const auto hp = poisson_halfplane(1.0 / 64);
  const auto& dom = hp.part.domain_at({0, 1, 0});
  double worst = 0.0;
  for_each_node_in_ball(hp.g, {O, 1.0}, [&](std::size_t i, const Point& p) {
    if (!dom.contains(i) || hp.delta[i] < 2 * hp.g.spacing) return;
    const double exact = oracle::halfplane_poisson_bump(p[0], p[1]) / p[1];
    worst = std::max(worst, std::abs(hp.v[i] / hp.u0[i] - exact) / exact);
  });
  EXPECT_LE(worst, 0.03);
  const auto s = single_domain_constant(hp.u0, hp.v, dom, hp.delta, 0.2);
  EXPECT_TRUE(std::isfinite(s.M));
  EXPECT_GE(s.M, 1.0);
  EXPECT_GT(s.far_nodes, 0u);
  EXPECT_TRUE(std::isfinite(chunk_bound_constant(hp.u0, hp.v, dom, hp.delta, 0.5)));
}

TEST(IterationDecay, LinearHalfPlane) {
  const auto g = GridSpec::centered(2, 1.5, 1.0 / 64);
  auto w = field2(g, [](double, double y) { return y / 0.1; });
  const auto d = distance_to_zero(w);
  const auto& dom = nodal_domains(w, {O, 1.45}).domain_at({0, 0.5, 0});
  const auto r = iteration_decay_probe(w, dom, d, 1.0, 0.1);
  EXPECT_TRUE(r.violated.empty());
  EXPECT_GE(r.a_emp, 0.5 - 1e-9);
  EXPECT_TRUE(r.pass);
}

TEST(IterationDecay, SignChangingCombination) {
  // w = C u0 - v with u0 = y and v the Poisson bump; scaled so w >= M0 on A_1
  const auto hp = poisson_halfplane(1.0 / 64);
  const auto& dom = hp.part.domain_at({0, 1, 0});
  std::vector<double> vals(hp.g.size());
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 2.0 * hp.u0[i] - 0.1 * hp.v[i];
  const ScalarField w(hp.g, vals);
  const auto r = iteration_decay_probe(w, dom, hp.delta, 0.1, 0.1);
  EXPECT_GT(r.a_emp, 0.0);
  EXPECT_TRUE(r.pass);
  EXPECT_FALSE(r.violated.empty());  // the bump trace does not vanish on y = 0
}

TEST(Liouville, ProportionalPair) {
  const auto g = GridSpec::centered(2, 4.25, 1.0 / 32);
  auto u = field2(g, fxy);
  const auto du = distance_to_zero(u);
  const auto L = liouville_probe(u, u.scaled(3.0), du, du, {1, 2, 4});
  EXPECT_EQ(L.verdict, "proportional");
  for (double c : L.c_fit) EXPECT_NEAR(c, 3.0, 1e-8);
}

TEST(Liouville, ExtraZerosFailEquality) {
  const auto g = GridSpec::centered(2, 4.25, 1.0 / 32);
  auto u = field2(g, fxy), v = field2(g, fquartic);
  const auto du = distance_to_zero(u), dv = distance_to_zero(v);
  try {
    liouville_probe(u, v, du, dv, {1, 2, 4});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EqualityViolation);
  }
  EXPECT_THROW(liouville_probe(u, u, du, du, {5}), Error);
}

TEST(Liouville, ExponentialFamilyIsFrequencyUnbounded) {
  const auto g = GridSpec::centered(3, 4.25, 1.0 / 8);
  auto u = ScalarField::sample(g, [](const Point& p) { return std::sin(p[2]) * std::exp(p[0]); });
  auto v = ScalarField::sample(
      g, [](const Point& p) { return std::sin(p[2]) * std::exp((p[0] + p[1]) / std::numbers::sqrt2); });
  const auto du = distance_to_zero(u), dv = distance_to_zero(v);
  const auto L = liouville_probe(u, v, du, dv, {1, 2, 4});
  EXPECT_EQ(L.verdict, "frequency-unbounded");
  EXPECT_GE(L.nd_growth_u, 0.5);
  EXPECT_GE(L.nd_growth_v, 0.5);
}
