#include <gtest/gtest.h>

#include <cmath>

#include "nodal/elliptic.hpp"

using namespace nodal;

namespace {

double max_error(const ScalarField& f, const std::function<double(const Point&)>& exact) {
  double m = 0.0;
  for (std::size_t i = 0; i < f.grid().size(); ++i) m = std::max(m, std::abs(f[i] - exact(f.grid().node(i))));
  return m;
}

double hfun(double s) { return 2.0 + std::tanh(s); }

}  // namespace

TEST(Elliptic, LinearDataIsReproduced) {
  auto g = GridSpec::box(2, {0, 0, 0}, {1, 1, 0}, 1.0 / 64);
  DirichletProblem p{CoefficientField::identity(g), Region::box(g), [](const Point& x) { return x[0]; }};
  const SolveReport r = solve_dirichlet(p, 1e-10);
  EXPECT_LE(r.residual_linf, 1e-10);
  EXPECT_LE(max_error(r.solution, [](const Point& x) { return x[0]; }), 1e-10);
}

TEST(Elliptic, BilinearDataIsReproduced) {
  auto g = GridSpec::box(2, {0, 0, 0}, {1, 1, 0}, 1.0 / 64);
  auto xy = [](const Point& x) { return x[0] * x[1]; };
  DirichletProblem p{CoefficientField::identity(g), Region::box(g), xy};
  const SolveReport r = solve_dirichlet(p, 1e-10);
  EXPECT_LE(max_error(r.solution, xy), 1e-10);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!g.on_box_boundary(g.unravel(i))) continue;
    else EXPECT_EQ(r.solution[i], xy(g.node(i)));
}

TEST(Elliptic, VariableCoefficientSecondOrder) {
  auto xy = [](const Point& x) { return x[0] * x[1]; };
  std::vector<double> errs;
  for (double h : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
    auto g = GridSpec::centered(2, 2.0, h);
    auto op = CoefficientField::scalar(g, [](const Point& x) { return hfun(x[0] * x[0] - x[1] * x[1]); }, 1.0 / 3, 8.0);
    const SolveReport r = solve_dirichlet({op, Region::box(g), xy}, 1e-9);
    errs.push_back(max_error(r.solution, xy));
  }
  EXPECT_LE(errs[2], 1e-2);
  EXPECT_GE(std::log2(errs[1] / errs[2]), 1.8);
}

TEST(Elliptic, ResidualNorm) {
  auto g = GridSpec::centered(2, 1.0, 1.0 / 128);
  auto id = CoefficientField::identity(g);
  EXPECT_LE(residual_norm(ScalarField::sample(g, [](const Point& x) { return x[0] * x[1]; }), id), 1e-12);
  EXPECT_GT(residual_norm(ScalarField::sample(g, [](const Point& x) { return x[0] * x[0]; }), id), 0.1);
  auto g3 = GridSpec::centered(3, 1.0, 1.0 / 32);
  auto f3 = ScalarField::sample(g3, [](const Point& x) { return std::sin(x[2]) * std::exp(x[0]); });
  EXPECT_LE(residual_norm(f3, CoefficientField::identity(g3)), 1e-3);
  auto other = GridSpec::centered(2, 1.0, 1.0 / 64);
  EXPECT_THROW(residual_norm(ScalarField::sample(other, [](const Point&) { return 1.0; }), id), Error);
}

TEST(Elliptic, MaximumPrincipleAndLinearity) {
  auto g = GridSpec::centered(2, 1.0, 1.0 / 32);
  auto op = CoefficientField::scalar(g, [](const Point& x) { return 1.5 + 0.3 * std::sin(2 * x[0] + x[1]); }, 0.5, 2.0);
  auto g1 = [](const Point& x) { return std::cos(3 * x[0]) + x[1] * x[1]; };
  auto g2 = [](const Point& x) { return std::abs(x[0] - 0.2) - x[1]; };
  const auto s1 = solve_dirichlet({op, Region::box(g), g1}, 1e-9).solution;
  const auto s2 = solve_dirichlet({op, Region::box(g), g2}, 1e-9).solution;
  const auto s12 = solve_dirichlet({op, Region::box(g), [&](const Point& x) { return 2 * g1(x) - 3 * g2(x); }}, 1e-9).solution;
  double bmin = 1e300, bmax = -1e300, imin = 1e300, imax = -1e300, lin = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const bool b = g.on_box_boundary(g.unravel(i));
    (b ? bmin : imin) = std::min(b ? bmin : imin, s1[i]);
    (b ? bmax : imax) = std::max(b ? bmax : imax, s1[i]);
    lin = std::max(lin, std::abs(s12[i] - 2 * s1[i] + 3 * s2[i]));
  }
  EXPECT_GE(imin, bmin - 1e-12);
  EXPECT_LE(imax, bmax + 1e-12);
  EXPECT_LE(lin, 1e-8);
}

TEST(Elliptic, CutCellDiskBoundary) {
  // harmonic data x^2 - y^2 on the unit disk, imposed at the cut points
  auto exact = [](const Point& x) { return x[0] * x[0] - x[1] * x[1] + 0.5 * x[0]; };
  std::vector<double> errs;
  for (double h : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
    auto g = GridSpec::centered(2, 1.25, h);
    std::vector<double> lev(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Point p = g.node(i);
      lev[i] = 1.0 - (p[0] * p[0] + p[1] * p[1]);
    }
    DirichletProblem p{CoefficientField::identity(g), Region::from_levels(g, {lev}), exact};
    const SolveReport r = solve_dirichlet(p, 1e-9);
    double e = 0;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (p.region.inside[i]) e = std::max(e, std::abs(r.solution[i] - exact(g.node(i))));
    errs.push_back(e);
  }
  EXPECT_LE(errs[2], 1e-3);
  EXPECT_GE(std::log2(errs[1] / errs[2]), 1.5);
}

TEST(Elliptic, MixedCoefficientsSymmetric) {
  // u = xy + f(z) with a constant cross coefficient solves the Example 1.6 type operator
  auto g = GridSpec::centered(3, 1.0, 1.0 / 8);
  auto op = CoefficientField::full(g, [](const Point& x) {
    const double c = -0.05 * std::sin(x[2]);
    return FullMatrix{{{1, c, 0}, {c, 1, 0}, {0, 0, 1}}};
  }, 0.8, 1.0);
  const DiscreteSystem s = DiscreteSystem::assemble(op, Region::box(g));
  std::vector<double> a(s.unknowns()), b(s.unknowns()), Aa, Ab;
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = std::sin(0.37 * i);
    b[i] = std::cos(0.11 * i * i);
  }
  s.apply(a, Aa);
  s.apply(b, Ab);
  double ab = 0, ba = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * Ab[i];
    ba += b[i] * Aa[i];
  }
  EXPECT_NEAR(ab, ba, 1e-9 * std::abs(ab));
}

TEST(Elliptic, RejectsBadInputs) {
  auto g = GridSpec::centered(2, 1.0, 1.0 / 8);
  auto weak = CoefficientField::scalar(g, [](const Point&) { return 0.1; }, 0.5, 1.0);
  try {
    solve_dirichlet({weak, Region::box(g), [](const Point&) { return 0.0; }}, 1e-8);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CoefficientValidation);
  }
  EXPECT_THROW(solve_dirichlet({CoefficientField::identity(g), Region::box(g), [](const Point&) { return 0.0; }}, 0.0),
               Error);
}
