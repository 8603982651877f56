#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "nodal/field_io.hpp"
#include "nodal/grid.hpp"

using namespace nodal;

namespace {

GridSpec unit_grid(double h = 1.0 / 128) { return GridSpec::box(2, {-1, -1, 0}, {1, 1, 0}, h); }

}  // namespace

TEST(FieldCore, LinearFieldReproducedExactly) {
  auto f = ScalarField::sample(unit_grid(), [](const Point& p) { return p[0]; });
  const Evaluation e = eval_with_gradient(f, {0.3, 0.7, 0});
  EXPECT_NEAR(e.value, 0.3, 1e-15);
  EXPECT_NEAR(e.gradient[0], 1.0, 1e-12);
  EXPECT_NEAR(e.gradient[1], 0.0, 1e-12);
}

TEST(FieldCore, ConstantField) {
  auto f = ScalarField::sample(unit_grid(), [](const Point&) { return 5.0; });
  const Evaluation e = eval_with_gradient(f, {-0.41, 0.13, 0});
  EXPECT_EQ(e.value, 5.0);
  EXPECT_EQ(e.gradient[0], 0.0);
  EXPECT_EQ(e.gradient[1], 0.0);
}

TEST(FieldCore, BilinearValueAndGradient) {
  auto f = ScalarField::sample(unit_grid(), [](const Point& p) { return p[0] * p[1]; });
  const Evaluation e = eval_with_gradient(f, {0.5, 0.25, 0});
  EXPECT_NEAR(e.value, 0.125, 1e-12);
  EXPECT_NEAR(e.gradient[0], 0.25, 1e-3);
  EXPECT_NEAR(e.gradient[1], 0.5, 1e-3);
}

TEST(FieldCore, GradientErrorDecaysSecondOrder) {
  auto f = [](const Point& p) { return std::sin(2 * p[0]) * std::exp(p[1]); };
  std::vector<double> errs;
  for (double h : {1.0 / 64, 1.0 / 128, 1.0 / 256}) {
    auto s = ScalarField::sample(unit_grid(h), f);
    double m = 0.0;
    for (const Point& p : {Point{0.5, 0.25, 0}, Point{-0.31, 0.62, 0}, Point{0.05, -0.7, 0}}) {
      const Evaluation e = eval_with_gradient(s, p);
      m = std::max({m, std::abs(e.gradient[0] - 2 * std::cos(2 * p[0]) * std::exp(p[1])),
                    std::abs(e.gradient[1] - f(p))});
    }
    errs.push_back(m);
  }
  EXPECT_GE(std::log2(errs[0] / errs[1]), 1.7);
  EXPECT_GE(std::log2(errs[1] / errs[2]), 1.7);
}

TEST(FieldCore, NodesAreExact) {
  auto f = ScalarField::sample(unit_grid(1.0 / 16), [](const Point& p) { return std::sin(3 * p[0]) * p[1]; });
  const GridSpec& g = f.grid();
  for (std::size_t i = 0; i < g.size(); i += 7) EXPECT_EQ(f.eval(g.node(i)), f[i]);
}

TEST(FieldCore, OutsideBoxThrows) {
  auto f = ScalarField::sample(unit_grid(), [](const Point& p) { return p[0]; });
  try {
    f.eval({1.5, 0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::OutOfDomain);
  }
}

TEST(FieldCore, SupNormOnBall) {
  auto g = GridSpec::centered(2, 9.0, 1.0 / 32);
  auto f = ScalarField::sample(g, [](const Point& p) { return p[0] * p[1]; });
  EXPECT_NEAR(sup_norm_on_ball(f, {{0, 0, 0}, 1.0}), 0.5, 1e-4);
  EXPECT_NEAR(sup_norm_on_ball(f, {{0, 0, 0}, 8.0}), 32.0, 1e-2);
  double prev = 0.0;
  for (double r : {0.5, 1.0, 2.0, 3.0, 5.0}) {
    const double s = sup_norm_on_ball(f, {{0.3, -0.2, 0}, r});
    EXPECT_GE(s, prev);
    prev = s;
  }
  auto z = ScalarField::sample(g, [](const Point&) { return 0.0; });
  EXPECT_EQ(sup_norm_on_ball(z, {{1, 1, 0}, 2.0}), 0.0);
}

TEST(FieldCore, DegenerateBall) {
  auto f = ScalarField::sample(unit_grid(1.0 / 8), [](const Point& p) { return p[0]; });
  try {
    sup_norm_on_ball(f, {{0.06, 0.06, 0}, 0.01});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateBall);
  }
}

TEST(FieldCore, NfieldRoundTripIsBitExact) {
  for (int dim : {2, 3}) {
    auto g = GridSpec::centered(dim, 1.0, 1.0 / 8);
    auto f = ScalarField::sample(g, [](const Point& p) { return std::exp(p[0]) * std::cos(7 * p[1]) + p[2] / 3; });
    std::stringstream ss;
    write_nfield(ss, f);
    const ScalarField r = read_nfield(ss);
    ASSERT_TRUE(r.grid().same_as(g));
    EXPECT_EQ(r.grid().origin, g.origin);
    EXPECT_EQ(r.grid().spacing, g.spacing);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(std::bit_cast<std::uint64_t>(r[i]), std::bit_cast<std::uint64_t>(f[i]));
  }
}

TEST(FieldCore, NfieldRejectsTruncation) {
  auto f = ScalarField::sample(unit_grid(0.5), [](const Point& p) { return p[0]; });
  std::stringstream ss;
  write_nfield(ss, f);
  std::string s = ss.str();
  s.pop_back();
  std::stringstream bad(s);
  EXPECT_THROW(read_nfield(bad), Error);
  std::stringstream extra(ss.str() + "x");
  EXPECT_THROW(read_nfield(extra), Error);
}

TEST(FieldCore, CoefficientValidation) {
  auto g = unit_grid(1.0 / 16);
  auto ok = CoefficientField::scalar(g, [](const Point& p) { return 2.0 + std::tanh(p[0] * p[0] - p[1] * p[1]); }, 1.0 / 3, 4.0);
  EXPECT_NO_THROW(ok.validate());
  auto weak = CoefficientField::scalar(g, [](const Point&) { return 0.2; }, 0.5, 1.0);
  EXPECT_THROW(weak.validate(), Error);
  EXPECT_THROW(CoefficientField::full(g, [](const Point&) { return FullMatrix{{{1, 0.2, 0}, {0.1, 1, 0}, {0, 0, 1}}}; }, 0.5, 1.0),
               Error);
  auto steep = CoefficientField::scalar(g, [](const Point& p) { return 1.5 + 0.4 * std::sin(40 * p[0]); }, 0.5, 1.0);
  EXPECT_THROW(steep.validate(), Error);
}

TEST(FieldCore, MuIsOneForIdentity) {
  auto g = unit_grid(1.0 / 16);
  auto id = CoefficientField::identity(g);
  EXPECT_DOUBLE_EQ(id.mu({0.3, 0.2, 0}, {0.1, -0.1, 0}), 1.0);
}
