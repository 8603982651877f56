// Acceptance run: one PASS/FAIL line per criterion, exit status 0 iff all pass.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "nodal/scenarios.hpp"

using namespace nodal;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

CheckResult run_one(const std::string& scenario, Params params, const std::string& check, Params cp = {}) {
  ScenarioSpec spec;
  spec.id = scenario;
  spec.name = scenario;
  spec.params = std::move(params);
  spec.checks = {check};
  spec.check_params[check] = std::move(cp);
  const auto rep = run_scenario(spec);
  if (!rep.error.empty()) throw Error(ErrorKind::Precondition, rep.error);
  if (!rep.checks.at(0).error.empty()) throw Error(ErrorKind::Precondition, rep.checks[0].error);
  return rep.checks.at(0);
}

ScalarField poly(int d, const GridSpec& g) {
  const auto s = build_scenario("harmonic_poly", {{"d", std::to_string(d)}});
  return s.realize(g).u;
}

const std::vector<double> kRadii{0.25, 0.5, 1, 2, 4};

// 1
Outcome frequency_exactness() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto g = GridSpec::centered(2, 4.25, 1.0 / 128);
  double worst = 0.0;
  for (int d = 1; d <= 3; ++d) {
    const auto prof = frequency_and_H(poly(d, g), CoefficientField::identity(g), {0, 0, 0}, kRadii);
    for (double n : prof.N_values) worst = std::max(worst, std::abs(n - d) / d);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst <= 0.02 && secs < 60.0, fmt("max |N-d|/d = %.3e, runtime %.1f s", worst, secs)};
}

// 2
Outcome doubling_calibration() {
  const auto g = GridSpec::centered(2, 4.25, 1.0 / 128);
  double worst = 0.0;
  for (int d = 1; d <= 3; ++d) {
    const auto prof = frequency_and_H(poly(d, g), CoefficientField::identity(g), {0, 0, 0}, kRadii);
    for (std::size_t k = 0; k < prof.radii.size(); ++k) {
      const double nd = std::isfinite(prof.ND_values[k]) ? prof.ND_values[k]
                                                         : doubling_index(poly(d, g), {{0, 0, 0}, prof.radii[k]});
      worst = std::max(worst, std::abs(nd - d));
    }
  }
  return {worst <= 0.05, fmt("max |N_D - d| = %.3e", worst)};
}

std::vector<ScalarField> random_family(const GridSpec& g) {
  std::vector<ScalarField> out;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const oracle::RandomHarmonic rh(static_cast<int>(1 + seed % 4), seed);
    out.push_back(ScalarField::sample(g, [&rh](const Point& p) { return rh(p); }, "w"));
  }
  return out;
}

// 3
Outcome monotonicity() {
  const auto g = GridSpec::centered(2, 4.25, 1.0 / 64);
  double worst = 0.0;
  for (const auto& w : random_family(g)) {
    const auto prof = frequency_and_H(w, CoefficientField::identity(g), {0, 0, 0}, {0.25, 0.5, 0.75, 1, 1.5, 2, 3, 4});
    worst = std::max(worst, monotonicity_violation(prof, 0.0));
  }
  return {worst <= 1e-2, fmt("worst violation %.3e over 10 seeds", worst)};
}

// 4
Outcome three_spheres() {
  const auto g = GridSpec::centered(2, 2.25, 1.0 / 64);
  std::vector<ThreeSphereSample> all;
  for (const auto& w : random_family(g)) {
    const auto s = three_sphere_samples(w, 1.0, false);
    all.insert(all.end(), s.begin(), s.end());
  }
  const auto fit = fit_three_spheres(all);
  return {fit.holds && fit.alpha > 0.0 && fit.alpha < 1.0,
          fmt("K = %.4g, alpha = %.4f over %zu samples", fit.K, fit.alpha, fit.samples)};
}

std::vector<Point> log_spaced_starts(int which) {
  // which = 1: f = x, starts (d, y); which = 2: f = xy, starts (x, d) on the positive quadrant
  std::vector<Point> s;
  for (int k = 0; k < 40; ++k) {
    const double d = std::exp2(-12.0 + 9.0 * k / 39.0);
    const double t = -0.5 + static_cast<double>(k % 8) / 8.0;
    s.push_back(which == 1 ? Point{d, t, 0} : Point{0.5 + 0.25 * (t + 0.5), d, 0});
  }
  return s;
}

ChainBatch chains_for(int which, double h) {
  const auto g = GridSpec::centered(2, 2.25, h);
  const auto w = poly(which, g);
  return calibrate_and_run(w, distance_to_zero(w), log_spaced_starts(which));
}

// 5
Outcome harnack_chain() {
  std::string d;
  bool ok = true;
  for (int which : {1, 2}) {
    const auto b = chains_for(which, 1.0 / 128);
    ok = ok && b.c4 > 0.0 && b.min_ratio > 1.05 && b.r_squared >= 0.9;
    d += fmt("%s: theta %.2f c4 %.3g ratio %.3f R2 %.4f xi1 %.4f", which == 1 ? "x" : "xy", b.theta, b.c4,
             b.min_ratio, b.r_squared, b.xi1);
    if (which == 1) {
      const double pred = linear_xi1_prediction(b.theta);
      ok = ok && std::abs(b.xi1 / pred - 1.0) <= 0.2;
      d += fmt(" (predicted %.4f); ", pred);
    }
  }
  return {ok, d};
}

// 6
Outcome corkscrew_stability() {
  std::string d;
  bool ok = true;
  for (int which : {1, 2}) {
    const double a = chains_for(which, 1.0 / 64).c4, b = chains_for(which, 1.0 / 128).c4;
    const double ch = std::abs(b / a - 1.0);
    ok = ok && ch < 0.2;
    d += fmt("%s: c4 %.4g -> %.4g (%.1f%%) ", which == 1 ? "x" : "xy", a, b, 100 * ch);
  }
  return {ok, d};
}

// 7
Outcome boundary_harnack() {
  const auto s = build_scenario("product_pair", {});
  const Fields f = s.realize(s.grid);
  const auto du = distance_to_zero(f.u), dv = distance_to_zero(f.v);
  const auto ratio = ratio_field(f.v, f.u, du, &dv);
  const auto ub = upper_bound_constant(f.v, f.u, ratio, {{0, 0, 0}, 1.0}, {{0, 0, 0}, 8.0});
  double err = 0.0;
  const GridSpec& g = s.grid;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!ratio.mask[i]) continue;
    const Point p = g.node(i);
    err = std::max(err, std::abs(ratio.values[i] - (p[0] * p[0] - p[1] * p[1])));
  }
  const bool ok = std::abs(ub.sup_ratio - 1.0) <= 0.01 && std::abs(ub.C_emp * 32.0 - 1.0) <= 0.05 && err <= 1e-8;
  return {ok, fmt("sup|v/u| = %.5f, C_emp = %.6f (1/32 = 0.03125), ratio error %.2e", ub.sup_ratio, ub.C_emp, err)};
}

// 8
Outcome holder_decay() {
  const auto s = build_scenario("product_pair", {{"half_width", "1.05"}, {"h", "1/1024"}});
  const Fields f = s.realize(s.grid);
  const auto du = distance_to_zero(f.u);
  const auto ratio = ratio_field(f.v, f.u, du);
  const auto prof = holder_probe(ratio, du, {0, 0, 0}, {1, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01});
  const double decay = prof.osc.back() / prof.osc.front();
  const bool ok = std::abs(prof.alpha_fit - 2.0) <= 0.05 && decay <= 0.01;
  return {ok, fmt("alpha_fit = %.4f, osc(0.01)/osc(1) = %.3e", prof.alpha_fit, decay)};
}

// 9
Outcome frequency_transfer() {
  const auto r = run_one("operator_pair_h", {}, "transfer", {{"residual_tol", "1e-8"}});
  const double D = r.values.at("D_emp");
  const bool ok = r.values.at("certified") > 0.5 && std::abs(D - 2.0) <= 0.05;
  return {ok, fmt("D_emp = %.4f, residuals %.2e / %.2e", D, r.values.at("residual_u"), r.values.at("residual_v"))};
}

// 10
Outcome carleson() {
  std::string d;
  bool ok = true;
  struct Case {
    const char* label;
    int deg;
    const char* point;
  };
  for (const Case c : {Case{"quadrant", 2, "0.5 0.5"}, Case{"half-plane", 1, "1 0"}}) {
    double M[2];
    int k = 0;
    for (const char* h : {"1/64", "1/128"}) {
      const auto r = run_one("harmonic_poly", {{"d", std::to_string(c.deg)}, {"h", h}, {"half_width", "3.5"}},
                             "carleson", {{"point", c.point}});
      M[k++] = r.values.at("M_emp");
    }
    const double ch = std::abs(M[1] / M[0] - 1.0);
    ok = ok && std::isfinite(M[0]) && std::isfinite(M[1]) && ch <= 0.1;
    d += fmt("%s: M %.4g -> %.4g (%.1f%%) ", c.label, M[0], M[1], 100 * ch);
  }
  return {ok, d};
}

// 11
Outcome liouville() {
  const auto g = GridSpec::centered(2, 4.25, 1.0 / 64);
  const auto u = poly(2, g);
  const auto v = u.scaled(3.0);
  const auto du = distance_to_zero(u), dv = distance_to_zero(v);
  const auto L = liouville_probe(u, v, du, dv, {1, 2, 4});
  double worst = 0.0;
  for (double c : L.c_fit) worst = std::max(worst, std::abs(c - 3.0));
  const auto e = run_one("exp_family", {}, "liouville", {{"windows", "1 2 4"}});
  const double growth = e.values.at("nd_growth_u");
  const bool ok = worst <= 1e-8 && L.verdict == "proportional" && e.notes.at("verdict") == "frequency-unbounded" &&
                  growth >= 0.5;
  return {ok, fmt("v = 3u: max |c - 3| = %.2e (%s); exp pair: %s, N_D growth %.3f", worst, L.verdict.c_str(),
                  e.notes.at("verdict").c_str(), growth)};
}

// 12
Outcome half_disk_measure() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_one("halfplane_poisson", {{"h", "1/128"}}, "harmonic_measure", {{"oracle", "halfdisk"}});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double err = r.values.at("oracle_max_rel_err"), C = r.values.at("C_emp"),
               nerr = r.values.at("normalization_error");
  const bool ok = err <= 0.02 && C <= 2.5 && nerr <= 1e-6 && secs < 300.0;
  return {ok, fmt("max patch error %.2e, C_emp %.4f, normalization %.1e, runtime %.1f s", err, C, nerr, secs)};
}

std::string suite_path() { return std::string(NODAL_SOURCE_DIR) + "/configs/suite.ini"; }

nlohmann::json g_bundle;
std::string g_bytes[2];

// 14
Outcome determinism() {
  const auto cfg = parse_suite_file(suite_path());
  for (auto& b : g_bytes) {
    const auto r = run_suite(cfg);
    b = r.dump();
    g_bundle = r.bundle;
  }
  return {g_bytes[0] == g_bytes[1], fmt("two suite runs, %zu bytes each, %s", g_bytes[0].size(),
                                        g_bytes[0] == g_bytes[1] ? "identical" : "DIFFERENT")};
}

// 13
Outcome neck_blowup() {
  if (g_bundle.is_null()) determinism();
  for (const auto& row : g_bundle["derived"]) {
    if (row["kind"] != "neck_growth") continue;
    const bool flips = row.contains("connected_from") && row["connected_from"].get<bool>() &&
                       !row["connected_to"].get<bool>();
    const double ratio = row["spread_ratio"].is_null() ? 0.0 : row["spread_ratio"].get<double>();
    return {ratio >= 10.0 && flips,
            fmt("spread ratio %.4g between eps %g and %g; connected %s -> %s", ratio, row["eps_from"].get<double>(),
                row["eps_to"].get<double>(), row.value("connected_from", false) ? "true" : "false",
                row.value("connected_to", false) ? "true" : "false")};
  }
  return {false, "suite produced no neck_growth row"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"frequency exactness", frequency_exactness},
      {"doubling-index calibration", doubling_calibration},
      {"frequency monotonicity", monotonicity},
      {"three spheres", three_spheres},
      {"Harnack chain", harnack_chain},
      {"corkscrew stability", corkscrew_stability},
      {"boundary Harnack upper bound", boundary_harnack},
      {"Holder decay", holder_decay},
      {"frequency transfer", frequency_transfer},
      {"Carleson estimate", carleson},
      {"Liouville probe", liouville},
      {"harmonic measure comparison", half_disk_measure},
      {"neck blow-up", neck_blowup},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("%s %2zu %-30s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria pass\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
