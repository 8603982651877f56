// nodal: command line front end for the scenario suite.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "nodal/field_io.hpp"
#include "nodal/nodal.hpp"

using namespace nodal;

namespace {

Params parse_pairs(const std::vector<std::string>& kv) {
  Params p;
  for (const auto& s : kv) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::Config, "expected key=value, got '" + s + "'");
    p[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return p;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& t : detail::split(s)) out.push_back(detail::parse_number(t, "list"));
  return out;
}

Point parse_point(const std::string& s) { return detail::point({{"p", s}}, "p", {0, 0, 0}); }

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Config, "cannot write " + path);
  return os;
}

int cmd_solve(const std::string& scenario, const std::vector<std::string>& kv, const std::string& field,
              const std::string& out) {
  const Scenario s = build_scenario(scenario, parse_pairs(kv));
  const Fields f = s.realize(s.grid);
  const ScalarField* w = &f.u;
  if (field == "v") {
    if (!f.has_v) throw Error(ErrorKind::Config, scenario + " has no second field");
    w = &f.v;
  } else if (field == "level") {
    if (!f.has_level) throw Error(ErrorKind::Config, scenario + " has no level field");
    w = &f.level;
  }
  write_nfield(out, *w);
  std::cerr << "wrote " << out << " (" << s.grid.size() << " nodes, residual "
            << (field == "v" ? f.residual_v : f.residual_u) << ")\n";
  return 0;
}

int cmd_analyze(const std::string& in, const std::string& center, const std::string& radii, const std::string& csv,
                double region) {
  const ScalarField w = read_nfield(in);
  const auto op = CoefficientField::identity(w.grid());
  const auto prof = frequency_and_H(w, op, parse_point(center), parse_list(radii));
  if (csv.empty()) {
    write_profile_csv(std::cout, prof);
  } else {
    auto os = open_out(csv);
    write_profile_csv(os, prof);
  }
  const double R = region > 0 ? region : std::min(detail::inner_radius(w.grid(), 2 * w.grid().spacing), 5.2);
  const auto part = nodal_domains(w, {{0, 0, 0}, R});
  const auto z = extract_zero_set(w, {{0, 0, 0}, 1.0});
  std::cerr << "domains in B_" << R << ": " << part.domains.size() << ", meeting B_1: " << part.meeting_inner
            << ", zero-set facets in B_1: " << z.facets.size() << ", measure " << z.total_area << "\n";
  return 0;
}

int cmd_chain(const std::string& in, const std::string& starts_path, double theta, const std::string& out) {
  const ScalarField w = read_nfield(in);
  const auto delta = distance_to_zero(w);
  std::ifstream is(starts_path);
  if (!is) throw Error(ErrorKind::Config, "cannot open " + starts_path);
  std::vector<Point> starts;
  for (std::string line; std::getline(is, line);) {
    if (line.empty() || line[0] == '#' || line[0] == 'x') continue;
    starts.push_back(parse_point(line));
  }
  if (starts.empty()) throw Error(ErrorKind::Config, "no start points in " + starts_path);
  auto os = open_out(out);
  os.precision(17);
  os << "chain,step,x,y,z,abs_w,delta,ratio,termination\n";
  for (std::size_t c = 0; c < starts.size(); ++c) {
    const auto ch = build_chain(w, delta, starts[c], theta);
    for (std::size_t i = 0; i < ch.points.size(); ++i) {
      os << c << ',' << i << ',' << ch.points[i][0] << ',' << ch.points[i][1] << ',' << ch.points[i][2] << ','
         << ch.values[i] << ',' << ch.deltas[i] << ',';
      if (i > 0) os << ch.growth_ratios[i - 1];
      os << ',' << to_string(ch.termination) << '\n';
    }
  }
  return 0;
}

int cmd_verify(const std::string& config, const std::string& out_flag) {
  SuiteConfig cfg;
  try {
    cfg = parse_suite_file(config);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  const SuiteResult r = run_suite(cfg);
  const std::string out = !out_flag.empty() ? out_flag : !cfg.output.empty() ? cfg.output : "bundle.json";
  auto os = open_out(out);
  os << r.dump();
  for (const auto& row : r.bundle["summary"])
    std::cout << (row["pass"].get<bool>() ? "PASS " : "FAIL ") << row["scenario"].get<std::string>() << " "
              << row["check"].get<std::string>() << "\n";
  for (const auto& row : r.bundle["derived"])
    std::cout << (row["pass"].get<bool>() ? "PASS " : "FAIL ") << row["kind"].get<std::string>() << "\n";
  return r.exit_code;
}

int cmd_report(const std::string& in, const std::string& format) {
  std::ifstream is(in);
  if (!is) throw Error(ErrorKind::Config, "cannot open " + in);
  const auto b = nlohmann::json::parse(is);
  if (format == "csv") {
    std::cout << "scenario,check,key,value\n";
    std::cout.precision(17);
    for (const auto& s : b["scenarios"]) {
      if (!s.contains("checks")) continue;
      for (const auto& c : s["checks"]) {
        std::cout << s["id"].get<std::string>() << ',' << c["check"].get<std::string>() << ",pass,"
                  << (c["pass"].get<bool>() ? 1 : 0) << '\n';
        for (const auto& [k, v] : c["values"].items()) {
          std::cout << s["id"].get<std::string>() << ',' << c["check"].get<std::string>() << ',' << k << ',';
          if (v.is_null()) std::cout << "nan";
          else std::cout << v.get<double>();
          std::cout << '\n';
        }
      }
    }
    return 0;
  }
  std::size_t pass = 0, total = 0;
  for (const auto& row : b["summary"]) {
    ++total;
    pass += row["pass"].get<bool>();
    std::printf("%-24s %-18s %s%s\n", row["scenario"].get<std::string>().c_str(),
                row["check"].get<std::string>().c_str(), row["pass"].get<bool>() ? "pass" : "FAIL",
                row.value("constant", false) ? " (constant)" : "");
  }
  for (const auto& row : b["derived"]) std::printf("%-43s %s\n", row["kind"].get<std::string>().c_str(),
                                                   row["pass"].get<bool>() ? "pass" : "FAIL");
  std::printf("%zu/%zu checks pass\n", pass, total);
  return b["pass"].get<bool>() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical checks for quantitative unique continuation on nodal domains"};
  app.require_subcommand(1);

  std::string scenario, field = "u", out, in, center = "0,0", radii = "0.25,0.5,1,2,4", csv, starts, format = "summary";
  std::vector<std::string> kv;
  double theta = 0.25, region = 0.0;

  auto* solve = app.add_subcommand("solve", "realize a scenario field and write it as .nfield");
  solve->add_option("scenario", scenario, "scenario name")->required();
  solve->add_option("-p,--param", kv, "scenario parameter key=value");
  solve->add_option("-f,--field", field, "u, v or level")->check(CLI::IsMember({"u", "v", "level"}));
  solve->add_option("-o,--output", out, "output file")->required();

  auto* analyze = app.add_subcommand("analyze", "frequency profile and nodal geometry of a field file");
  analyze->add_option("input", in, ".nfield file")->required();
  analyze->add_option("--center", center, "ball center");
  analyze->add_option("--radii", radii, "radii list");
  analyze->add_option("--region", region, "radius for nodal domain labelling");
  analyze->add_option("-o,--output", csv, "profile CSV (default stdout)");

  auto* chain = app.add_subcommand("chain", "Harnack chains from a start-point file");
  chain->add_option("input", in, ".nfield file")->required();
  chain->add_option("starts", starts, "file with one x,y[,z] per line")->required();
  chain->add_option("--theta", theta, "step parameter in (0, 1/4]");
  chain->add_option("-o,--output", out, "chain CSV")->required();

  auto* verify = app.add_subcommand("verify", "run a suite config and write the report bundle");
  verify->add_option("config", in, "INI suite config")->required();
  verify->add_option("-o,--output", out, "bundle path (default from config, else bundle.json)");

  auto* report = app.add_subcommand("report", "render a report bundle");
  report->add_option("bundle", in, "bundle JSON")->required();
  report->add_option("--format", format, "summary or csv")->check(CLI::IsMember({"summary", "csv"}));

  CLI11_PARSE(app, argc, argv);
  try {
    if (*solve) return cmd_solve(scenario, kv, field, out);
    if (*analyze) return cmd_analyze(in, center, radii, csv, region);
    if (*chain) return cmd_chain(in, starts, theta, out);
    if (*verify) return cmd_verify(in, out);
    if (*report) return cmd_report(in, format);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return e.kind() == ErrorKind::Config ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
