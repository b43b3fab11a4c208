// Command line front end: run scenarios, verify identity tables, list the
// bundled fixtures. Exit codes: 0 all checks pass, 1 numeric failure,
// 2 configuration error.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rinverse/rinverse.hpp"

namespace {

void print_table(const rinverse::ResidualReport& report) {
  std::printf("scenario: %s   cloud points: %zu\n", report.scenario.c_str(), report.cloud_size);
  for (const rinverse::CheckRow& c : report.checks) {
    std::printf("  [%s] %-34s max dev %.3e%s%s\n", c.pass ? "pass" : "FAIL", c.name.c_str(),
                c.max_deviation, c.note.empty() ? "" : "  -- ", c.note.c_str());
  }
  for (const rinverse::IdentityRow& row : report.identities) {
    if (row.skipped)
      std::printf("  [skip] %-34s (%s)\n", row.name.c_str(), row.note.c_str());
    else
      std::printf("  [%s] %-34s max dev %.3e  tol %.1e%s%s\n", row.pass ? "pass" : "FAIL",
                  row.name.c_str(), row.max_deviation, row.tolerance,
                  row.note.empty() ? "" : "  -- ", row.note.c_str());
  }
  std::printf("residual: max %.3e  mean %.3e  p50 %.3e  p90 %.3e  p99 %.3e\n",
              report.residual_max, report.residual_mean, report.residual_p50, report.residual_p90,
              report.residual_p99);
  std::printf("%s (%.2f s)\n", report.pass ? "PASS" : "FAIL", report.wall_seconds);
}

int run_report(const std::string& path, const std::string& out_dir, const std::string& format,
               int jet_order, double quad_tol, bool emit_files) {
  rinverse::Scenario sc = rinverse::load_scenario(path);
  if (jet_order > 0) sc.jet_order = jet_order;
  if (quad_tol > 0.0) sc.quad.tolerance = quad_tol;
  if (sc.jet_order < 1 || sc.jet_order > rinverse::kMaxJetOrder)
    throw rinverse::ConfigError("--jet-order out of range");
  if (sc.jet_order < sc.op.total_degree())
    throw rinverse::ConfigError("--jet-order below operator total degree");

  const rinverse::ResidualReport report = rinverse::run_scenario(sc);
  print_table(report);
  if (emit_files) {
    if (format == "json" || format == "both")
      std::printf("wrote %s\n",
                  rinverse::emit(report, out_dir, rinverse::ReportFormat::JsonFormat).c_str());
    if (format == "csv" || format == "both")
      std::printf("wrote %s\n",
                  rinverse::emit(report, out_dir, rinverse::ReportFormat::CsvFormat).c_str());
  }
  return report.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"right inverses of directional derivative operators on sampled compact sets"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir = "out", format = "json";
  int jet_order = 0;
  double quad_tol = 0.0;

  CLI::App* run = app.add_subcommand("run", "run a scenario and emit a report");
  run->add_option("scenario", scenario_path, "scenario JSON file")->required();
  run->add_option("--out", out_dir, "output directory (default: out)");
  run->add_option("--format", format, "json|csv|both (default: json)")
      ->check(CLI::IsMember({"json", "csv", "both"}));
  run->add_option("--jet-order", jet_order, "override the scenario jet order");
  run->add_option("--quad-tol", quad_tol, "override the quadrature tolerance");

  CLI::App* verify = app.add_subcommand("verify", "run the identity table only (no files)");
  verify->add_option("scenario", scenario_path, "scenario JSON file")->required();
  verify->add_option("--jet-order", jet_order, "override the scenario jet order");
  verify->add_option("--quad-tol", quad_tol, "override the quadrature tolerance");

  CLI::App* fixtures = app.add_subcommand("fixtures", "fixture utilities");
  CLI::App* fixtures_list = fixtures->add_subcommand("list", "list bundled fixtures");

  try {
    app.parse(argc, argv);

    if (fixtures_list->parsed()) {
      for (const std::string& name : rinverse::fixture_names()) {
        const rinverse::FixtureSet set = rinverse::fixture(name);
        std::printf("%-12s %zu descriptor(s)  %s\n", set.name.c_str(), set.descriptors.size(),
                    set.description.c_str());
        for (const rinverse::NormalSetDescriptor& d : set.descriptors) {
          std::printf("             direction (");
          for (std::size_t i = 0; i < d.direction.size(); ++i)
            std::printf("%s%.4g", i ? ", " : "", d.direction[i]);
          std::printf("), %zu base samples\n", d.base_samples.size());
        }
      }
      return 0;
    }
    if (run->parsed()) return run_report(scenario_path, out_dir, format, jet_order, quad_tol, true);
    if (verify->parsed())
      return run_report(scenario_path, out_dir, format, jet_order, quad_tol, false);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const rinverse::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
