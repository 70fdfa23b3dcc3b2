// nh-sense: scenario-driven front end.
//
//   nh-sense run <scenario.json> [--out DIR] [--format csv,json,svg] [--threads N] [--seed S]
//   nh-sense validate <scenario.json>
//   nh-sense netlist <scenario.json>
//
// Exit codes: 0 ok, 2 validation error, 3 numerical failure, 1 anything else.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "nhsense/report.hpp"

namespace {

using namespace nhsense;

int fail(const char* kind, const std::string& message, int code, const ScenarioError* where = nullptr) {
  nlohmann::ordered_json err;
  err["error"]["kind"] = kind;
  err["error"]["message"] = where ? where->detail() : message;
  if (where) {
    err["error"]["path"] = where->path();
    err["error"]["line"] = where->line();
  }
  std::cerr << err.dump() << "\n";
  return code;
}

unsigned env_threads() {
  const char* v = std::getenv("NH_SENSE_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const unsigned long n = std::strtoul(v, &end, 10);
  if (*end != '\0' || n == 0 || n > 1024)
    throw ValidationError("NH_SENSE_THREADS must be an integer in 1..1024 (got '" + std::string(v) + "')");
  return static_cast<unsigned>(n);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-Hermitian skin-effect sensor simulator", "nh-sense"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string path;
  std::string out_dir;
  std::vector<std::string> formats;
  unsigned threads = 0;
  std::uint64_t seed = 0;

  auto* run = app.add_subcommand("run", "Run a scenario and write its artifacts");
  run->add_option("scenario", path, "Scenario JSON file")->required();
  auto* out_opt = run->add_option("--out", out_dir, "Output directory (overrides output.directory)");
  auto* fmt_opt = run->add_option("--format", formats, "Comma-separated subset of csv,json,svg")
                      ->delimiter(',')
                      ->check(CLI::IsMember({"csv", "json", "svg"}));
  run->add_option("--threads", threads, "Worker threads (default: NH_SENSE_THREADS, else 1)")
      ->check(CLI::Range(1u, 1024u));
  auto* seed_opt = run->add_option("--seed", seed, "Seed for randomized experiments (overrides parameters.seed)");

  auto* validate = app.add_subcommand("validate", "Parse and validate a scenario, print its canonical form");
  validate->add_option("scenario", path, "Scenario JSON file")->required();

  auto* netlist = app.add_subcommand("netlist", "Print the netlist of a scenario's circuit");
  netlist->add_option("scenario", path, "Scenario JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const Scenario scenario = parse_scenario(path);
    if (*validate) {
      std::cout << serialize_scenario(scenario);
      return 0;
    }
    if (*netlist) {
      if (!scenario.circuit) throw ScenarioError("circuit", 0, "netlist needs a circuit block");
      std::cout << export_netlist(synthesize_circuit(*scenario.circuit));
      return 0;
    }
    RunOptions options;
    options.threads = threads > 0 ? threads : env_threads();
    if (*out_opt) options.out_dir = out_dir;
    if (*fmt_opt) options.formats = formats;
    if (*seed_opt) options.seed = seed;
    const auto summary = run_scenario(scenario, options);
    for (const auto& f : summary.files) std::cout << (summary.directory / f).string() << "\n";
    return 0;
  } catch (const ScenarioError& e) {
    return fail("validation", e.what(), 2, &e);
  } catch (const ValidationError& e) {
    return fail("validation", e.what(), 2);
  } catch (const NumericalError& e) {
    return fail("numerical", e.what(), 3);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
}
