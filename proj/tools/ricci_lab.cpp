#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ricci/moser.hpp"
#include "ricci/scenario.hpp"

namespace fs = std::filesystem;
using namespace ricci;

namespace {

constexpr int kExitCheck = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Overrides {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int cadence = -1;
  bool dense = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Scenario file (JSON)")->required();
  cmd->add_option("--out", o.out, "Output directory (overrides output.dir)");
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&o](const std::uint64_t& s) { o.seed = s; o.seed_set = true; }, "Sobolev RNG seed");
  cmd->add_option("--cadence", o.cadence, "Record every N-th step");
  cmd->add_flag("--dense-centers", o.dense, "Track energy at every node");
}

ScenarioConfig load(const Overrides& o) {
  auto c = load_config(o.config);
  if (!o.out.empty()) c.output_dir = o.out;
  if (o.seed_set) c.seed = o.seed;
  if (o.cadence >= 0) c.cadence = o.cadence;
  if (o.dense) c.dense_centers = true;
  validate_config(c);
  return c;
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

void print_checks(const EstimateReport& report) {
  for (const auto& c : report.checks) {
    std::printf("  %-6s %-20s %-4s constant=%.6g%s%s\n", c.display.c_str(), c.name.c_str(),
                c.pass ? "ok" : "FAIL", c.fitted_constant, c.note.empty() ? "" : "  ", c.note.c_str());
  }
}

int run_one(const ScenarioConfig& config, const fs::path& dir, ScenarioResult* keep = nullptr) {
  auto result = run_scenario(config);
  write_file(dir / (config.name + ".csv"), trace_csv(result.trace));
  write_file(dir / (config.name + ".report.json"), report_json(result.report, result.trace));
  std::printf("%s: %s at t=%.6g after %zu steps\n", config.name.c_str(),
              to_string(result.trace.termination).c_str(), result.trace.final_time,
              result.trace.steps);
  if (!result.trace.breach.empty()) std::printf("  breach %s\n", result.trace.breach.c_str());
  if (!result.trace.failure.empty()) std::printf("  failure: %s\n", result.trace.failure.c_str());
  print_checks(result.report);
  const int code = result.exit_code;
  if (keep) *keep = std::move(result);
  return code;
}

int cmd_run(const Overrides& o) {
  const auto config = load(o);
  return run_one(config, config.output_dir);
}

int cmd_verify(const Overrides& o, const std::string& trace_path) {
  const auto config = load(o);
  std::ifstream in(trace_path);
  if (!in) throw ConfigError("cannot read " + trace_path);
  std::stringstream buf;
  buf << in.rdbuf();
  const auto trace = trace_from_series(config, parse_trace_csv(buf.str()));
  auto report = verify_trace(trace, effective_verification(config));
  report.config_echo = config_to_json(config);
  print_checks(report);
  write_file(fs::path(config.output_dir) / (config.name + ".verify.json"), report_json(report, trace));
  return report.all_pass() ? 0 : kExitCheck;
}

int cmd_oracle(const std::string& name) {
  const auto out = run_oracle(name);
  std::printf("%s: max deviation %.3e (tolerance %.1e) %s\n  %s\n", out.name.c_str(),
              out.max_deviation, out.tolerance, out.pass ? "ok" : "FAIL", out.detail.c_str());
  return out.pass ? 0 : kExitCheck;
}

double constant_of(const EstimateReport& r, const char* name) {
  const auto* c = r.find(name);
  return c ? c->fitted_constant : std::numeric_limits<double>::quiet_NaN();
}

int cmd_sweep(const Overrides& o, const std::string& parameter, const std::vector<double>& values,
              const std::vector<std::string>& expectations) {
  if (values.empty()) throw ConfigError("sweep: empty value list");
  const auto base = load(o);
  // Validate every point before running any of them.
  std::vector<ScenarioConfig> configs;
  for (double v : values) {
    auto c = base;
    apply_parameter(c, parameter, v);
    std::ostringstream name;
    name << base.name << "_" << parameter << "_" << v;
    c.name = name.str();
    configs.push_back(std::move(c));
  }
  const std::vector<std::string> columns = {"f_envelope", "u_envelope", "smoothing_metric",
                                            "smoothing_rm", "smoothing_ric", "diameter_control"};
  for (const auto& e : expectations) {
    const auto colon = e.find(':');
    const auto key = e.substr(0, colon);
    const auto dir = colon == std::string::npos ? "" : e.substr(colon + 1);
    if (std::find(columns.begin(), columns.end(), key) == columns.end() ||
        (dir != "nondecreasing" && dir != "nonincreasing")) {
      throw ConfigError("sweep: bad --expect '" + e + "' (KEY:nondecreasing|nonincreasing)");
    }
  }

  std::string table = parameter + ",exit," + [&] {
    std::string h;
    for (std::size_t i = 0; i < columns.size(); ++i) h += (i ? "," : "") + columns[i];
    return h;
  }() + "\n";
  std::vector<std::vector<double>> rows;
  int worst = 0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    ScenarioResult result;
    const int code = run_one(configs[i], fs::path(base.output_dir), &result);
    if (code == kExitNumerical) worst = kExitNumerical;
    else if (code != 0 && worst == 0) worst = code;
    std::vector<double> row;
    const bool has_a = result.trace.sobolev_initial > 0.0;
    const auto env = has_a ? prop23_check(result.trace) : Prop23Result{};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.push_back(has_a ? env.f_envelope : nan);
    row.push_back(has_a ? env.u_envelope : nan);
    for (const char* name : {"smoothing_metric", "smoothing_rm", "smoothing_ric", "diameter_control"}) {
      row.push_back(constant_of(result.report, name));
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g,%d", values[i], code);
    table += buf;
    for (double x : row) {
      std::snprintf(buf, sizeof buf, ",%.17g", x);
      table += buf;
    }
    table += "\n";
    rows.push_back(std::move(row));
  }
  write_file(fs::path(base.output_dir) / (base.name + "_sweep_" + parameter + ".csv"), table);
  std::fputs(table.c_str(), stdout);

  for (const auto& e : expectations) {
    const auto colon = e.find(':');
    const auto key = e.substr(0, colon);
    const bool up = e.substr(colon + 1) == "nondecreasing";
    const std::size_t col = std::find(columns.begin(), columns.end(), key) - columns.begin();
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double a = rows[i - 1][col], b = rows[i][col];
      if (up ? !(b >= a) : !(b <= a)) {
        std::printf("expectation %s violated between rows %zu and %zu\n", e.c_str(), i - 1, i);
        if (worst == 0) worst = kExitCheck;
      }
    }
  }
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ricci-lab: numerical Ricci flow experiments"};
  app.require_subcommand(1);

  Overrides run_o, sweep_o, verify_o;
  auto* run = app.add_subcommand("run", "Run a scenario, write its trace CSV and report");
  add_common(run, run_o);

  std::string oracle_case;
  auto* oracle = app.add_subcommand("oracle", "Compare against a closed-form case");
  oracle->add_option("case", oracle_case, "einstein | flat | berger | heat-eigenmode | moser-schedule")
      ->required();

  std::string parameter;
  std::vector<double> values;
  std::vector<std::string> expectations;
  auto* sweep = app.add_subcommand("sweep", "Run a scenario over a list of parameter values");
  add_common(sweep, sweep_o);
  sweep->add_option("--param", parameter, "epsilon_p | resolution | dt_safety | r")->required();
  sweep->add_option("--values", values, "Comma-separated values")->delimiter(',');
  sweep->add_option("--expect", expectations, "KEY:nondecreasing or KEY:nonincreasing");

  std::string trace_path;
  auto* verify = app.add_subcommand("verify", "Re-run the checks on an existing trace CSV");
  add_common(verify, verify_o);
  verify->add_option("--trace", trace_path, "Trace CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_o);
    if (*oracle) return cmd_oracle(oracle_case);
    if (*sweep) return cmd_sweep(sweep_o, parameter, values, expectations);
    if (*verify) return cmd_verify(verify_o, trace_path);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return kExitConfig;
  } catch (const Error& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  }
  return kExitConfig;
}
