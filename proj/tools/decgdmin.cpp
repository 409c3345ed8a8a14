// Command-line front end: run an experiment, sweep a parameter, or chart a trace.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "decgdmin/harness.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitAllFailed = 2;

std::vector<double> parse_values(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw decgdmin::Error(decgdmin::Errc::ConfigInvalid, "not a number: " + item);
    }
  }
  return out;
}

int report_sweep(const decgdmin::SweepResult& s, const std::string& output) {
  decgdmin::write_sweep(s, output);
  for (const auto& cell : s.cells)
    std::printf("%s=%s -> %s\n", s.param.c_str(), decgdmin::detail::format_value(cell.value).c_str(),
                cell.trace_path.string().c_str());
  std::printf("summary -> %s\n", decgdmin::sibling_path(output, "_sweep_summary").string().c_str());
  return s.failed_trials == s.total_trials ? kExitAllFailed : 0;
}

int cmd_run(const std::string& config_path, const std::string& output) {
  auto config = decgdmin::load_config(config_path);
  if (!output.empty()) config.output = output;
  if (config.sweep) return report_sweep(decgdmin::sweep(config, config.sweep->param, config.sweep->values), config.output);
  const auto result = decgdmin::run_experiment(config);
  decgdmin::write_experiment(result, config.output);
  std::printf("trace -> %s\nsummary -> %s\n", config.output.c_str(),
              decgdmin::sibling_path(config.output, "_summary").string().c_str());
  for (const auto& alg : config.algorithms) {
    const auto err = decgdmin::final_mean(result, alg, &decgdmin::MetricsRecord::error_x);
    const auto se = decgdmin::final_mean(result, alg, &decgdmin::MetricsRecord::se2_node1);
    if (err && se) std::printf("%-14s final error_x %.3e  se2 %.3e\n", alg.c_str(), *err, *se);
  }
  return result.failed_trials == config.trials ? kExitAllFailed : 0;
}

int cmd_sweep(const std::string& config_path, const std::string& param, const std::string& values,
              const std::string& output) {
  auto config = decgdmin::load_config(config_path);
  if (!output.empty()) config.output = output;
  return report_sweep(decgdmin::sweep(config, param, parse_values(values)), config.output);
}

int cmd_chart(const std::string& csv_path, const std::string& x, const std::string& y,
              const std::string& group, const std::string& out) {
  std::ifstream in(csv_path);
  if (!in) throw decgdmin::Error(decgdmin::Errc::ConfigInvalid, "cannot open " + csv_path);
  std::stringstream ss;
  ss << in.rdbuf();
  decgdmin::write_text(out, decgdmin::emit_chart(ss.str(), x, y, group));
  std::printf("chart -> %s\n", out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized low-rank column-wise compressive sensing simulator"};
  app.require_subcommand(1);

  std::string config_path, output;
  auto* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("-o,--output", output, "Trace CSV path (overrides the config)");

  std::string param, values;
  auto* swp = app.add_subcommand("sweep", "Run one experiment per parameter value");
  swp->add_option("config", config_path, "Config file")->required();
  swp->add_option("--param", param, "m, t_con, p_edge, L or trials")->required();
  swp->add_option("--values", values, "Comma-separated values")->required();
  swp->add_option("-o,--output", output, "Base trace CSV path (overrides the config)");

  std::string csv_path, x = "iteration", y = "error_x", group = "algorithm", out = "chart.svg";
  auto* chart = app.add_subcommand("chart", "Render a trace or summary CSV as an SVG line chart");
  chart->add_option("csv", csv_path, "Trace or summary CSV")->required();
  chart->add_option("--x", x, "x field")->capture_default_str();
  chart->add_option("--y", y, "y field (log scale)")->capture_default_str();
  chart->add_option("--group", group, "Grouping field")->capture_default_str();
  chart->add_option("--out", out, "Output SVG")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, output);
    if (*swp) return cmd_sweep(config_path, param, values, output);
    return cmd_chart(csv_path, x, y, group, out);
  } catch (const decgdmin::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code() == decgdmin::Errc::ConfigInvalid || e.code() == decgdmin::Errc::MissingField
               ? kExitConfig
               : kExitAllFailed;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitAllFailed;
  }
}
