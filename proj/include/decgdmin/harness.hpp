#pragma once

// Experiment configuration, Monte Carlo execution, CSV traces, sweeps and
// SVG charts.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "decgdmin/baselines.hpp"
#include "decgdmin/gdmin.hpp"
#include "decgdmin/init.hpp"
#include "decgdmin/metrics.hpp"
#include "decgdmin/network.hpp"
#include "decgdmin/problem.hpp"

namespace decgdmin {

inline const std::vector<std::string>& known_algorithms() {
  static const std::vector<std::string> names = {"dec-altgdmin", "centralized", "dgd-rand",
                                                 "dgd-zero",     "dgd-spect",   "one-node"};
  return names;
}

inline const std::vector<std::string>& sweepable_params() {
  static const std::vector<std::string> names = {"m", "t_con", "p_edge", "L", "trials"};
  return names;
}

/// A count that may be left as "auto" and resolved before the run.
struct AutoCount {
  std::optional<std::size_t> value;
  bool is_auto() const noexcept { return !value.has_value(); }
};

struct SweepSpec {
  std::string param;
  std::vector<double> values;
};

struct ExperimentConfig {
  std::string name;
  std::size_t n = 100;
  std::size_t q = 100;
  std::size_t r = 2;
  std::size_t m = 40;
  std::size_t L = 20;
  double p_edge = 0.5;
  WeightScheme weight_scheme = WeightScheme::Metropolis;
  AutoCount t{400};
  AutoCount t_pm{};
  AutoCount t_con{};
  EtaMode eta_mode = EtaMode::TheoremDefault;
  double eta = 0.0;
  InitVariant init_variant = InitVariant::TwoLoop;
  bool sample_split = true;
  std::size_t trials = 1;
  std::uint64_t master_seed = 1;
  std::vector<std::string> algorithms = {"dec-altgdmin", "centralized"};
  bool diagnostics = false;
  bool exact_consensus = false;
  std::optional<double> trunc_constant;  // default: 9κ²μ² of each instance
  double eps_fin = 1e-10;                // target accuracy for "auto" counts
  std::string storage = "auto";          // auto | materialized | on-demand
  std::size_t threads = 1;
  std::string output = "trace.csv";
  std::optional<SweepSpec> sweep;
};

namespace detail {
[[noreturn]] inline void config_error(const std::string& what) { throw Error(Errc::ConfigInvalid, what); }

inline std::size_t count_field(const nlohmann::json& v, const std::string& key, std::size_t min = 1) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) config_error(key + " must be an integer");
  if (v.is_number_integer() && v.get<std::int64_t>() < static_cast<std::int64_t>(min))
    config_error(key + " must be >= " + std::to_string(min));
  return v.get<std::size_t>();
}

inline AutoCount auto_field(const nlohmann::json& v, const std::string& key) {
  if (v.is_string()) {
    if (v.get<std::string>() != "auto") config_error(key + " must be a count or \"auto\"");
    return {};
  }
  return {count_field(v, key)};
}

inline double number_field(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) config_error(key + " must be a number");
  return v.get<double>();
}

inline bool bool_field(const nlohmann::json& v, const std::string& key) {
  if (!v.is_boolean()) config_error(key + " must be true or false");
  return v.get<bool>();
}

inline std::string string_field(const nlohmann::json& v, const std::string& key) {
  if (!v.is_string()) config_error(key + " must be a string");
  return v.get<std::string>();
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

inline std::string format_value(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) return std::to_string(static_cast<long long>(v));
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}
}  // namespace detail

inline void validate(const ExperimentConfig& c) {
  using detail::config_error;
  if (c.n < 1 || c.q < 1 || c.r < 1 || c.m < 1 || c.L < 1 || c.trials < 1 || c.threads < 1)
    config_error("all counts must be >= 1");
  if (c.r > std::min(c.n, c.q)) config_error("r must not exceed min(n, q)");
  if (c.L > c.q) config_error("L must not exceed q");
  if (!(c.p_edge > 0.0 && c.p_edge <= 1.0)) config_error("p_edge must be in (0, 1]");
  if (c.eta_mode == EtaMode::Fixed && !(c.eta > 0.0)) config_error("fixed eta_mode needs eta > 0");
  if (!(c.eps_fin > 0.0 && c.eps_fin < 1.0)) config_error("eps_fin must be in (0, 1)");
  if (c.storage != "auto" && c.storage != "materialized" && c.storage != "on-demand")
    config_error("storage must be auto, materialized or on-demand");
  if (c.algorithms.empty()) config_error("algorithms must not be empty");
  for (const auto& a : c.algorithms)
    if (std::find(known_algorithms().begin(), known_algorithms().end(), a) == known_algorithms().end())
      config_error("unknown algorithm: " + a);
  if (c.sweep) {
    if (std::find(sweepable_params().begin(), sweepable_params().end(), c.sweep->param) ==
        sweepable_params().end())
      config_error("cannot sweep over " + c.sweep->param);
    if (c.sweep->values.empty()) config_error("sweep needs at least one value");
  }
}

inline SweepSpec parse_sweep(const nlohmann::json& j) {
  if (!j.is_object()) detail::config_error("sweep must be an object");
  SweepSpec s;
  for (const auto& [key, v] : j.items()) {
    if (key == "param") {
      s.param = detail::string_field(v, key);
    } else if (key == "values") {
      if (!v.is_array()) detail::config_error("sweep.values must be a list");
      for (const auto& e : v) s.values.push_back(detail::number_field(e, "sweep.values"));
    } else {
      detail::config_error("unknown key in sweep: " + key);
    }
  }
  if (s.param.empty()) detail::config_error("sweep.param is required");
  return s;
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using namespace detail;
  if (!j.is_object()) config_error("config must be a JSON object");
  ExperimentConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "name" || key == "description") {
      if (key == "name") c.name = string_field(v, key);
      else string_field(v, key);
    } else if (key == "n") c.n = count_field(v, key);
    else if (key == "q") c.q = count_field(v, key);
    else if (key == "r") c.r = count_field(v, key);
    else if (key == "m") c.m = count_field(v, key);
    else if (key == "L") c.L = count_field(v, key);
    else if (key == "p_edge") c.p_edge = number_field(v, key);
    else if (key == "weight_scheme") {
      const auto s = string_field(v, key);
      if (s == "metropolis") c.weight_scheme = WeightScheme::Metropolis;
      else if (s == "equal-neighbor") c.weight_scheme = WeightScheme::EqualNeighbor;
      else config_error("weight_scheme must be metropolis or equal-neighbor");
    } else if (key == "t") c.t = auto_field(v, key);
    else if (key == "t_pm") c.t_pm = auto_field(v, key);
    else if (key == "t_con") c.t_con = auto_field(v, key);
    else if (key == "eta_mode") {
      const auto s = string_field(v, key);
      if (s == "theorem-default") c.eta_mode = EtaMode::TheoremDefault;
      else if (s == "fixed") c.eta_mode = EtaMode::Fixed;
      else config_error("eta_mode must be theorem-default or fixed");
    } else if (key == "eta") c.eta = number_field(v, key);
    else if (key == "init_variant") {
      const auto s = string_field(v, key);
      if (s == "two-loop") c.init_variant = InitVariant::TwoLoop;
      else if (s == "one-loop") c.init_variant = InitVariant::OneLoop;
      else config_error("init_variant must be one-loop or two-loop");
    } else if (key == "sample_split") c.sample_split = bool_field(v, key);
    else if (key == "trials") c.trials = count_field(v, key);
    else if (key == "master_seed") {
      if (v.is_string()) {
        try {
          c.master_seed = std::stoull(v.get<std::string>());
        } catch (const std::exception&) {
          config_error("master_seed string is not a 64-bit integer");
        }
      } else if (v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        c.master_seed = v.get<std::uint64_t>();
      } else {
        config_error("master_seed must be a non-negative integer");
      }
    } else if (key == "algorithms") {
      if (!v.is_array()) config_error("algorithms must be a list");
      c.algorithms.clear();
      for (const auto& a : v) c.algorithms.push_back(string_field(a, "algorithms"));
    } else if (key == "diagnostics") c.diagnostics = bool_field(v, key);
    else if (key == "exact_consensus") c.exact_consensus = bool_field(v, key);
    else if (key == "trunc_constant") c.trunc_constant = number_field(v, key);
    else if (key == "eps_fin") c.eps_fin = number_field(v, key);
    else if (key == "storage") c.storage = string_field(v, key);
    else if (key == "threads") c.threads = count_field(v, key);
    else if (key == "output") c.output = string_field(v, key);
    else if (key == "sweep") c.sweep = parse_sweep(v);
    else config_error("unknown config key: " + key);
  }
  validate(c);
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::ConfigInvalid, std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ConfigInvalid, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// Sets one sweepable parameter from a numeric value.
inline ExperimentConfig with_param(ExperimentConfig c, const std::string& param, double value) {
  auto as_count = [&](double v) {
    if (!(v >= 1.0) || v != std::floor(v)) detail::config_error(param + " needs a positive integer value");
    return static_cast<std::size_t>(v);
  };
  if (param == "m") c.m = as_count(value);
  else if (param == "t_con") c.t_con = {as_count(value)};
  else if (param == "p_edge") c.p_edge = value;
  else if (param == "L") c.L = as_count(value);
  else if (param == "trials") c.trials = as_count(value);
  else detail::config_error("cannot sweep over " + param);
  c.sweep.reset();
  validate(c);
  return c;
}

// ---------------------------------------------------------------------------

/// Engineering constants for "auto" counts (the theorems leave C, c open).
struct AutoConstants {
  double rate = 0.25;      // per-iteration contraction is taken as 1 − c_eta·rate/κ²
  double pm_factor = 5.0;  // t_pm = pm_factor·κ²(log n + log κ)
  std::size_t t_con_cap = 200;
};

struct ResolvedParams {
  std::size_t t = 0;
  std::size_t t_pm = 0;
  std::size_t t_con = 0;
  bool t_auto = false;
  bool t_pm_auto = false;
  bool t_con_auto = false;
  double kappa_ref = 1.0;  // κ of trial 0, used for auto counts
  BatchStorage storage = BatchStorage::Materialized;
};

inline std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t trial) {
  return master_seed ^ splitmix64(static_cast<std::uint64_t>(trial) + 1);
}

/// The network depends on master_seed only, so every trial shares it.
inline Network experiment_network(const ExperimentConfig& c) {
  return make_er_network(c.L, c.p_edge, c.weight_scheme, RngStream(c.master_seed, 0x6e6574776f726bULL));
}

inline GroundTruth trial_ground_truth(const ExperimentConfig& c, std::size_t trial) {
  return generate_ground_truth(c.n, c.q, c.r, RngStream(trial_seed(c.master_seed, trial), 1));
}

inline ResolvedParams resolve_params(const ExperimentConfig& c, const Network& net) {
  const AutoConstants k;
  ResolvedParams p;
  const GroundTruth gt0 = trial_ground_truth(c, 0);
  p.kappa_ref = gt0.kappa;
  const double kappa2 = gt0.kappa * gt0.kappa;
  const double log_fin = std::log(1.0 / c.eps_fin);

  p.t_auto = c.t.is_auto();
  p.t = p.t_auto ? static_cast<std::size_t>(std::ceil(kappa2 * log_fin / (0.4 * k.rate))) : *c.t.value;
  p.t = std::max<std::size_t>(p.t, 1);

  p.t_pm_auto = c.t_pm.is_auto();
  p.t_pm = p.t_pm_auto ? static_cast<std::size_t>(std::ceil(
                             k.pm_factor * kappa2 *
                             (std::log(static_cast<double>(c.n)) + std::log(gt0.kappa))))
                       : *c.t_pm.value;
  p.t_pm = std::max<std::size_t>(p.t_pm, 1);

  p.t_con_auto = c.t_con.is_auto();
  if (!p.t_con_auto) {
    p.t_con = *c.t_con.value;
  } else if (net.nodes == 1 || net.gamma <= 0.0) {
    p.t_con = 1;
  } else {
    // ε_con = min(1e-2, ε_fin·c^T/(T κ²)), evaluated in logs to avoid underflow
    const double t = static_cast<double>(p.t);
    const double contraction = 1.0 - 0.4 * k.rate / kappa2;
    const double log_eps = std::min(std::log(1e-2), -log_fin + t * std::log(contraction) -
                                                        std::log(t) - std::log(kappa2));
    const double rounds =
        (std::log(static_cast<double>(net.nodes)) - log_eps) / std::log(1.0 / net.gamma);
    p.t_con = std::min<std::size_t>(k.t_con_cap,
                                    std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(rounds))));
  }

  if (c.storage == "materialized") p.storage = BatchStorage::Materialized;
  else if (c.storage == "on-demand") p.storage = BatchStorage::OnDemand;
  else
    p.storage = MeasurementSet::materialized_bytes(c.n, c.q, c.m, p.t, c.sample_split) > 256.0 * 1024 * 1024
                    ? BatchStorage::OnDemand
                    : BatchStorage::Materialized;
  return p;
}

struct TrialOutcome {
  std::size_t trial = 0;
  std::vector<MetricsTrace> traces;  // in config.algorithms order; partial when a run failed
  std::vector<std::string> failures;
};

struct ExperimentResult {
  ExperimentConfig config;
  ResolvedParams resolved;
  Network network;
  std::vector<TrialOutcome> trials;
  std::size_t failed_trials = 0;
};

/// Runs every requested algorithm on one trial's instance.
inline TrialOutcome run_trial(const ExperimentConfig& c, const ResolvedParams& p, const Network& net,
                              std::size_t trial) {
  TrialOutcome out;
  out.trial = trial;
  const RngStream stream(trial_seed(c.master_seed, trial), 0);
  try {
    const GroundTruth gt = trial_ground_truth(c, trial);
    const MeasurementSet ms = generate_measurements(gt, c.m, p.t, stream.substream(2), c.sample_split, p.storage);
    const ColumnPartition part = partition_columns(c.q, c.L);
    const RngStream shared = stream.substream(3);

    InitConfig ic;
    ic.variant = c.init_variant;
    ic.t_pm = p.t_pm;
    ic.t_con = p.t_con;
    ic.trunc_constant = c.trunc_constant ? *c.trunc_constant : truncation_constant(gt.kappa, gt.mu);

    GdConfig gc;
    gc.t = p.t;
    gc.t_con = p.t_con;
    gc.eta_mode = c.eta_mode;
    gc.eta = c.eta;
    gc.exact_consensus = c.exact_consensus;
    gc.diagnostics = c.diagnostics;
    gc.trial_id = trial;

    std::optional<InitResult> dec_init;
    double dec_init_seconds = 0.0;
    auto need_dec_init = [&] {
      if (dec_init) return;
      const auto start = std::chrono::steady_clock::now();
      dec_init = spectral_init(ms, part, net, ic, c.r, shared, &gt.u_star);
      dec_init_seconds = detail::seconds_since(start);
      if (c.init_variant == InitVariant::OneLoop && dec_init->init_alignment &&
          *dec_init->init_alignment < kInitAlignmentFloor)
        std::fprintf(stderr, "trial %zu: sigma_min(U*'U_init) = %.3g is below %.2g\n", trial,
                     *dec_init->init_alignment, kInitAlignmentFloor);
    };

    for (const auto& alg : c.algorithms) {
      GdConfig cfg = gc;
      cfg.algorithm_tag = alg;
      RunResult run;
      try {
        if (alg == "dec-altgdmin") {
          need_dec_init();
          cfg = with_sigma_estimates(cfg, *dec_init);
          cfg.elapsed_offset = dec_init_seconds;
          run = run_dec_altgdmin(&gt, ms, part, net, *dec_init, cfg);
        } else if (alg == "centralized") {
          run = run_centralized_altgdmin(ms, gt, ic, cfg, shared);
        } else if (alg == "one-node") {
          run = run_one_node_altgdmin(ms, gt, part, ic, cfg, shared);
        } else {
          need_dec_init();
          cfg = with_sigma_estimates(cfg, *dec_init);
          const DgdInit mode = alg == "dgd-rand" ? DgdInit::Rand : alg == "dgd-zero" ? DgdInit::Zero : DgdInit::Spect;
          if (mode == DgdInit::Spect) cfg.elapsed_offset = dec_init_seconds;
          run = run_dgd_altgdmin(&gt, ms, part, net, mode, &*dec_init, cfg, stream.substream(4), c.r);
        }
      } catch (const Error& e) {
        run.failure = e;
        run.trace.algorithm_tag = alg;
        run.trace.trial_id = trial;
      }
      if (run.failure) out.failures.push_back(alg + ": " + run.failure->what());
      out.traces.push_back(std::move(run.trace));
    }
  } catch (const Error& e) {
    out.failures.push_back(std::string("instance: ") + e.what());
  }
  return out;
}

inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  validate(c);
  ExperimentResult res;
  res.config = c;
  try {
    res.network = experiment_network(c);
  } catch (const Error& e) {
    throw Error(Errc::ConfigInvalid, std::string("network: ") + e.what());
  }
  res.resolved = resolve_params(c, res.network);
  res.trials.resize(c.trials);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < c.trials; i = next++) res.trials[i] = run_trial(c, res.resolved, res.network, i);
  };
  const std::size_t workers = std::min(c.threads, c.trials);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& t : res.trials) {
    for (const auto& f : t.failures) std::fprintf(stderr, "trial %zu failed: %s\n", t.trial, f.c_str());
    if (!t.failures.empty()) ++res.failed_trials;
  }
  return res;
}

// ---------------------------------------------------------------------------

inline constexpr const char* kTraceHeader =
    "trial,algorithm,iteration,elapsed_seconds,error_x,se2_node1,max_disagreement_frob,cons_err_max";

inline std::string comment_block(const ExperimentResult& r) {
  const auto& c = r.config;
  const auto& p = r.resolved;
  std::ostringstream os;
  auto line = [&](const std::string& k, const std::string& v) { os << "# " << k << ": " << v << "\n"; };
  auto counted = [](std::size_t v, bool a) { return std::to_string(v) + (a ? " (auto)" : ""); };
  if (!c.name.empty()) line("name", c.name);
  line("n", std::to_string(c.n));
  line("q", std::to_string(c.q));
  line("r", std::to_string(c.r));
  line("m", std::to_string(c.m));
  line("L", std::to_string(c.L));
  line("p_edge", detail::format_value(c.p_edge));
  line("weight_scheme", std::string(weight_scheme_name(c.weight_scheme)));
  line("t", counted(p.t, p.t_auto));
  line("t_pm", counted(p.t_pm, p.t_pm_auto));
  line("t_con", counted(p.t_con, p.t_con_auto));
  if (p.t_auto || p.t_pm_auto || p.t_con_auto) {
    line("eps_fin", detail::format_value(c.eps_fin));
    line("kappa_trial0", detail::format_double(p.kappa_ref));
  }
  line("eta_mode", std::string(eta_mode_name(c.eta_mode)));
  if (c.eta_mode == EtaMode::Fixed) line("eta", detail::format_double(c.eta));
  line("init_variant", std::string(init_variant_name(c.init_variant)));
  line("trunc_constant", c.trunc_constant ? detail::format_double(*c.trunc_constant) : "9*kappa^2*mu^2 per instance");
  line("sample_split", c.sample_split ? "true" : "false");
  line("exact_consensus", c.exact_consensus ? "true" : "false");
  line("storage", p.storage == BatchStorage::Materialized ? "materialized" : "on-demand");
  line("trials", std::to_string(c.trials));
  line("master_seed", std::to_string(c.master_seed));
  std::string algs;
  for (const auto& a : c.algorithms) algs += (algs.empty() ? "" : " ") + a;
  line("algorithms", algs);
  line("diagnostics", c.diagnostics ? "true" : "false");
  line("gamma", detail::format_double(r.network.gamma));
  line("network_attempt", std::to_string(r.network.attempt));
  line("rng", std::string(RngStream::algorithm_tag));
  line("failed_trials", std::to_string(r.failed_trials));
  return os.str();
}

inline std::string trace_csv(const ExperimentResult& r) {
  std::ostringstream os;
  os << comment_block(r) << kTraceHeader << "\n";
  char buf[64];
  for (const auto& t : r.trials)
    for (const auto& tr : t.traces)
      for (const auto& rec : tr.records) {
        os << t.trial << ',' << tr.algorithm_tag << ',' << rec.iteration << ',';
        std::snprintf(buf, sizeof buf, "%.6f", rec.elapsed_seconds);
        os << buf << ',' << detail::format_double(rec.error_x) << ','
           << detail::format_double(rec.se2_node1) << ','
           << detail::format_double(rec.max_disagreement_frob) << ',';
        if (rec.cons_err_max) os << detail::format_double(*rec.cons_err_max);
        os << "\n";
      }
  return os.str();
}

struct SummaryRow {
  std::string algorithm;
  std::size_t iteration = 0;
  std::size_t count = 0;
  double elapsed_seconds = 0.0;
  double error_x = 0.0;
  double se2_node1 = 0.0;
  double max_disagreement_frob = 0.0;
  std::optional<double> cons_err_max;
};

/// Per-(algorithm, iteration) means across the trials that reached it.
inline std::vector<SummaryRow> summarize(const ExperimentResult& r) {
  std::vector<SummaryRow> rows;
  for (const auto& alg : r.config.algorithms) {
    std::map<std::size_t, SummaryRow> acc;
    std::map<std::size_t, std::size_t> cons_count;
    for (const auto& t : r.trials)
      for (const auto& tr : t.traces) {
        if (tr.algorithm_tag != alg) continue;
        for (const auto& rec : tr.records) {
          SummaryRow& s = acc[rec.iteration];
          s.algorithm = alg;
          s.iteration = rec.iteration;
          ++s.count;
          s.elapsed_seconds += rec.elapsed_seconds;
          s.error_x += rec.error_x;
          s.se2_node1 += rec.se2_node1;
          s.max_disagreement_frob += rec.max_disagreement_frob;
          if (rec.cons_err_max) {
            s.cons_err_max = s.cons_err_max.value_or(0.0) + *rec.cons_err_max;
            ++cons_count[rec.iteration];
          }
        }
      }
    for (auto& [it, s] : acc) {
      const double k = static_cast<double>(s.count);
      s.elapsed_seconds /= k;
      s.error_x /= k;
      s.se2_node1 /= k;
      s.max_disagreement_frob /= k;
      if (s.cons_err_max) *s.cons_err_max /= static_cast<double>(cons_count[it]);
      rows.push_back(s);
    }
  }
  return rows;
}

inline std::string summary_csv(const ExperimentResult& r) {
  std::ostringstream os;
  os << comment_block(r)
     << "algorithm,iteration,trials,elapsed_seconds,error_x,se2_node1,max_disagreement_frob,cons_err_max\n";
  char buf[64];
  for (const auto& s : summarize(r)) {
    std::snprintf(buf, sizeof buf, "%.6f", s.elapsed_seconds);
    os << s.algorithm << ',' << s.iteration << ',' << s.count << ',' << buf << ','
       << detail::format_double(s.error_x) << ',' << detail::format_double(s.se2_node1) << ','
       << detail::format_double(s.max_disagreement_frob) << ',';
    if (s.cons_err_max) os << detail::format_double(*s.cons_err_max);
    os << "\n";
  }
  return os.str();
}

/// Mean over trials of the last recorded value of a field for one algorithm.
inline std::optional<double> final_mean(const ExperimentResult& r, const std::string& algorithm,
                                        double MetricsRecord::*field) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& t : r.trials)
    for (const auto& tr : t.traces)
      if (tr.algorithm_tag == algorithm && !tr.records.empty()) {
        sum += tr.final_record().*field;
        ++count;
      }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

/// "<stem>_summary.csv" next to a trace path.
inline std::filesystem::path sibling_path(const std::filesystem::path& trace, const std::string& suffix) {
  auto out = trace;
  out.replace_filename(trace.stem().string() + suffix + ".csv");
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::ConfigInvalid, "cannot write " + path.string());
  out << text;
}

inline void write_experiment(const ExperimentResult& r, const std::filesystem::path& trace_path) {
  write_text(trace_path, trace_csv(r));
  write_text(sibling_path(trace_path, "_summary"), summary_csv(r));
}

// ---------------------------------------------------------------------------

struct SweepCell {
  double value = 0.0;
  ExperimentResult result;
  std::filesystem::path trace_path;
};

struct SweepResult {
  std::string param;
  std::vector<SweepCell> cells;
  std::size_t failed_trials = 0;
  std::size_t total_trials = 0;
};

/// One experiment per value, all with the same master seed.
inline SweepResult sweep(const ExperimentConfig& base, const std::string& param,
                         const std::vector<double>& values) {
  if (values.empty()) throw Error(Errc::ConfigInvalid, "sweep needs at least one value");
  SweepResult out;
  out.param = param;
  const std::filesystem::path base_path(base.output);
  for (double v : values) {
    SweepCell cell;
    cell.value = v;
    const ExperimentConfig c = with_param(base, param, v);
    cell.result = run_experiment(c);
    cell.trace_path = sibling_path(base_path, "_" + param + "-" + detail::format_value(v));
    out.failed_trials += cell.result.failed_trials;
    out.total_trials += c.trials;
    out.cells.push_back(std::move(cell));
  }
  return out;
}

inline std::string sweep_summary_csv(const SweepResult& s) {
  std::ostringstream os;
  os << "param,value,algorithm,trials,failed_trials,gamma,t_con,final_iteration,final_error_x,final_se2_node1,"
        "final_max_disagreement_frob,final_elapsed_seconds\n";
  for (const auto& cell : s.cells) {
    const auto& r = cell.result;
    for (const auto& alg : r.config.algorithms) {
      std::optional<SummaryRow> last;
      for (const auto& row : summarize(r))
        if (row.algorithm == alg) last = row;
      os << s.param << ',' << detail::format_value(cell.value) << ',' << alg << ',' << r.config.trials << ','
         << r.failed_trials << ',' << detail::format_double(r.network.gamma) << ',' << r.resolved.t_con << ',';
      if (last) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6f", last->elapsed_seconds);
        os << last->iteration << ',' << detail::format_double(last->error_x) << ','
           << detail::format_double(last->se2_node1) << ','
           << detail::format_double(last->max_disagreement_frob) << ',' << buf;
      } else {
        os << ",,,,";
      }
      os << "\n";
    }
  }
  return os.str();
}

inline void write_sweep(const SweepResult& s, const std::filesystem::path& base_trace) {
  for (const auto& cell : s.cells) write_experiment(cell.result, cell.trace_path);
  write_text(sibling_path(base_trace, "_sweep_summary"), sweep_summary_csv(s));
}

// ---------------------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(Errc::MissingField, "no column named " + name);
    return static_cast<std::size_t>(it - header.begin());
  }
};

/// Comma-separated text without quoting; lines starting with '#' are skipped.
inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
      if (ch == ',') {
        out.push_back(cur);
        cur.clear();
      } else if (ch != '\r') {
        cur += ch;
      }
    }
    out.push_back(cur);
    return out;
  };
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!have_header) {
      t.header = split(line);
      have_header = true;
    } else {
      t.rows.push_back(split(line));
    }
  }
  if (!have_header) throw Error(Errc::MissingField, "CSV has no header row");
  return t;
}

/// Line chart with a log₁₀ y axis: one polyline per group, legend, axis labels.
/// Rows sharing a group and x value are averaged; non-positive y are dropped.
inline std::string emit_chart(const std::string& csv_text, const std::string& x_field,
                              const std::string& y_field, const std::string& group_field) {
  const CsvTable t = parse_csv(csv_text);
  const std::size_t xi = t.column(x_field);
  const std::size_t yi = t.column(y_field);
  const std::size_t gi = t.column(group_field);

  std::vector<std::string> groups;  // first-appearance order
  std::map<std::string, std::map<double, std::pair<double, std::size_t>>> series;
  for (const auto& row : t.rows) {
    if (row.size() <= std::max({xi, yi, gi}) || row[xi].empty() || row[yi].empty()) continue;
    const double x = std::stod(row[xi]);
    const double y = std::stod(row[yi]);
    if (!std::isfinite(x) || !std::isfinite(y) || y <= 0.0) continue;
    const std::string& g = row[gi];
    if (!series.count(g)) groups.push_back(g);
    auto& cell = series[g][x];
    cell.first += y;
    ++cell.second;
  }

  double xmin = 0.0, xmax = 1.0, lmin = -1.0, lmax = 0.0;
  bool any = false;
  for (const auto& [g, pts] : series)
    for (const auto& [x, acc] : pts) {
      const double ly = std::log10(acc.first / static_cast<double>(acc.second));
      if (!any) {
        xmin = xmax = x;
        lmin = lmax = ly;
        any = true;
      }
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      lmin = std::min(lmin, ly);
      lmax = std::max(lmax, ly);
    }
  int dlo = static_cast<int>(std::floor(lmin + 1e-9));
  int dhi = static_cast<int>(std::ceil(lmax - 1e-9));
  if (dhi <= dlo) dhi = dlo + 1;
  if (xmax <= xmin) xmax = xmin + 1.0;

  const double width = 800, height = 500, left = 90, right = 190, top = 30, bottom = 60;
  const double pw = width - left - right, ph = height - top - bottom;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double ly) { return top + (static_cast<double>(dhi) - ly) / static_cast<double>(dhi - dlo) * ph; };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n",
                width, height, width, height);
  os << buf << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf,
                "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"none\" stroke=\"black\"/>\n",
                left, top, pw, ph);
  os << buf;
  for (int d = dlo; d <= dhi; ++d) {
    const double y = py(d);
    std::snprintf(buf, sizeof buf,
                  "<line class=\"ytick\" x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#dddddd\"/>\n"
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" text-anchor=\"end\">1e%d</text>\n",
                  left, y, left + pw, y, left - 6, y + 4, d);
    os << buf;
  }
  for (int i = 0; i <= 5; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 5.0;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" text-anchor=\"middle\">%g</text>\n", px(xv),
                  top + ph + 18, xv);
    os << buf;
  }
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.2f\" y=\"%.2f\" font-size=\"14\" text-anchor=\"middle\">%s</text>\n", left + pw / 2,
                height - 15, detail::xml_escape(x_field).c_str());
  os << buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"20\" y=\"%.2f\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 20 %.2f)\">%s (log scale)</text>\n",
                top + ph / 2, top + ph / 2, detail::xml_escape(y_field).c_str());
  os << buf;

  for (std::size_t k = 0; k < groups.size(); ++k) {
    const char* color = palette[k % 10];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (const auto& [x, acc] : series[groups[k]]) {
      std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", first ? "" : " ", px(x),
                    py(std::log10(acc.first / static_cast<double>(acc.second))));
      os << buf;
      first = false;
    }
    os << "\"/>\n";
    const double ly = top + 14 + 20.0 * static_cast<double>(k);
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"%s\" stroke-width=\"2\"/>\n",
                  left + pw + 15, ly, left + pw + 40, ly, color);
    os << buf << "<text class=\"legend\" x=\"" << detail::format_value(left + pw + 46) << "\" y=\""
       << detail::format_value(ly + 4) << "\" font-size=\"12\">" << detail::xml_escape(groups[k]) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace decgdmin
