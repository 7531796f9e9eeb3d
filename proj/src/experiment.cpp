#include "simmimo/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "simmimo/channel.hpp"
#include "simmimo/det_equiv.hpp"
#include "simmimo/dmt.hpp"
#include "simmimo/fluctuations.hpp"
#include "simmimo/gradients.hpp"
#include "simmimo/linalg.hpp"
#include "simmimo/montecarlo.hpp"
#include "simmimo/rng.hpp"

namespace simmimo {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr double kLn2 = 0.69314718055994530942;
constexpr double kSpeedOfLight = 299792458.0;

// Substream index bases for non-trial random draws. MC trials use substream
// indices 0..trials-1 of their own seed, so indices at or above 2^32 cannot
// collide with them.
constexpr std::uint64_t kStreamInstance = 1ULL << 32;
constexpr std::uint64_t kStreamSweepInstance = 1ULL << 33;
constexpr std::uint64_t kStreamSweepMc = 3ULL << 32;

[[noreturn]] void fail_field(const std::string& field, const std::string& why) {
  throw InvalidInputError("config: " + field + " " + why);
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      const std::string full = path.empty() ? it.key() : path + "." + it.key();
      throw InvalidInputError("config: unknown field '" + full + "'");
    }
  }
}

double get_num(const json& j, const std::string& field, const char* key,
               double def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_number()) fail_field(field, "must be a number");
  return v.get<double>();
}

int get_int(const json& j, const std::string& field, const char* key, int def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_number_integer()) fail_field(field, "must be an integer");
  return v.get<int>();
}

bool get_bool(const json& j, const std::string& field, const char* key,
              bool def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_boolean()) fail_field(field, "must be a boolean");
  return v.get<bool>();
}

std::string get_str(const json& j, const std::string& field, const char* key,
                    const std::string& def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_string()) fail_field(field, "must be a string");
  return v.get<std::string>();
}

const std::set<std::string>& scenario_names() {
  static const std::set<std::string> names = {
      "emi-vs-layers", "emi-vs-atoms",   "optimize", "outage-vs-power",
      "outage-vs-rate", "dmt",           "mc-verify", "check-grad"};
  return names;
}

void validate_config(const ExperimentConfig& c) {
  if (scenario_names().count(c.scenario) == 0) {
    fail_field("scenario",
               "must be one of emi-vs-layers, emi-vs-atoms, optimize, "
               "outage-vs-power, outage-vs-rate, dmt, mc-verify, check-grad");
  }
  const auto& d = c.dimensions;
  if (d.n_t < 1) fail_field("dimensions.n_t", "must be >= 1");
  if (d.n_r < 1) fail_field("dimensions.n_r", "must be >= 1");
  if (d.m < 1) fail_field("dimensions.m", "must be >= 1");
  if (d.n < 1) fail_field("dimensions.n", "must be >= 1");
  if (d.l < 1) fail_field("dimensions.l", "must be >= 1");
  if (d.k < 1) fail_field("dimensions.k", "must be >= 1");
  if (d.tx_grid_rows < 0 || d.tx_grid_cols < 0 ||
      (d.tx_grid_rows == 0) != (d.tx_grid_cols == 0)) {
    fail_field("dimensions.tx_grid", "must be [0, 0] (auto) or two positive ints");
  }
  if (d.rx_grid_rows < 0 || d.rx_grid_cols < 0 ||
      (d.rx_grid_rows == 0) != (d.rx_grid_cols == 0)) {
    fail_field("dimensions.rx_grid", "must be [0, 0] (auto) or two positive ints");
  }
  const auto& p = c.physics;
  if (!(p.carrier_hz > 0.0)) fail_field("physics.carrier_hz", "must be > 0");
  if (!(p.reference_distance_m > 0.0)) {
    fail_field("physics.reference_distance_m", "must be > 0");
  }
  if (!(p.distance_m >= p.reference_distance_m)) {
    fail_field("physics.distance_m", "must be >= reference_distance_m");
  }
  if (!(p.path_loss_exponent > 0.0)) {
    fail_field("physics.path_loss_exponent", "must be > 0");
  }
  if (!std::isfinite(p.shadow_db)) fail_field("physics.shadow_db", "must be finite");
  if (!std::isfinite(p.tx_power_dbm)) {
    fail_field("physics.tx_power_dbm", "must be finite");
  }
  if (!std::isfinite(p.noise_dbm)) fail_field("physics.noise_dbm", "must be finite");
  if (!(p.sim_depth_wavelengths > 0.0)) {
    fail_field("physics.sim_depth_wavelengths", "must be > 0");
  }
  if (c.channel.kind != "geometric" && c.channel.kind != "synthetic") {
    fail_field("channel.kind", "must be \"geometric\" or \"synthetic\"");
  }
  if (!(c.channel.corr_decay >= 0.0) || c.channel.corr_decay >= 1.0) {
    fail_field("channel.corr_decay", "must lie in [0, 1)");
  }
  const auto& o = c.optimizer;
  if (!(o.step_tx > 0.0)) fail_field("optimizer.step_tx", "must be > 0");
  if (!(o.step_rx > 0.0)) fail_field("optimizer.step_rx", "must be > 0");
  if (o.max_iter < 1) fail_field("optimizer.max_iter", "must be >= 1");
  if (!(o.tol > 0.0)) fail_field("optimizer.tol", "must be > 0");
  if (o.ao_inner_steps < 1) fail_field("optimizer.ao_inner_steps", "must be >= 1");
  if (c.mc.trials < 1) fail_field("mc.trials", "must be >= 1");
  if (c.sweep.axis != "" && c.sweep.axis != "k" && c.sweep.axis != "l" &&
      c.sweep.axis != "m" && c.sweep.axis != "n" && c.sweep.axis != "both") {
    fail_field("sweep.axis", "must be one of \"\", k, l, m, n, both");
  }
  for (std::size_t i = 0; i < c.sweep.values.size(); ++i) {
    if (!std::isfinite(c.sweep.values[i])) {
      fail_field("sweep.values", "must be finite");
    }
    if (i > 0 && !(c.sweep.values[i] > c.sweep.values[i - 1])) {
      fail_field("sweep.values", "must be strictly increasing");
    }
  }
  if (c.rate_bits && !std::isfinite(*c.rate_bits)) {
    fail_field("rate_bits", "must be finite");
  }
  if (c.threads < 0) fail_field("threads", "must be >= 0");
  if (c.output.empty()) fail_field("output", "must be a non-empty path");
}

std::string objective_name(OptimizerConfig::Objective o) {
  return o == OptimizerConfig::Objective::outage ? "outage" : "mean-mi";
}

std::string mode_name(OptimizerConfig::Mode m) {
  return m == OptimizerConfig::Mode::joint ? "joint" : "alternating";
}

ordered_json config_json(const ExperimentConfig& c) {
  ordered_json j;
  j["scenario"] = c.scenario;
  j["dimensions"] = {{"n_t", c.dimensions.n_t}, {"n_r", c.dimensions.n_r},
                     {"m", c.dimensions.m},     {"n", c.dimensions.n},
                     {"l", c.dimensions.l},     {"k", c.dimensions.k},
                     {"tx_grid", {c.dimensions.tx_grid_rows,
                                  c.dimensions.tx_grid_cols}},
                     {"rx_grid", {c.dimensions.rx_grid_rows,
                                  c.dimensions.rx_grid_cols}}};
  j["physics"] = {{"carrier_hz", c.physics.carrier_hz},
                  {"distance_m", c.physics.distance_m},
                  {"reference_distance_m", c.physics.reference_distance_m},
                  {"path_loss_exponent", c.physics.path_loss_exponent},
                  {"shadow_db", c.physics.shadow_db},
                  {"tx_power_dbm", c.physics.tx_power_dbm},
                  {"noise_dbm", c.physics.noise_dbm},
                  {"sim_depth_wavelengths", c.physics.sim_depth_wavelengths}};
  j["channel"] = {{"kind", c.channel.kind},
                  {"corr_decay", c.channel.corr_decay}};
  j["optimizer"] = {{"step_tx", c.optimizer.step_tx},
                    {"step_rx", c.optimizer.step_rx},
                    {"max_iter", c.optimizer.max_iter},
                    {"tol", c.optimizer.tol},
                    {"objective", objective_name(c.optimizer.objective)},
                    {"mode", mode_name(c.optimizer.mode)},
                    {"backtracking", c.optimizer.backtracking},
                    {"ao_inner_steps", c.optimizer.ao_inner_steps}};
  j["mc"] = {{"enabled", c.mc.enabled},
             {"trials", c.mc.trials},
             {"seed", c.mc.seed}};
  j["sweep"] = {{"axis", c.sweep.axis}, {"values", c.sweep.values}};
  if (c.rate_bits) {
    j["rate_bits"] = *c.rate_bits;
  } else {
    j["rate_bits"] = nullptr;
  }
  j["output"] = c.output;
  j["threads"] = c.threads;
  return j;
}

// ---------------------------------------------------------------------------
// Output formatting
// ---------------------------------------------------------------------------

std::string format_number(double x) {
  char buf[48];
  const double ax = std::fabs(x);
  if (x != 0.0 && (ax >= 1e6 || ax < 1e-6)) {
    std::snprintf(buf, sizeof buf, "%.12e", x);
  } else {
    std::snprintf(buf, sizeof buf, "%.12g", x);
  }
  return buf;
}

struct CsvFile {
  std::string name;
  std::string header;
  std::vector<std::vector<double>> rows;
};

std::string render_csv(const CsvFile& f) {
  std::string s = f.header;
  s += '\n';
  for (const auto& row : f.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) s += ',';
      s += format_number(row[i]);
    }
    s += '\n';
  }
  return s;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + p.string());
  out << content;
  out.flush();
  if (!out) throw std::runtime_error("failed writing output file: " + p.string());
}

int resolve_threads(int configured) {
  if (configured > 0) return configured;
  if (const char* env = std::getenv("SIMMIMO_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw InvalidInputError("SIMMIMO_THREADS must be a positive integer");
    }
    return static_cast<int>(v);
  }
  return 1;
}

// ---------------------------------------------------------------------------
// Scenario plumbing
// ---------------------------------------------------------------------------

struct ScenarioResult {
  std::vector<CsvFile> csvs;
  ordered_json report;        // null unless the scenario emits report.json
  ordered_json verification;  // null unless the scenario self-checks
  std::string message;
  int exit_code = 0;
};

struct TheoryPoint {
  EffectiveCorrelations eff;
  DetEquilibrium eq;
  FluctuationSolution fl;
};

TheoryPoint theory_at(const ExperimentInstance& inst, double rho) {
  TheoryPoint t;
  t.eff = effective_correlations(compose_sim(inst.tx), compose_sim(inst.rx),
                                 inst.stats);
  t.eq = solve_fixed_point(t.eff, rho, inst.stats.n_t, inst.stats.n_r);
  t.fl = solve_variance_fixed_point(t.eff, rho, inst.stats.n_t);
  return t;
}

std::vector<double> default_rate_grid(double mean, double sd, double z_lo,
                                      double z_hi, int count) {
  std::vector<double> rates;
  rates.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double z =
        z_lo + (z_hi - z_lo) * static_cast<double>(i) /
                   static_cast<double>(count - 1);
    rates.push_back(mean + z * sd);
  }
  return rates;
}

double binomial_stderr(double p, std::int64_t n) {
  return std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(n));
}

// Rate used when the config leaves rate_bits unset: half a standard
// deviation below the mean MI, a point with nondegenerate outage.
double implied_rate_nats(const TheoryPoint& t) {
  return t.eq.mean_mi - 0.5 * std::sqrt(t.fl.variance);
}

std::vector<int> integer_sweep(const std::vector<double>& values,
                               const char* what) {
  std::vector<int> out;
  out.reserve(values.size());
  for (const double v : values) {
    const int i = static_cast<int>(std::lround(v));
    if (std::abs(v - static_cast<double>(i)) > 1e-9 || i < 1) {
      throw InvalidInputError(std::string("config: sweep.values for ") + what +
                              " must be positive integers");
    }
    out.push_back(i);
  }
  return out;
}

ScenarioResult scenario_mc_verify(const ExperimentConfig& cfg, int threads) {
  const ExperimentInstance inst =
      build_instance(cfg, SplitMix64::substream(cfg.mc.seed, kStreamInstance));
  const TheoryPoint t = theory_at(inst, inst.rho);
  const double sd = std::sqrt(t.fl.variance);

  std::vector<double> rates;
  if (!cfg.sweep.values.empty()) {
    for (const double b : cfg.sweep.values) rates.push_back(b * kLn2);
  } else {
    rates = default_rate_grid(t.eq.mean_mi, sd, -1.6, 1.6, 9);
  }

  const McEstimate mc = estimate(inst.tx, inst.rx, inst.stats, inst.rho, rates,
                                 cfg.mc.trials, cfg.mc.seed, threads);
  std::vector<double> theory;
  theory.reserve(rates.size());
  std::vector<double> sorted_rates = rates;
  std::sort(sorted_rates.begin(), sorted_rates.end());
  for (const double r : sorted_rates) {
    theory.push_back(outage_probability(r, t.eq.mean_mi, t.fl.variance));
  }
  const TheoryComparison cmp =
      compare_with_theory(mc, t.eq.mean_mi, t.fl.variance, theory);

  CsvFile csv;
  csv.name = "mc_verify.csv";
  csv.header = "sweep_value,metric,metric_mc,metric_mc_stderr";
  std::size_t i = 0;
  for (const auto& [rate, emp] : mc.outage_by_rate) {
    csv.rows.push_back({rate / kLn2, theory[i], emp,
                        binomial_stderr(emp, mc.n_trials)});
    ++i;
  }

  const auto verdict = [](bool ok) { return ok ? "pass" : "fail"; };
  ScenarioResult res;
  res.report = ordered_json{
      {"checks",
       {{"mean", verdict(cmp.mean_ok)},
        {"variance", verdict(cmp.variance_ok)},
        {"outage", verdict(cmp.outage_ok)},
        {"ks", verdict(cmp.ks_ok)}}},
      {"details",
       {{"mean_mi_theory_bits", t.eq.mean_mi / kLn2},
        {"mean_mi_mc_bits", mc.mean / kLn2},
        {"mean_z", cmp.mean_z},
        {"mean_rel_err", cmp.mean_rel_err},
        {"variance_theory", t.fl.variance},
        {"variance_mc", mc.variance},
        {"variance_rel_err", cmp.variance_rel_err},
        {"max_outage_dev", cmp.max_outage_dev},
        {"ks_distance", cmp.ks_distance},
        {"trials", mc.n_trials}}},
      {"overall", verdict(cmp.all_ok())}};
  res.verification = ordered_json{{"mean_z", cmp.mean_z},
                                  {"mean_rel_err", cmp.mean_rel_err},
                                  {"variance_rel_err", cmp.variance_rel_err},
                                  {"max_outage_dev", cmp.max_outage_dev},
                                  {"ks_distance", cmp.ks_distance},
                                  {"pass", cmp.all_ok()}};
  res.csvs.push_back(std::move(csv));
  res.exit_code = cmp.all_ok() ? 0 : 2;
  std::ostringstream msg;
  msg << "mc-verify " << (cmp.all_ok() ? "pass" : "FAIL") << ": mean z="
      << cmp.mean_z << ", var rel err=" << cmp.variance_rel_err
      << ", max outage dev=" << cmp.max_outage_dev
      << ", KS=" << cmp.ks_distance;
  res.message = msg.str();
  return res;
}

ScenarioResult scenario_check_grad(const ExperimentConfig& cfg) {
  const auto& d = cfg.dimensions;
  const std::int64_t prod = static_cast<std::int64_t>(d.n_t) * d.n_r *
                            static_cast<std::int64_t>(d.m) * d.n;
  if (prod > 4096 || d.l > 3 || d.k > 3) {
    throw InvalidInputError(
        "check-grad: instance too large (requires n_t*n_r*m*n <= 4096 and "
        "l, k <= 3); reduce dimensions, e.g. n_t=n_r=2, m=n=4, l=k=2");
  }
  const ExperimentInstance inst =
      build_instance(cfg, SplitMix64::substream(cfg.mc.seed, kStreamInstance));
  const TheoryPoint t = theory_at(inst, inst.rho);
  const double rate =
      cfg.rate_bits ? *cfg.rate_bits * kLn2 : implied_rate_nats(t);

  const GradientWorkspace ws =
      make_workspace(inst.tx, inst.rx, inst.stats, inst.rho);
  const PhaseGradient g_mean = grad_mean_mi(ws);
  const PhaseGradient g_var = grad_variance(ws);
  const PhaseGradient g_out = grad_outage(ws, rate);

  const auto eff_of = [&](const SimStack& tx, const SimStack& rx) {
    return effective_correlations(compose_sim(tx), compose_sim(rx), inst.stats);
  };
  const double rho = inst.rho;
  const ChannelStatistics& stats = inst.stats;
  const PhaseObjective mean_obj = [&](const SimStack& tx, const SimStack& rx) {
    return solve_fixed_point(eff_of(tx, rx), rho, stats.n_t, stats.n_r).mean_mi;
  };
  const PhaseObjective var_obj = [&](const SimStack& tx, const SimStack& rx) {
    return solve_variance_fixed_point(eff_of(tx, rx), rho, stats.n_t).variance;
  };
  const PhaseObjective out_obj = [&](const SimStack& tx, const SimStack& rx) {
    const EffectiveCorrelations eff = eff_of(tx, rx);
    const double mean = solve_fixed_point(eff, rho, stats.n_t, stats.n_r).mean_mi;
    const double var = solve_variance_fixed_point(eff, rho, stats.n_t).variance;
    return outage_probability(rate, mean, var);
  };

  const double step = 1e-5;
  const PhaseGradient fd_mean =
      finite_difference_gradient(mean_obj, inst.tx, inst.rx, step);
  const PhaseGradient fd_var =
      finite_difference_gradient(var_obj, inst.tx, inst.rx, step);
  const PhaseGradient fd_out =
      finite_difference_gradient(out_obj, inst.tx, inst.rx, step);

  const double worst_mean =
      max_relative_angle_error(g_mean, fd_mean, inst.tx, inst.rx);
  const double worst_var =
      max_relative_angle_error(g_var, fd_var, inst.tx, inst.rx);
  const double worst_out =
      max_relative_angle_error(g_out, fd_out, inst.tx, inst.rx);
  const double threshold = 1e-4;
  const bool pass =
      worst_mean <= threshold && worst_var <= threshold && worst_out <= threshold;

  ScenarioResult res;
  CsvFile csv;
  csv.name = "check_grad.csv";
  csv.header = "sweep_value,metric";
  csv.rows = {{0.0, worst_mean}, {1.0, worst_var}, {2.0, worst_out}};
  res.csvs.push_back(std::move(csv));
  res.report = ordered_json{{"families",
                             {{"mean_mi", worst_mean},
                              {"variance", worst_var},
                              {"outage", worst_out}}},
                            {"threshold", threshold},
                            {"rate_nats", rate},
                            {"overall", pass ? "pass" : "fail"}};
  res.verification = ordered_json{{"worst_mean_mi", worst_mean},
                                  {"worst_variance", worst_var},
                                  {"worst_outage", worst_out},
                                  {"pass", pass}};
  res.exit_code = pass ? 0 : 2;
  std::ostringstream msg;
  msg << "check-grad " << (pass ? "pass" : "FAIL")
      << ": worst relative angle-derivative error mean_mi=" << worst_mean
      << ", variance=" << worst_var << ", outage=" << worst_out;
  res.message = msg.str();
  return res;
}

ScenarioResult scenario_optimize(const ExperimentConfig& cfg) {
  const ExperimentInstance inst =
      build_instance(cfg, SplitMix64::substream(cfg.mc.seed, kStreamInstance));
  OptimizerConfig ocfg = cfg.optimizer;
  if (ocfg.objective == OptimizerConfig::Objective::outage) {
    const TheoryPoint t = theory_at(inst, inst.rho);
    ocfg.rate = cfg.rate_bits ? *cfg.rate_bits * kLn2 : implied_rate_nats(t);
  }
  const OptimizationTrace trace =
      optimize(inst.tx, inst.rx, inst.stats, ocfg, inst.rho);

  const bool mean_mode = ocfg.objective == OptimizerConfig::Objective::mean_mi;
  CsvFile csv;
  csv.name = "optimize.csv";
  csv.header = "sweep_value,metric";
  for (std::size_t i = 0; i < trace.objective.size(); ++i) {
    const double obj =
        mean_mode ? trace.objective[i] / kLn2 : trace.objective[i];
    csv.rows.push_back({static_cast<double>(i), obj});
  }

  ScenarioResult res;
  res.csvs.push_back(std::move(csv));
  res.verification = ordered_json{
      {"objective", objective_name(ocfg.objective)},
      {"mode", mode_name(ocfg.mode)},
      {"iterations", trace.iterations},
      {"termination", trace.termination},
      {"initial", trace.objective.front()},
      {"final", trace.objective.back()},
      {"rate_nats", ocfg.rate}};
  std::ostringstream msg;
  msg << "optimize (" << objective_name(ocfg.objective) << ", "
      << mode_name(ocfg.mode) << "): " << trace.objective.front() << " -> "
      << trace.objective.back() << " in " << trace.iterations
      << " iterations (" << trace.termination << ")";
  res.message = msg.str();
  return res;
}

ScenarioResult scenario_emi_sweep(const ExperimentConfig& cfg, int threads,
                                  bool layer_sweep) {
  std::vector<int> values;
  if (!cfg.sweep.values.empty()) {
    values = integer_sweep(cfg.sweep.values,
                           layer_sweep ? "emi-vs-layers" : "emi-vs-atoms");
  } else if (layer_sweep) {
    values = {1, 2, 3, 4, 5, 6, 7};
  } else {
    values = {16, 36, 64, 100};
  }
  std::string axis = cfg.sweep.axis.empty() ? "both" : cfg.sweep.axis;
  if (layer_sweep && axis != "k" && axis != "l" && axis != "both") {
    fail_field("sweep.axis", "must be k, l, or both for emi-vs-layers");
  }
  if (!layer_sweep && axis != "m" && axis != "n" && axis != "both") {
    fail_field("sweep.axis", "must be m, n, or both for emi-vs-atoms");
  }

  CsvFile csv;
  csv.name = layer_sweep ? "emi_vs_layers.csv" : "emi_vs_atoms.csv";
  csv.header = cfg.mc.enabled
                   ? "sweep_value,metric,metric_mc,metric_mc_stderr"
                   : "sweep_value,metric";

  for (std::size_t idx = 0; idx < values.size(); ++idx) {
    ExperimentConfig pc = cfg;
    const int v = values[idx];
    if (layer_sweep) {
      if (axis == "l" || axis == "both") pc.dimensions.l = v;
      if (axis == "k" || axis == "both") pc.dimensions.k = v;
    } else {
      // Atom sweeps re-derive a square layout per point.
      if (axis == "m" || axis == "both") {
        pc.dimensions.m = v;
        pc.dimensions.tx_grid_rows = 0;
        pc.dimensions.tx_grid_cols = 0;
      }
      if (axis == "n" || axis == "both") {
        pc.dimensions.n = v;
        pc.dimensions.rx_grid_rows = 0;
        pc.dimensions.rx_grid_cols = 0;
      }
    }
    const ExperimentInstance inst = build_instance(
        pc, SplitMix64::substream(cfg.mc.seed, kStreamSweepInstance + idx));
    OptimizerConfig ocfg = cfg.optimizer;
    ocfg.objective = OptimizerConfig::Objective::mean_mi;
    const OptimizationTrace trace =
        optimize(inst.tx, inst.rx, inst.stats, ocfg, inst.rho);
    std::vector<double> row = {static_cast<double>(v),
                               trace.objective.back() / kLn2};
    if (cfg.mc.enabled) {
      const McEstimate mc = estimate(
          trace.final_tx, trace.final_rx, inst.stats, inst.rho, {},
          cfg.mc.trials, SplitMix64::substream(cfg.mc.seed, kStreamSweepMc + idx),
          threads);
      row.push_back(mc.mean / kLn2);
      row.push_back(mc.std_error_mean / kLn2);
    }
    csv.rows.push_back(std::move(row));
  }

  ScenarioResult res;
  std::ostringstream msg;
  msg << (layer_sweep ? "emi-vs-layers" : "emi-vs-atoms") << ": "
      << values.size() << " points, EMI " << csv.rows.front()[1] << " -> "
      << csv.rows.back()[1] << " bits";
  res.message = msg.str();
  res.csvs.push_back(std::move(csv));
  return res;
}

ScenarioResult scenario_outage_vs_power(const ExperimentConfig& cfg,
                                        int threads) {
  std::vector<double> powers = cfg.sweep.values;
  if (powers.empty()) {
    for (int i = -5; i <= 5; ++i) {
      powers.push_back(cfg.physics.tx_power_dbm + 2.0 * i);
    }
  }
  const ExperimentInstance inst =
      build_instance(cfg, SplitMix64::substream(cfg.mc.seed, kStreamInstance));
  const EffectiveCorrelations eff = effective_correlations(
      compose_sim(inst.tx), compose_sim(inst.rx), inst.stats);

  double rate;
  if (cfg.rate_bits) {
    rate = *cfg.rate_bits * kLn2;
  } else {
    // Default: mean MI at the median sweep power, so the curve crosses 1/2.
    const double rho_mid = rho_from_power(powers[powers.size() / 2],
                                          cfg.physics.noise_dbm,
                                          cfg.dimensions.n_t);
    rate = solve_fixed_point(eff, rho_mid, inst.stats.n_t, inst.stats.n_r)
               .mean_mi;
  }

  CsvFile csv;
  csv.name = "outage_vs_power.csv";
  csv.header = cfg.mc.enabled
                   ? "sweep_value,metric,metric_mc,metric_mc_stderr"
                   : "sweep_value,metric";
  for (const double p : powers) {
    const double rho =
        rho_from_power(p, cfg.physics.noise_dbm, cfg.dimensions.n_t);
    const DetEquilibrium eq =
        solve_fixed_point(eff, rho, inst.stats.n_t, inst.stats.n_r);
    const FluctuationSolution fl =
        solve_variance_fixed_point(eff, rho, inst.stats.n_t);
    const double theory = outage_probability(rate, eq.mean_mi, fl.variance);
    std::vector<double> row = {p, theory};
    if (cfg.mc.enabled) {
      // Same seed at every power: common random numbers keep the empirical
      // curve smooth in the sweep variable.
      const McEstimate mc = estimate(inst.tx, inst.rx, inst.stats, rho, {rate},
                                     cfg.mc.trials, cfg.mc.seed, threads);
      const double emp = mc.outage_by_rate.at(rate);
      row.push_back(emp);
      row.push_back(binomial_stderr(emp, mc.n_trials));
    }
    csv.rows.push_back(std::move(row));
  }

  ScenarioResult res;
  std::ostringstream msg;
  msg << "outage-vs-power: rate " << rate / kLn2 << " bits, P_out "
      << csv.rows.front()[1] << " -> " << csv.rows.back()[1];
  res.message = msg.str();
  res.csvs.push_back(std::move(csv));
  return res;
}

ScenarioResult scenario_outage_vs_rate(const ExperimentConfig& cfg,
                                       int threads) {
  const ExperimentInstance inst =
      build_instance(cfg, SplitMix64::substream(cfg.mc.seed, kStreamInstance));
  const TheoryPoint t = theory_at(inst, inst.rho);
  const double sd = std::sqrt(t.fl.variance);

  std::vector<double> rates;
  if (!cfg.sweep.values.empty()) {
    for (const double b : cfg.sweep.values) rates.push_back(b * kLn2);
  } else {
    rates = default_rate_grid(t.eq.mean_mi, sd, -2.0, 2.0, 21);
  }

  McEstimate mc;
  if (cfg.mc.enabled) {
    // One sample set reused across every rate threshold.
    mc = estimate(inst.tx, inst.rx, inst.stats, inst.rho, rates, cfg.mc.trials,
                  cfg.mc.seed, threads);
  }

  CsvFile csv;
  csv.name = "outage_vs_rate.csv";
  csv.header = cfg.mc.enabled
                   ? "sweep_value,metric,metric_mc,metric_mc_stderr"
                   : "sweep_value,metric";
  for (const double r : rates) {
    const double theory = outage_probability(r, t.eq.mean_mi, t.fl.variance);
    std::vector<double> row = {r / kLn2, theory};
    if (cfg.mc.enabled) {
      const double emp = mc.outage_by_rate.at(r);
      row.push_back(emp);
      row.push_back(binomial_stderr(emp, mc.n_trials));
    }
    csv.rows.push_back(std::move(row));
  }

  ScenarioResult res;
  std::ostringstream msg;
  msg << "outage-vs-rate: " << rates.size() << " thresholds around mean "
      << t.eq.mean_mi / kLn2 << " bits";
  res.message = msg.str();
  res.csvs.push_back(std::move(csv));
  return res;
}

ScenarioResult scenario_dmt(const ExperimentConfig& cfg) {
  const ExperimentInstance inst =
      build_instance(cfg, SplitMix64::substream(cfg.mc.seed, kStreamInstance));
  const EffectiveCorrelations eff = effective_correlations(
      compose_sim(inst.tx), compose_sim(inst.rx), inst.stats);
  const int q = std::min(eff.m, eff.n);

  std::vector<double> ws = cfg.sweep.values;
  if (ws.empty()) {
    ws = {0.2 * q, 0.5 * q, 0.8 * q};
  }
  for (const double w : ws) {
    if (!(w > 0.0) || !(w < static_cast<double>(q))) {
      fail_field("sweep.values",
                 "must lie strictly between 0 and q = min(m, n) for dmt");
    }
  }

  CsvFile closed{"dmt.csv", "sweep_value,metric", {}};
  CsvFile numeric{"dmt_numeric.csv", "sweep_value,metric", {}};
  double worst_rel = 0.0;
  for (const double w : ws) {
    const double dc = dmt_closed_form(w, inst.rho, eff);
    const double dn = dmt_numeric(w, inst.rho, eff);
    closed.rows.push_back({w, dc});
    numeric.rows.push_back({w, dn});
    const double rel = std::abs(dc - dn) / std::max(std::abs(dn), 1e-12);
    worst_rel = std::max(worst_rel, rel);
  }
  const bool pass = worst_rel <= 1e-3;

  ScenarioResult res;
  res.csvs.push_back(std::move(closed));
  res.csvs.push_back(std::move(numeric));
  res.verification = ordered_json{{"q", q},
                                  {"max_rel_disagreement", worst_rel},
                                  {"pass", pass}};
  res.exit_code = pass ? 0 : 2;
  std::ostringstream msg;
  msg << "dmt " << (pass ? "pass" : "FAIL") << ": " << ws.size()
      << " points, max closed-vs-numeric relative gap " << worst_rel;
  res.message = msg.str();
  return res;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InvalidInputError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InvalidInputError("config: top level must be an object");

  check_keys(j, "", {"scenario", "dimensions", "physics", "channel",
                     "optimizer", "mc", "sweep", "rate_bits", "output",
                     "threads"});

  ExperimentConfig c;
  c.scenario = get_str(j, "scenario", "scenario", c.scenario);

  if (j.contains("dimensions")) {
    const json& d = j.at("dimensions");
    if (!d.is_object()) fail_field("dimensions", "must be an object");
    check_keys(d, "dimensions",
               {"n_t", "n_r", "m", "n", "l", "k", "tx_grid", "rx_grid"});
    c.dimensions.n_t = get_int(d, "dimensions.n_t", "n_t", c.dimensions.n_t);
    c.dimensions.n_r = get_int(d, "dimensions.n_r", "n_r", c.dimensions.n_r);
    c.dimensions.m = get_int(d, "dimensions.m", "m", c.dimensions.m);
    c.dimensions.n = get_int(d, "dimensions.n", "n", c.dimensions.n);
    c.dimensions.l = get_int(d, "dimensions.l", "l", c.dimensions.l);
    c.dimensions.k = get_int(d, "dimensions.k", "k", c.dimensions.k);
    const auto read_grid = [&](const char* key, int& rows, int& cols) {
      if (!d.contains(key)) {
        // An explicit atom count with no grid falls back to auto-square
        // unless the schema default layout still matches.
        return;
      }
      const json& g = d.at(key);
      if (!g.is_array() || g.size() != 2 || !g[0].is_number_integer() ||
          !g[1].is_number_integer()) {
        fail_field(std::string("dimensions.") + key,
                   "must be an array of two integers [rows, cols]");
      }
      rows = g[0].get<int>();
      cols = g[1].get<int>();
    };
    read_grid("tx_grid", c.dimensions.tx_grid_rows, c.dimensions.tx_grid_cols);
    read_grid("rx_grid", c.dimensions.rx_grid_rows, c.dimensions.rx_grid_cols);
    // If the atom count changed but the grid was not given, request the
    // automatic square layout instead of the stale 10x20 default.
    if (!d.contains("tx_grid") && c.dimensions.m != 200) {
      c.dimensions.tx_grid_rows = 0;
      c.dimensions.tx_grid_cols = 0;
    }
    if (!d.contains("rx_grid") && c.dimensions.n != 200) {
      c.dimensions.rx_grid_rows = 0;
      c.dimensions.rx_grid_cols = 0;
    }
  }

  if (j.contains("physics")) {
    const json& p = j.at("physics");
    if (!p.is_object()) fail_field("physics", "must be an object");
    check_keys(p, "physics",
               {"carrier_hz", "distance_m", "reference_distance_m",
                "path_loss_exponent", "shadow_db", "tx_power_dbm", "noise_dbm",
                "sim_depth_wavelengths"});
    auto& ph = c.physics;
    ph.carrier_hz = get_num(p, "physics.carrier_hz", "carrier_hz", ph.carrier_hz);
    ph.distance_m = get_num(p, "physics.distance_m", "distance_m", ph.distance_m);
    ph.reference_distance_m = get_num(p, "physics.reference_distance_m",
                                      "reference_distance_m",
                                      ph.reference_distance_m);
    ph.path_loss_exponent = get_num(p, "physics.path_loss_exponent",
                                    "path_loss_exponent", ph.path_loss_exponent);
    ph.shadow_db = get_num(p, "physics.shadow_db", "shadow_db", ph.shadow_db);
    ph.tx_power_dbm =
        get_num(p, "physics.tx_power_dbm", "tx_power_dbm", ph.tx_power_dbm);
    ph.noise_dbm = get_num(p, "physics.noise_dbm", "noise_dbm", ph.noise_dbm);
    ph.sim_depth_wavelengths =
        get_num(p, "physics.sim_depth_wavelengths", "sim_depth_wavelengths",
                ph.sim_depth_wavelengths);
  }

  if (j.contains("channel")) {
    const json& ch = j.at("channel");
    if (!ch.is_object()) fail_field("channel", "must be an object");
    check_keys(ch, "channel", {"kind", "corr_decay"});
    c.channel.kind = get_str(ch, "channel.kind", "kind", c.channel.kind);
    c.channel.corr_decay =
        get_num(ch, "channel.corr_decay", "corr_decay", c.channel.corr_decay);
  }

  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    if (!o.is_object()) fail_field("optimizer", "must be an object");
    check_keys(o, "optimizer",
               {"step_tx", "step_rx", "max_iter", "tol", "objective", "mode",
                "backtracking", "ao_inner_steps"});
    auto& oc = c.optimizer;
    oc.step_tx = get_num(o, "optimizer.step_tx", "step_tx", oc.step_tx);
    oc.step_rx = get_num(o, "optimizer.step_rx", "step_rx", oc.step_rx);
    oc.max_iter = get_int(o, "optimizer.max_iter", "max_iter", oc.max_iter);
    oc.tol = get_num(o, "optimizer.tol", "tol", oc.tol);
    const std::string obj =
        get_str(o, "optimizer.objective", "objective", "outage");
    if (obj == "outage") {
      oc.objective = OptimizerConfig::Objective::outage;
    } else if (obj == "mean-mi") {
      oc.objective = OptimizerConfig::Objective::mean_mi;
    } else {
      fail_field("optimizer.objective", "must be \"outage\" or \"mean-mi\"");
    }
    const std::string mode = get_str(o, "optimizer.mode", "mode", "joint");
    if (mode == "joint") {
      oc.mode = OptimizerConfig::Mode::joint;
    } else if (mode == "alternating") {
      oc.mode = OptimizerConfig::Mode::alternating;
    } else {
      fail_field("optimizer.mode", "must be \"joint\" or \"alternating\"");
    }
    oc.backtracking =
        get_bool(o, "optimizer.backtracking", "backtracking", oc.backtracking);
    oc.ao_inner_steps =
        get_int(o, "optimizer.ao_inner_steps", "ao_inner_steps", oc.ao_inner_steps);
  }

  if (j.contains("mc")) {
    const json& m = j.at("mc");
    if (!m.is_object()) fail_field("mc", "must be an object");
    check_keys(m, "mc", {"enabled", "trials", "seed"});
    c.mc.enabled = get_bool(m, "mc.enabled", "enabled", c.mc.enabled);
    if (m.contains("trials")) {
      if (!m.at("trials").is_number_integer()) {
        fail_field("mc.trials", "must be an integer");
      }
      c.mc.trials = m.at("trials").get<std::int64_t>();
    }
    if (m.contains("seed")) {
      if (!m.at("seed").is_number_unsigned() && !m.at("seed").is_number_integer()) {
        fail_field("mc.seed", "must be a nonnegative integer");
      }
      if (m.at("seed").is_number_integer() && m.at("seed").get<std::int64_t>() < 0) {
        fail_field("mc.seed", "must be a nonnegative integer");
      }
      c.mc.seed = m.at("seed").get<std::uint64_t>();
    }
  }

  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    if (!s.is_object()) fail_field("sweep", "must be an object");
    check_keys(s, "sweep", {"axis", "values"});
    c.sweep.axis = get_str(s, "sweep.axis", "axis", c.sweep.axis);
    if (s.contains("values")) {
      const json& v = s.at("values");
      if (!v.is_array()) fail_field("sweep.values", "must be an array of numbers");
      for (const auto& e : v) {
        if (!e.is_number()) fail_field("sweep.values", "must be an array of numbers");
        c.sweep.values.push_back(e.get<double>());
      }
    }
  }

  if (j.contains("rate_bits") && !j.at("rate_bits").is_null()) {
    if (!j.at("rate_bits").is_number()) fail_field("rate_bits", "must be a number");
    c.rate_bits = j.at("rate_bits").get<double>();
  }
  c.output = get_str(j, "output", "output", c.output);
  c.threads = get_int(j, "threads", "threads", c.threads);

  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("config: cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  return config_json(cfg).dump(2) + "\n";
}

double rho_from_power(double tx_power_dbm, double noise_dbm, int n_t) {
  if (n_t < 1) throw InvalidInputError("rho_from_power: n_t must be >= 1");
  return std::pow(10.0, (tx_power_dbm - noise_dbm) / 10.0) /
         static_cast<double>(n_t);
}

double rho_from_config(const ExperimentConfig& cfg) {
  return rho_from_power(cfg.physics.tx_power_dbm, cfg.physics.noise_dbm,
                        cfg.dimensions.n_t);
}

ExperimentInstance build_instance(const ExperimentConfig& cfg,
                                  std::uint64_t phase_seed) {
  validate_config(cfg);
  ExperimentInstance inst;
  inst.rho = rho_from_config(cfg);
  inst.stats.n_t = cfg.dimensions.n_t;
  inst.stats.n_r = cfg.dimensions.n_r;
  SplitMix64 rng(phase_seed);

  if (cfg.channel.kind == "synthetic") {
    inst.tx = random_synthetic_stack(SimSide::transmit, cfg.dimensions.l,
                                     cfg.dimensions.m, cfg.dimensions.n_t, rng);
    inst.rx = random_synthetic_stack(SimSide::receive, cfg.dimensions.k,
                                     cfg.dimensions.n, cfg.dimensions.n_r, rng);
    inst.stats.r_t =
        exponential_correlation(cfg.dimensions.m, cfg.channel.corr_decay);
    inst.stats.r_r =
        exponential_correlation(cfg.dimensions.n, cfg.channel.corr_decay);
    inst.stats.beta = 1.0;
    return inst;
  }

  const double lambda = kSpeedOfLight / cfg.physics.carrier_hz;
  const double depth = cfg.physics.sim_depth_wavelengths * lambda;
  const auto make_geom = [&](int layers, int atoms, int rows, int cols,
                             const char* field) {
    if (rows == 0) {
      try {
        return make_square_geometry(layers, atoms, lambda, depth);
      } catch (const InvalidInputError& e) {
        throw InvalidInputError(std::string("config: ") + field + ": " +
                                e.what());
      }
    }
    if (rows * cols != atoms) {
      fail_field(field, "grid rows*cols must equal the atom count");
    }
    return make_geometry(layers, atoms, rows, cols, lambda, depth);
  };
  const SimGeometry tx_geom =
      make_geom(cfg.dimensions.l, cfg.dimensions.m, cfg.dimensions.tx_grid_rows,
                cfg.dimensions.tx_grid_cols, "dimensions.tx_grid");
  const SimGeometry rx_geom =
      make_geom(cfg.dimensions.k, cfg.dimensions.n, cfg.dimensions.rx_grid_rows,
                cfg.dimensions.rx_grid_cols, "dimensions.rx_grid");

  inst.tx = build_sim_stack(tx_geom, SimSide::transmit, cfg.dimensions.n_t);
  randomize_phases(inst.tx, rng);
  inst.rx = build_sim_stack(rx_geom, SimSide::receive, cfg.dimensions.n_r);
  randomize_phases(inst.rx, rng);

  // Spatial correlation depends only on relative positions, so layer 0's
  // lattice stands in for the outer layer of either stack.
  inst.stats.r_t =
      build_correlation_matrix(layer_positions(tx_geom, 0), lambda);
  inst.stats.r_r =
      build_correlation_matrix(layer_positions(rx_geom, 0), lambda);
  inst.stats.beta = db_to_linear_gain(
      path_loss_db(cfg.physics.distance_m, cfg.physics.reference_distance_m,
                   cfg.physics.path_loss_exponent, lambda,
                   cfg.physics.shadow_db));
  return inst;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  validate_config(cfg);
  const int threads = resolve_threads(cfg.threads);

  ScenarioResult sr;
  if (cfg.scenario == "mc-verify") {
    sr = scenario_mc_verify(cfg, threads);
  } else if (cfg.scenario == "check-grad") {
    sr = scenario_check_grad(cfg);
  } else if (cfg.scenario == "optimize") {
    sr = scenario_optimize(cfg);
  } else if (cfg.scenario == "emi-vs-layers") {
    sr = scenario_emi_sweep(cfg, threads, true);
  } else if (cfg.scenario == "emi-vs-atoms") {
    sr = scenario_emi_sweep(cfg, threads, false);
  } else if (cfg.scenario == "outage-vs-power") {
    sr = scenario_outage_vs_power(cfg, threads);
  } else if (cfg.scenario == "outage-vs-rate") {
    sr = scenario_outage_vs_rate(cfg, threads);
  } else if (cfg.scenario == "dmt") {
    sr = scenario_dmt(cfg);
  } else {
    fail_field("scenario", "unknown scenario");  // unreachable after validate
  }

  fs::create_directories(cfg.output);
  RunResult res;
  res.exit_code = sr.exit_code;
  res.message = sr.message;

  std::vector<std::string> names;
  for (const auto& f : sr.csvs) names.push_back(f.name);
  if (!sr.report.is_null()) names.push_back("report.json");
  names.push_back("manifest.json");
  names.push_back("timing.txt");

  ordered_json manifest;
  manifest["version"] = kVersionString;
  manifest["scenario"] = cfg.scenario;
  manifest["seed"] = cfg.mc.seed;
  manifest["threads"] = threads;
  manifest["rho"] = rho_from_config(cfg);
  manifest["config"] = config_json(cfg);
  manifest["outputs"] = names;
  manifest["verification"] = sr.verification;

  for (const auto& f : sr.csvs) {
    const fs::path p = fs::path(cfg.output) / f.name;
    write_file(p, render_csv(f));
    res.outputs.push_back(p.string());
  }
  if (!sr.report.is_null()) {
    const fs::path p = fs::path(cfg.output) / "report.json";
    write_file(p, sr.report.dump(2) + "\n");
    res.outputs.push_back(p.string());
  }
  {
    const fs::path p = fs::path(cfg.output) / "manifest.json";
    write_file(p, manifest.dump(2) + "\n");
    res.outputs.push_back(p.string());
  }
  {
    // Wall time lives in its own file so every other artifact is a pure
    // function of the config and seed.
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    char buf[64];
    std::snprintf(buf, sizeof buf, "wall_time_s %.3f\n", secs);
    const fs::path p = fs::path(cfg.output) / "timing.txt";
    write_file(p, buf);
    res.outputs.push_back(p.string());
  }
  return res;
}

}  // namespace simmimo
