#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "simmimo/optimizer.hpp"
#include "simmimo/types.hpp"

namespace simmimo {

inline constexpr const char* kVersionString = "simmimo 1.0.0";

struct DimensionsConfig {
  int n_t = 32;
  int n_r = 32;
  int m = 200;  // transmit-side atoms per layer
  int n = 200;  // receive-side atoms per layer
  int l = 4;    // transmit-side layers
  int k = 4;    // receive-side layers
  // Grid layout per layer; (0, 0) requests an automatic square layout, which
  // demands a perfect-square atom count.
  int tx_grid_rows = 10;
  int tx_grid_cols = 20;
  int rx_grid_rows = 10;
  int rx_grid_cols = 20;
};

struct PhysicsConfig {
  double carrier_hz = 2.0e9;
  double distance_m = 200.0;
  double reference_distance_m = 1.0;
  double path_loss_exponent = 2.5;
  double shadow_db = 0.0;
  double tx_power_dbm = 20.0;
  double noise_dbm = -110.0;
  double sim_depth_wavelengths = 5.0;  // total stack depth, in wavelengths
};

struct ChannelConfig {
  std::string kind = "geometric";  // "geometric" | "synthetic"
  double corr_decay = 0.5;         // synthetic correlation profile parameter
};

struct McConfig {
  bool enabled = false;  // mc-verify always runs MC regardless
  std::int64_t trials = 10000;
  std::uint64_t seed = 4242;
};

struct SweepConfig {
  std::string axis;            // emi sweeps: "k" | "l" | "both" (layers),
                               // "m" | "n" | "both" (atoms); default "both"
  std::vector<double> values;  // empty -> scenario-specific default grid
};

struct ExperimentConfig {
  std::string scenario = "mc-verify";
  DimensionsConfig dimensions;
  PhysicsConfig physics;
  ChannelConfig channel;
  OptimizerConfig optimizer;
  McConfig mc;
  SweepConfig sweep;
  // Rate threshold in bits; when absent, scenarios derive one from the mean
  // MI and standard deviation at the configured operating point.
  std::optional<double> rate_bits;
  std::string output = "out";
  int threads = 0;  // 0 -> $SIMMIMO_THREADS if set, else 1
};

// Parses and validates a JSON config. Every diagnostic names the offending
// field (e.g. "dimensions.m"); unknown keys are rejected.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

// Canonical JSON echo of a parsed config (stable key order and formatting).
std::string config_to_json(const ExperimentConfig& cfg);

// Linear per-stream SNR rho = P / (N_t * sigma^2) from dBm bookkeeping.
double rho_from_power(double tx_power_dbm, double noise_dbm, int n_t);
double rho_from_config(const ExperimentConfig& cfg);

// A concrete experiment instance: both SIM stacks, the channel statistics,
// and the operating SNR. Phases are drawn from `phase_seed`; the synthetic
// channel kind also draws its transfer matrices from it.
struct ExperimentInstance {
  SimStack tx;
  SimStack rx;
  ChannelStatistics stats;
  double rho = 0.0;
};

ExperimentInstance build_instance(const ExperimentConfig& cfg,
                                  std::uint64_t phase_seed);

struct RunResult {
  int exit_code = 0;                 // 0 ok, 2 verification failure
  std::vector<std::string> outputs;  // paths written, in order
  std::string message;               // one-line human summary
};

// Executes the configured scenario and writes <scenario>.csv, manifest.json,
// report.json (verification scenarios), and timing.txt under cfg.output.
// Throws on invalid input or numerical failure; the CLI maps that to exit 1.
RunResult run_experiment(const ExperimentConfig& cfg);

// Full command-line entry point (argument parsing, dispatch, error mapping).
int cli_main(int argc, const char* const* argv);

}  // namespace simmimo
