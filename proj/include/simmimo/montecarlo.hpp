#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "simmimo/types.hpp"

namespace simmimo {

// Mutual information of one channel realization, in nats:
// log det(I + rho * H * H^H).
double mi_sample(const CMat& h, double rho);

struct McEstimate {
  std::int64_t n_trials = 0;
  double mean = 0.0;       // sample mean of the per-trial MI (nats)
  double variance = 0.0;   // unbiased sample variance
  double std_error_mean = 0.0;
  std::map<double, double> outage_by_rate;  // rate (nats) -> empirical outage
  std::uint64_t seed = 0;
  std::vector<double> samples;  // per-trial MI values, trial order
};

// Monte Carlo estimate of the ergodic MI and outage probabilities for the
// composed end-to-end channel. Each trial draws an independent correlated
// Gaussian scattering matrix from a per-trial substream of `seed`, so the
// result is bit-identical for a fixed seed regardless of thread count.
McEstimate estimate(const SimStack& tx, const SimStack& rx,
                    const ChannelStatistics& stats, double rho,
                    const std::vector<double>& rates, std::int64_t n_trials,
                    std::uint64_t seed, int n_threads = 1);

struct TheoryComparison {
  double mean_z = 0.0;          // |theory - MC mean| / stderr
  double mean_rel_err = 0.0;    // |theory - MC mean| / MC mean
  double variance_rel_err = 0.0;
  double max_outage_dev = 0.0;  // over rates with theory outage in [0.05,0.95]
  double ks_distance = 0.0;     // KS distance of normalized samples vs N(0,1)
  bool mean_ok = false;
  bool variance_ok = false;
  bool outage_ok = false;
  bool ks_ok = false;
  bool all_ok() const { return mean_ok && variance_ok && outage_ok && ks_ok; }
};

// Checks an MC estimate against the asymptotic mean/variance and a Gaussian
// outage curve evaluated at the same rates. `theory_outage` must hold one
// value per key of `mc.outage_by_rate`, in ascending rate order.
TheoryComparison compare_with_theory(const McEstimate& mc, double mean_mi,
                                     double variance,
                                     const std::vector<double>& theory_outage);

// Kolmogorov-Smirnov distance between the empirical distribution of
// (sample - mean) / sqrt(variance) and the standard normal CDF.
double ks_distance_normal(const std::vector<double>& samples, double mean,
                          double variance);

}  // namespace simmimo
