#include "simmimo/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "simmimo/channel.hpp"
#include "simmimo/linalg.hpp"
#include "simmimo/rng.hpp"

namespace simmimo {

double mi_sample(const CMat& h, double rho) {
  if (rho < 0.0) throw InvalidInputError("mi_sample: rho must be >= 0");
  if (rho == 0.0) return 0.0;
  const Eigen::Index n = h.rows();
  CMat gram = CMat::Identity(n, n);
  gram.noalias() += rho * h * h.adjoint();
  return logdet_hpd(gram);
}

McEstimate estimate(const SimStack& tx, const SimStack& rx,
                    const ChannelStatistics& stats, double rho,
                    const std::vector<double>& rates, std::int64_t n_trials,
                    std::uint64_t seed, int n_threads) {
  if (n_trials < 1) throw InvalidInputError("estimate: n_trials must be >= 1");
  if (n_threads < 1) n_threads = 1;

  const CMat p = compose_sim(tx);   // m x n_t
  const CMat d = compose_sim(rx);   // n_r x n
  if (p.rows() != stats.r_t.rows()) {
    throw InvalidInputError("estimate: transmit stack does not match r_t");
  }
  if (d.cols() != stats.r_r.rows()) {
    throw InvalidInputError("estimate: receive stack does not match r_r");
  }
  const CMat sqrt_r_t = hermitian_sqrt(stats.r_t);
  const CMat sqrt_r_r = hermitian_sqrt(stats.r_r);
  // Fold the deterministic factors into the correlation square roots so each
  // trial costs one Gaussian fill and three products:
  //   H = (D * R_r^{1/2}) * Gtilde * (R_t^{1/2} * P).
  const CMat left = d * sqrt_r_r;    // n_r x n
  const CMat right = sqrt_r_t * p;   // m x n_t

  std::vector<double> samples(static_cast<std::size_t>(n_trials));
  const auto worker = [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t t = begin; t < end; ++t) {
      SplitMix64 rng(SplitMix64::substream(seed, static_cast<std::uint64_t>(t)));
      const CMat h =
          left * sample_gaussian_core(rng, static_cast<int>(stats.r_r.rows()),
                                      static_cast<int>(stats.r_t.rows()),
                                      stats.beta) *
          right;
      samples[static_cast<std::size_t>(t)] = mi_sample(h, rho);
    }
  };

  if (n_threads == 1 || n_trials < 2 * n_threads) {
    worker(0, n_trials);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    const std::int64_t chunk = (n_trials + n_threads - 1) / n_threads;
    for (int i = 0; i < n_threads; ++i) {
      const std::int64_t begin = i * chunk;
      const std::int64_t end = std::min<std::int64_t>(begin + chunk, n_trials);
      if (begin >= end) break;
      pool.emplace_back(worker, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  McEstimate out;
  out.n_trials = n_trials;
  out.seed = seed;
  out.samples = samples;

  // Ordered two-pass moments: the summation order is fixed by trial index, so
  // the estimate does not depend on the thread count.
  double sum = 0.0;
  for (const double s : samples) sum += s;
  out.mean = sum / static_cast<double>(n_trials);
  double ss = 0.0;
  for (const double s : samples) {
    const double dlt = s - out.mean;
    ss += dlt * dlt;
  }
  out.variance = n_trials > 1 ? ss / static_cast<double>(n_trials - 1) : 0.0;
  out.std_error_mean = std::sqrt(out.variance / static_cast<double>(n_trials));

  for (const double r : rates) {
    std::int64_t below = 0;
    for (const double s : samples) {
      if (s < r) ++below;
    }
    out.outage_by_rate[r] =
        static_cast<double>(below) / static_cast<double>(n_trials);
  }
  return out;
}

double ks_distance_normal(const std::vector<double>& samples, double mean,
                          double variance) {
  if (samples.empty()) throw InvalidInputError("ks_distance_normal: no samples");
  if (variance <= 0.0) {
    throw InvalidInputError("ks_distance_normal: variance must be > 0");
  }
  const double sd = std::sqrt(variance);
  std::vector<double> z(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    z[i] = (samples[i] - mean) / sd;
  }
  std::sort(z.begin(), z.end());
  const double n = static_cast<double>(z.size());
  double d = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double cdf = normal_cdf(z[i]);
    const double hi = (static_cast<double>(i) + 1.0) / n - cdf;
    const double lo = cdf - static_cast<double>(i) / n;
    d = std::max({d, hi, lo});
  }
  return d;
}

TheoryComparison compare_with_theory(const McEstimate& mc, double mean_mi,
                                     double variance,
                                     const std::vector<double>& theory_outage) {
  if (theory_outage.size() != mc.outage_by_rate.size()) {
    throw InvalidInputError(
        "compare_with_theory: one theory outage value per MC rate required");
  }
  TheoryComparison cmp;
  const double err = std::abs(mean_mi - mc.mean);
  cmp.mean_z = mc.std_error_mean > 0.0 ? err / mc.std_error_mean
                                       : (err == 0.0 ? 0.0 : INFINITY);
  cmp.mean_rel_err = mc.mean != 0.0 ? err / std::abs(mc.mean)
                                    : (err == 0.0 ? 0.0 : INFINITY);
  cmp.mean_ok = cmp.mean_z <= 3.0 && cmp.mean_rel_err <= 0.02;

  cmp.variance_rel_err =
      mc.variance > 0.0 ? std::abs(variance - mc.variance) / mc.variance
                        : INFINITY;
  cmp.variance_ok = cmp.variance_rel_err <= 0.10;

  std::size_t i = 0;
  cmp.outage_ok = true;
  for (const auto& [rate, emp] : mc.outage_by_rate) {
    (void)rate;
    const double th = theory_outage[i++];
    if (th >= 0.05 && th <= 0.95) {
      cmp.max_outage_dev = std::max(cmp.max_outage_dev, std::abs(th - emp));
    }
  }
  cmp.outage_ok = cmp.max_outage_dev <= 0.03;

  cmp.ks_distance = ks_distance_normal(mc.samples, mean_mi, variance);
  cmp.ks_ok = cmp.ks_distance <= 0.03;
  return cmp;
}

}  // namespace simmimo
