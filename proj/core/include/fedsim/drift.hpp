#pragma once

#include <span>

#include "fedsim/data.hpp"
#include "fedsim/model.hpp"
#include "fedsim/round_log.hpp"

// Drift measurement: the gap between what a sampled cohort optimizes and
// the population objective, finite-population subset variance, and
// normality diagnostics for aggregated updates.

namespace fedsim {

// || (1/|S|) sum_{k in S} g_k  -  sum_k (n_k/n) g_k ||^2 for precomputed
// per-client gradients g_k. The first term is the unweighted mean over the
// sampled cohort, the second the size-weighted population gradient.
double period_drift_from_grads(std::span<const ParamVec> grads,
                               std::span<const size_t> sizes,
                               std::span<const int> sampled);

// Same quantity with g_k the exact full-shard gradients of the model at w.
double exact_period_drift(const ModelSpec& spec, const ParamVec& w,
                          const LabeledDataset& data,
                          const PartitionPlan& plan,
                          std::span<const int> sampled);

// Mean over all C(N, S) subsets of (subset mean - population mean)^2.
// Exponential in N; guarded to N <= 12.
double subset_variance_bruteforce(std::span<const double> values,
                                  int subset_size);

// Finite-population closed form (s^2 / S) * (1 - S/N) with s^2 the
// unbiased sample variance (divisor N-1). Equals the brute-force
// enumeration exactly.
double subset_variance_closed_form(std::span<const double> values,
                                   int subset_size);

struct NormalityReport {
  size_t n = 0;
  double skewness = 0.0;         // g1 = m3 / m2^(3/2)
  double excess_kurtosis = 0.0;  // g2 = m4 / m2^2 - 3
  double jb_stat = 0.0;          // n * (g1^2/6 + g2^2/24)
};

// Moment-based normality diagnostic. Needs n >= 8 and non-zero variance.
NormalityReport normality_diagnostic(std::span<const double> samples);

struct DriftSample {
  int round = 0;
  double value = 0.0;
};

// Per-round drift series extracted from run telemetry.
struct DriftSeries {
  std::vector<DriftSample> sigma_q2;
  std::vector<DriftSample> sigma_r2;
  std::vector<DriftSample> period_exact;  // scheduled exact drift values
  std::vector<DriftSample> innovation;    // tracked coordinate of delta - M

  // Preferred period-drift view: exact values when scheduled, otherwise
  // the filter's process-noise estimate.
  const std::vector<DriftSample>& period() const {
    return period_exact.empty() ? sigma_q2 : period_exact;
  }
  const std::vector<DriftSample>& client() const { return sigma_r2; }
};

DriftSeries track_drift_series(std::span<const RoundLog> logs);

}  // namespace fedsim
