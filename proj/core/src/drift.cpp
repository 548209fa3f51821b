#include "fedsim/drift.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedsim/errors.hpp"

namespace fedsim {

double period_drift_from_grads(std::span<const ParamVec> grads,
                               std::span<const size_t> sizes,
                               std::span<const int> sampled) {
  if (grads.empty() || grads.size() != sizes.size())
    throw ShapeError("period_drift: gradients and sizes disagree");
  if (sampled.empty()) throw ShapeError("period_drift: empty cohort");
  const size_t dim = grads[0].size();
  double total = 0.0;
  for (size_t n_k : sizes) total += double(n_k);

  ParamVec weighted(dim, 0.0);
  for (size_t k = 0; k < grads.size(); ++k) {
    check_same_size(grads[k], weighted, "period_drift");
    axpy(weighted, double(sizes[k]) / total, grads[k]);
  }
  ParamVec cohort(dim, 0.0);
  const double inv_s = 1.0 / double(sampled.size());
  for (int k : sampled) {
    if (k < 0 || size_t(k) >= grads.size())
      throw ShapeError("period_drift: sampled id " + std::to_string(k) +
                       " out of range");
    axpy(cohort, inv_s, grads[k]);
  }
  double d = 0.0;
  for (size_t i = 0; i < dim; ++i) {
    double diff = cohort[i] - weighted[i];
    d += diff * diff;
  }
  return d;
}

double exact_period_drift(const ModelSpec& spec, const ParamVec& w,
                          const LabeledDataset& data,
                          const PartitionPlan& plan,
                          std::span<const int> sampled) {
  std::vector<ParamVec> grads;
  std::vector<size_t> sizes;
  grads.reserve(plan.assignments.size());
  for (const auto& a : plan.assignments) {
    grads.push_back(backward(spec, w, make_batch(data, a)));
    sizes.push_back(a.size());
  }
  return period_drift_from_grads(grads, sizes, sampled);
}

namespace {

double population_mean(std::span<const double> values) {
  double m = 0.0;
  for (double v : values) m += v;
  return m / double(values.size());
}

void check_subset_args(std::span<const double> values, int subset_size) {
  if (values.size() < 2)
    throw ShapeError("subset_variance: population must have N >= 2");
  if (subset_size < 1 || size_t(subset_size) > values.size())
    throw ShapeError("subset_variance: subset size must be in [1, N]");
}

}  // namespace

double subset_variance_bruteforce(std::span<const double> values,
                                  int subset_size) {
  check_subset_args(values, subset_size);
  const size_t N = values.size();
  if (N > 12)
    throw ShapeError("subset_variance_bruteforce: N > 12 would enumerate "
                     "too many subsets");
  const double pop_mean = population_mean(values);
  const int S = subset_size;

  // Lexicographic combination walk over index vectors.
  std::vector<size_t> idx(S);
  for (int i = 0; i < S; ++i) idx[i] = size_t(i);
  double sum = 0.0;
  size_t count = 0;
  for (;;) {
    double m = 0.0;
    for (size_t i : idx) m += values[i];
    m /= double(S);
    sum += (m - pop_mean) * (m - pop_mean);
    ++count;
    int pos = S - 1;
    while (pos >= 0 && idx[pos] == N - size_t(S - pos)) --pos;
    if (pos < 0) break;
    ++idx[pos];
    for (int i = pos + 1; i < S; ++i) idx[i] = idx[i - 1] + 1;
  }
  return sum / double(count);
}

double subset_variance_closed_form(std::span<const double> values,
                                   int subset_size) {
  check_subset_args(values, subset_size);
  const size_t N = values.size();
  const double pop_mean = population_mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - pop_mean) * (v - pop_mean);
  const double s2 = ss / double(N - 1);  // unbiased sample variance
  const double S = double(subset_size);
  return (s2 / S) * (1.0 - S / double(N));
}

NormalityReport normality_diagnostic(std::span<const double> samples) {
  if (samples.size() < 8)
    throw ShapeError("normality_diagnostic: need at least 8 samples");
  const double n = double(samples.size());
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : samples) {
    double d = v - mean;
    double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (m2 == 0.0)
    throw ShapeError("normality_diagnostic: zero variance sample");
  NormalityReport rep;
  rep.n = samples.size();
  rep.skewness = m3 / std::pow(m2, 1.5);
  rep.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  rep.jb_stat = n * (rep.skewness * rep.skewness / 6.0 +
                     rep.excess_kurtosis * rep.excess_kurtosis / 24.0);
  return rep;
}

DriftSeries track_drift_series(std::span<const RoundLog> logs) {
  DriftSeries s;
  for (const auto& log : logs) {
    if (log.sigma_q2) s.sigma_q2.push_back({log.t, *log.sigma_q2});
    if (log.sigma_r2) s.sigma_r2.push_back({log.t, *log.sigma_r2});
    if (log.period_drift) s.period_exact.push_back({log.t, *log.period_drift});
    s.innovation.push_back({log.t, log.innovation_c0});
  }
  return s;
}

}  // namespace fedsim
