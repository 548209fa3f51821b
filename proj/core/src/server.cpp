#include "fedsim/server.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedsim/errors.hpp"

namespace fedsim {

ParamVec aggregate(std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw ShapeError("aggregate: no client updates");
  const size_t dim = updates[0].delta.size();
  std::vector<size_t> order(updates.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return updates[a].client_id < updates[b].client_id;
  });
  for (size_t i = 1; i < order.size(); ++i)
    if (updates[order[i - 1]].client_id == updates[order[i]].client_id)
      throw ShapeError("aggregate: duplicate client id " +
                       std::to_string(updates[order[i]].client_id));
  double total = 0.0;
  for (const auto& u : updates) {
    if (u.delta.size() != dim)
      throw ShapeError("aggregate: update dimension mismatch");
    if (u.n_k == 0) throw ShapeError("aggregate: client with n_k == 0");
    total += double(u.n_k);
  }
  ParamVec acc(dim, 0.0);
  for (size_t k : order)
    axpy(acc, double(updates[k].n_k) / total, updates[k].delta);
  return acc;
}

ParamVec fedavg_step(const ParamVec& w, const ParamVec& delta, double eta_g) {
  check_same_size(w, delta, "fedavg_step");
  ParamVec out = w;
  axpy(out, -eta_g, delta);
  return out;
}

void fedavgm_step(ParamVec& w, ParamVec& momentum, const ParamVec& delta,
                  double beta, double eta_g) {
  check_same_size(w, delta, "fedavgm_step");
  check_same_size(w, momentum, "fedavgm_step");
  if (beta < 0.0 || beta >= 1.0)
    throw ShapeError("fedavgm_step: beta must be in [0, 1)");
  for (size_t i = 0; i < momentum.size(); ++i)
    momentum[i] = beta * momentum[i] + delta[i];
  axpy(w, -eta_g, momentum);
}

void fedopt_adam_step(ParamVec& w, ParamVec& m, ParamVec& v,
                      const ParamVec& delta, double beta1, double beta2,
                      double tau, double eta_g) {
  check_same_size(w, delta, "fedopt_adam_step");
  check_same_size(w, m, "fedopt_adam_step");
  check_same_size(w, v, "fedopt_adam_step");
  if (tau <= 0.0) throw ShapeError("fedopt_adam_step: tau must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ShapeError("fedopt_adam_step: betas must be in [0, 1)");
  for (size_t i = 0; i < w.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * delta[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * delta[i] * delta[i];
    w[i] -= eta_g * m[i] / (std::sqrt(v[i]) + tau);
  }
}

DriftEstimates estimate_drift_variances(const ParamVec& momentum,
                                        std::span<const ClientUpdate> updates,
                                        const ParamVec& delta) {
  if (updates.empty())
    throw ShapeError("estimate_drift_variances: no client updates");
  check_same_size(momentum, delta, "estimate_drift_variances");
  const double S = double(updates.size());
  const double d = double(delta.size());
  DriftEstimates est;
  double q = 0.0;
  for (size_t i = 0; i < delta.size(); ++i) {
    double diff = momentum[i] - delta[i];
    q += diff * diff;
  }
  est.sigma_q2 = q / (S * d);
  double r = 0.0;
  for (const auto& u : updates) {
    check_same_size(u.delta, delta, "estimate_drift_variances");
    for (size_t i = 0; i < delta.size(); ++i) {
      double diff = u.delta[i] - delta[i];
      r += diff * diff;
    }
  }
  est.sigma_r2 = r / (S * S * d);
  return est;
}

Prediction fedeve_predict(const FedEveState& state, double sigma_q2) {
  check_same_size(state.w, state.momentum, "fedeve_predict");
  if (sigma_q2 < 0.0 || state.sigma2 < 0.0)
    throw ShapeError("fedeve_predict: variances must be non-negative");
  Prediction p;
  p.w_hat = state.w;
  axpy(p.w_hat, -state.eta_g, state.momentum);
  p.sigma_hat2 = state.sigma2 + sigma_q2;
  return p;
}

double kalman_gain(double sigma_hat2, double sigma_r2) {
  if (sigma_hat2 < 0.0 || sigma_r2 < 0.0)
    throw ShapeError("kalman_gain: variances must be non-negative");
  const double denom = sigma_hat2 + sigma_r2;
  if (denom == 0.0) return 1.0;  // no prior information: trust the observation
  return sigma_hat2 / denom;
}

FedEveStepInfo fedeve_observe_update(FedEveState& state, const ParamVec& delta,
                                     const DriftEstimates& est,
                                     std::optional<double> forced_gain) {
  check_same_size(state.w, delta, "fedeve_observe_update");
  check_same_size(state.w, state.momentum, "fedeve_observe_update");
  if (est.sigma_q2 < 0.0 || est.sigma_r2 < 0.0 || state.sigma2 < 0.0)
    throw ShapeError("fedeve_observe_update: variances must be non-negative");
  FedEveStepInfo info;
  info.sigma_hat2 = state.sigma2 + est.sigma_q2;
  info.gain = forced_gain ? *forced_gain
                          : kalman_gain(info.sigma_hat2, est.sigma_r2);
  if (info.gain < 0.0 || info.gain > 1.0)
    throw ShapeError("fedeve_observe_update: gain outside [0, 1]");
  const double g = info.gain;
  const double omg = 1.0 - g;
  for (size_t i = 0; i < state.momentum.size(); ++i)
    state.momentum[i] = omg * state.momentum[i] + g * delta[i];
  axpy(state.w, -state.eta_g, state.momentum);
  state.sigma2 = omg * info.sigma_hat2;
  return info;
}

Gaussian fuse_gaussians(double mu_a, double var_a, double mu_b, double var_b) {
  if (var_a < 0.0 || var_b < 0.0)
    throw ShapeError("fuse_gaussians: variances must be non-negative");
  if (var_a == 0.0 && var_b == 0.0)
    throw ShapeError("fuse_gaussians: both variances are zero");
  // Written through the gain so the filter's posterior variance recursion
  // (1-G) * sigma_hat2 is this expression verbatim.
  const double g = kalman_gain(var_a, var_b);
  const double omg = 1.0 - g;
  Gaussian out;
  out.mean = omg * mu_a + g * mu_b;
  out.var = omg * var_a;
  return out;
}

}  // namespace fedsim
