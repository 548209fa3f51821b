#pragma once

#include <optional>
#include <span>

#include "fedsim/client.hpp"
#include "fedsim/linalg.hpp"

// Server-side optimizers. All of them consume the weighted mean of the
// client updates; fedeve additionally runs a scalar predict-observe filter
// whose gain blends the aggregated update into a server momentum.

namespace fedsim {

// Weighted mean of client deltas (weights n_k, renormalized over the given
// set), accumulated in ascending client_id order.
ParamVec aggregate(std::span<const ClientUpdate> updates);

// w' = w - eta_g * delta
ParamVec fedavg_step(const ParamVec& w, const ParamVec& delta, double eta_g);

// Server momentum: M' = beta * M + delta; w' = w - eta_g * M'.
void fedavgm_step(ParamVec& w, ParamVec& momentum, const ParamVec& delta,
                  double beta, double eta_g);

// Server Adam on the aggregated update (no bias correction):
//   m' = beta1 m + (1-beta1) delta,  v' = beta2 v + (1-beta2) delta^2,
//   w' = w - eta_g * m' / (sqrt(v') + tau).
void fedopt_adam_step(ParamVec& w, ParamVec& m, ParamVec& v,
                      const ParamVec& delta, double beta1, double beta2,
                      double tau, double eta_g);

// Scalar noise estimates driving the filter gain. sigma_q2 measures how far
// the aggregated update moved from the momentum (process noise, dominated
// by round-to-round objective shift); sigma_r2 measures within-round client
// disagreement (observation noise).
struct DriftEstimates {
  double sigma_q2 = 0.0;
  double sigma_r2 = 0.0;
};

// With S = |updates| and d = dimension:
//   sigma_q2 = sum_i (M_i - delta_i)^2 / (S * d)
//   sigma_r2 = sum_k sum_i (delta_k,i - delta_i)^2 / (S^2 * d)
// where delta is the aggregated update and delta_k the raw client deltas.
DriftEstimates estimate_drift_variances(const ParamVec& momentum,
                                        std::span<const ClientUpdate> updates,
                                        const ParamVec& delta);

struct FedEveState {
  ParamVec w;
  ParamVec momentum;     // starts at zero
  double sigma2 = 0.0;   // posterior scalar variance, starts at zero
  double eta_g = 1.0;
};

struct Prediction {
  ParamVec w_hat;      // w - eta_g * momentum, broadcast to clients
  double sigma_hat2;   // sigma2 + sigma_q2
};

Prediction fedeve_predict(const FedEveState& state, double sigma_q2);

// sigma_hat2 / (sigma_hat2 + sigma_r2), with the 0/0 corner defined as 1
// (no useful prior, trust the observation). Negative inputs are rejected.
double kalman_gain(double sigma_hat2, double sigma_r2);

struct FedEveStepInfo {
  double gain = 0.0;
  double sigma_hat2 = 0.0;
};

// One observe step: gain from the drift estimates, momentum blended as
// M' = (1-G) M + G delta, w' = w - eta_g * M', posterior variance
// (1-G) * sigma_hat2. forced_gain overrides G for diagnostics (a forced
// gain of 1 makes the trajectory coincide with fedavg).
FedEveStepInfo fedeve_observe_update(FedEveState& state, const ParamVec& delta,
                                     const DriftEstimates& est,
                                     std::optional<double> forced_gain = {});

struct Gaussian {
  double mean = 0.0;
  double var = 0.0;
};

// Product-of-Gaussians fusion:
//   mean = (mu_a var_b + mu_b var_a) / (var_a + var_b)
//   var  = var_a var_b / (var_a + var_b)
// evaluated through the same gain expression the filter uses, so the
// posterior variance recursion and this closed form agree bit for bit.
// Exactly one variance may be zero (that component wins); both zero is
// rejected.
Gaussian fuse_gaussians(double mu_a, double var_a, double mu_b, double var_b);

}  // namespace fedsim
