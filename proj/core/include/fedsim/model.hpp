#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "fedsim/linalg.hpp"

// Differentiable classifiers used as the simulation workload: multinomial
// logistic regression and a one-hidden-layer tanh MLP, both trained with
// mean-reduced softmax cross-entropy. Everything is double precision and
// deterministic given the seed.

namespace fedsim {

enum class ModelKind { logistic, mlp };

struct ModelSpec {
  ModelKind kind = ModelKind::logistic;
  int input_dim = 0;
  int hidden_dim = 0;  // ignored for logistic
  int n_classes = 0;
  double init_scale = 0.05;

  // Flat parameter count. Logistic: W(C x D) then biases(C). MLP:
  // W1(H x D), b1(H), W2(C x H), b2(C), in that order.
  int param_count() const;
};

// A dense minibatch: row-major features, one int label per row.
struct Batch {
  std::vector<double> features;  // n * dim
  std::vector<int> labels;       // n
  int n = 0;
  int dim = 0;

  const double* row(int i) const { return features.data() + size_t(i) * dim; }
};

// Uniform weight init in [-init_scale, init_scale], biases zero.
ParamVec init_params(const ModelSpec& spec, uint64_t seed);

// Mean cross-entropy over the batch (softmax with max subtraction).
double forward_loss(const ModelSpec& spec, const ParamVec& params,
                    const Batch& batch);

// Analytic gradient of forward_loss.
ParamVec backward(const ModelSpec& spec, const ParamVec& params,
                  const Batch& batch);

// Fused forward + backward; the loss comes for free during backprop and
// local training uses it to detect divergence.
std::pair<double, ParamVec> backward_with_loss(const ModelSpec& spec,
                                               const ParamVec& params,
                                               const Batch& batch);

// Central-difference gradient of an arbitrary scalar function, and the
// model-specific wrapper used to cross-check backward().
ParamVec finite_diff(const std::function<double(const ParamVec&)>& f,
                     const ParamVec& at, double eps);
ParamVec finite_diff_grad(const ModelSpec& spec, const ParamVec& params,
                          const Batch& batch, double eps);

struct EvalResult {
  double accuracy = 0.0;   // fraction in [0, 1]
  double mean_loss = 0.0;  // mean cross-entropy
};

// Accuracy (argmax, ties broken toward the lowest class index) and mean
// loss over a non-empty evaluation batch.
EvalResult evaluate(const ModelSpec& spec, const ParamVec& params,
                    const Batch& batch);

}  // namespace fedsim
