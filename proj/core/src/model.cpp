#include "fedsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

namespace {

void check_spec(const ModelSpec& spec) {
  if (spec.input_dim <= 0 || spec.n_classes <= 1)
    throw ShapeError("model: input_dim must be positive and n_classes >= 2");
  if (spec.kind == ModelKind::mlp && spec.hidden_dim <= 0)
    throw ShapeError("model: mlp requires a positive hidden_dim");
}

void check_batch(const ModelSpec& spec, const ParamVec& params,
                 const Batch& batch) {
  if (params.size() != size_t(spec.param_count()))
    throw ShapeError("model: param vector has " +
                     std::to_string(params.size()) + " entries, expected " +
                     std::to_string(spec.param_count()));
  if (batch.n <= 0) throw ShapeError("model: batch is empty");
  if (batch.dim != spec.input_dim)
    throw ShapeError("model: batch dim " + std::to_string(batch.dim) +
                     " does not match input_dim " +
                     std::to_string(spec.input_dim));
  if (batch.features.size() != size_t(batch.n) * batch.dim ||
      batch.labels.size() != size_t(batch.n))
    throw ShapeError("model: batch buffers disagree with n/dim");
  for (int y : batch.labels)
    if (y < 0 || y >= spec.n_classes)
      throw ShapeError("model: label " + std::to_string(y) +
                       " outside [0, n_classes)");
}

// Softmax cross-entropy on one logit row; returns the loss and overwrites
// logits with the probabilities.
double softmax_xent_inplace(std::vector<double>& logits, int label) {
  double zmax = logits[0];
  for (double z : logits) zmax = std::max(zmax, z);
  double sum = 0.0;
  for (double& z : logits) {
    z = std::exp(z - zmax);
    sum += z;
  }
  double loss = std::log(sum) - std::log(logits[label]);
  for (double& z : logits) z /= sum;
  return loss;
}

struct LogisticLayout {
  int w = 0;  // offset of W (C x D)
  int b = 0;  // offset of biases (C)
};

struct MlpLayout {
  int w1 = 0, b1 = 0, w2 = 0, b2 = 0;
};

MlpLayout mlp_layout(const ModelSpec& s) {
  MlpLayout l;
  l.w1 = 0;
  l.b1 = l.w1 + s.hidden_dim * s.input_dim;
  l.w2 = l.b1 + s.hidden_dim;
  l.b2 = l.w2 + s.n_classes * s.hidden_dim;
  return l;
}

}  // namespace

int ModelSpec::param_count() const {
  if (kind == ModelKind::logistic) return n_classes * input_dim + n_classes;
  return hidden_dim * input_dim + hidden_dim + n_classes * hidden_dim +
         n_classes;
}

ParamVec init_params(const ModelSpec& spec, uint64_t seed) {
  check_spec(spec);
  Rng rng(seed);
  ParamVec p(spec.param_count(), 0.0);
  auto fill = [&](int off, int count) {
    for (int i = 0; i < count; ++i)
      p[off + i] = rng.uniform(-spec.init_scale, spec.init_scale);
  };
  if (spec.kind == ModelKind::logistic) {
    fill(0, spec.n_classes * spec.input_dim);  // biases stay zero
  } else {
    MlpLayout l = mlp_layout(spec);
    fill(l.w1, spec.hidden_dim * spec.input_dim);
    fill(l.w2, spec.n_classes * spec.hidden_dim);
  }
  return p;
}

namespace {

// Shared forward/backward walk. grad == nullptr means forward only.
double run_model(const ModelSpec& spec, const ParamVec& params,
                 const Batch& batch, ParamVec* grad) {
  const int C = spec.n_classes;
  const int D = spec.input_dim;
  const double inv_n = 1.0 / batch.n;
  double total_loss = 0.0;
  if (grad) grad->assign(params.size(), 0.0);

  if (spec.kind == ModelKind::logistic) {
    const double* W = params.data();
    const double* b = params.data() + size_t(C) * D;
    std::vector<double> logits(C);
    for (int r = 0; r < batch.n; ++r) {
      const double* x = batch.row(r);
      for (int c = 0; c < C; ++c) {
        double z = b[c];
        const double* wc = W + size_t(c) * D;
        for (int j = 0; j < D; ++j) z += wc[j] * x[j];
        logits[c] = z;
      }
      total_loss += softmax_xent_inplace(logits, batch.labels[r]);
      if (grad) {
        double* gW = grad->data();
        double* gb = grad->data() + size_t(C) * D;
        for (int c = 0; c < C; ++c) {
          double dz = (logits[c] - (c == batch.labels[r] ? 1.0 : 0.0)) * inv_n;
          gb[c] += dz;
          double* gwc = gW + size_t(c) * D;
          for (int j = 0; j < D; ++j) gwc[j] += dz * x[j];
        }
      }
    }
  } else {
    const int H = spec.hidden_dim;
    MlpLayout l = mlp_layout(spec);
    const double* W1 = params.data() + l.w1;
    const double* b1 = params.data() + l.b1;
    const double* W2 = params.data() + l.w2;
    const double* b2 = params.data() + l.b2;
    std::vector<double> h(H), logits(C), dh(H);
    for (int r = 0; r < batch.n; ++r) {
      const double* x = batch.row(r);
      for (int i = 0; i < H; ++i) {
        double z = b1[i];
        const double* w1i = W1 + size_t(i) * D;
        for (int j = 0; j < D; ++j) z += w1i[j] * x[j];
        h[i] = std::tanh(z);
      }
      for (int c = 0; c < C; ++c) {
        double z = b2[c];
        const double* w2c = W2 + size_t(c) * H;
        for (int i = 0; i < H; ++i) z += w2c[i] * h[i];
        logits[c] = z;
      }
      total_loss += softmax_xent_inplace(logits, batch.labels[r]);
      if (grad) {
        double* gW1 = grad->data() + l.w1;
        double* gb1 = grad->data() + l.b1;
        double* gW2 = grad->data() + l.w2;
        double* gb2 = grad->data() + l.b2;
        std::fill(dh.begin(), dh.end(), 0.0);
        for (int c = 0; c < C; ++c) {
          double dz = (logits[c] - (c == batch.labels[r] ? 1.0 : 0.0)) * inv_n;
          gb2[c] += dz;
          double* gw2c = gW2 + size_t(c) * H;
          const double* w2c = W2 + size_t(c) * H;
          for (int i = 0; i < H; ++i) {
            gw2c[i] += dz * h[i];
            dh[i] += dz * w2c[i];
          }
        }
        for (int i = 0; i < H; ++i) {
          double dz1 = dh[i] * (1.0 - h[i] * h[i]);
          gb1[i] += dz1;
          double* gw1i = gW1 + size_t(i) * D;
          for (int j = 0; j < D; ++j) gw1i[j] += dz1 * x[j];
        }
      }
    }
  }
  return total_loss * inv_n;
}

}  // namespace

double forward_loss(const ModelSpec& spec, const ParamVec& params,
                    const Batch& batch) {
  check_spec(spec);
  check_batch(spec, params, batch);
  return run_model(spec, params, batch, nullptr);
}

ParamVec backward(const ModelSpec& spec, const ParamVec& params,
                  const Batch& batch) {
  check_spec(spec);
  check_batch(spec, params, batch);
  ParamVec grad;
  run_model(spec, params, batch, &grad);
  return grad;
}

std::pair<double, ParamVec> backward_with_loss(const ModelSpec& spec,
                                               const ParamVec& params,
                                               const Batch& batch) {
  check_spec(spec);
  check_batch(spec, params, batch);
  ParamVec grad;
  double loss = run_model(spec, params, batch, &grad);
  return {loss, std::move(grad)};
}

ParamVec finite_diff(const std::function<double(const ParamVec&)>& f,
                     const ParamVec& at, double eps) {
  if (eps <= 0.0) throw ShapeError("finite_diff: eps must be positive");
  ParamVec g(at.size());
  ParamVec w = at;
  for (size_t i = 0; i < at.size(); ++i) {
    w[i] = at[i] + eps;
    double hi = f(w);
    w[i] = at[i] - eps;
    double lo = f(w);
    w[i] = at[i];
    g[i] = (hi - lo) / (2.0 * eps);
  }
  return g;
}

ParamVec finite_diff_grad(const ModelSpec& spec, const ParamVec& params,
                          const Batch& batch, double eps) {
  check_spec(spec);
  check_batch(spec, params, batch);
  return finite_diff(
      [&](const ParamVec& w) { return run_model(spec, w, batch, nullptr); },
      params, eps);
}

EvalResult evaluate(const ModelSpec& spec, const ParamVec& params,
                    const Batch& batch) {
  check_spec(spec);
  check_batch(spec, params, batch);
  const int C = spec.n_classes;
  const int D = spec.input_dim;
  const int H = spec.hidden_dim;
  std::vector<double> logits(C), h;
  if (spec.kind == ModelKind::mlp) h.resize(H);
  double total_loss = 0.0;
  int correct = 0;
  for (int r = 0; r < batch.n; ++r) {
    const double* x = batch.row(r);
    if (spec.kind == ModelKind::logistic) {
      const double* W = params.data();
      const double* b = params.data() + size_t(C) * D;
      for (int c = 0; c < C; ++c) {
        double z = b[c];
        const double* wc = W + size_t(c) * D;
        for (int j = 0; j < D; ++j) z += wc[j] * x[j];
        logits[c] = z;
      }
    } else {
      MlpLayout l = mlp_layout(spec);
      const double* W1 = params.data() + l.w1;
      const double* b1 = params.data() + l.b1;
      const double* W2 = params.data() + l.w2;
      const double* b2 = params.data() + l.b2;
      for (int i = 0; i < H; ++i) {
        double z = b1[i];
        const double* w1i = W1 + size_t(i) * D;
        for (int j = 0; j < D; ++j) z += w1i[j] * x[j];
        h[i] = std::tanh(z);
      }
      for (int c = 0; c < C; ++c) {
        double z = b2[c];
        const double* w2c = W2 + size_t(c) * H;
        for (int i = 0; i < H; ++i) z += w2c[i] * h[i];
        logits[c] = z;
      }
    }
    int pred = 0;  // strict > keeps the lowest index on ties
    for (int c = 1; c < C; ++c)
      if (logits[c] > logits[pred]) pred = c;
    if (pred == batch.labels[r]) ++correct;
    total_loss += softmax_xent_inplace(logits, batch.labels[r]);
  }
  return {double(correct) / batch.n, total_loss / batch.n};
}

}  // namespace fedsim
