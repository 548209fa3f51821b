#include "fedsim/client.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

namespace {

void check_hyper(const LocalHyper& h) {
  if (h.eta_l < 0.0) throw ShapeError("local train: eta_l must be >= 0");
  if (h.epochs < 1) throw ShapeError("local train: epochs must be >= 1");
  if (h.batch_size < 1)
    throw ShapeError("local train: batch_size must be >= 1");
  if (h.mu < 0.0) throw ShapeError("local train: mu must be >= 0");
}

// Shared minibatch loop. The per-step direction is
//   grad + mu * (w - w_in) + corr
// where corr is the precomputed control-variate correction (or null).
// The update is accumulated step by step so that a single-step run returns
// exactly eta_l * grad.
ClientUpdate train_loop(const ModelSpec& spec, const ParamVec& w_in,
                        const LabeledDataset& shard, const LocalHyper& hyper,
                        double mu, const ParamVec* corr, int client_id,
                        uint64_t seed) {
  check_hyper(hyper);
  if (shard.n < 1)
    throw ShapeError("local train: client " + std::to_string(client_id) +
                     " has an empty shard");
  if (corr) check_same_size(*corr, w_in, "local train correction");

  Rng rng(seed);
  ParamVec w = w_in;
  ParamVec delta(w.size(), 0.0);
  ClientUpdate out;
  out.n_k = size_t(shard.n);
  out.client_id = client_id;

  std::vector<size_t> order(shard.n);
  std::iota(order.begin(), order.end(), size_t{0});
  const size_t B = size_t(hyper.batch_size);
  for (int e = 0; e < hyper.epochs; ++e) {
    rng.shuffle(order);
    for (size_t lo = 0; lo < order.size(); lo += B) {
      const size_t hi = std::min(lo + B, order.size());
      Batch batch = make_batch(
          shard, std::span<const size_t>(order.data() + lo, hi - lo));
      auto [loss, dir] = backward_with_loss(spec, w, batch);
      if (!std::isfinite(loss))
        throw DivergenceError("client " + std::to_string(client_id) +
                              ": non-finite loss at local step " +
                              std::to_string(out.steps));
      if (mu != 0.0)
        for (size_t i = 0; i < dir.size(); ++i)
          dir[i] += mu * (w[i] - w_in[i]);
      if (corr)
        for (size_t i = 0; i < dir.size(); ++i) dir[i] += (*corr)[i];
      out.max_dir_norm = std::max(out.max_dir_norm, l2(dir));
      for (size_t i = 0; i < dir.size(); ++i) {
        double step = hyper.eta_l * dir[i];
        w[i] -= step;
        delta[i] += step;
      }
      ++out.steps;
    }
  }
  if (!all_finite(delta))
    throw DivergenceError("client " + std::to_string(client_id) +
                          ": non-finite update after " +
                          std::to_string(out.steps) + " local steps");
  out.delta = std::move(delta);
  return out;
}

}  // namespace

ClientUpdate local_train_sgd(const ModelSpec& spec, const ParamVec& w_in,
                             const LabeledDataset& shard,
                             const LocalHyper& hyper, int client_id,
                             uint64_t seed) {
  return train_loop(spec, w_in, shard, hyper, 0.0, nullptr, client_id, seed);
}

ClientUpdate local_train_prox(const ModelSpec& spec, const ParamVec& w_in,
                              const LabeledDataset& shard,
                              const LocalHyper& hyper, int client_id,
                              uint64_t seed) {
  return train_loop(spec, w_in, shard, hyper, hyper.mu, nullptr, client_id,
                    seed);
}

ScaffoldResult local_train_scaffold(const ModelSpec& spec,
                                    const ParamVec& w_in,
                                    const LabeledDataset& shard,
                                    const LocalHyper& hyper,
                                    const ControlVariate& cv, int client_id,
                                    uint64_t seed) {
  check_same_size(cv.c_local, cv.c_global, "scaffold control variates");
  // The per-step direction is grad - c_local + c_global, folded into one
  // additive correction. It collapses to exact zeros when the two control
  // variates are equal, which keeps this path bit-identical to plain SGD.
  ParamVec corr(cv.c_local.size());
  for (size_t i = 0; i < corr.size(); ++i)
    corr[i] = cv.c_global[i] - cv.c_local[i];

  if (hyper.eta_l == 0.0)
    throw ShapeError("local_train_scaffold: eta_l must be positive to "
                     "refresh the control variate");
  ScaffoldResult res;
  res.update =
      train_loop(spec, w_in, shard, hyper, 0.0, &corr, client_id, seed);
  const double denom = double(res.update.steps) * hyper.eta_l;
  res.c_local_new.resize(corr.size());
  for (size_t i = 0; i < corr.size(); ++i)
    res.c_local_new[i] =
        (cv.c_local[i] - cv.c_global[i]) + res.update.delta[i] / denom;
  return res;
}

}  // namespace fedsim
