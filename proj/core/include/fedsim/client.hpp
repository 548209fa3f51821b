#pragma once

#include <cstdint>

#include "fedsim/data.hpp"
#include "fedsim/model.hpp"

// Local training. Each variant runs E epochs of minibatch SGD over a
// seed-shuffled shard and reports the accumulated parameter movement
// delta = w_in - w_final, which the server aggregates and applies.

namespace fedsim {

struct LocalHyper {
  double eta_l = 0.01;  // local learning rate
  int epochs = 1;
  int batch_size = 32;
  double mu = 0.0;  // proximal strength, used by local_train_prox only
};

struct ClientUpdate {
  ParamVec delta;  // w_in - w_final
  size_t n_k = 0;  // shard size, used as the aggregation weight
  int client_id = 0;
  int steps = 0;              // epochs * ceil(n_k / batch_size)
  double max_dir_norm = 0.0;  // largest per-step direction norm observed
};

// Per-client correction state for variance-reduced local training.
struct ControlVariate {
  ParamVec c_local;
  ParamVec c_global;
};

// Plain local SGD.
ClientUpdate local_train_sgd(const ModelSpec& spec, const ParamVec& w_in,
                             const LabeledDataset& shard,
                             const LocalHyper& hyper, int client_id,
                             uint64_t seed);

// SGD with a proximal pull toward the broadcast point: each step follows
// grad + mu * (w - w_in). Bit-identical to local_train_sgd when mu == 0.
ClientUpdate local_train_prox(const ModelSpec& spec, const ParamVec& w_in,
                              const LabeledDataset& shard,
                              const LocalHyper& hyper, int client_id,
                              uint64_t seed);

struct ScaffoldResult {
  ClientUpdate update;
  ParamVec c_local_new;
};

// Control-variate-corrected SGD: each step follows
// grad - c_local + c_global, and the refreshed client correction is
// c_local - c_global + delta / (steps * eta_l). Bit-identical to
// local_train_sgd when c_local == c_global.
ScaffoldResult local_train_scaffold(const ModelSpec& spec,
                                    const ParamVec& w_in,
                                    const LabeledDataset& shard,
                                    const LocalHyper& hyper,
                                    const ControlVariate& cv, int client_id,
                                    uint64_t seed);

}  // namespace fedsim
