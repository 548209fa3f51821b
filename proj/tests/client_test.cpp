#include "fedsim/client.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "fedsim/data.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {
namespace {

LabeledDataset small_shard(int n, int dim, int n_classes, uint64_t seed) {
  Rng rng(seed);
  LabeledDataset d;
  d.n = n;
  d.dim = dim;
  d.n_classes = n_classes;
  d.features.resize(size_t(n) * dim);
  for (double& v : d.features) v = rng.normal();
  d.labels.resize(n);
  for (int& y : d.labels) y = int(rng.below(uint64_t(n_classes)));
  return d;
}

ModelSpec tiny_spec() { return ModelSpec{ModelKind::logistic, 3, 0, 3}; }

TEST(client, single_step_delta_is_exactly_scaled_gradient) {
  const ModelSpec spec = tiny_spec();
  const LabeledDataset shard = small_shard(6, 3, 3, 17);
  const ParamVec w = init_params(spec, 18);
  LocalHyper h;
  h.eta_l = 0.01;
  h.epochs = 1;
  h.batch_size = 16;  // one batch covers the shard
  const ClientUpdate u = local_train_sgd(spec, w, shard, h, 4, 19);
  EXPECT_EQ(u.steps, 1);
  EXPECT_EQ(u.n_k, 6u);
  EXPECT_EQ(u.client_id, 4);
  const ParamVec g = backward(spec, w, as_batch(shard));
  ASSERT_EQ(u.delta.size(), g.size());
  for (size_t i = 0; i < g.size(); ++i)
    EXPECT_EQ(u.delta[i], 0.01 * g[i]) << "coordinate " << i;  // bitwise
  EXPECT_DOUBLE_EQ(u.max_dir_norm, l2(g));
}

// With the batch covering the whole shard, the per-epoch shuffle is
// irrelevant (batch assembly re-sorts), so the loop must reproduce the
// full-batch recursion w_{k+1} = w_k - eta * g(w_k) bit for bit.
TEST(client, multi_epoch_full_batch_matches_hand_recursion) {
  const ModelSpec spec = tiny_spec();
  const LabeledDataset shard = small_shard(5, 3, 3, 23);
  const Batch full = as_batch(shard);
  const ParamVec w0 = init_params(spec, 24);
  LocalHyper h;
  h.eta_l = 0.25;  // dyadic, so the scaling below stays exact
  h.epochs = 3;
  h.batch_size = 8;
  const ClientUpdate u = local_train_sgd(spec, w0, shard, h, 0, 25);
  EXPECT_EQ(u.steps, 3);

  ParamVec w = w0;
  ParamVec delta(w.size(), 0.0);
  for (int k = 0; k < 3; ++k) {
    const ParamVec g = backward(spec, w, full);
    for (size_t i = 0; i < w.size(); ++i) {
      const double step = 0.25 * g[i];
      w[i] -= step;
      delta[i] += step;
    }
  }
  EXPECT_EQ(u.delta, delta);
}

TEST(client, step_count_covers_partial_batches) {
  const ModelSpec spec = tiny_spec();
  const LabeledDataset shard = small_shard(7, 3, 3, 31);
  const ParamVec w = init_params(spec, 32);
  LocalHyper h;
  h.epochs = 2;
  h.batch_size = 3;  // ceil(7/3) = 3 chunks per epoch
  const ClientUpdate u = local_train_sgd(spec, w, shard, h, 1, 33);
  EXPECT_EQ(u.steps, 6);
  EXPECT_GT(u.max_dir_norm, 0.0);
}

TEST(client, delta_norm_bounded_by_step_budget) {
  const ModelSpec spec = tiny_spec();
  const LabeledDataset shard = small_shard(9, 3, 3, 41);
  const ParamVec w = init_params(spec, 42);
  LocalHyper h;
  h.eta_l = 0.05;
  h.epochs = 3;
  h.batch_size = 4;
  const ClientUpdate u = local_train_sgd(spec, w, shard, h, 2, 43);
  EXPECT_LE(l2(u.delta),
            h.eta_l * double(u.steps) * u.max_dir_norm * (1.0 + 1e-12));
}

TEST(client, deterministic_in_seed) {
  const ModelSpec spec = tiny_spec();
  const LabeledDataset shard = small_shard(10, 3, 3, 51);
  const ParamVec w = init_params(spec, 52);
  LocalHyper h;
  h.epochs = 2;
  h.batch_size = 3;  // minibatch order matters, so the seed matters
  const ClientUpdate a = local_train_sgd(spec, w, shard, h, 0, 53);
  const ClientUpdate b = local_train_sgd(spec, w, shard, h, 0, 53);
  EXPECT_EQ(a.delta, b.delta);
  const ClientUpdate c = local_train_sgd(spec, w, shard, h, 0, 54);
  EXPECT_NE(a.delta, c.delta);
}

TEST(client, prox_with_zero_mu_is_bit_identical_to_sgd) {
  const ModelSpec spec = tiny_spec();
  const LabeledDataset shard = small_shard(8, 3, 3, 61);
  const ParamVec w = init_params(spec, 62);
  LocalHyper h;
  h.epochs = 2;
  h.batch_size = 3;
  h.mu = 0.0;
  const ClientUpdate a = local_train_sgd(spec, w, shard, h, 5, 63);
  const ClientUpdate b = local_train_prox(spec, w, shard, h, 5, 63);
  EXPECT_EQ(a.delta, b.delta);
  EXPECT_EQ(a.max_dir_norm, b.max_dir_norm);
}

TEST(client, prox_matches_hand_recursion_and_shrinks_movement) {
  const ModelSpec spec = tiny_spec();
  const LabeledDataset shard = small_shard(5, 3, 3, 71);
  const Batch full = as_batch(shard);
  const ParamVec w0 = init_params(spec, 72);
  LocalHyper h;
  h.eta_l = 0.125;
  h.epochs = 4;
  h.batch_size = 8;
  h.mu = 0.5;
  const ClientUpdate u = local_train_prox(spec, w0, shard, h, 0, 73);

  ParamVec w = w0;
  ParamVec delta(w.size(), 0.0);
  for (int k = 0; k < 4; ++k) {
    ParamVec dir = backward(spec, w, full);
    for (size_t i = 0; i < w.size(); ++i) dir[i] += 0.5 * (w[i] - w0[i]);
    for (size_t i = 0; i < w.size(); ++i) {
      const double step = 0.125 * dir[i];
      w[i] -= step;
      delta[i] += step;
    }
  }
  EXPECT_EQ(u.delta, delta);

  LocalHyper plain = h;
  plain.mu = 0.0;
  const ClientUpdate base = local_train_sgd(spec, w0, shard, plain, 0, 73);
  EXPECT_LT(l2(u.delta), l2(base.delta));  // the pull shortens the move
}

TEST(client, scaffold_with_equal_control_variates_matches_sgd) {
  const ModelSpec spec = tiny_spec();
  const LabeledDataset shard = small_shard(8, 3, 3, 81);
  const ParamVec w = init_params(spec, 82);
  LocalHyper h;
  h.epochs = 2;
  h.batch_size = 3;
  ControlVariate cv;
  cv.c_local.assign(spec.param_count(), 0.125);  // equal but non-zero
  cv.c_global.assign(spec.param_count(), 0.125);
  const ScaffoldResult r = local_train_scaffold(spec, w, shard, h, cv, 6, 83);
  const ClientUpdate plain = local_train_sgd(spec, w, shard, h, 6, 83);
  EXPECT_EQ(r.update.delta, plain.delta);
}

TEST(client, scaffold_single_step_refresh_returns_the_gradient) {
  const ModelSpec spec = tiny_spec();
  const LabeledDataset shard = small_shard(6, 3, 3, 91);
  const ParamVec w = init_params(spec, 92);
  LocalHyper h;
  h.eta_l = 0.25;  // power of two keeps delta / (K * eta_l) exact
  h.epochs = 1;
  h.batch_size = 16;
  ControlVariate cv;
  cv.c_local.assign(spec.param_count(), 0.0);
  cv.c_global.assign(spec.param_count(), 0.0);
  const ScaffoldResult r = local_train_scaffold(spec, w, shard, h, cv, 0, 93);
  EXPECT_EQ(r.update.steps, 1);
  const ParamVec g = backward(spec, w, as_batch(shard));
  EXPECT_EQ(r.c_local_new, g);  // c_new = delta / (1 * eta_l) = g, bitwise
}

TEST(client, scaffold_refresh_matches_reported_update) {
  const ModelSpec spec = tiny_spec();
  const LabeledDataset shard = small_shard(9, 3, 3, 95);
  const ParamVec w = init_params(spec, 96);
  LocalHyper h;
  h.eta_l = 0.02;
  h.epochs = 2;
  h.batch_size = 4;
  ControlVariate cv;
  Rng rng(97);
  cv.c_local.resize(spec.param_count());
  cv.c_global.resize(spec.param_count());
  for (double& v : cv.c_local) v = 0.01 * rng.normal();
  for (double& v : cv.c_global) v = 0.01 * rng.normal();
  const ScaffoldResult r = local_train_scaffold(spec, w, shard, h, cv, 3, 98);
  const double denom = double(r.update.steps) * h.eta_l;
  for (size_t i = 0; i < r.c_local_new.size(); ++i)
    EXPECT_EQ(r.c_local_new[i],
              (cv.c_local[i] - cv.c_global[i]) + r.update.delta[i] / denom);
}

TEST(client, corrections_steer_the_update) {
  const ModelSpec spec = tiny_spec();
  const LabeledDataset shard = small_shard(6, 3, 3, 99);
  const ParamVec w = init_params(spec, 100);
  LocalHyper h;
  h.eta_l = 0.5;
  h.epochs = 1;
  h.batch_size = 16;
  ControlVariate cv;
  cv.c_local.assign(spec.param_count(), 0.0);
  cv.c_global.assign(spec.param_count(), 0.25);
  const ScaffoldResult r =
      local_train_scaffold(spec, w, shard, h, cv, 0, 101);
  const ClientUpdate plain = local_train_sgd(spec, w, shard, h, 0, 101);
  // One step: delta = eta * (g + c_global), so the difference is uniform.
  for (size_t i = 0; i < plain.delta.size(); ++i)
    EXPECT_EQ(r.update.delta[i], plain.delta[i] + 0.5 * 0.25);
}

TEST(client, divergence_names_the_client_and_step) {
  const ModelSpec spec = tiny_spec();
  const LabeledDataset shard = small_shard(4, 3, 3, 103);
  const ParamVec w = init_params(spec, 104);
  LocalHyper h;
  h.eta_l = 1e308;  // first step overshoots to +-inf, second sees it
  h.epochs = 3;
  h.batch_size = 8;
  try {
    local_train_sgd(spec, w, shard, h, 9, 105);
    FAIL() << "runaway step accepted";
  } catch (const DivergenceError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("client 9"), std::string::npos) << msg;
    EXPECT_NE(msg.find("step"), std::string::npos) << msg;
  }
}

TEST(client, argument_validation) {
  const ModelSpec spec = tiny_spec();
  const LabeledDataset shard = small_shard(4, 3, 3, 107);
  const ParamVec w = init_params(spec, 108);
  LocalHyper bad;
  bad.epochs = 0;
  EXPECT_THROW(local_train_sgd(spec, w, shard, bad, 0, 1), ShapeError);
  LocalHyper bad_b;
  bad_b.batch_size = 0;
  EXPECT_THROW(local_train_sgd(spec, w, shard, bad_b, 0, 1), ShapeError);
  LabeledDataset empty;
  empty.dim = 3;
  empty.n_classes = 3;
  EXPECT_THROW(local_train_sgd(spec, w, empty, {}, 7, 1), ShapeError);
  LocalHyper zero_lr;
  zero_lr.eta_l = 0.0;
  ControlVariate cv;
  cv.c_local.assign(spec.param_count(), 0.0);
  cv.c_global.assign(spec.param_count(), 0.0);
  EXPECT_THROW(local_train_scaffold(spec, w, shard, zero_lr, cv, 0, 1),
               ShapeError);
  ControlVariate mismatched;
  mismatched.c_local.assign(spec.param_count(), 0.0);
  mismatched.c_global.assign(3, 0.0);
  EXPECT_THROW(local_train_scaffold(spec, w, shard, {}, mismatched, 0, 1),
               ShapeError);
}

}  // namespace
}  // namespace fedsim
