#include <benchmark/benchmark.h>

#include "fedsim/client.hpp"
#include "fedsim/data.hpp"
#include "fedsim/model.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/server.hpp"

namespace {

using namespace fedsim;

ModelSpec bench_spec(ModelKind kind) {
  ModelSpec spec;
  spec.kind = kind;
  spec.input_dim = 20;
  spec.hidden_dim = 32;
  spec.n_classes = 10;
  return spec;
}

LabeledDataset bench_data(int per_class) {
  return gen_synthetic(10, 20, per_class, 2.0, 7);
}

void bm_local_train(benchmark::State& state) {
  const ModelSpec spec = bench_spec(
      state.range(1) ? ModelKind::mlp : ModelKind::logistic);
  const LabeledDataset shard = bench_data(int(state.range(0)));
  const ParamVec w = init_params(spec, 11);
  LocalHyper hyper;
  hyper.batch_size = 32;
  uint64_t s = 0;
  for (auto _ : state) {
    ClientUpdate u = local_train_sgd(spec, w, shard, hyper, 0, ++s);
    benchmark::DoNotOptimize(u.delta.data());
  }
  state.SetItemsProcessed(state.iterations() * shard.n);
}

void bm_aggregate(benchmark::State& state) {
  const ModelSpec spec = bench_spec(ModelKind::logistic);
  const size_t d = spec.param_count();
  const int clients = int(state.range(0));
  std::vector<ClientUpdate> updates(clients);
  Rng rng(3);
  for (int k = 0; k < clients; ++k) {
    updates[k].client_id = k;
    updates[k].n_k = 50 + k;
    updates[k].delta.resize(d);
    for (double& v : updates[k].delta) v = rng.normal();
  }
  for (auto _ : state) {
    ParamVec delta = aggregate(updates);
    benchmark::DoNotOptimize(delta.data());
  }
}

void bm_partition_dirichlet(benchmark::State& state) {
  const LabeledDataset data = bench_data(200);
  uint64_t s = 0;
  for (auto _ : state) {
    PartitionPlan plan = partition_dirichlet(data, 100, 0.1, ++s);
    benchmark::DoNotOptimize(plan.assignments.data());
  }
}

void bm_fedeve_server_step(benchmark::State& state) {
  const ModelSpec spec = bench_spec(ModelKind::mlp);
  const size_t d = spec.param_count();
  const int clients = 10;
  std::vector<ClientUpdate> updates(clients);
  Rng rng(5);
  for (int k = 0; k < clients; ++k) {
    updates[k].client_id = k;
    updates[k].n_k = 60;
    updates[k].delta.resize(d);
    for (double& v : updates[k].delta) v = 0.01 * rng.normal();
  }
  for (auto _ : state) {
    FedEveState st;
    st.w = init_params(spec, 13);
    st.momentum.assign(d, 0.0);
    ParamVec delta = aggregate(updates);
    DriftEstimates est = estimate_drift_variances(st.momentum, updates, delta);
    FedEveStepInfo info = fedeve_observe_update(st, delta, est, {});
    benchmark::DoNotOptimize(info.gain);
  }
}

BENCHMARK(bm_local_train)
    ->Args({20, 0})
    ->Args({100, 0})
    ->Args({20, 1})
    ->Args({100, 1});
BENCHMARK(bm_aggregate)->Arg(10)->Arg(100);
BENCHMARK(bm_partition_dirichlet);
BENCHMARK(bm_fedeve_server_step);

}  // namespace

BENCHMARK_MAIN();
