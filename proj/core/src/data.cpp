#include "fedsim/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

LabeledDataset gen_synthetic(int n_classes, int input_dim, int per_class,
                             double separation, uint64_t seed) {
  if (n_classes < 2 || input_dim < 1 || per_class < 1)
    throw ShapeError("gen_synthetic: need n_classes >= 2, input_dim >= 1, "
                     "per_class >= 1");
  if (separation < 0.0)
    throw ShapeError("gen_synthetic: separation must be non-negative");
  Rng rng(seed);
  std::vector<std::vector<double>> centers(n_classes,
                                           std::vector<double>(input_dim));
  for (auto& c : centers) {
    double norm2 = 0.0;
    for (double& v : c) {
      v = rng.normal();
      norm2 += v * v;
    }
    double inv = separation / std::sqrt(norm2);
    for (double& v : c) v *= inv;
  }
  LabeledDataset ds;
  ds.n = n_classes * per_class;
  ds.dim = input_dim;
  ds.n_classes = n_classes;
  ds.features.reserve(size_t(ds.n) * input_dim);
  ds.labels.reserve(ds.n);
  for (int c = 0; c < n_classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      for (int j = 0; j < input_dim; ++j)
        ds.features.push_back(centers[c][j] + rng.normal());
      ds.labels.push_back(c);
    }
  }
  return ds;
}

namespace {

uint32_t read_be32(const unsigned char* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) |
         (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("idx: cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

LabeledDataset load_idx(const std::string& images_path,
                        const std::string& labels_path) {
  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);
  if (img.size() < 16)
    throw IoError("idx: truncated payload in " + images_path +
                  " (header incomplete)");
  if (lab.size() < 8)
    throw IoError("idx: truncated payload in " + labels_path +
                  " (header incomplete)");
  const uint32_t img_magic = read_be32(img.data());
  const uint32_t lab_magic = read_be32(lab.data());
  if (img_magic != 0x00000803u)
    throw IoError("idx: bad magic in " + images_path + " (expected 0x803)");
  if (lab_magic != 0x00000801u)
    throw IoError("idx: bad magic in " + labels_path + " (expected 0x801)");
  const uint32_t n_img = read_be32(img.data() + 4);
  const uint32_t rows = read_be32(img.data() + 8);
  const uint32_t cols = read_be32(img.data() + 12);
  const uint32_t n_lab = read_be32(lab.data() + 4);
  if (n_img != n_lab)
    throw IoError("idx: image/label count mismatch (" + std::to_string(n_img) +
                  " images vs " + std::to_string(n_lab) + " labels)");
  const size_t pix = size_t(rows) * cols;
  if (img.size() < 16 + size_t(n_img) * pix)
    throw IoError("idx: truncated payload in " + images_path);
  if (lab.size() < 8 + size_t(n_lab))
    throw IoError("idx: truncated payload in " + labels_path);
  if (n_img == 0 || pix == 0) throw IoError("idx: empty dataset");

  LabeledDataset ds;
  ds.n = int(n_img);
  ds.dim = int(pix);
  ds.features.resize(size_t(ds.n) * pix);
  ds.labels.resize(ds.n);
  for (size_t i = 0; i < size_t(ds.n) * pix; ++i)
    ds.features[i] = img[16 + i] / 255.0;
  int max_label = 0;
  for (int i = 0; i < ds.n; ++i) {
    ds.labels[i] = lab[8 + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.n_classes = max_label + 1;
  return ds;
}

std::vector<size_t> PartitionPlan::client_sizes() const {
  std::vector<size_t> s(assignments.size());
  for (size_t i = 0; i < assignments.size(); ++i) s[i] = assignments[i].size();
  return s;
}

namespace {

void finalize_plan(const LabeledDataset& data, PartitionPlan& plan) {
  // Repair empty clients by stealing one example from the largest client
  // (lowest index wins ties), then freeze the canonical sorted order and
  // the per-client label histograms.
  for (auto& a : plan.assignments) std::sort(a.begin(), a.end());
  for (;;) {
    int empty = -1;
    for (size_t i = 0; i < plan.assignments.size(); ++i)
      if (plan.assignments[i].empty()) {
        empty = int(i);
        break;
      }
    if (empty < 0) break;
    size_t donor = 0;
    for (size_t i = 1; i < plan.assignments.size(); ++i)
      if (plan.assignments[i].size() > plan.assignments[donor].size())
        donor = i;
    if (plan.assignments[donor].size() <= 1)
      throw ShapeError("partition: not enough examples to populate every "
                       "client");
    plan.assignments[empty].push_back(plan.assignments[donor].back());
    plan.assignments[donor].pop_back();
  }
  plan.class_proportions.assign(plan.assignments.size(),
                                std::vector<double>(data.n_classes, 0.0));
  for (size_t i = 0; i < plan.assignments.size(); ++i) {
    auto& row = plan.class_proportions[i];
    for (size_t idx : plan.assignments[i]) row[data.labels[idx]] += 1.0;
    double inv = 1.0 / plan.assignments[i].size();
    for (double& v : row) v *= inv;
  }
}

void check_partition_args(const LabeledDataset& data, int n_clients) {
  if (n_clients < 1) throw ShapeError("partition: n_clients must be >= 1");
  if (data.n < n_clients)
    throw ShapeError("partition: dataset has " + std::to_string(data.n) +
                     " examples for " + std::to_string(n_clients) +
                     " clients");
}

}  // namespace

PartitionPlan partition_dirichlet(const LabeledDataset& data, int n_clients,
                                  double alpha, uint64_t seed) {
  check_partition_args(data, n_clients);
  if (alpha <= 0.0)
    throw ShapeError("partition_dirichlet: alpha must be positive");
  Rng rng(seed);
  PartitionPlan plan;
  plan.n_clients = n_clients;
  plan.alpha = alpha;
  plan.assignments.resize(n_clients);

  for (int c = 0; c < data.n_classes; ++c) {
    std::vector<size_t> cls;
    for (int i = 0; i < data.n; ++i)
      if (data.labels[i] == c) cls.push_back(i);
    if (cls.empty()) continue;
    rng.shuffle(cls);
    std::vector<double> prop = rng.dirichlet(alpha, n_clients);
    // Cumulative rounding turns proportions into contiguous chunk bounds.
    double cum = 0.0;
    size_t lo = 0;
    for (int i = 0; i < n_clients; ++i) {
      cum += prop[i];
      size_t hi = (i == n_clients - 1)
                      ? cls.size()
                      : std::min(cls.size(),
                                 size_t(std::llround(cum * cls.size())));
      hi = std::max(hi, lo);
      for (size_t k = lo; k < hi; ++k)
        plan.assignments[i].push_back(cls[k]);
      lo = hi;
    }
  }
  finalize_plan(data, plan);
  return plan;
}

PartitionPlan partition_iid(const LabeledDataset& data, int n_clients,
                            uint64_t seed) {
  check_partition_args(data, n_clients);
  Rng rng(seed);
  std::vector<size_t> idx(data.n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  rng.shuffle(idx);
  PartitionPlan plan;
  plan.n_clients = n_clients;
  plan.assignments.resize(n_clients);
  const size_t base = size_t(data.n) / n_clients;
  const size_t extra = size_t(data.n) % n_clients;
  size_t pos = 0;
  for (int i = 0; i < n_clients; ++i) {
    size_t take = base + (size_t(i) < extra ? 1 : 0);
    plan.assignments[i].assign(idx.begin() + pos, idx.begin() + pos + take);
    pos += take;
  }
  finalize_plan(data, plan);
  return plan;
}

PartitionPlan plan_from_assignments(const LabeledDataset& data,
                                    std::vector<std::vector<size_t>> lists) {
  if (lists.empty()) throw ShapeError("partition: no client lists supplied");
  std::vector<char> seen(data.n, 0);
  size_t total = 0;
  for (const auto& l : lists) {
    if (l.empty()) throw ShapeError("partition: external plan has an empty "
                                    "client");
    for (size_t idx : l) {
      if (idx >= size_t(data.n))
        throw ShapeError("partition: index " + std::to_string(idx) +
                         " out of range");
      if (seen[idx]++)
        throw ShapeError("partition: index " + std::to_string(idx) +
                         " assigned twice");
      ++total;
    }
  }
  if (total != size_t(data.n))
    throw ShapeError("partition: external plan covers " +
                     std::to_string(total) + " of " + std::to_string(data.n) +
                     " examples");
  PartitionPlan plan;
  plan.n_clients = int(lists.size());
  plan.assignments = std::move(lists);
  finalize_plan(data, plan);
  return plan;
}

namespace {

std::vector<size_t> pooled_indices(const PartitionPlan& base,
                                   std::span<const int> sampled) {
  std::vector<size_t> pool;
  for (int k : sampled) {
    if (k < 0 || k >= base.n_clients)
      throw ShapeError("drift_isolation_view: client id " + std::to_string(k) +
                       " out of range");
    const auto& a = base.assignments[k];
    pool.insert(pool.end(), a.begin(), a.end());
  }
  return pool;
}

}  // namespace

std::vector<LabeledDataset> drift_isolation_view(
    DriftIsolationMode mode, const LabeledDataset& data,
    const PartitionPlan& base, std::span<const int> sampled,
    double client_only_alpha, uint64_t round_seed) {
  if (sampled.empty())
    throw ShapeError("drift_isolation_view: no sampled clients");
  std::vector<LabeledDataset> shards;
  shards.reserve(sampled.size());

  switch (mode) {
    case DriftIsolationMode::both:
    case DriftIsolationMode::none: {
      for (int k : sampled) {
        if (k < 0 || k >= base.n_clients)
          throw ShapeError("drift_isolation_view: client id " +
                           std::to_string(k) + " out of range");
        shards.push_back(subset(data, base.assignments[k]));
      }
      return shards;
    }
    case DriftIsolationMode::period_only: {
      // Shuffle the pool, then deal per-label round-robin so each client's
      // histogram tracks the pooled histogram within one count per label.
      std::vector<size_t> pool = pooled_indices(base, sampled);
      Rng rng(round_seed);
      rng.shuffle(pool);
      std::stable_sort(pool.begin(), pool.end(),
                       [&](size_t a, size_t b) {
                         return data.labels[a] < data.labels[b];
                       });
      const size_t S = sampled.size();
      std::vector<std::vector<size_t>> dealt(S);
      for (size_t pos = 0; pos < pool.size(); ++pos)
        dealt[pos % S].push_back(pool[pos]);
      for (auto& d : dealt) {
        std::sort(d.begin(), d.end());
        shards.push_back(subset(data, d));
      }
      return shards;
    }
    case DriftIsolationMode::client_only: {
      std::vector<size_t> pool = pooled_indices(base, sampled);
      std::sort(pool.begin(), pool.end());
      LabeledDataset pooled = subset(data, pool);
      PartitionPlan redeal = partition_dirichlet(
          pooled, int(sampled.size()), client_only_alpha, round_seed);
      for (const auto& a : redeal.assignments)
        shards.push_back(subset(pooled, a));
      return shards;
    }
  }
  throw ShapeError("drift_isolation_view: unknown mode");
}

double heterogeneity_H(const PartitionPlan& plan) {
  if (plan.class_proportions.empty())
    throw ShapeError("heterogeneity_H: plan has no class proportions");
  const size_t N = plan.class_proportions.size();
  const size_t M = plan.class_proportions[0].size();
  // Global proportions are the size-weighted mean of the client rows.
  std::vector<double> global(M, 0.0);
  double total = 0.0;
  for (size_t i = 0; i < N; ++i) {
    double n_i = double(plan.assignments[i].size());
    total += n_i;
    for (size_t j = 0; j < M; ++j)
      global[j] += n_i * plan.class_proportions[i][j];
  }
  for (double& g : global) g /= total;
  double H = 0.0;
  for (size_t i = 0; i < N; ++i) {
    double var = 0.0;
    for (size_t j = 0; j < M; ++j) {
      double d = plan.class_proportions[i][j] - global[j];
      var += d * d;
    }
    H += var / double(M);
  }
  return H / double(N);
}

std::vector<double> label_proportions(const LabeledDataset& data) {
  std::vector<double> p(data.n_classes, 0.0);
  for (int y : data.labels) p[y] += 1.0;
  for (double& v : p) v /= data.n;
  return p;
}

Batch make_batch(const LabeledDataset& data, std::span<const size_t> indices) {
  if (indices.empty()) throw ShapeError("make_batch: empty index list");
  std::vector<size_t> sorted(indices.begin(), indices.end());
  std::sort(sorted.begin(), sorted.end());
  Batch b;
  b.n = int(sorted.size());
  b.dim = data.dim;
  b.features.reserve(sorted.size() * data.dim);
  b.labels.reserve(sorted.size());
  for (size_t idx : sorted) {
    if (idx >= size_t(data.n))
      throw ShapeError("make_batch: index out of range");
    const double* r = data.row(int(idx));
    b.features.insert(b.features.end(), r, r + data.dim);
    b.labels.push_back(data.labels[idx]);
  }
  return b;
}

Batch as_batch(const LabeledDataset& data) {
  Batch b;
  b.features = data.features;
  b.labels = data.labels;
  b.n = data.n;
  b.dim = data.dim;
  return b;
}

LabeledDataset subset(const LabeledDataset& data,
                      std::span<const size_t> indices) {
  std::vector<size_t> sorted(indices.begin(), indices.end());
  std::sort(sorted.begin(), sorted.end());
  LabeledDataset out;
  out.n = int(sorted.size());
  out.dim = data.dim;
  out.n_classes = data.n_classes;
  out.features.reserve(sorted.size() * data.dim);
  out.labels.reserve(sorted.size());
  for (size_t idx : sorted) {
    if (idx >= size_t(data.n))
      throw ShapeError("subset: index out of range");
    const double* r = data.row(int(idx));
    out.features.insert(out.features.end(), r, r + data.dim);
    out.labels.push_back(data.labels[idx]);
  }
  return out;
}

std::pair<LabeledDataset, LabeledDataset> split_train_eval(
    const LabeledDataset& data, double eval_fraction, uint64_t seed) {
  if (eval_fraction <= 0.0 || eval_fraction >= 1.0)
    throw ShapeError("split_train_eval: eval_fraction must be in (0, 1)");
  Rng rng(seed);
  std::vector<size_t> idx(data.n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  rng.shuffle(idx);
  size_t eval_n = size_t(std::llround(eval_fraction * data.n));
  eval_n = std::min(std::max<size_t>(eval_n, 1), size_t(data.n) - 1);
  std::vector<size_t> eval_idx(idx.begin(), idx.begin() + eval_n);
  std::vector<size_t> train_idx(idx.begin() + eval_n, idx.end());
  return {subset(data, train_idx), subset(data, eval_idx)};
}

}  // namespace fedsim
