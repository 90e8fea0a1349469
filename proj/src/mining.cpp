#include "darkside/mining.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "darkside/common.hpp"

namespace darkside {

void MiningConfig::validate() const {
  if (!(lo >= 0.0 && lo < hi && hi <= 1.0))
    throw ValidationError("mining: need 0 <= lo < hi <= 1");
  if (anchors_per_epoch > pool_size)
    throw ValidationError("mining: anchors_per_epoch exceeds pool_size");
  if (num_negatives < 1) throw ValidationError("mining: num_negatives must be >= 1");
  if (translate_prob < 0.0 || translate_prob > 1.0)
    throw ValidationError("mining: translate_prob must lie in [0,1]");
}

namespace {

// Squared Euclidean distance with double accumulation, fixed left-to-right
// order so implementation and test oracles agree bitwise.
double dist2(const float* a, const float* b, int64_t d) {
  double acc = 0.0;
  for (int64_t i = 0; i < d; ++i) {
    double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += diff * diff;
  }
  return acc;
}

}  // namespace

std::vector<int64_t> mine_diverse_anchors(const torch::Tensor& pool_descs, int64_t k, double lo,
                                          double hi, RngStream& rng) {
  if (pool_descs.dim() != 2) throw ValidationError("mine_diverse_anchors: expected NxD pool");
  const int64_t n = pool_descs.size(0), d = pool_descs.size(1);
  if (k > n)
    throw ValidationError("mine_diverse_anchors: k=" + std::to_string(k) + " exceeds pool size " +
                          std::to_string(n));
  if (!(lo >= 0.0 && lo < hi && hi <= 1.0))
    throw ValidationError("mine_diverse_anchors: need 0 <= lo < hi <= 1");
  if (k <= 0) return {};

  auto mat = pool_descs.to(torch::kFloat32).contiguous();
  const float* data = mat.data_ptr<float>();

  std::vector<int64_t> selected;
  selected.reserve(k);
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);

  int64_t first = rng.uniform_int(0, n - 1);
  selected.push_back(first);
  taken[first] = 1;

  std::vector<std::pair<double, int64_t>> order;
  order.reserve(n);
  while (static_cast<int64_t>(selected.size()) < k) {
    const float* last = data + selected.back() * d;
    order.clear();
    for (int64_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      double dd = dist2(data + i * d, last, d);
      if (dd < min_d2[i]) min_d2[i] = dd;
      order.emplace_back(min_d2[i], i);
    }
    std::sort(order.begin(), order.end());  // (distance, index) ascending

    const int64_t m = static_cast<int64_t>(order.size());
    int64_t lo_rank = static_cast<int64_t>(std::floor(lo * m));
    int64_t hi_rank = static_cast<int64_t>(std::ceil(hi * m));
    if (lo_rank >= hi_rank) {  // degenerate window: use the whole remainder
      lo_rank = 0;
      hi_rank = m;
    }
    int64_t pick = order[lo_rank + rng.uniform_int(0, hi_rank - lo_rank - 1)].second;
    selected.push_back(pick);
    taken[pick] = 1;
  }
  return selected;
}

std::vector<int64_t> mine_hard_negatives(const torch::Tensor& anchor_desc,
                                         const torch::Tensor& candidate_descs,
                                         const std::vector<int64_t>& candidate_clusters,
                                         int64_t anchor_cluster, int n,
                                         const std::vector<std::string>* tie_break_ids) {
  if (candidate_descs.dim() != 2)
    throw ValidationError("mine_hard_negatives: expected MxD candidates");
  const int64_t m = candidate_descs.size(0), d = candidate_descs.size(1);
  if (static_cast<size_t>(m) != candidate_clusters.size())
    throw ValidationError("mine_hard_negatives: cluster list size mismatch");
  if (n < 1) throw ValidationError("mine_hard_negatives: n must be >= 1");

  auto anchor = anchor_desc.to(torch::kFloat32).contiguous();
  auto cands = candidate_descs.to(torch::kFloat32).contiguous();
  const float* a = anchor.data_ptr<float>();
  const float* c = cands.data_ptr<float>();

  std::vector<int64_t> order(m);
  std::vector<double> dist(m);
  for (int64_t i = 0; i < m; ++i) {
    order[i] = i;
    dist[i] = dist2(c + i * d, a, d);
  }
  std::sort(order.begin(), order.end(), [&](int64_t x, int64_t y) {
    if (dist[x] != dist[y]) return dist[x] < dist[y];
    if (tie_break_ids) return (*tie_break_ids)[x] < (*tie_break_ids)[y];
    return x < y;
  });

  std::vector<int64_t> out;
  std::vector<int64_t> used_clusters;
  for (int64_t idx : order) {
    if (static_cast<int>(out.size()) == n) break;
    int64_t cl = candidate_clusters[idx];
    if (cl == anchor_cluster) continue;
    if (std::find(used_clusters.begin(), used_clusters.end(), cl) != used_clusters.end()) continue;
    used_clusters.push_back(cl);
    out.push_back(idx);
  }
  if (static_cast<int>(out.size()) < n)
    throw ValidationError("mine_hard_negatives: needed " + std::to_string(n) +
                          " negatives from distinct foreign clusters, only " +
                          std::to_string(out.size()) + " eligible");
  return out;
}

EpochTuples build_epoch_tuples(const RetrievalDataset& ds, const MiningConfig& cfg,
                               const LoadFn& load, const EmbedFn& embed,
                               const TranslateFn* translate, RngStream& rng) {
  cfg.validate();
  if (ds.positive_pairs.empty())
    throw ValidationError("build_epoch_tuples: dataset has no positive pairs");

  // Anchor eligibility: train image with at least one positive partner.
  std::vector<int32_t> eligible;
  for (int32_t idx : ds.train_indices)
    if (!ds.positives_of[idx].empty()) eligible.push_back(idx);
  if (eligible.empty())
    throw ValidationError("build_epoch_tuples: no train image has a positive pair");

  // (1) anchor pool: uniform sample without replacement (partial Fisher-Yates)
  int64_t pool_n = std::min<int64_t>(cfg.pool_size, static_cast<int64_t>(eligible.size()));
  for (int64_t i = 0; i < pool_n; ++i) {
    int64_t j = rng.uniform_int(i, static_cast<int64_t>(eligible.size()) - 1);
    std::swap(eligible[i], eligible[j]);
  }
  std::vector<int32_t> pool(eligible.begin(), eligible.begin() + pool_n);
  int64_t k = std::min<int64_t>(cfg.anchors_per_epoch, pool_n);

  // (2) descriptors of the pool under the current model
  std::vector<torch::Tensor> pool_descs(pool.size());
  for (size_t i = 0; i < pool.size(); ++i) pool_descs[i] = embed(load(pool[i]));
  auto pool_mat = torch::stack(pool_descs);
  auto anchor_ranks = mine_diverse_anchors(pool_mat, k, cfg.lo, cfg.hi, rng);

  // (3) exact translated-anchor count, chosen uniformly among the k anchors
  int64_t n_translate = translate ? std::lround(cfg.translate_prob * static_cast<double>(k)) : 0;
  std::vector<int64_t> anchor_order(anchor_ranks.size());
  for (size_t i = 0; i < anchor_order.size(); ++i) anchor_order[i] = static_cast<int64_t>(i);
  for (int64_t i = 0; i < n_translate; ++i) {
    int64_t j = rng.uniform_int(i, static_cast<int64_t>(anchor_order.size()) - 1);
    std::swap(anchor_order[i], anchor_order[j]);
  }
  std::vector<char> translated(anchor_ranks.size(), 0);
  for (int64_t i = 0; i < n_translate; ++i) translated[anchor_order[i]] = 1;

  EpochTuples out;

  // (4) post-translation anchor descriptors
  std::vector<torch::Tensor> anchor_descs(anchor_ranks.size());
  for (size_t i = 0; i < anchor_ranks.size(); ++i) {
    int32_t ds_idx = pool[anchor_ranks[i]];
    if (translated[i]) {
      Image night = (*translate)(load(ds_idx));
      anchor_descs[i] = embed(night);
      out.translated_anchors.emplace(ds_idx, std::move(night));
    } else {
      anchor_descs[i] = pool_descs[anchor_ranks[i]];
    }
  }

  // (5) negative candidate pool: per-epoch uniform sample over train images
  std::vector<int32_t> neg_universe(ds.train_indices);
  int64_t cand_n = std::min<int64_t>(cfg.neg_candidate_pool,
                                     static_cast<int64_t>(neg_universe.size()));
  for (int64_t i = 0; i < cand_n; ++i) {
    int64_t j = rng.uniform_int(i, static_cast<int64_t>(neg_universe.size()) - 1);
    std::swap(neg_universe[i], neg_universe[j]);
  }
  std::vector<int32_t> candidates(neg_universe.begin(), neg_universe.begin() + cand_n);
  std::vector<int64_t> cand_clusters(candidates.size());
  std::vector<std::string> cand_ids(candidates.size());
  std::vector<torch::Tensor> cand_descs(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i) {
    cand_clusters[i] = ds.images[candidates[i]].cluster;
    cand_ids[i] = ds.images[candidates[i]].id;
    cand_descs[i] = embed(load(candidates[i]));
  }
  auto cand_mat = torch::stack(cand_descs);

  for (size_t i = 0; i < anchor_ranks.size(); ++i) {
    int32_t a_idx = pool[anchor_ranks[i]];
    TrainingTuple t;
    t.anchor = a_idx;
    t.anchor_cluster = ds.images[a_idx].cluster;
    t.anchor_translated = translated[i] != 0;

    const auto& partners = ds.positives_of[a_idx];
    t.positive = partners[rng.uniform_int(0, static_cast<int64_t>(partners.size()) - 1)];

    auto negs = mine_hard_negatives(anchor_descs[i], cand_mat, cand_clusters, t.anchor_cluster,
                                    cfg.num_negatives, &cand_ids);
    for (int64_t nidx : negs) t.negatives.push_back(candidates[nidx]);
    out.tuples.push_back(std::move(t));
  }
  return out;
}

}  // namespace darkside
