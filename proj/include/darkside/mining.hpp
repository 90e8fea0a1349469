#pragma once

#include <torch/torch.h>

#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "darkside/data.hpp"
#include "darkside/rng.hpp"

namespace darkside {

struct MiningConfig {
  int pool_size = 10000;        // anchor candidates per epoch
  int anchors_per_epoch = 2000; // k
  double lo = 0.2;              // percentile window of the min-distance ordering
  double hi = 0.8;
  int num_negatives = 5;
  double translate_prob = 0.25;   // fraction of anchors translated day->night
  int neg_candidate_pool = 20000; // per-epoch sample negatives are mined from

  void validate() const;
};

// Iterative diverse-anchor selection. The first anchor is uniform over the
// pool; before each further pick the remaining pool is ordered ascending by
// the minimal Euclidean distance to all anchors selected so far (ties broken
// by ascending pool index) and the pick is uniform over ranks r with
// floor(lo*m) <= r < ceil(hi*m), m the remaining count. Should the window
// ever come out empty it falls back to the full remaining set.
// Returns k distinct pool indices in selection order. Deterministic given
// the rng state.
std::vector<int64_t> mine_diverse_anchors(const torch::Tensor& pool_descs, int64_t k, double lo,
                                          double hi, RngStream& rng);

// Greedy hard-negative scan: candidates ascending by distance to the anchor,
// skipping the anchor's cluster and clusters already represented. Throws
// ValidationError (naming the shortfall) if fewer than n qualify.
// Returns candidate indices, ascending distance.
std::vector<int64_t> mine_hard_negatives(const torch::Tensor& anchor_desc,
                                         const torch::Tensor& candidate_descs,
                                         const std::vector<int64_t>& candidate_clusters,
                                         int64_t anchor_cluster, int n,
                                         const std::vector<std::string>* tie_break_ids = nullptr);

struct TrainingTuple {
  int32_t anchor = -1;
  int32_t positive = -1;
  std::vector<int32_t> negatives;
  bool anchor_translated = false;
  int64_t anchor_cluster = -1;
};

struct EpochTuples {
  std::vector<TrainingTuple> tuples;
  // model-input image for translated anchors, keyed by dataset index
  std::unordered_map<int32_t, Image> translated_anchors;
};

// Hooks the tuple builder uses so mining stays free of network code.
// embed: image -> unit descriptor (1-D tensor), model in eval state.
// translate: day image -> synthetic night image (kUnit range in and out).
using EmbedFn = std::function<torch::Tensor(const Image&)>;
using TranslateFn = std::function<Image(const Image&)>;
using LoadFn = std::function<Image(int32_t)>;  // dataset index -> kUnit image

// Epoch tuple assembly: sample the anchor pool among train images that have
// positives, mine diverse anchors with descriptors from the current model,
// translate exactly round(translate_prob*k) of them (uniformly chosen),
// re-embed translated anchors, then mine negatives against the post-
// translation descriptors. Positives stay untranslated.
EpochTuples build_epoch_tuples(const RetrievalDataset& ds, const MiningConfig& cfg,
                               const LoadFn& load, const EmbedFn& embed,
                               const TranslateFn* translate, RngStream& rng);

}  // namespace darkside
