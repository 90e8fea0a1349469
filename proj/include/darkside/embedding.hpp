#pragma once

#include <torch/torch.h>

#include <functional>
#include <optional>
#include <vector>

#include "darkside/data.hpp"
#include "darkside/imaging.hpp"
#include "darkside/mining.hpp"

namespace darkside {

enum class Backbone { kTinyConv, kVgg16, kResnet101 };
enum class Pooling { kGem, kMac };
enum class InputMode { kImage, kEdgemap };

struct EmbeddingConfig {
  Backbone backbone = Backbone::kTinyConv;
  Pooling pooling = Pooling::kGem;
  double gem_p = 3.0;
  bool gem_p_learnable = true;
  InputMode input_mode = InputMode::kImage;
  bool clahe_enabled = true;
  ClaheConfig clahe;
  double margin = 0.85;
  bool squared_loss = true;  // false: plain hinge d / relu(margin - d)
  int64_t image_size = 0;    // longest side at extraction; 0 keeps input size
  bool multiscale = false;   // scales 1, 1/sqrt2, sqrt2 with mean aggregation

  void validate() const;
  int64_t input_channels() const { return input_mode == InputMode::kEdgemap ? 1 : 3; }
};

// Generalized-mean pooling: per channel (mean of x^p)^(1/p) over space.
// featmap is CxHxW or BxCxHxW with nonnegative activations; p > 0 (scalar
// tensor overload keeps p differentiable).
torch::Tensor gem_pool(const torch::Tensor& featmap, const torch::Tensor& p);
torch::Tensor gem_pool(const torch::Tensor& featmap, double p);

// Per-channel spatial maximum.
torch::Tensor mac_pool(const torch::Tensor& featmap);

// v / ||v||; throws on (near-)zero input.
torch::Tensor l2_normalize(const torch::Tensor& v);

enum class PairLabel { kPositive, kNegative };

// Squared form: pos 1/2 d^2, neg 1/2 max(0, margin-d)^2; unsquared form uses
// d and max(0, margin-d).
torch::Tensor contrastive_pair_loss(const torch::Tensor& a, const torch::Tensor& b,
                                    PairLabel label, double margin, bool squared = true);

// Anchor + positive + n negatives; sum of the positive pair loss and the n
// negative pair losses against the anchor. descs[0] is the anchor.
torch::Tensor tuple_loss(const std::vector<torch::Tensor>& descs, double margin,
                         bool squared = true);

// Backbone trunk + pooling + L2 normalization.
class EmbeddingNetImpl : public torch::nn::Module {
 public:
  explicit EmbeddingNetImpl(const EmbeddingConfig& cfg);
  torch::Tensor forward(const torch::Tensor& batch);  // BxCxHxW -> BxD unit rows
  int64_t descriptor_dim() const { return dim_; }
  const EmbeddingConfig& config() const { return cfg_; }

 private:
  EmbeddingConfig cfg_;
  torch::nn::Sequential trunk_{nullptr};
  torch::Tensor gem_p_;
  int64_t dim_ = 0;
};
TORCH_MODULE(EmbeddingNet);

// Shared preprocessing: optional CLAHE (image mode), optional resize to the
// configured longest side, then the affine map to model range.
torch::Tensor preprocess_for_embedding(const Image& img, const EmbeddingConfig& cfg);

// Deterministic eval-mode descriptor of one image.
torch::Tensor extract_descriptor(EmbeddingNet& net, const Image& img, const EmbeddingConfig& cfg);

struct EmbedSchedule {
  int epochs = 40;
  int tuples_per_epoch = 2000;
  double lr = 1e-6;
  double weight_decay = 1e-6;
  uint64_t seed = 0;
};

struct EmbedEpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  int tuples = 0;
  int translated = 0;
};

using EmbedEpochHook =
    std::function<void(const EmbedEpochStats&, EmbeddingNet&, torch::optim::Adam&,
                       const EpochTuples&)>;

// Contrastive fine-tuning: per epoch, assemble tuples (diverse anchors, the
// translated fraction, hard negatives), then one Adam step per 7-tuple.
// `translate` may be null (no augmentation); the hook runs after each epoch.
std::vector<EmbedEpochStats> train_embedding(const RetrievalDataset& ds,
                                             const EmbeddingConfig& cfg,
                                             const MiningConfig& mining,
                                             const EmbedSchedule& schedule, EmbeddingNet& net,
                                             const TranslateFn* translate,
                                             const EmbedEpochHook& on_epoch = {});

}  // namespace darkside
