#include "darkside/embedding.hpp"

#include <cmath>
#include <unordered_map>

#include "darkside/common.hpp"

namespace darkside {

void EmbeddingConfig::validate() const {
  if (margin <= 0.0 || margin > 2.0) throw ValidationError("embedding: margin must lie in (0,2]");
  if (gem_p <= 0.0) throw ValidationError("embedding: GeM p must be positive");
}

namespace {
constexpr double kGemEps = 1e-6;
constexpr double kNormEps = 1e-12;
}  // namespace

torch::Tensor gem_pool(const torch::Tensor& featmap, const torch::Tensor& p) {
  if (featmap.dim() != 3 && featmap.dim() != 4)
    throw ValidationError("gem_pool: expected CxHxW or BxCxHxW featmap");
  if (p.item<double>() <= 0.0) throw ValidationError("gem_pool: p must be positive");
  auto clamped = featmap.clamp_min(kGemEps);
  return clamped.pow(p).mean({-2, -1}).pow(1.0 / p);
}

torch::Tensor gem_pool(const torch::Tensor& featmap, double p) {
  return gem_pool(featmap, torch::tensor(p, featmap.options().requires_grad(false)));
}

torch::Tensor mac_pool(const torch::Tensor& featmap) {
  if (featmap.dim() != 3 && featmap.dim() != 4)
    throw ValidationError("mac_pool: expected CxHxW or BxCxHxW featmap");
  return std::get<0>(featmap.flatten(-2).max(-1));
}

torch::Tensor l2_normalize(const torch::Tensor& v) {
  auto norm = v.norm(2, -1, /*keepdim=*/true);
  if ((norm < kNormEps).any().item<bool>())
    throw ValidationError("l2_normalize: zero-norm vector");
  return v / norm;
}

torch::Tensor contrastive_pair_loss(const torch::Tensor& a, const torch::Tensor& b,
                                    PairLabel label, double margin, bool squared) {
  auto d = (a - b).norm();
  if (label == PairLabel::kPositive) return squared ? 0.5 * d * d : d;
  auto hinge = torch::relu(margin - d);
  return squared ? 0.5 * hinge * hinge : hinge;
}

torch::Tensor tuple_loss(const std::vector<torch::Tensor>& descs, double margin, bool squared) {
  if (descs.size() < 3)
    throw ValidationError("tuple_loss: expected anchor + positive + negatives, got " +
                          std::to_string(descs.size()) + " descriptors");
  const auto& anchor = descs[0];
  auto loss = contrastive_pair_loss(anchor, descs[1], PairLabel::kPositive, margin, squared);
  for (size_t i = 2; i < descs.size(); ++i)
    loss = loss + contrastive_pair_loss(anchor, descs[i], PairLabel::kNegative, margin, squared);
  return loss;
}

namespace {

torch::nn::Sequential make_tiny_conv(int64_t in_channels, int64_t& dim) {
  using namespace torch::nn;
  dim = 32;
  return Sequential(Conv2d(Conv2dOptions(in_channels, 16, 3).stride(2).padding(1)), ReLU(),
                    Conv2d(Conv2dOptions(16, 32, 3).stride(2).padding(1)), ReLU(),
                    Conv2d(Conv2dOptions(32, 32, 3).padding(1)), ReLU());
}

torch::nn::Sequential make_vgg16(int64_t in_channels, int64_t& dim) {
  using namespace torch::nn;
  Sequential net;
  int64_t c = in_channels;
  const int plan[] = {64, 64, -1, 128, 128, -1, 256, 256, 256, -1, 512, 512, 512, -1,
                      512, 512, 512};
  for (int v : plan) {
    if (v < 0) {
      net->push_back(MaxPool2d(MaxPool2dOptions(2).stride(2).ceil_mode(true)));
    } else {
      net->push_back(Conv2d(Conv2dOptions(c, v, 3).padding(1)));
      net->push_back(ReLU());
      c = v;
    }
  }
  dim = 512;
  return net;
}

struct BottleneckImpl : torch::nn::Module {
  BottleneckImpl(int64_t in, int64_t mid, int64_t out, int64_t stride) {
    using namespace torch::nn;
    conv1 = register_module("conv1", Conv2d(Conv2dOptions(in, mid, 1).bias(false)));
    bn1 = register_module("bn1", BatchNorm2d(mid));
    conv2 = register_module("conv2",
                            Conv2d(Conv2dOptions(mid, mid, 3).stride(stride).padding(1).bias(false)));
    bn2 = register_module("bn2", BatchNorm2d(mid));
    conv3 = register_module("conv3", Conv2d(Conv2dOptions(mid, out, 1).bias(false)));
    bn3 = register_module("bn3", BatchNorm2d(out));
    if (in != out || stride != 1) {
      down = register_module(
          "down", Sequential(Conv2d(Conv2dOptions(in, out, 1).stride(stride).bias(false)),
                             BatchNorm2d(out)));
    }
  }
  torch::Tensor forward(torch::Tensor x) {
    auto identity = down ? down->forward(x) : x;
    x = torch::relu(bn1(conv1(x)));
    x = torch::relu(bn2(conv2(x)));
    x = bn3(conv3(x));
    return torch::relu(x + identity);
  }
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, conv3{nullptr};
  torch::nn::BatchNorm2d bn1{nullptr}, bn2{nullptr}, bn3{nullptr};
  torch::nn::Sequential down{nullptr};
};
TORCH_MODULE(Bottleneck);

torch::nn::Sequential make_resnet101(int64_t in_channels, int64_t& dim) {
  using namespace torch::nn;
  Sequential net;
  net->push_back(Conv2d(Conv2dOptions(in_channels, 64, 7).stride(2).padding(3).bias(false)));
  net->push_back(BatchNorm2d(64));
  net->push_back(ReLU());
  net->push_back(MaxPool2d(MaxPool2dOptions(3).stride(2).padding(1)));
  const int64_t blocks[] = {3, 4, 23, 3};
  int64_t in = 64;
  for (int stage = 0; stage < 4; ++stage) {
    int64_t mid = 64 << stage;
    int64_t out = mid * 4;
    for (int64_t b = 0; b < blocks[stage]; ++b) {
      int64_t stride = (b == 0 && stage > 0) ? 2 : 1;
      net->push_back(Bottleneck(in, mid, out, stride));
      in = out;
    }
  }
  dim = 2048;
  return net;
}

}  // namespace

EmbeddingNetImpl::EmbeddingNetImpl(const EmbeddingConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  switch (cfg.backbone) {
    case Backbone::kTinyConv: trunk_ = make_tiny_conv(cfg.input_channels(), dim_); break;
    case Backbone::kVgg16: trunk_ = make_vgg16(cfg.input_channels(), dim_); break;
    case Backbone::kResnet101: trunk_ = make_resnet101(cfg.input_channels(), dim_); break;
  }
  register_module("trunk", trunk_);
  if (cfg.pooling == Pooling::kGem) {
    gem_p_ = register_parameter("gem_p", torch::tensor(cfg.gem_p, torch::kFloat32),
                                /*requires_grad=*/cfg.gem_p_learnable);
  }
}

torch::Tensor EmbeddingNetImpl::forward(const torch::Tensor& batch) {
  if (batch.dim() != 4) throw ValidationError("EmbeddingNet: expected BxCxHxW batch");
  if (batch.size(1) != cfg_.input_channels())
    throw ValidationError("EmbeddingNet: input has " + std::to_string(batch.size(1)) +
                          " channels but the configured mode expects " +
                          std::to_string(cfg_.input_channels()));
  auto feat = trunk_->forward(batch);
  auto pooled = cfg_.pooling == Pooling::kGem ? gem_pool(feat, gem_p_) : mac_pool(feat);
  return l2_normalize(pooled);
}

torch::Tensor preprocess_for_embedding(const Image& img, const EmbeddingConfig& cfg) {
  Image work = img;
  if (cfg.input_mode == InputMode::kImage && cfg.clahe_enabled) work = clahe(work, cfg.clahe);
  if (cfg.image_size > 0) work = resize_longest_side(work, cfg.image_size);
  if (work.range == ValueRange::kUnit) work = to_model_range(work);
  return work.data;
}

torch::Tensor extract_descriptor(EmbeddingNet& net, const Image& img, const EmbeddingConfig& cfg) {
  if (cfg.input_mode == InputMode::kEdgemap && img.channels() != 1)
    throw ValidationError("extract_descriptor: edgemap mode expects a single-channel input");
  if (cfg.input_mode == InputMode::kImage && img.channels() != 3)
    throw ValidationError("extract_descriptor: image mode expects a 3-channel input");
  torch::NoGradGuard guard;
  bool was_training = net->is_training();
  net->eval();
  auto run = [&](const Image& im) {
    auto x = preprocess_for_embedding(im, cfg).unsqueeze(0);
    return net->forward(x).squeeze(0);
  };
  torch::Tensor desc;
  if (!cfg.multiscale) {
    desc = run(img);
  } else {
    const double scales[] = {1.0, 1.0 / std::sqrt(2.0), std::sqrt(2.0)};
    std::vector<torch::Tensor> parts;
    for (double s : scales) {
      Image scaled = img;
      if (s != 1.0) {
        int64_t target = std::max<int64_t>(8, std::llround(std::max(img.height(), img.width()) * s));
        scaled = resize_longest_side(img, target);
      }
      parts.push_back(run(scaled));
    }
    desc = l2_normalize(torch::stack(parts).mean(0));
  }
  if (was_training) net->train();
  return desc;
}

std::vector<EmbedEpochStats> train_embedding(const RetrievalDataset& ds,
                                             const EmbeddingConfig& cfg,
                                             const MiningConfig& mining,
                                             const EmbedSchedule& schedule, EmbeddingNet& net,
                                             const TranslateFn* translate,
                                             const EmbedEpochHook& on_epoch) {
  cfg.validate();
  mining.validate();

  // Small datasets fit in memory; cache decoded images across epochs.
  std::unordered_map<int32_t, Image> cache;
  auto load = [&](int32_t idx) -> Image {
    auto it = cache.find(idx);
    if (it == cache.end()) {
      Image img = read_image(ds.images[idx].resolved_path);
      img.domain = ds.images[idx].domain;
      it = cache.emplace(idx, std::move(img)).first;
    }
    return it->second;
  };
  auto embed = [&](const Image& img) { return extract_descriptor(net, img, cfg); };

  torch::optim::Adam opt(net->parameters(),
                         torch::optim::AdamOptions(schedule.lr).weight_decay(schedule.weight_decay));
  RngStream rng(schedule.seed);

  MiningConfig epoch_mining = mining;
  epoch_mining.anchors_per_epoch = schedule.tuples_per_epoch;

  std::vector<EmbedEpochStats> stats;
  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    net->eval();
    auto tuples = build_epoch_tuples(ds, epoch_mining, load, embed, translate, rng);

    net->train();
    EmbedEpochStats st;
    st.epoch = epoch;
    for (const auto& t : tuples.tuples) {
      std::vector<torch::Tensor> inputs;
      if (t.anchor_translated)
        inputs.push_back(preprocess_for_embedding(tuples.translated_anchors.at(t.anchor), cfg));
      else
        inputs.push_back(preprocess_for_embedding(load(t.anchor), cfg));
      inputs.push_back(preprocess_for_embedding(load(t.positive), cfg));
      for (int32_t nidx : t.negatives) inputs.push_back(preprocess_for_embedding(load(nidx), cfg));

      // equal shapes batch into one forward; fall back to per-image passes
      bool same_shape = true;
      for (const auto& x : inputs)
        if (!x.sizes().equals(inputs[0].sizes())) same_shape = false;
      std::vector<torch::Tensor> descs;
      if (same_shape) {
        auto out = net->forward(torch::stack(inputs));
        for (int64_t i = 0; i < out.size(0); ++i) descs.push_back(out[i]);
      } else {
        for (const auto& x : inputs) descs.push_back(net->forward(x.unsqueeze(0)).squeeze(0));
      }
      auto loss = tuple_loss(descs, cfg.margin, cfg.squared_loss);
      opt.zero_grad();
      loss.backward();
      opt.step();
      st.mean_loss += loss.item<double>();
      st.tuples += 1;
      if (t.anchor_translated) st.translated += 1;
    }
    if (st.tuples > 0) st.mean_loss /= st.tuples;
    stats.push_back(st);
    if (on_epoch) on_epoch(st, net, opt, tuples);
  }
  return stats;
}

}  // namespace darkside
