#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "darkside/rng.hpp"

namespace darkside {

// Single-file archive of named blobs. Layout (little-endian):
//   magic "DSAR" | u32 version | u32 count | count x entry
//   entry: u32 name_len | name bytes | u64 payload_len | payload
// Tensor payloads add their own header: u8 dtype | u8 ndim | i64 dims... | raw.
// Loading refuses unknown magic or a version newer than this build writes.
class BlobArchive {
 public:
  static constexpr uint32_t kVersion = 1;

  void add(const std::string& name, std::string bytes);
  void add_json(const std::string& name, const std::string& json_text);
  void add_tensor(const std::string& name, const torch::Tensor& t);

  bool has(const std::string& name) const { return entries_.count(name) != 0; }
  const std::string& get(const std::string& name) const;
  std::string get_json(const std::string& name) const { return get(name); }
  torch::Tensor get_tensor(const std::string& name) const;
  std::vector<std::string> names() const;
  std::vector<std::string> names_with_prefix(const std::string& prefix) const;

  void save(const std::filesystem::path& path) const;
  static BlobArchive load(const std::filesystem::path& path);

 private:
  std::map<std::string, std::string> entries_;  // ordered for stable files
};

// Named parameters + buffers of a module as raw tensors under
// "<prefix>/<name>". This is the documented import layout for external
// weights (e.g. a converted edge-detector teacher).
void save_module(BlobArchive& ar, const std::string& prefix, const torch::nn::Module& module);
void load_module(const BlobArchive& ar, const std::string& prefix, torch::nn::Module& module);

// Optimizer state as an opaque torch-serialized blob; round-trips within the
// same build.
void save_optimizer(BlobArchive& ar, const std::string& name, torch::optim::Optimizer& opt);
void load_optimizer(const BlobArchive& ar, const std::string& name, torch::optim::Optimizer& opt);

// Sampler stream + the global CPU torch generator.
void save_rng(BlobArchive& ar, const std::string& prefix, const RngStream& rng);
RngStream load_rng(const BlobArchive& ar, const std::string& prefix);

}  // namespace darkside
