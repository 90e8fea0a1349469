#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "darkside/data.hpp"

namespace darkside {

// Named bank of global descriptors (rows are L2-normalized).
struct DescriptorSet {
  std::vector<std::string> ids;
  torch::Tensor values;  // N x D float32

  std::unordered_map<std::string, int64_t> index;
  void rebuild_index();
  int64_t dim() const { return values.size(1); }
};

// Binary matrix file (row-major float32, little-endian) + JSON sidecar with
// ids and dim. `path` is the .bin file; sidecar lives at path + ".json".
void save_descriptors(const DescriptorSet& set, const std::filesystem::path& path);
DescriptorSet load_descriptors(const std::filesystem::path& path);

enum class ProtocolKind {
  kPlain,               // positives: same cluster, any lighting
  kSameSceneCrossLight, // positives: same cluster, different domain; same-domain co-scene junked
  kDomainPair,          // queries from one domain, positives co-scene in the other
};

struct EvalProtocol {
  ProtocolKind kind = ProtocolKind::kPlain;
  Domain query_domain = Domain::kDay;     // kDomainPair only
  Domain positive_domain = Domain::kNight;
  bool use_manifest_junk = true;
};

// AP over a binary relevance ranking: mean over positive ranks i (1-based)
// of precision-at-i. Throws ValidationError when the list has no positives.
double average_precision(const std::vector<int>& ranked_relevance);

struct QueryAp {
  std::string id;
  double ap;
};

struct EvalReport {
  double map = 0.0;
  int evaluated = 0;
  int skipped = 0;  // queries with no positives under the protocol
  std::vector<QueryAp> per_query;
};

// Ranks by descending inner product (ties broken by ascending id), removes
// the query and junk from the ranking, computes AP per query. Every id in
// `descs` must exist in the dataset.
EvalReport evaluate_map(const DescriptorSet& descs, const RetrievalDataset& ds,
                        const EvalProtocol& protocol);

// Concatenates two unit descriptors scaled by 1/sqrt(2); preserves unit norm
// and makes inner products the mean of the two component inner products.
torch::Tensor ensemble_concat(const torch::Tensor& a, const torch::Tensor& b);
DescriptorSet ensemble_concat(const DescriptorSet& a, const DescriptorSet& b);

}  // namespace darkside
