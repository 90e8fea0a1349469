#include "darkside/retrieval_eval.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "darkside/common.hpp"

using nlohmann::json;

namespace darkside {

void DescriptorSet::rebuild_index() {
  index.clear();
  for (size_t i = 0; i < ids.size(); ++i) {
    auto [it, inserted] = index.emplace(ids[i], static_cast<int64_t>(i));
    if (!inserted) throw ValidationError("duplicate descriptor id '" + ids[i] + "'");
  }
}

void save_descriptors(const DescriptorSet& set, const std::filesystem::path& path) {
  auto mat = set.values.to(torch::kFloat32).contiguous();
  if (mat.dim() != 2 || static_cast<size_t>(mat.size(0)) != set.ids.size())
    throw ValidationError("descriptor set shape does not match id count");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write descriptor file: " + path.string());
  out.write(reinterpret_cast<const char*>(mat.data_ptr<float>()),
            static_cast<std::streamsize>(mat.numel() * sizeof(float)));
  json side{{"ids", set.ids}, {"dim", mat.size(1)}, {"count", mat.size(0)}, {"dtype", "float32"}};
  std::ofstream meta(path.string() + ".json");
  meta << side.dump(2) << "\n";
}

DescriptorSet load_descriptors(const std::filesystem::path& path) {
  std::ifstream meta(path.string() + ".json");
  if (!meta) throw ValidationError("missing descriptor sidecar: " + path.string() + ".json");
  json side;
  meta >> side;
  DescriptorSet set;
  set.ids = side.at("ids").get<std::vector<std::string>>();
  int64_t dim = side.at("dim").get<int64_t>();
  int64_t count = side.at("count").get<int64_t>();
  if (count != static_cast<int64_t>(set.ids.size()))
    throw ValidationError("descriptor sidecar count does not match ids");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open descriptor file: " + path.string());
  auto mat = torch::empty({count, dim}, torch::kFloat32);
  in.read(reinterpret_cast<char*>(mat.data_ptr<float>()),
          static_cast<std::streamsize>(mat.numel() * sizeof(float)));
  if (!in) throw ValidationError("descriptor file truncated: " + path.string());
  set.values = mat;
  set.rebuild_index();
  return set;
}

double average_precision(const std::vector<int>& ranked_relevance) {
  int positives = 0;
  double sum = 0.0;
  for (size_t i = 0; i < ranked_relevance.size(); ++i) {
    if (ranked_relevance[i]) {
      ++positives;
      sum += static_cast<double>(positives) / static_cast<double>(i + 1);
    }
  }
  if (positives == 0) throw ValidationError("average_precision: ranking contains no positives");
  return sum / positives;
}

namespace {

struct QuerySets {
  std::unordered_set<int32_t> positives;
  std::unordered_set<int32_t> junked;
};

QuerySets sets_for_query(const RetrievalDataset& ds, int32_t q, const EvalProtocol& proto) {
  QuerySets out;
  const auto& qr = ds.images[q];
  for (int32_t i = 0; i < static_cast<int32_t>(ds.images.size()); ++i) {
    if (i == q) continue;
    const auto& r = ds.images[i];
    if (r.cluster != qr.cluster) continue;
    switch (proto.kind) {
      case ProtocolKind::kPlain:
        out.positives.insert(i);
        break;
      case ProtocolKind::kSameSceneCrossLight:
        if (r.domain != qr.domain)
          out.positives.insert(i);
        else
          out.junked.insert(i);  // same lighting, same scene: excluded from ranking
        break;
      case ProtocolKind::kDomainPair:
        if (r.domain == proto.positive_domain)
          out.positives.insert(i);
        else
          out.junked.insert(i);
        break;
    }
  }
  if (proto.use_manifest_junk) {
    auto it = ds.junk.find(qr.id);
    if (it != ds.junk.end())
      for (const auto& id : it->second) {
        int32_t j = ds.require_index(id);
        out.positives.erase(j);
        out.junked.insert(j);
      }
  }
  return out;
}

}  // namespace

EvalReport evaluate_map(const DescriptorSet& descs, const RetrievalDataset& ds,
                        const EvalProtocol& protocol) {
  if (descs.ids.empty()) throw ValidationError("evaluate_map: empty descriptor set");
  std::vector<int32_t> members(descs.ids.size());
  for (size_t i = 0; i < descs.ids.size(); ++i) members[i] = ds.require_index(descs.ids[i]);

  auto mat = descs.values.to(torch::kFloat32).contiguous();
  auto scores_all = torch::matmul(mat, mat.t());  // inner products between unit descriptors
  auto scores = scores_all.accessor<float, 2>();

  EvalReport report;
  for (size_t qi = 0; qi < members.size(); ++qi) {
    int32_t q = members[qi];
    if (protocol.kind == ProtocolKind::kDomainPair &&
        ds.images[q].domain != protocol.query_domain)
      continue;
    auto qsets = sets_for_query(ds, q, protocol);
    // keep only positives present in the descriptor set
    int present_positives = 0;

    std::vector<int64_t> order;
    order.reserve(members.size() - 1);
    for (size_t i = 0; i < members.size(); ++i) {
      if (i == qi) continue;
      if (qsets.junked.count(members[i])) continue;
      if (qsets.positives.count(members[i])) ++present_positives;
      order.push_back(static_cast<int64_t>(i));
    }
    if (present_positives == 0) {
      ++report.skipped;
      continue;
    }
    std::sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
      float sa = scores[qi][a], sb = scores[qi][b];
      if (sa != sb) return sa > sb;
      return descs.ids[a] < descs.ids[b];  // deterministic tie-break
    });
    std::vector<int> rel(order.size());
    for (size_t i = 0; i < order.size(); ++i)
      rel[i] = qsets.positives.count(members[order[i]]) ? 1 : 0;
    double ap = average_precision(rel);
    report.per_query.push_back({ds.images[q].id, ap});
    report.map += ap;
    ++report.evaluated;
  }
  if (report.evaluated == 0)
    throw ValidationError("evaluate_map: no query had positives under this protocol");
  report.map /= report.evaluated;
  return report;
}

torch::Tensor ensemble_concat(const torch::Tensor& a, const torch::Tensor& b) {
  double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  return torch::cat({a * inv_sqrt2, b * inv_sqrt2}, /*dim=*/-1);
}

DescriptorSet ensemble_concat(const DescriptorSet& a, const DescriptorSet& b) {
  if (a.ids.size() != b.ids.size())
    throw ValidationError("ensemble: descriptor sets differ in size");
  DescriptorSet out;
  out.ids = a.ids;
  std::vector<torch::Tensor> rows;
  rows.reserve(a.ids.size());
  for (size_t i = 0; i < a.ids.size(); ++i) {
    auto it = b.index.find(a.ids[i]);
    if (it == b.index.end())
      throw ValidationError("ensemble: id '" + a.ids[i] + "' missing from second set");
    rows.push_back(ensemble_concat(a.values[static_cast<int64_t>(i)], b.values[it->second]));
  }
  out.values = torch::stack(rows);
  out.rebuild_index();
  return out;
}

}  // namespace darkside
