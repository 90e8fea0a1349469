#include "darkside/data.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include <json.hpp>

#include "darkside/common.hpp"

using nlohmann::json;

namespace darkside {

int32_t RetrievalDataset::require_index(const std::string& id) const {
  auto it = index_of.find(id);
  if (it == index_of.end()) throw ValidationError("unknown image id '" + id + "'");
  return it->second;
}

void RetrievalDataset::rebuild_lookup() {
  index_of.clear();
  for (size_t i = 0; i < images.size(); ++i) {
    auto [it, inserted] = index_of.emplace(images[i].id, static_cast<int32_t>(i));
    if (!inserted) throw ValidationError("duplicate image id '" + images[i].id + "'");
  }
  positives_of.assign(images.size(), {});
  for (auto [a, p] : positive_pairs) {
    positives_of[a].push_back(p);
    positives_of[p].push_back(a);
  }
}

namespace {

std::filesystem::path resolve_path(const std::string& raw, const std::filesystem::path& manifest_dir) {
  std::filesystem::path p(raw);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("DARKSIDE_DATA_ROOT")) {
    std::filesystem::path candidate = std::filesystem::path(root) / p;
    if (std::filesystem::exists(candidate)) return candidate;
  }
  return manifest_dir / p;
}

}  // namespace

RetrievalDataset load_dataset(const std::filesystem::path& manifest_path, bool check_paths) {
  std::ifstream in(manifest_path);
  if (!in) throw ValidationError("cannot open manifest: " + manifest_path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ValidationError("manifest is not valid JSON (" + manifest_path.string() + "): " + e.what());
  }

  RetrievalDataset ds;
  if (!doc.contains("images") || !doc["images"].is_array())
    throw ValidationError("manifest missing 'images' array");
  auto manifest_dir = manifest_path.parent_path();

  for (const auto& rec : doc["images"]) {
    ImageRecord r;
    if (!rec.contains("id")) throw ValidationError("image record missing 'id': " + rec.dump());
    r.id = rec.at("id").get<std::string>();
    if (!rec.contains("path")) throw ValidationError("image record '" + r.id + "' missing 'path'");
    r.path = rec.at("path").get<std::string>();
    if (!rec.contains("cluster"))
      throw ValidationError("image record '" + r.id + "' missing 'cluster'");
    r.cluster = rec.at("cluster").get<int64_t>();
    r.domain = domain_from_string(rec.value("domain", std::string("unknown")));
    r.resolved_path = resolve_path(r.path, manifest_dir);
    if (check_paths && !std::filesystem::exists(r.resolved_path))
      throw ValidationError("image record '" + r.id + "': file not found: " +
                            r.resolved_path.string());
    ds.images.push_back(std::move(r));
  }
  ds.rebuild_lookup();  // throws on duplicate ids

  if (doc.contains("pairs")) {
    for (const auto& pr : doc["pairs"]) {
      if (!pr.is_array() || pr.size() != 2)
        throw ValidationError("pair record must be [anchor_id, positive_id]: " + pr.dump());
      auto a_id = pr[0].get<std::string>();
      auto p_id = pr[1].get<std::string>();
      auto ai = ds.index_of.find(a_id);
      auto pi = ds.index_of.find(p_id);
      if (ai == ds.index_of.end())
        throw ValidationError("pair references unknown id '" + a_id + "'");
      if (pi == ds.index_of.end())
        throw ValidationError("pair references unknown id '" + p_id + "'");
      if (ds.images[ai->second].cluster != ds.images[pi->second].cluster)
        throw ValidationError("pair [" + a_id + ", " + p_id + "] does not share a cluster");
      ds.positive_pairs.emplace_back(ai->second, pi->second);
    }
  }
  ds.rebuild_lookup();

  auto read_split = [&](const char* key, std::vector<int32_t>& out) {
    for (const auto& id : doc["split"][key]) out.push_back(ds.require_index(id.get<std::string>()));
  };
  if (doc.contains("split")) {
    if (doc["split"].contains("train")) read_split("train", ds.train_indices);
    if (doc["split"].contains("val")) read_split("val", ds.val_indices);
  }
  if (ds.train_indices.empty() && ds.val_indices.empty()) {
    ds.train_indices.resize(ds.images.size());
    for (size_t i = 0; i < ds.images.size(); ++i) ds.train_indices[i] = static_cast<int32_t>(i);
  }

  if (doc.contains("junk")) {
    for (auto& [qid, arr] : doc["junk"].items()) {
      ds.require_index(qid);
      std::vector<std::string> ids;
      for (const auto& id : arr) {
        ds.require_index(id.get<std::string>());
        ids.push_back(id.get<std::string>());
      }
      ds.junk[qid] = std::move(ids);
    }
  }
  return ds;
}

void write_manifest(const RetrievalDataset& ds, const std::filesystem::path& manifest_path) {
  json doc;
  doc["images"] = json::array();
  for (const auto& r : ds.images) {
    doc["images"].push_back({{"id", r.id},
                             {"path", r.path},
                             {"domain", to_string(r.domain)},
                             {"cluster", r.cluster}});
  }
  doc["pairs"] = json::array();
  for (auto [a, p] : ds.positive_pairs)
    doc["pairs"].push_back({ds.images[a].id, ds.images[p].id});
  json split;
  auto ids_of = [&](const std::vector<int32_t>& idx) {
    json arr = json::array();
    for (auto i : idx) arr.push_back(ds.images[i].id);
    return arr;
  };
  split["train"] = ids_of(ds.train_indices);
  split["val"] = ids_of(ds.val_indices);
  doc["split"] = split;
  if (!ds.junk.empty()) {
    json junk = json::object();
    // sorted for stable output
    std::set<std::string> keys;
    for (auto& [k, _] : ds.junk) keys.insert(k);
    for (auto& k : keys) junk[k] = ds.junk.at(k);
    doc["junk"] = junk;
  }
  std::ofstream out(manifest_path);
  if (!out) throw ValidationError("cannot write manifest: " + manifest_path.string());
  out << doc.dump(2) << "\n";
}

}  // namespace darkside
