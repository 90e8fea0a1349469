#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "darkside/image.hpp"
#include "darkside/rng.hpp"

namespace darkside {

struct ImageRecord {
  std::string id;
  std::string path;           // as written in the manifest
  std::filesystem::path resolved_path;
  Domain domain = Domain::kUnknown;
  int64_t cluster = -1;
};

// SfM-style retrieval training set: images with cluster membership and
// day/night labels, matching (positive) pairs, and a train/val split.
struct RetrievalDataset {
  std::vector<ImageRecord> images;
  std::vector<std::pair<int32_t, int32_t>> positive_pairs;  // indices into images
  std::vector<int32_t> train_indices;
  std::vector<int32_t> val_indices;
  // qid -> ids removed from that query's ranking (revisited-benchmark style)
  std::unordered_map<std::string, std::vector<std::string>> junk;

  std::unordered_map<std::string, int32_t> index_of;
  // partner lists per image, symmetric over positive_pairs
  std::vector<std::vector<int32_t>> positives_of;

  int32_t require_index(const std::string& id) const;
  void rebuild_lookup();
};

// Loads and validates a JSON manifest:
//   {"images":[{"id","path","domain","cluster"}],
//    "pairs":[["a","p"],...],
//    "split":{"train":[...],"val":[...]},          (optional)
//    "junk":{"qid":[ids]}}                          (optional)
// Relative image paths resolve against DARKSIDE_DATA_ROOT when set, else the
// manifest's directory. Every path must exist unless check_paths is false.
RetrievalDataset load_dataset(const std::filesystem::path& manifest_path, bool check_paths = true);

void write_manifest(const RetrievalDataset& ds, const std::filesystem::path& manifest_path);

// Deterministic two-domain synthetic dataset for desk-scale verification.
// Scenes are textured polygon renders viewed from several jittered crops;
// night views apply a fixed photometric transform.
struct NightTransform {
  double gamma_strength = 1.2;   // exponent = 1 + gamma_strength
  double darken = 0.45;          // multiplicative dimming
  double chroma_shift = 0.35;    // push toward blue
  double vignette = 0.5;
  int light_spots = 4;

  bool is_identity() const {
    return gamma_strength == 0.0 && darken == 0.0 && chroma_shift == 0.0 && vignette == 0.0 &&
           light_spots == 0;
  }
};

struct SceneSpec {
  uint64_t seed = 0;
  int n_scenes = 100;
  int views_per_scene = 4;
  int image_size = 64;
  NightTransform night;
  double val_fraction = 0.2;  // trailing scenes go to the val split
};

// Renders the dataset under out_dir (images/ + manifest.json) and returns the
// loaded dataset. Pure function of the spec: reruns produce byte-identical
// files. Positive pairs connect co-scene day views; night views share the
// scene cluster but join no pair (they form the unpaired night pool).
RetrievalDataset make_synthetic_daynight(const SceneSpec& spec,
                                         const std::filesystem::path& out_dir);

// Applies the night transform to a single [0,1] RGB image.
Image apply_night_transform(const Image& day, const NightTransform& t, RngStream& rng);

}  // namespace darkside
