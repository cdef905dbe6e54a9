#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "slif/tensor.hpp"

namespace slif {

using Interaction = std::pair<int32_t, int32_t>;  // (user, item)

// Implicit-feedback interactions with dense ids and per-user disjoint splits.
struct InteractionDataset {
  int32_t num_users = 0;
  int32_t num_items = 0;
  std::vector<Interaction> train;
  std::vector<Interaction> valid;
  std::vector<Interaction> test;

  int64_t total() const {
    return static_cast<int64_t>(train.size() + valid.size() + test.size());
  }
};

struct Triple {
  int32_t head;
  int32_t relation;
  int32_t tail;

  auto operator<=>(const Triple&) const = default;
};

// Triple store over an entity set whose first `num_items` ids are items.
struct KnowledgeGraph {
  int32_t num_entities = 0;
  int32_t num_relations = 0;
  int32_t num_items = 0;  // item ids form a prefix of entity ids
  std::vector<Triple> triples;

  // Relation id used by correlation-graph injection, -1 when none injected.
  int32_t injected_relation = -1;

  // Triples grouped by head entity (indices into `triples`).
  std::vector<std::vector<int32_t>> head_index() const;
  void validate() const;
};

enum class Modality { kVisual, kTextual };

inline const char* modality_name(Modality m) {
  return m == Modality::kVisual ? "visual" : "textual";
}

// Raw per-item feature rows for one modality. Absent rows are all-zero with
// the presence bit cleared.
struct ModalityFeatures {
  Modality modality = Modality::kVisual;
  Tensor matrix;  // num_items x dim
  std::vector<uint8_t> present;

  int64_t num_items() const { return matrix.rows(); }
  int64_t dim() const { return matrix.cols(); }
};

// ---- loading / saving ----

InteractionDataset load_interactions(const std::string& path);
KnowledgeGraph load_kg(const std::string& path);
ModalityFeatures load_features(const std::string& path, Modality modality);

void save_interactions(const std::string& path, const std::vector<Interaction>& pairs);
void save_kg(const std::string& path, const KnowledgeGraph& kg);
void save_features_text(const std::string& path, const ModalityFeatures& feats);

// ---- preparation ----

// Iteratively removes users/items with fewer than k train interactions until
// a fixed point, then re-densifies ids. Valid/test pairs follow the same id
// maps (pairs touching removed nodes are dropped). Throws ValidationError if
// nothing survives.
struct KcoreResult {
  InteractionDataset dataset;
  std::vector<int32_t> user_map;  // old id -> new id, -1 if removed
  std::vector<int32_t> item_map;
};
KcoreResult kcore_filter_mapped(const InteractionDataset& ds, int k);
InteractionDataset kcore_filter(const InteractionDataset& ds, int k);

// Rewrites a KG after k-core filtering: triples whose item-head was removed
// are dropped; entities that are no longer items are re-indexed after the
// surviving items.
KnowledgeGraph align_kg(const KnowledgeGraph& kg, const std::vector<int32_t>& item_map,
                        int32_t new_num_items);
ModalityFeatures align_features(const ModalityFeatures& feats,
                                const std::vector<int32_t>& item_map, int32_t new_num_items);

// Per-user stratified split. All of `ds.train` is treated as the pool; users
// with fewer than 3 interactions keep everything in train. Deterministic
// under (seed, user id).
InteractionDataset split_dataset(const InteractionDataset& ds, double train_ratio,
                                 double valid_ratio, double test_ratio, uint64_t seed);

// ---- corruption (robustness studies) ----

enum class NoiseKind { kInteraction, kKgTail, kModalityAbsence };

NoiseKind noise_kind_from_string(const std::string& s);
const char* noise_kind_name(NoiseKind k);

// Replaces floor(ratio * n) train and valid interactions with unobserved
// ones. The test split is untouched.
InteractionDataset inject_interaction_noise(const InteractionDataset& ds, double ratio,
                                            uint64_t seed);
// Redirects floor(ratio * |triples|) tails to uniformly drawn other entities.
KnowledgeGraph inject_kg_noise(const KnowledgeGraph& kg, double ratio, uint64_t seed);
// Zeroes floor(ratio * |present|) feature rows and clears their presence bits.
ModalityFeatures inject_feature_absence(const ModalityFeatures& feats, double ratio,
                                        uint64_t seed);

// ---- synthetic data ----

struct SyntheticSpec {
  int32_t num_users = 1000;
  int32_t num_items = 1000;
  int32_t num_clusters = 5;
  int32_t kg_relations = 3;
  int32_t feature_dim = 16;
  double noise = 0.1;  // cross-cluster interaction / KG tail / feature jitter level
  int32_t interactions_per_user = 20;
};

struct SyntheticData {
  InteractionDataset interactions;  // unsplit; everything in train
  KnowledgeGraph kg;
  ModalityFeatures visual;
  ModalityFeatures textual;
  std::vector<int32_t> user_cluster;
  std::vector<int32_t> item_cluster;
};

// Cluster-structured corpus: interactions are drawn intra-cluster with
// probability (1 - noise) and item popularity within a cluster follows a
// Zipf profile; KG triples tie items of a cluster to shared attribute
// entities; features are cluster centroids plus Gaussian jitter of scale
// `noise`.
SyntheticData gen_synthetic(const SyntheticSpec& spec, uint64_t seed);

}  // namespace slif
