#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "slif/config.hpp"
#include "slif/datasets.hpp"
#include "slif/eval.hpp"
#include "slif/model.hpp"
#include "slif/params.hpp"

namespace slif {

// Split, aligned, checksummed inputs the trainer consumes.
struct PreparedData {
  InteractionDataset ds;
  std::optional<KnowledgeGraph> kg;
  std::vector<ModalityFeatures> features;
  uint64_t interactions_checksum = 0;
  uint64_t kg_checksum = 0;
  std::vector<uint64_t> feature_checksums;
};

// Loads from the paths in `cfg`, applies the k-core filter and KG/feature
// alignment when configured, splits per user.
PreparedData load_and_prepare(const TrainConfig& cfg);

// Same pipeline over in-memory parts (the synthetic path).
PreparedData prepare_from_parts(const TrainConfig& cfg, InteractionDataset unsplit,
                                std::optional<KnowledgeGraph> kg,
                                std::vector<ModalityFeatures> features);

PreparedData prepare_synthetic(const TrainConfig& cfg, const SyntheticSpec& spec);

// One uniform negative per positive, drawn from the items the user has not
// interacted with in train; collisions are rejection-resampled. Throws
// (naming the user) if a user interacts with every item.
std::vector<int32_t> sample_negatives(const std::vector<std::vector<int32_t>>& user_train_sorted,
                                      int32_t num_items, const std::vector<Interaction>& batch,
                                      Rng& rng);

struct EpochStats {
  double loss = 0.0;
  double bpr = 0.0;
  double inter = 0.0;
  double intra = 0.0;
  double reg = 0.0;
  int64_t batches = 0;
};

enum class Split { kValid, kTest };

struct RunResult {
  int best_epoch = -1;
  double best_valid = 0.0;
  MetricsReport final_test;
  std::vector<std::string> epoch_lines;  // manifest metric records, in order
};

// Orchestrates the epoch loop: per-epoch degree pruning, mini-batch steps
// (encoders -> fusion -> objectives -> Adam), scheduled correlation-graph
// rebuilds, validation-driven early stopping, manifest/snapshot output.
class Trainer {
 public:
  Trainer(TrainConfig cfg, PreparedData data);

  EpochStats train_epoch();
  MetricsReport evaluate(Split split, const std::vector<int>& k_list);
  MetricsReport evaluate(Split split) { return evaluate(split, cfg_.K_list); }

  // Full loop with early stopping. When run_dir is non-empty, writes
  // config.txt, manifest.txt and snapshot/ under it.
  RunResult run(const std::string& run_dir);

  // No-tape forward under the evaluation graphs (no pruning, current
  // correlation graph): (user representations, unified item representations).
  std::pair<Tensor, Tensor> current_representations();

  void restore_snapshot(const std::string& dir);

  ParamSet& params() { return params_; }
  const TrainConfig& config() const { return cfg_; }
  const PreparedData& data() const { return data_; }
  EnhancementState& enhancement() { return sge_; }
  int epoch() const { return epoch_; }

 private:
  struct BatchTerms {
    double bpr = 0.0, inter = 0.0, intra = 0.0, reg = 0.0, total = 0.0;
  };

  WorkGraphs build_graphs(bool training, uint64_t epoch_seed);
  std::vector<float> modality_alpha_values() const;
  BatchTerms train_batch(const WorkGraphs& work, const std::vector<Interaction>& batch,
                         Rng& neg_rng);
  void write_manifest(const std::string& run_dir, const RunResult& result) const;
  void save_snapshot(const std::string& dir) const;

  TrainConfig cfg_;
  PreparedData data_;
  GraphInputs inputs_;
  ModelSettings settings_;
  ParamSet params_;
  Adam adam_;
  EnhancementState sge_;
  int epoch_ = 0;

  std::vector<std::vector<int32_t>> train_sets_;  // per user, sorted
  std::vector<std::vector<int32_t>> valid_sets_;
  std::vector<std::vector<int32_t>> test_sets_;
  std::array<bool, 3> active_branches_{true, false, false};

  // best-epoch snapshot (parameters + correlation graph of that moment)
  std::optional<ParamSet> best_params_;
  SparseGraph best_graph_;
  bool best_has_graph_ = false;
};

// Snapshot container: one binary tensor file per parameter plus the
// correlation graph, described by meta.txt.
void save_params_snapshot(const std::string& dir, const ParamSet& params,
                          const SparseGraph* correlation);
struct LoadedSnapshot {
  ParamSet params;
  SparseGraph correlation;
  bool has_correlation = false;
};
LoadedSnapshot load_params_snapshot(const std::string& dir);

uint64_t checksum_interactions(const InteractionDataset& ds);
uint64_t checksum_kg(const KnowledgeGraph& kg);
uint64_t checksum_features(const ModalityFeatures& feats);

}  // namespace slif
