#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace slif {

// The single resolved configuration surface. Every module reads from here;
// keys are validated against their declared ranges before any work starts
// and unknown keys are rejected.
struct TrainConfig {
  // model
  int64_t d = 64;
  int batch_size = 4096;
  double lr = 1e-3;
  int L_b = 2;
  int L_m = 2;
  int L_k = 2;

  // graph construction
  int topk_per_modality = 10;
  double prune_ratio = 0.5;
  bool graph_binarize = false;

  // self-loop enhancement
  int sge_interval = 1;
  int sge_topn = 10;
  std::string sge_merge = "replace";
  bool sge_enabled = true;

  // fusion
  std::string fusion_mode = "ailf";

  // objectives
  double tau = 0.2;
  double t_uniform = 2.0;
  double beta = 0.5;
  double gamma = 1e-3;
  double eta = 1e-4;
  std::string intra_form = "literal";
  std::string intra_f = "l2norm";
  bool cl_enabled = true;

  // ablation switches
  bool kg_enabled = true;
  bool mm_enabled = true;
  bool kg_inverse_edges = true;
  bool kg_static_attention = false;

  // training
  uint64_t seed = 42;
  int epochs = 50;
  int patience = 10;
  int eval_interval = 1;
  std::vector<int> K_list = {20};
  int kcore = 0;  // 0 disables the filter
  double split_train = 0.8;
  double split_valid = 0.1;

  // data paths
  std::string interactions_path;
  std::string kg_path;
  std::string visual_features_path;
  std::string textual_features_path;
};

// All keys in declaration order, as (key, current value) strings.
std::vector<std::pair<std::string, std::string>> config_key_values(const TrainConfig& cfg);

// Names of every accepted key (CLI flag generation).
std::vector<std::string> config_keys();

// Sets one key from its string form; unknown key or unparsable value throws
// ConfigError naming the key.
void apply_override(TrainConfig& cfg, const std::string& key, const std::string& value);

// key=value file with '#' comments.
TrainConfig load_config_file(const std::string& path);
void save_config_file(const std::string& path, const TrainConfig& cfg);

// Range checks for every key; throws ConfigError naming the offending key.
void validate_config(const TrainConfig& cfg);

// SLIF_SEED environment variable overrides the master seed when set.
void apply_env_seed(TrainConfig& cfg);

}  // namespace slif
