#pragma once

#include <cstdint>
#include <vector>

#include "slif/datasets.hpp"
#include "slif/sparse_graph.hpp"
#include "slif/tensor.hpp"

namespace slif {

enum class SgeMerge { kReplace, kAccumulate };

SgeMerge sge_merge_from_string(const std::string& s);
const char* sge_merge_name(SgeMerge m);

// Item-item correlation graph from unified representations: cosine
// similarities, per-row top-N (ties toward lower index), negative weights
// clamped to zero, symmetrized with max(G, G^T), Laplacian-normalized.
// Callers pass detached representations; topology carries no gradient.
SparseGraph build_correlation_graph(const Tensor& unified_items, int top_n);

// Edge-wise max union of two equally shaped graphs.
SparseGraph merge_max(const SparseGraph& a, const SparseGraph& b);

// The three injections. `adjacency` spans user+item nodes; its item-item
// block is replaced by g. The feature graph merge keeps the max weight on
// duplicate edges. The KG gains (i, correlated_with, j) triples under a
// dedicated relation id; previously injected triples are replaced.
SparseGraph enhance_interaction_graph(const SparseGraph& adjacency, int64_t num_users,
                                      const SparseGraph& g);
SparseGraph enhance_feature_graph(const SparseGraph& s, const SparseGraph& g);
KnowledgeGraph enhance_kg(const KnowledgeGraph& kg, const SparseGraph& g);

// True when the correlation graph should be rebuilt at the end of `epoch`
// (0-based). The first epoch is warm-up: unified representations from a
// previous epoch do not exist yet.
bool schedule_update(int interval, int epoch, int warmup = 1);

// Scheduling/merge state carried across epochs by the trainer.
struct EnhancementState {
  int interval = 1;
  int top_n = 10;
  SgeMerge merge = SgeMerge::kReplace;
  bool enabled = true;
  int epoch = 0;

  SparseGraph current;  // |I| x |I|; empty until the first rebuild
  bool has_graph = false;

  // Rebuild from fresh unified representations; accumulate mode max-merges
  // with the previous rounds instead of replacing them.
  void update(const Tensor& unified_items);
};

// Decomposition of the (possibly correlation-merged) item feature graph that
// keeps the modality-weight gradient path alive: propagation is
//   sum_m alpha_m (S_m x) + (F x)
// where S_m hold per-modality weights of edges won by the feature side and F
// holds correlation-won edges at their fixed weights. The winner per edge is
// decided at merge time with the modality weights of that moment.
struct FeatureGraphParts {
  std::vector<SparseGraph> modality;    // per modality, feature-side edges
  std::vector<SparseGraph> modality_t;  // transposes for backward
  SparseGraph fixed;                    // correlation-won edges
  SparseGraph fixed_t;
  bool has_fixed = false;

  int64_t num_items() const { return modality.empty() ? fixed.num_rows() : modality[0].num_rows(); }
};

// `correlation` may be null (no injection yet / SGE disabled).
FeatureGraphParts split_feature_parts(const std::vector<SparseGraph>& per_modality,
                                      const std::vector<float>& alpha_now,
                                      const SparseGraph* correlation);

}  // namespace slif
