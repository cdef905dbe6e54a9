#include "slif/model.hpp"

#include "slif/errors.hpp"
#include "slif/graph_build.hpp"
#include "slif/rng.hpp"

namespace slif {

int32_t GraphInputs::total_relations() const {
  int32_t r = kg_base_relations * (kg_inverse_edges ? 2 : 1);
  if (injected_relation >= 0) r = std::max(r, injected_relation + 1);
  return std::max(r, 1);
}

WorkGraphs build_work_graphs(const GraphInputs& in, const EnhancementState* sge,
                             const std::vector<float>& alpha_now, double prune_ratio,
                             bool training, uint64_t epoch_seed) {
  WorkGraphs out;
  out.num_users = in.num_users;
  out.num_items = in.num_items;

  const bool inject = sge && sge->enabled && sge->has_graph;

  SparseGraph adjacency = in.base_adjacency;
  if (training && prune_ratio > 0.0)
    adjacency = degree_sensitive_prune(adjacency, prune_ratio,
                                       derive_seed(epoch_seed, "prune-adj"));
  if (inject) adjacency = enhance_interaction_graph(adjacency, in.num_users, sge->current);
  out.interaction = normalize_interaction_adjacency(adjacency, in.num_users);

  if (in.has_features()) {
    out.feature = split_feature_parts(in.feature_graphs, alpha_now,
                                      inject ? &sge->current : nullptr);
    out.has_feature = true;
  }

  if (in.has_kg()) {
    std::vector<Triple> triples = in.kg_triples;
    if (training && prune_ratio > 0.0)
      triples = degree_sensitive_prune_triples(triples, in.num_entities, prune_ratio,
                                               derive_seed(epoch_seed, "prune-kg"));
    if (in.kg_inverse_edges) triples = with_inverse_relations(triples, in.kg_base_relations);
    if (inject) {
      if (in.injected_relation < 0)
        throw ConfigError("correlation injection into the KG needs a reserved relation id");
      const SparseGraph& g = sge->current;
      for (int64_t r = 0; r < g.num_rows(); ++r)
        for (int64_t e = g.row_begin(r); e < g.row_end(r); ++e)
          triples.push_back({static_cast<int32_t>(r), in.injected_relation,
                             g.col_indices()[e]});
    }
    out.kg = KgEdges::build(triples, in.num_entities);
    out.has_kg = true;
  }
  return out;
}

}  // namespace slif
