#pragma once

#include <array>
#include <optional>
#include <vector>

#include "slif/encoders.hpp"
#include "slif/fusion.hpp"
#include "slif/params.hpp"
#include "slif/sge.hpp"
#include "slif/sparse_graph.hpp"

namespace slif {

// Static per-run graph material (built once from the datasets).
struct GraphInputs {
  int64_t num_users = 0;
  int64_t num_items = 0;
  int32_t num_entities = 0;

  SparseGraph base_adjacency;               // (U+I)^2, unpruned, no injection
  std::vector<SparseGraph> feature_graphs;  // per modality, normalized
  std::vector<Triple> kg_triples;           // base triples (no inverses)
  int32_t kg_base_relations = 0;
  bool kg_inverse_edges = true;
  int32_t injected_relation = -1;  // relation id for correlation triples, -1 if unused

  bool has_features() const { return !feature_graphs.empty(); }
  bool has_kg() const { return kg_base_relations > 0; }
  // Relation-table size covering inverses and the injected relation.
  int32_t total_relations() const;
};

// The graphs one epoch actually propagates over. Storage must stay alive for
// the lifetime of any tape built on it.
struct WorkGraphs {
  int64_t num_users = 0;
  int64_t num_items = 0;
  SparseGraph interaction;  // normalized, symmetric, with correlation block
  FeatureGraphParts feature;
  bool has_feature = false;
  KgEdges kg;
  bool has_kg = false;
};

// Assembles the epoch graphs: optional degree pruning of the interaction
// edges and KG triples, correlation-graph injection into all three, then
// normalization. `alpha_now` are the current modality weights (for the merge
// winner rule). Pruning applies only when `training` is true.
WorkGraphs build_work_graphs(const GraphInputs& in, const EnhancementState* sge,
                             const std::vector<float>& alpha_now, double prune_ratio,
                             bool training, uint64_t epoch_seed);

struct ModelSettings {
  int layers_interaction = 2;
  int layers_feature = 2;
  int layers_kg = 2;
  bool kg_static_attention = false;
  FusionMode fusion_mode = FusionMode::kAilf;
  int64_t dim = 64;
};

template <typename T>
struct ParamIds {
  typename TapeT<T>::Id user_emb, entity_emb, relation_emb, relation_w;
  typename TapeT<T>::Id fusion_w, fusion_b, modality_logits;
  typename TapeT<T>::Id concat_proj = -1;
};

template <typename T>
ParamIds<T> put_params_on_tape(TapeT<T>& tp, const ParamSet& p) {
  ParamIds<T> ids;
  ids.user_emb = tp.param(TensorT<T>::from(p.user_emb));
  ids.entity_emb = tp.param(TensorT<T>::from(p.entity_emb));
  ids.relation_emb = tp.param(TensorT<T>::from(p.relation_emb));
  ids.relation_w = tp.param(TensorT<T>::from(p.relation_w));
  ids.fusion_w = tp.param(TensorT<T>::from(p.fusion_w));
  ids.fusion_b = tp.param(TensorT<T>::from(p.fusion_b));
  ids.modality_logits = tp.param(TensorT<T>::from(p.modality_logits));
  if (p.concat_proj.numel() > 0) ids.concat_proj = tp.param(TensorT<T>::from(p.concat_proj));
  return ids;
}

template <typename T>
struct ForwardIds {
  typename TapeT<T>::Id user_final;        // U x d
  typename TapeT<T>::Id item_interaction;  // I x d
  typename TapeT<T>::Id item_feature = -1;
  typename TapeT<T>::Id item_kg = -1;
  typename TapeT<T>::Id unified;         // I x d
  typename TapeT<T>::Id fusion_alpha;    // I x n_active (-1 for sum/concat)
  typename TapeT<T>::Id modality_alpha;  // 1 x M (-1 without features)
  std::array<bool, 3> active{};          // [interaction, feature, kg]
};

// Full forward pass: three encoders over the epoch graphs, then item-level
// fusion into the unified representations.
template <typename T>
ForwardIds<T> model_forward(TapeT<T>& tp, const WorkGraphs& g, const ParamIds<T>& ids,
                            const ModelSettings& s) {
  using Id = typename TapeT<T>::Id;
  ForwardIds<T> out;

  auto item0 = tp.slice_rows(ids.entity_emb, 0, g.num_items);
  auto x0 = tp.concat_rows(ids.user_emb, item0);
  auto stacked =
      propagate_layers_mean_residual(tp, g.interaction, g.interaction, x0, s.layers_interaction);
  out.user_final = tp.slice_rows(stacked, 0, g.num_users);
  out.item_interaction = tp.slice_rows(stacked, g.num_users, g.num_users + g.num_items);
  out.active[0] = true;

  if (g.has_feature) {
    out.modality_alpha = tp.row_softmax(ids.modality_logits);
    auto propagate = [&](Id x) {
      Id acc = -1;
      for (size_t m = 0; m < g.feature.modality.size(); ++m) {
        auto y = tp.spmm(&g.feature.modality[m], &g.feature.modality_t[m], x);
        y = tp.mul_scalar(y, tp.slice_cols(out.modality_alpha, static_cast<int64_t>(m),
                                           static_cast<int64_t>(m) + 1));
        acc = acc < 0 ? y : tp.add(acc, y);
      }
      if (g.feature.has_fixed)
        acc = tp.add(acc, tp.spmm(&g.feature.fixed, &g.feature.fixed_t, x));
      return acc;
    };
    Id x = item0;
    Id layer_acc = -1;
    for (int l = 1; l <= s.layers_feature; ++l) {
      x = propagate(x);
      layer_acc = layer_acc < 0 ? x : tp.add(layer_acc, x);
    }
    out.item_feature = tp.add(tp.scale(layer_acc, 1.0 / s.layers_feature), item0);
    out.active[1] = true;
  }

  if (g.has_kg) {
    auto entities = propagate_kg(tp, g.kg, ids.entity_emb, ids.relation_emb, ids.relation_w,
                                 s.layers_kg, s.kg_static_attention);
    out.item_kg = tp.slice_rows(entities, 0, g.num_items);
    out.active[2] = true;
  }

  auto fused = fuse_item_branches<T>(tp, {out.item_interaction, out.item_feature, out.item_kg},
                                     out.active, ids.fusion_w, ids.fusion_b, ids.concat_proj,
                                     s.fusion_mode, s.dim);
  out.unified = fused.unified;
  out.fusion_alpha = fused.alpha;
  return out;
}

}  // namespace slif
