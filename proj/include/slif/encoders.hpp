#pragma once

#include <vector>

#include "slif/datasets.hpp"
#include "slif/sparse_graph.hpp"
#include "slif/tape.hpp"

namespace slif {

// Symmetric normalization of a user-item adjacency: cross-block edges get
// 1/(sqrt(|N_row|) sqrt(|N_col|)) with degrees counted over cross-block
// edges only; item-item edges (injected correlation structure) keep their
// stored weights verbatim.
SparseGraph normalize_interaction_adjacency(const SparseGraph& adj, int64_t num_users);

// Drops diagonal entries (propagation on feature graphs excludes self-edges).
SparseGraph strip_diagonal(const SparseGraph& g);

// Directed knowledge-graph propagation edges for one epoch, grouped by head
// entity so attention can normalize per head.
struct KgEdges {
  int32_t num_entities = 0;
  std::vector<int32_t> heads;  // per edge
  std::vector<int32_t> rels;
  std::vector<int32_t> tails;
  std::vector<int64_t> seg_offsets;  // segments of equal head, covers all edges
  std::vector<int32_t> seg_heads;    // head entity per segment

  static KgEdges build(const std::vector<Triple>& triples, int32_t num_entities);
  bool empty() const { return tails.empty(); }
  int64_t size() const { return static_cast<int64_t>(tails.size()); }
};

// Adds an inverse relation block: triple (h, r, t) gains (t, r + R, h).
std::vector<Triple> with_inverse_relations(const std::vector<Triple>& triples,
                                           int32_t num_relations);

// Layer stack shared by the interaction and feature encoders: x_l = G x_{l-1},
// output = (1/L) sum_{l=1..L} x_l + x_0.
template <typename T>
typename TapeT<T>::Id propagate_layers_mean_residual(TapeT<T>& tp, const SparseGraph& g,
                                                     const SparseGraph& gt,
                                                     typename TapeT<T>::Id x0, int layers) {
  if (layers < 1) throw ConfigError("propagation needs at least one layer");
  auto x = x0;
  auto acc = tp.spmm(&g, &gt, x0);
  x = acc;
  for (int l = 2; l <= layers; ++l) {
    x = tp.spmm(&g, &gt, x);
    acc = tp.add(acc, x);
  }
  return tp.add(tp.scale(acc, 1.0 / layers), x0);
}

// Interaction-graph encoder. `adj` is the raw (possibly enhanced) adjacency;
// normalization happens here and is written into `norm_storage`, which must
// outlive the tape (spmm keeps a pointer to it). Returns the stacked
// user+item matrix.
template <typename T>
typename TapeT<T>::Id propagate_interaction(TapeT<T>& tp, const SparseGraph& adj,
                                            int64_t num_users, typename TapeT<T>::Id x0,
                                            int layers, SparseGraph& norm_storage) {
  norm_storage = normalize_interaction_adjacency(adj, num_users);
  return propagate_layers_mean_residual(tp, norm_storage, norm_storage, x0, layers);
}

// Feature-graph encoder over a single fixed graph (weights used verbatim,
// self-edges excluded).
template <typename T>
typename TapeT<T>::Id propagate_feature_graph(TapeT<T>& tp, const SparseGraph& s,
                                              const SparseGraph& st,
                                              typename TapeT<T>::Id item_x0, int layers) {
  return propagate_layers_mean_residual(tp, s, st, item_x0, layers);
}

// Raw per-edge attention scores (W_r x_t)^T tanh(W_r x_h + x_r) at the given
// source representations.
template <typename T>
typename TapeT<T>::Id kg_attention_scores(TapeT<T>& tp, const KgEdges& kg,
                                          typename TapeT<T>::Id x_src,
                                          typename TapeT<T>::Id rel_emb,
                                          typename TapeT<T>::Id rel_w) {
  auto tail_rows = tp.gather_rows(x_src, kg.tails);
  auto head_rows = tp.gather_rows(x_src, kg.heads);
  auto rel_rows = tp.gather_rows(rel_emb, kg.rels);
  auto wt = tp.relation_transform(tail_rows, kg.rels, rel_w);
  auto wh = tp.relation_transform(head_rows, kg.rels, rel_w);
  return tp.row_dot(wt, tp.tanh_(tp.add(wh, rel_rows)));
}

// Per-head softmax of the attention scores, one coefficient per edge.
template <typename T>
typename TapeT<T>::Id kg_attention_alpha(TapeT<T>& tp, const KgEdges& kg,
                                         typename TapeT<T>::Id x_src,
                                         typename TapeT<T>::Id rel_emb,
                                         typename TapeT<T>::Id rel_w) {
  return tp.segment_softmax(kg_attention_scores(tp, kg, x_src, rel_emb, rel_w), kg.seg_offsets);
}

// Relation-aware KG encoder: per layer, heads aggregate attention-weighted
// tails; the output averages layers 0..L (the layer-0 term is the residual
// path, no extra addition).
template <typename T>
typename TapeT<T>::Id propagate_kg(TapeT<T>& tp, const KgEdges& kg, typename TapeT<T>::Id x0,
                                   typename TapeT<T>::Id rel_emb, typename TapeT<T>::Id rel_w,
                                   int layers, bool static_attention,
                                   std::vector<typename TapeT<T>::Id>* alpha_out = nullptr) {
  if (layers < 1) throw ConfigError("kg propagation needs at least one layer");
  auto acc = x0;
  auto x_prev = x0;
  for (int l = 1; l <= layers; ++l) {
    auto score_src = static_attention ? x0 : x_prev;
    auto alpha = kg_attention_alpha(tp, kg, score_src, rel_emb, rel_w);
    if (alpha_out) alpha_out->push_back(alpha);
    auto tail_prev = tp.gather_rows(x_prev, kg.tails);
    auto x_next = tp.segment_weighted_rows(alpha, tail_prev, kg.seg_offsets, kg.seg_heads,
                                           kg.num_entities);
    acc = tp.add(acc, x_next);
    x_prev = x_next;
  }
  return tp.scale(acc, 1.0 / (layers + 1));
}

}  // namespace slif
