#include "slif/encoders.hpp"

#include <algorithm>
#include <cmath>

#include "slif/errors.hpp"

namespace slif {

SparseGraph normalize_interaction_adjacency(const SparseGraph& adj, int64_t num_users) {
  if (adj.num_rows() != adj.num_cols())
    throw ShapeError("normalize_interaction_adjacency: graph not square");
  const int64_t n = adj.num_rows();

  // degrees over cross-block edges only
  std::vector<int64_t> degree(static_cast<size_t>(n), 0);
  for (int64_t r = 0; r < n; ++r)
    for (int64_t e = adj.row_begin(r); e < adj.row_end(r); ++e) {
      const bool row_is_user = r < num_users;
      const bool col_is_user = adj.col_indices()[e] < num_users;
      if (row_is_user != col_is_user) degree[static_cast<size_t>(r)]++;
    }

  SparseGraph out = adj;
  for (int64_t r = 0; r < n; ++r)
    for (int64_t e = adj.row_begin(r); e < adj.row_end(r); ++e) {
      const int64_t c = adj.col_indices()[e];
      const bool row_is_user = r < num_users;
      const bool col_is_user = c < num_users;
      if (row_is_user != col_is_user) {
        out.weights()[e] = static_cast<float>(
            1.0 / (std::sqrt(static_cast<double>(degree[static_cast<size_t>(r)])) *
                   std::sqrt(static_cast<double>(degree[static_cast<size_t>(c)]))));
      }
      // item-item correlation edges keep their stored (already normalized)
      // weights; user-user entries would keep theirs but never exist
    }
  return out;
}

SparseGraph strip_diagonal(const SparseGraph& g) {
  std::vector<SparseGraph::Entry> entries;
  entries.reserve(static_cast<size_t>(g.nnz()));
  for (int64_t r = 0; r < g.num_rows(); ++r)
    for (int64_t e = g.row_begin(r); e < g.row_end(r); ++e)
      if (g.col_indices()[e] != r)
        entries.push_back({static_cast<int32_t>(r), g.col_indices()[e], g.weights()[e]});
  return SparseGraph::from_entries(g.num_rows(), g.num_cols(), std::move(entries));
}

KgEdges KgEdges::build(const std::vector<Triple>& triples, int32_t num_entities) {
  KgEdges out;
  out.num_entities = num_entities;
  std::vector<Triple> sorted = triples;
  std::sort(sorted.begin(), sorted.end());

  for (size_t i = 0; i < sorted.size(); ++i) {
    const Triple& t = sorted[i];
    if (t.head < 0 || t.head >= num_entities || t.tail < 0 || t.tail >= num_entities)
      throw ValidationError("kg edges: entity id out of range");
    if (out.seg_heads.empty() || out.seg_heads.back() != t.head) {
      out.seg_offsets.push_back(static_cast<int64_t>(i));
      out.seg_heads.push_back(t.head);
    }
    out.heads.push_back(t.head);
    out.rels.push_back(t.relation);
    out.tails.push_back(t.tail);
  }
  out.seg_offsets.push_back(static_cast<int64_t>(sorted.size()));
  return out;
}

std::vector<Triple> with_inverse_relations(const std::vector<Triple>& triples,
                                           int32_t num_relations) {
  std::vector<Triple> out = triples;
  out.reserve(triples.size() * 2);
  for (const Triple& t : triples)
    out.push_back({t.tail, t.relation + num_relations, t.head});
  return out;
}

}  // namespace slif
