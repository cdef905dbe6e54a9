#include "slif/sge.hpp"

#include <algorithm>
#include <map>

#include "slif/errors.hpp"
#include "slif/graph_build.hpp"

namespace slif {

SgeMerge sge_merge_from_string(const std::string& s) {
  if (s == "replace") return SgeMerge::kReplace;
  if (s == "accumulate") return SgeMerge::kAccumulate;
  throw ConfigError("unknown sge_merge '" + s + "'");
}

const char* sge_merge_name(SgeMerge m) {
  return m == SgeMerge::kReplace ? "replace" : "accumulate";
}

SparseGraph build_correlation_graph(const Tensor& unified_items, int top_n) {
  if (top_n < 1) throw ConfigError("correlation graph needs top_n >= 1");
  if (!unified_items.all_finite())
    throw NumericError("build_correlation_graph", "non-finite representations");

  SparseGraph knn = knn_topk_graph(unified_items, top_n);  // blocked cosine + per-row top-N
  knn = clamp_nonnegative(knn);
  SparseGraph sym = merge_max(knn, knn.transposed());
  return laplacian_normalize(sym);
}

SparseGraph merge_max(const SparseGraph& a, const SparseGraph& b) {
  if (a.num_rows() != b.num_rows() || a.num_cols() != b.num_cols())
    throw ShapeError("merge_max: shape mismatch");
  std::vector<SparseGraph::Entry> entries;
  entries.reserve(static_cast<size_t>(a.nnz() + b.nnz()));
  for (const SparseGraph* g : {&a, &b})
    for (int64_t r = 0; r < g->num_rows(); ++r)
      for (int64_t e = g->row_begin(r); e < g->row_end(r); ++e)
        entries.push_back({static_cast<int32_t>(r), g->col_indices()[e], g->weights()[e]});
  return SparseGraph::from_entries(a.num_rows(), a.num_cols(), std::move(entries), 'M');
}

SparseGraph enhance_interaction_graph(const SparseGraph& adjacency, int64_t num_users,
                                      const SparseGraph& g) {
  const int64_t n = adjacency.num_rows();
  const int64_t num_items = n - num_users;
  if (g.num_rows() != num_items || g.num_cols() != num_items)
    throw ShapeError("enhance_interaction_graph: correlation block shape mismatch");

  std::vector<SparseGraph::Entry> entries;
  for (int64_t r = 0; r < n; ++r)
    for (int64_t e = adjacency.row_begin(r); e < adjacency.row_end(r); ++e) {
      const int64_t c = adjacency.col_indices()[e];
      const bool both_items = r >= num_users && c >= num_users;
      if (!both_items)  // previous item-item injection is replaced
        entries.push_back({static_cast<int32_t>(r), static_cast<int32_t>(c),
                           adjacency.weights()[e]});
    }
  for (int64_t r = 0; r < num_items; ++r)
    for (int64_t e = g.row_begin(r); e < g.row_end(r); ++e)
      entries.push_back({static_cast<int32_t>(num_users + r),
                         static_cast<int32_t>(num_users + g.col_indices()[e]), g.weights()[e]});
  return SparseGraph::from_entries(n, n, std::move(entries));
}

SparseGraph enhance_feature_graph(const SparseGraph& s, const SparseGraph& g) {
  return merge_max(s, g);
}

KnowledgeGraph enhance_kg(const KnowledgeGraph& kg, const SparseGraph& g) {
  if (g.nnz() == 0) return kg;
  KnowledgeGraph out = kg;
  int32_t rel;
  if (kg.injected_relation >= 0) {
    rel = kg.injected_relation;
    std::erase_if(out.triples, [rel](const Triple& t) { return t.relation == rel; });
  } else {
    rel = out.num_relations;
    out.num_relations += 1;
    out.injected_relation = rel;
  }
  for (int64_t r = 0; r < g.num_rows(); ++r)
    for (int64_t e = g.row_begin(r); e < g.row_end(r); ++e)
      out.triples.push_back({static_cast<int32_t>(r), rel, g.col_indices()[e]});
  return out;
}

bool schedule_update(int interval, int epoch, int warmup) {
  if (interval < 1) throw ConfigError("sge_interval must be >= 1");
  return epoch >= warmup && epoch % interval == 0;
}

void EnhancementState::update(const Tensor& unified_items) {
  SparseGraph fresh = build_correlation_graph(unified_items, top_n);
  if (merge == SgeMerge::kAccumulate && has_graph)
    current = merge_max(current, fresh);
  else
    current = std::move(fresh);
  has_graph = true;
}

FeatureGraphParts split_feature_parts(const std::vector<SparseGraph>& per_modality,
                                      const std::vector<float>& alpha_now,
                                      const SparseGraph* correlation) {
  if (per_modality.size() != alpha_now.size())
    throw ShapeError("split_feature_parts: one weight per modality graph");
  FeatureGraphParts parts;
  if (per_modality.empty()) return parts;
  const int64_t n = per_modality[0].num_rows();
  for (const auto& g : per_modality)
    if (g.num_rows() != n || g.num_cols() != n)
      throw ShapeError("split_feature_parts: modality graph shape mismatch");

  if (!correlation || correlation->nnz() == 0) {
    parts.modality = per_modality;
    for (const auto& g : per_modality) parts.modality_t.push_back(g.transposed());
    return parts;
  }

  // Union of edges; feature side wins ties so modality gradients survive.
  std::map<std::pair<int32_t, int32_t>, std::pair<std::vector<float>, float>> edges;
  for (size_t m = 0; m < per_modality.size(); ++m) {
    const auto& g = per_modality[m];
    for (int64_t r = 0; r < n; ++r)
      for (int64_t e = g.row_begin(r); e < g.row_end(r); ++e) {
        auto& slot = edges[{static_cast<int32_t>(r), g.col_indices()[e]}];
        if (slot.first.empty()) slot.first.assign(per_modality.size(), 0.0f);
        slot.first[m] = g.weights()[e];
      }
  }
  for (int64_t r = 0; r < correlation->num_rows(); ++r)
    for (int64_t e = correlation->row_begin(r); e < correlation->row_end(r); ++e) {
      auto& slot = edges[{static_cast<int32_t>(r), correlation->col_indices()[e]}];
      if (slot.first.empty()) slot.first.assign(per_modality.size(), 0.0f);
      slot.second = correlation->weights()[e];
    }

  std::vector<std::vector<SparseGraph::Entry>> mod_entries(per_modality.size());
  std::vector<SparseGraph::Entry> fixed_entries;
  for (const auto& [key, slot] : edges) {
    double s_val = 0.0;
    for (size_t m = 0; m < per_modality.size(); ++m)
      s_val += static_cast<double>(alpha_now[m]) * slot.first[m];
    if (s_val >= slot.second) {
      for (size_t m = 0; m < per_modality.size(); ++m)
        if (slot.first[m] != 0.0f)
          mod_entries[m].push_back({key.first, key.second, slot.first[m]});
    } else {
      fixed_entries.push_back({key.first, key.second, slot.second});
    }
  }

  for (size_t m = 0; m < per_modality.size(); ++m) {
    parts.modality.push_back(SparseGraph::from_entries(n, n, std::move(mod_entries[m])));
    parts.modality_t.push_back(parts.modality.back().transposed());
  }
  parts.fixed = SparseGraph::from_entries(n, n, std::move(fixed_entries));
  parts.fixed_t = parts.fixed.transposed();
  parts.has_fixed = parts.fixed.nnz() > 0;
  return parts;
}

}  // namespace slif
