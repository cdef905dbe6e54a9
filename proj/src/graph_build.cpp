#include "slif/graph_build.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "slif/errors.hpp"
#include "slif/rng.hpp"

namespace slif {

namespace {

constexpr int64_t kDenseSimilarityLimit = 4096;
constexpr int64_t kSimilarityBlock = 1024;

// Fenwick tree over non-negative weights for O(log n) sampling without
// replacement.
class WeightedSampler {
 public:
  explicit WeightedSampler(const std::vector<double>& weights)
      : n_(weights.size()), tree_(weights.size() + 1, 0.0), alive_(weights.size(), 1),
        alive_count_(static_cast<int64_t>(weights.size())), weights_(weights) {
    for (size_t i = 0; i < weights.size(); ++i) add(i, weights[i]);
  }

  // Draws an index proportionally to remaining weights; falls back to a
  // uniform choice among the remaining when all weights are zero.
  size_t draw(Rng& rng) {
    double total = prefix(n_);
    size_t idx;
    if (total > 1e-12) {
      double x = rng.next_unit() * total;
      idx = find(x);
    } else {
      int64_t k = static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(alive_count_)));
      idx = 0;
      for (size_t i = 0;; ++i)
        if (alive_[i] && k-- == 0) {
          idx = i;
          break;
        }
    }
    add(idx, -weights_[idx]);
    weights_[idx] = 0.0;
    alive_[idx] = 0;
    --alive_count_;
    return idx;
  }

 private:
  void add(size_t i, double delta) {
    for (size_t j = i + 1; j <= n_; j += j & (~j + 1)) tree_[j] += delta;
  }
  double prefix(size_t i) const {
    double s = 0.0;
    for (size_t j = i; j > 0; j -= j & (~j + 1)) s += tree_[j];
    return s;
  }
  size_t find(double x) const {
    size_t pos = 0;
    size_t mask = 1;
    while ((mask << 1) <= n_) mask <<= 1;
    for (; mask > 0; mask >>= 1) {
      size_t next = pos + mask;
      if (next <= n_ && tree_[next] < x) {
        pos = next;
        x -= tree_[next];
      }
    }
    return std::min(pos, n_ - 1);  // pos is the count of skipped leaves
  }

  size_t n_;
  std::vector<double> tree_;
  std::vector<uint8_t> alive_;
  int64_t alive_count_;
  std::vector<double> weights_;
};

std::vector<double> normalized_rows(const Tensor& m) {
  std::vector<double> inv_norm(static_cast<size_t>(m.rows()), 0.0);
  for (int64_t r = 0; r < m.rows(); ++r) {
    double acc = 0.0;
    for (int64_t c = 0; c < m.cols(); ++c)
      acc += static_cast<double>(m.at(r, c)) * static_cast<double>(m.at(r, c));
    inv_norm[static_cast<size_t>(r)] = acc > 1e-24 ? 1.0 / std::sqrt(acc) : 0.0;
  }
  return inv_norm;
}

// Top-k of one similarity row with the (descending weight, ascending index)
// tie rule; the self column is excluded before selection.
void select_topk_row(int64_t row, const std::vector<float>& sims, int k,
                     std::vector<SparseGraph::Entry>& out) {
  std::vector<std::pair<float, int32_t>> cand;
  cand.reserve(sims.size());
  for (size_t j = 0; j < sims.size(); ++j)
    if (static_cast<int64_t>(j) != row) cand.emplace_back(sims[j], static_cast<int32_t>(j));
  const size_t keep = std::min<size_t>(static_cast<size_t>(k), cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<int64_t>(keep), cand.end(),
                    [](const auto& a, const auto& b) {
                      return a.first != b.first ? a.first > b.first : a.second < b.second;
                    });
  for (size_t j = 0; j < keep; ++j)
    out.push_back({static_cast<int32_t>(row), cand[j].second, cand[j].first});
}

}  // namespace

SparseGraph build_interaction_adjacency(const InteractionDataset& ds) {
  const int64_t n = static_cast<int64_t>(ds.num_users) + ds.num_items;
  std::vector<SparseGraph::Entry> entries;
  entries.reserve(ds.train.size() * 2);
  for (const auto& [u, i] : ds.train) {
    const int32_t item_node = ds.num_users + i;
    entries.push_back({u, item_node, 1.0f});
    entries.push_back({item_node, u, 1.0f});
  }
  // duplicated pairs would double weights; interactions are implicit 0/1
  return SparseGraph::from_entries(n, n, std::move(entries), 'M');
}

Tensor cosine_similarity_matrix(const Tensor& rows) {
  if (rows.rows() > kDenseSimilarityLimit)
    throw ConfigError("dense similarity limited to " + std::to_string(kDenseSimilarityLimit) +
                      " rows; use the blocked builder");
  const int64_t n = rows.rows(), d = rows.cols();
  auto inv_norm = normalized_rows(rows);
  Tensor out({n, n});
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int64_t c = 0; c < d; ++c)
        acc += static_cast<double>(rows.at(i, c)) * static_cast<double>(rows.at(j, c));
      out.at(i, j) = static_cast<float>(acc * inv_norm[i] * inv_norm[j]);
    }
  return out;
}

Tensor modality_similarity(const ModalityFeatures& feats) {
  return cosine_similarity_matrix(feats.matrix);
}

SparseGraph topk_sparsify(const Tensor& sims, int k) {
  if (k < 1) throw ConfigError("top-k sparsification needs k >= 1");
  const int64_t n = sims.rows();
  std::vector<SparseGraph::Entry> entries;
  std::vector<float> row(static_cast<size_t>(sims.cols()));
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < sims.cols(); ++j) row[static_cast<size_t>(j)] = sims.at(i, j);
    select_topk_row(i, row, k, entries);
  }
  return SparseGraph::from_entries(n, sims.cols(), std::move(entries));
}

SparseGraph knn_topk_graph(const Tensor& m, int k) {
  if (k < 1) throw ConfigError("knn graph needs k >= 1");
  const int64_t n = m.rows(), d = m.cols();
  auto inv_norm = normalized_rows(m);

  std::vector<SparseGraph::Entry> entries;
  std::vector<std::vector<SparseGraph::Entry>> block(static_cast<size_t>(kSimilarityBlock));
  for (int64_t b0 = 0; b0 < n; b0 += kSimilarityBlock) {
    const int64_t b1 = std::min(n, b0 + kSimilarityBlock);
#pragma omp parallel for schedule(static)
    for (int64_t i = b0; i < b1; ++i) {
      std::vector<float> sims(static_cast<size_t>(n));
      for (int64_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int64_t c = 0; c < d; ++c)
          acc += static_cast<double>(m.at(i, c)) * static_cast<double>(m.at(j, c));
        sims[static_cast<size_t>(j)] = static_cast<float>(acc * inv_norm[i] * inv_norm[j]);
      }
      auto& rows_out = block[static_cast<size_t>(i - b0)];
      rows_out.clear();
      select_topk_row(i, sims, k, rows_out);
    }
    for (int64_t i = b0; i < b1; ++i) {
      auto& rows_out = block[static_cast<size_t>(i - b0)];
      entries.insert(entries.end(), rows_out.begin(), rows_out.end());
    }
  }
  return SparseGraph::from_entries(n, n, std::move(entries));
}

SparseGraph clamp_nonnegative(const SparseGraph& g) {
  SparseGraph out = g;
  for (float& w : out.weights()) w = std::max(w, 0.0f);
  return out;
}

SparseGraph laplacian_normalize(const SparseGraph& g) {
  std::vector<double> degree(static_cast<size_t>(g.num_rows()), 0.0);
  for (int64_t r = 0; r < g.num_rows(); ++r)
    for (int64_t e = g.row_begin(r); e < g.row_end(r); ++e) {
      if (g.weights()[e] < 0.0f)
        throw ShapeError("laplacian_normalize: negative edge weight");
      degree[static_cast<size_t>(r)] += g.weights()[e];
    }
  std::vector<double> inv_sqrt(degree.size(), 0.0);
  for (size_t i = 0; i < degree.size(); ++i)
    if (degree[i] > 0.0) inv_sqrt[i] = 1.0 / std::sqrt(degree[i]);

  SparseGraph out = g;
  for (int64_t r = 0; r < g.num_rows(); ++r)
    for (int64_t e = g.row_begin(r); e < g.row_end(r); ++e) {
      const int64_t c = g.col_indices()[e];
      out.weights()[e] = static_cast<float>(static_cast<double>(g.weights()[e]) *
                                            inv_sqrt[static_cast<size_t>(r)] *
                                            inv_sqrt[static_cast<size_t>(c)]);
    }
  return out;
}

SparseGraph combine_modality_graphs(std::span<const SparseGraph> graphs,
                                    std::span<const float> alphas) {
  if (graphs.empty() || graphs.size() != alphas.size())
    throw ShapeError("combine_modality_graphs: need one weight per graph");
  std::vector<SparseGraph::Entry> entries;
  for (size_t m = 0; m < graphs.size(); ++m) {
    if (graphs[m].num_rows() != graphs[0].num_rows() ||
        graphs[m].num_cols() != graphs[0].num_cols())
      throw ShapeError("combine_modality_graphs: shape mismatch");
    for (int64_t r = 0; r < graphs[m].num_rows(); ++r)
      for (int64_t e = graphs[m].row_begin(r); e < graphs[m].row_end(r); ++e)
        entries.push_back({static_cast<int32_t>(r), graphs[m].col_indices()[e],
                           alphas[m] * graphs[m].weights()[e]});
  }
  return SparseGraph::from_entries(graphs[0].num_rows(), graphs[0].num_cols(),
                                   std::move(entries));
}

double edge_keep_probability(int64_t degree_a, int64_t degree_b) {
  return 1.0 / (std::sqrt(static_cast<double>(degree_a)) *
                std::sqrt(static_cast<double>(degree_b)));
}

SparseGraph degree_sensitive_prune(const SparseGraph& g, double prune_ratio, uint64_t seed) {
  if (prune_ratio < 0.0 || prune_ratio >= 1.0)
    throw ConfigError("prune_ratio must lie in [0, 1)");
  if (g.num_rows() != g.num_cols())
    throw ShapeError("degree_sensitive_prune expects a square symmetric graph");

  // Undirected edge list (a < b); degrees are neighbour counts of the
  // original graph.
  std::vector<std::pair<int32_t, int32_t>> edges;
  for (int64_t r = 0; r < g.num_rows(); ++r)
    for (int64_t e = g.row_begin(r); e < g.row_end(r); ++e)
      if (r < g.col_indices()[e]) edges.emplace_back(static_cast<int32_t>(r), g.col_indices()[e]);

  const int64_t drop_count =
      static_cast<int64_t>(std::floor(prune_ratio * static_cast<double>(edges.size())));
  if (drop_count == 0) return g;

  std::vector<double> drop_weight(edges.size());
  for (size_t e = 0; e < edges.size(); ++e)
    drop_weight[e] =
        1.0 - edge_keep_probability(g.row_nnz(edges[e].first), g.row_nnz(edges[e].second));

  WeightedSampler sampler(drop_weight);
  Rng rng(derive_seed(seed, "prune"));
  std::vector<uint8_t> dropped(edges.size(), 0);
  for (int64_t k = 0; k < drop_count; ++k) dropped[sampler.draw(rng)] = 1;

  std::vector<SparseGraph::Entry> kept;
  kept.reserve((edges.size() - static_cast<size_t>(drop_count)) * 2);
  std::vector<std::pair<int32_t, int32_t>> dropped_sorted;
  for (size_t e = 0; e < edges.size(); ++e)
    if (dropped[e]) dropped_sorted.push_back(edges[e]);
  std::sort(dropped_sorted.begin(), dropped_sorted.end());
  auto is_dropped = [&](int32_t a, int32_t b) {
    if (a > b) std::swap(a, b);
    return std::binary_search(dropped_sorted.begin(), dropped_sorted.end(), std::make_pair(a, b));
  };

  for (int64_t r = 0; r < g.num_rows(); ++r)
    for (int64_t e = g.row_begin(r); e < g.row_end(r); ++e) {
      const int32_t c = g.col_indices()[e];
      if (static_cast<int64_t>(c) == r || !is_dropped(static_cast<int32_t>(r), c))
        kept.push_back({static_cast<int32_t>(r), c, g.weights()[e]});
    }
  return SparseGraph::from_entries(g.num_rows(), g.num_cols(), std::move(kept));
}

std::vector<Triple> degree_sensitive_prune_triples(const std::vector<Triple>& triples,
                                                   int32_t num_entities, double prune_ratio,
                                                   uint64_t seed) {
  if (prune_ratio < 0.0 || prune_ratio >= 1.0)
    throw ConfigError("prune_ratio must lie in [0, 1)");
  const int64_t drop_count =
      static_cast<int64_t>(std::floor(prune_ratio * static_cast<double>(triples.size())));
  if (drop_count == 0) return triples;

  std::vector<int64_t> degree(static_cast<size_t>(num_entities), 0);
  for (const Triple& t : triples) {
    degree[static_cast<size_t>(t.head)]++;
    degree[static_cast<size_t>(t.tail)]++;
  }
  std::vector<double> drop_weight(triples.size());
  for (size_t i = 0; i < triples.size(); ++i)
    drop_weight[i] = 1.0 - edge_keep_probability(degree[static_cast<size_t>(triples[i].head)],
                                                 degree[static_cast<size_t>(triples[i].tail)]);

  WeightedSampler sampler(drop_weight);
  Rng rng(derive_seed(seed, "prune-kg"));
  std::vector<uint8_t> dropped(triples.size(), 0);
  for (int64_t k = 0; k < drop_count; ++k) dropped[sampler.draw(rng)] = 1;

  std::vector<Triple> kept;
  kept.reserve(triples.size() - static_cast<size_t>(drop_count));
  for (size_t i = 0; i < triples.size(); ++i)
    if (!dropped[i]) kept.push_back(triples[i]);
  return kept;
}

double spectral_radius(const SparseGraph& g, int iterations, uint64_t seed) {
  if (g.num_rows() != g.num_cols()) throw ShapeError("spectral_radius: graph not square");
  Rng rng(seed);
  Tensor v({g.num_rows(), 1});
  for (int64_t i = 0; i < v.numel(); ++i) v[i] = static_cast<float>(rng.next_uniform(0.1, 1.0));
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Tensor w = g.multiply(v);
    double norm = 0.0;
    for (int64_t i = 0; i < w.numel(); ++i)
      norm += static_cast<double>(w[i]) * static_cast<double>(w[i]);
    norm = std::sqrt(norm);
    if (norm < 1e-30) return 0.0;
    lambda = norm;
    for (int64_t i = 0; i < w.numel(); ++i) w[i] = static_cast<float>(w[i] / norm);
    v = std::move(w);
  }
  return lambda;
}

}  // namespace slif
