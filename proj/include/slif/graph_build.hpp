#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "slif/datasets.hpp"
#include "slif/sparse_graph.hpp"
#include "slif/tensor.hpp"

namespace slif {

// Bipartite interaction adjacency over user+item nodes: users occupy rows
// [0, |U|), items rows [|U|, |U|+|I|). Cross blocks carry weight 1, diagonal
// blocks are empty.
SparseGraph build_interaction_adjacency(const InteractionDataset& ds);

// Dense cosine-similarity matrix over raw feature rows; absent (all-zero)
// rows give zero similarity. Guarded to small item counts - the blocked
// builder below never materializes the full matrix.
Tensor modality_similarity(const ModalityFeatures& feats);

// Dense pairwise cosine over arbitrary representation rows (used by the
// correlation-graph path and test oracles).
Tensor cosine_similarity_matrix(const Tensor& rows);

// Keeps the K largest entries per row (self-column excluded), preserving the
// raw values. Ties break by (descending weight, ascending column).
SparseGraph topk_sparsify(const Tensor& sims, int k);

// Blocked K-nearest-neighbour graph over arbitrary representation rows:
// equivalent to topk_sparsify(cosine_similarity_matrix(rows), k) but
// processes rows in blocks of 1024 so the full similarity matrix never
// exists.
SparseGraph knn_topk_graph(const Tensor& rows, int k);

inline SparseGraph build_knn_graph(const ModalityFeatures& feats, int k) {
  return knn_topk_graph(feats.matrix, k);
}

// Clamps negative edge weights to zero (structure is kept). Cosine rows can
// go slightly negative; normalization requires non-negative weights.
SparseGraph clamp_nonnegative(const SparseGraph& g);

// S = D^{-1/2} S~ D^{-1/2} with D the diagonal of row weight sums. Rows (and
// columns) of zero degree map to zero. Negative weights are a contract
// violation.
SparseGraph laplacian_normalize(const SparseGraph& g);

// Weighted edge union sum_m alpha_m * S_m. Graphs must share shape.
SparseGraph combine_modality_graphs(std::span<const SparseGraph> graphs,
                                    std::span<const float> alphas);

// Removes exactly floor(ratio * |undirected edges|) edges from a symmetric
// graph, sampled without replacement with probability proportional to
// 1 - 1/(sqrt(d_a) sqrt(d_b)) (degrees of the endpoints in the un-pruned
// graph). Both directions of a selected edge are removed.
SparseGraph degree_sensitive_prune(const SparseGraph& g, double prune_ratio, uint64_t seed);

// The same pruning rule over triples: entity degree counts incident triples,
// each triple is one removable unit.
std::vector<Triple> degree_sensitive_prune_triples(const std::vector<Triple>& triples,
                                                   int32_t num_entities, double prune_ratio,
                                                   uint64_t seed);

// Largest-magnitude eigenvalue estimate by power iteration (test support for
// the spectral bound on normalized graphs).
double spectral_radius(const SparseGraph& g, int iterations = 200, uint64_t seed = 1);

// Exact retention probability of one edge under the pruning rule.
double edge_keep_probability(int64_t degree_a, int64_t degree_b);

}  // namespace slif
