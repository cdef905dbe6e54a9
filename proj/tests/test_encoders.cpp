#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "slif/encoders.hpp"
#include "slif/grad_check.hpp"
#include "slif/graph_build.hpp"
#include "slif/model.hpp"
#include "slif/rng.hpp"
#include "slif/sge.hpp"

using namespace slif;

namespace {

Tensor random_tensor(std::vector<int64_t> shape, uint64_t seed, float lo = -1.0f,
                     float hi = 1.0f) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.next_uniform(lo, hi));
  return t;
}

// Dense double-precision layer stack: x_l = M x_{l-1},
// out = (1/L) sum_{l>=1} x_l + x_0.
std::vector<std::vector<double>> dense_mean_residual(const std::vector<std::vector<double>>& m,
                                                     const std::vector<std::vector<double>>& x0,
                                                     int layers) {
  const size_t n = x0.size(), d = x0[0].size();
  auto x = x0;
  std::vector<std::vector<double>> acc(n, std::vector<double>(d, 0.0));
  for (int l = 1; l <= layers; ++l) {
    std::vector<std::vector<double>> next(n, std::vector<double>(d, 0.0));
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j)
        for (size_t c = 0; c < d; ++c) next[i][c] += m[i][j] * x[j][c];
    x = next;
    for (size_t i = 0; i < n; ++i)
      for (size_t c = 0; c < d; ++c) acc[i][c] += x[i][c];
  }
  for (size_t i = 0; i < n; ++i)
    for (size_t c = 0; c < d; ++c) acc[i][c] = acc[i][c] / layers + x0[i][c];
  return acc;
}

}  // namespace

TEST_CASE("interaction encoder: single edge gives x_u = x_i0 + x_u0") {
  InteractionDataset ds;
  ds.num_users = 1;
  ds.num_items = 1;
  ds.train = {{0, 0}};
  auto adj = build_interaction_adjacency(ds);

  Tensor x0 = Tensor::from_data({2, 2}, {1.0f, 2.0f,   // user 0
                                         3.0f, -1.0f});  // item 0
  Tape tp;
  auto x0_id = tp.constant(x0);
  SparseGraph norm;
  auto out = propagate_interaction(tp, adj, 1, x0_id, 1, norm);
  CHECK(tp.value(out).at(0, 0) == doctest::Approx(4.0));   // 3 + 1
  CHECK(tp.value(out).at(0, 1) == doctest::Approx(1.0));   // -1 + 2
  CHECK(tp.value(out).at(1, 0) == doctest::Approx(4.0));   // symmetric
}

TEST_CASE("interaction encoder: degree-2 user averages with 1/sqrt(2)") {
  InteractionDataset ds;
  ds.num_users = 1;
  ds.num_items = 2;
  ds.train = {{0, 0}, {0, 1}};
  auto adj = build_interaction_adjacency(ds);

  Tensor x0 = Tensor::from_data({3, 1}, {0.0f, 1.0f, 2.0f});  // user, item0, item1
  Tape tp;
  SparseGraph norm;
  auto out = propagate_interaction(tp, adj, 1, tp.constant(x0), 1, norm);
  // layer-1 value of the user = (x_i0 + x_i1)/sqrt(2) since |N_u|=2, |N_i|=1
  double layer1 = tp.value(out).at(0, 0) - x0.at(0, 0);
  CHECK(layer1 == doctest::Approx(3.0 / std::sqrt(2.0)).epsilon(1e-6));
}

TEST_CASE("interaction encoder matches the dense normalized-adjacency oracle") {
  InteractionDataset ds;
  ds.num_users = 3;
  ds.num_items = 3;
  ds.train = {{0, 0}, {0, 1}, {1, 1}, {2, 2}, {2, 0}};
  auto adj = build_interaction_adjacency(ds);
  const int n = 6, d = 4, layers = 3;
  Tensor x0 = random_tensor({n, d}, 13);

  Tape tp;
  SparseGraph norm;
  auto out = propagate_interaction(tp, adj, 3, tp.constant(x0), layers, norm);

  // dense double oracle over D^{-1/2} A D^{-1/2}
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  Tensor dense = adj.to_dense();
  std::vector<double> deg(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) deg[i] += dense.at(i, j);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (dense.at(i, j) != 0.0f) a[i][j] = 1.0 / std::sqrt(deg[i] * deg[j]);
  std::vector<std::vector<double>> x0d(n, std::vector<double>(d));
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) x0d[i][c] = x0.at(i, c);
  auto expect = dense_mean_residual(a, x0d, layers);

  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c)
      CHECK(tp.value(out).at(i, c) == doctest::Approx(expect[i][c]).epsilon(1e-5));
}

TEST_CASE("feature encoder: swap graph and zero graph") {
  auto s = SparseGraph::from_entries(2, 2, {{0, 1, 1.0f}, {1, 0, 1.0f}});
  auto st = s.transposed();
  Tensor x0 = Tensor::from_data({2, 2}, {1, 2, 3, 4});

  Tape tp;
  auto out = propagate_feature_graph(tp, s, st, tp.constant(x0), 1);
  CHECK(tp.value(out).at(0, 0) == doctest::Approx(4.0));  // x_1^0 + x_0^0
  CHECK(tp.value(out).at(0, 1) == doctest::Approx(6.0));
  CHECK(tp.value(out).at(1, 0) == doctest::Approx(4.0));

  SparseGraph zero(2, 2);
  auto out0 = propagate_feature_graph(tp, zero, zero, tp.constant(x0), 2);
  for (int64_t i = 0; i < 4; ++i) CHECK(tp.value(out0)[i] == x0[i]);
}

TEST_CASE("feature encoder matches a dense weighted stack") {
  Rng rng(77);
  const int n = 8, d = 3, layers = 2;
  std::vector<SparseGraph::Entry> entries;
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && rng.next_unit() < 0.35) {
        float w = static_cast<float>(rng.next_uniform(0.0, 1.0));
        entries.push_back({i, j, w});
        m[i][j] = w;
      }
  auto s = SparseGraph::from_entries(n, n, entries);
  auto st = s.transposed();
  Tensor x0 = random_tensor({n, d}, 5);

  Tape tp;
  auto out = propagate_feature_graph(tp, s, st, tp.constant(x0), layers);

  std::vector<std::vector<double>> x0d(n, std::vector<double>(d));
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) x0d[i][c] = x0.at(i, c);
  auto expect = dense_mean_residual(m, x0d, layers);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c)
      CHECK(tp.value(out).at(i, c) == doctest::Approx(expect[i][c]).epsilon(1e-5));
}

TEST_CASE("kg attention: singleton softmax, uniform on zeros, tanh fixture") {
  const int d = 2;

  SUBCASE("single triple gets weight one") {
    auto kg = KgEdges::build({{0, 0, 1}}, 2);
    Tape tp;
    auto alpha = kg_attention_alpha(tp, kg, tp.constant(random_tensor({2, d}, 3)),
                                    tp.constant(random_tensor({1, d}, 4)),
                                    tp.constant(random_tensor({1, d, d}, 5)));
    CHECK(tp.value(alpha)[0] == doctest::Approx(1.0));
  }

  SUBCASE("all-zero embeddings give uniform attention") {
    auto kg = KgEdges::build({{0, 0, 1}, {0, 0, 2}, {0, 0, 3}}, 4);
    Tape tp;
    auto alpha = kg_attention_alpha(tp, kg, tp.constant(Tensor({4, d})),
                                    tp.constant(Tensor({1, d})),
                                    tp.constant(Tensor({1, d, d})));
    for (int e = 0; e < 3; ++e)
      CHECK(tp.value(alpha)[e] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
  }

  SUBCASE("identity transform fixture evaluates to tanh(1)") {
    auto kg = KgEdges::build({{0, 0, 1}}, 2);
    Tensor x = Tensor::from_data({2, d}, {1, 0, 1, 0});  // x_h = x_t = [1, 0]
    Tensor w = Tensor::from_data({1, d, d}, {1, 0, 0, 1});
    Tape tp;
    auto scores = kg_attention_scores(tp, kg, tp.constant(x), tp.constant(Tensor({1, d})),
                                      tp.constant(w));
    CHECK(tp.value(scores)[0] == doctest::Approx(std::tanh(1.0)).epsilon(1e-5));
  }
}

TEST_CASE("kg encoder: two-entity chain and isolated entities") {
  const int d = 2;
  auto kg = KgEdges::build({{0, 0, 1}}, 3);
  Tensor x0 = Tensor::from_data({3, d}, {1, 2, 5, -3, 4, 4});

  Tape tp;
  auto out = propagate_kg(tp, kg, tp.constant(x0), tp.constant(random_tensor({1, d}, 6)),
                          tp.constant(random_tensor({1, d, d}, 7)), 1, false);
  // head: (x_h^0 + x_t^0)/2, since alpha = 1
  CHECK(tp.value(out).at(0, 0) == doctest::Approx(3.0));
  CHECK(tp.value(out).at(0, 1) == doctest::Approx(-0.5));
  // entities without triples: x^0 / (L+1)
  CHECK(tp.value(out).at(1, 0) == doctest::Approx(2.5));
  CHECK(tp.value(out).at(2, 0) == doctest::Approx(2.0));
}

TEST_CASE("kg encoder matches the brute-force per-triple oracle") {
  Rng rng(15);
  const int entities = 10, d = 4, relations = 3, layers = 2;
  std::vector<Triple> triples;
  std::set<Triple> seen;
  while (triples.size() < 18) {
    Triple t{static_cast<int32_t>(rng.next_below(entities)),
             static_cast<int32_t>(rng.next_below(relations)),
             static_cast<int32_t>(rng.next_below(entities))};
    if (t.head != t.tail && seen.insert(t).second) triples.push_back(t);
  }
  auto kg = KgEdges::build(triples, entities);
  Tensor x0 = random_tensor({entities, d}, 21);
  Tensor rel_emb = random_tensor({relations, d}, 22);
  Tensor rel_w = random_tensor({relations, d, d}, 23);

  std::vector<typename Tape::Id> alphas;
  Tape tp;
  auto out = propagate_kg(tp, kg, tp.constant(x0), tp.constant(rel_emb), tp.constant(rel_w),
                          layers, false, &alphas);

  // attention normalization at every layer
  for (auto a : alphas)
    for (size_t s = 0; s + 1 < kg.seg_offsets.size(); ++s) {
      double total = 0.0;
      for (int64_t e = kg.seg_offsets[s]; e < kg.seg_offsets[s + 1]; ++e)
        total += tp.value(a)[e];
      CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    }

  // double-precision naive oracle
  auto wr = [&](int r, int i, int j) { return static_cast<double>(rel_w[r * d * d + i * d + j]); };
  std::vector<std::vector<double>> x(entities, std::vector<double>(d));
  for (int e = 0; e < entities; ++e)
    for (int c = 0; c < d; ++c) x[e][c] = x0.at(e, c);
  auto acc = x;
  for (int l = 1; l <= layers; ++l) {
    std::vector<std::vector<double>> next(entities, std::vector<double>(d, 0.0));
    for (int h = 0; h < entities; ++h) {
      std::vector<const Triple*> mine;
      for (const auto& t : triples)
        if (t.head == h) mine.push_back(&t);
      if (mine.empty()) continue;
      std::vector<double> scores;
      for (const Triple* t : mine) {
        std::vector<double> wt(d, 0.0), wh(d, 0.0);
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) {
            wt[i] += wr(t->relation, i, j) * x[t->tail][j];
            wh[i] += wr(t->relation, i, j) * x[h][j];
          }
        double score = 0.0;
        for (int i = 0; i < d; ++i)
          score += wt[i] * std::tanh(wh[i] + rel_emb.at(t->relation, i));
        scores.push_back(score);
      }
      double mx = *std::max_element(scores.begin(), scores.end());
      double denom = 0.0;
      for (double s : scores) denom += std::exp(s - mx);
      for (size_t k = 0; k < mine.size(); ++k) {
        double alpha = std::exp(scores[k] - mx) / denom;
        for (int c = 0; c < d; ++c) next[h][c] += alpha * x[mine[k]->tail][c];
      }
    }
    x = next;
    for (int e = 0; e < entities; ++e)
      for (int c = 0; c < d; ++c) acc[e][c] += x[e][c];
  }
  for (int e = 0; e < entities; ++e)
    for (int c = 0; c < d; ++c)
      CHECK(tp.value(out).at(e, c) ==
            doctest::Approx(acc[e][c] / (layers + 1)).epsilon(1e-5));
}

TEST_CASE("encoders are linear in the layer-0 embeddings (attention path excluded)") {
  InteractionDataset ds;
  ds.num_users = 4;
  ds.num_items = 4;
  ds.train = {{0, 0}, {0, 1}, {1, 1}, {2, 2}, {3, 3}, {3, 0}};
  auto adj = build_interaction_adjacency(ds);
  Tensor x0 = random_tensor({8, 3}, 9);
  Tensor x0x2 = x0;
  for (int64_t i = 0; i < x0x2.numel(); ++i) x0x2[i] *= 2.0f;

  Tape tp;
  SparseGraph n1, n2;
  auto a = propagate_interaction(tp, adj, 4, tp.constant(x0), 2, n1);
  auto b = propagate_interaction(tp, adj, 4, tp.constant(x0x2), 2, n2);
  for (int64_t i = 0; i < tp.value(a).numel(); ++i)
    CHECK(2.0 * tp.value(a)[i] == doctest::Approx(tp.value(b)[i]).epsilon(1e-5));
}

TEST_CASE("outputs depend only on the L-hop neighbourhood") {
  // two disconnected components; perturbing the far one leaves the near one
  // bit-identical
  InteractionDataset ds;
  ds.num_users = 2;
  ds.num_items = 2;
  ds.train = {{0, 0}, {1, 1}};
  auto adj = build_interaction_adjacency(ds);

  Tensor x0 = random_tensor({4, 3}, 11);
  Tensor far = x0;
  far.at(3, 0) += 1.5f;  // item 1: outside user 0's 2-hop ball

  Tape tp;
  SparseGraph n1, n2;
  auto a = propagate_interaction(tp, adj, 2, tp.constant(x0), 2, n1);
  auto b = propagate_interaction(tp, adj, 2, tp.constant(far), 2, n2);
  for (int c = 0; c < 3; ++c) {
    CHECK(tp.value(a).at(0, c) == tp.value(b).at(0, c));  // user 0 untouched
    CHECK(tp.value(a).at(2, c) == tp.value(b).at(2, c));  // item 0 untouched
  }
}

TEST_CASE("permuting item ids permutes encoder outputs exactly") {
  InteractionDataset ds;
  ds.num_users = 3;
  ds.num_items = 4;
  ds.train = {{0, 0}, {0, 2}, {1, 1}, {1, 3}, {2, 0}, {2, 3}};
  const std::vector<int32_t> perm = {2, 0, 3, 1};  // new id of each old item

  InteractionDataset permuted = ds;
  for (auto& [u, i] : permuted.train) i = perm[i];

  Tensor x0 = random_tensor({7, 3}, 31);
  Tensor x0p = x0;
  for (int i = 0; i < 4; ++i)
    for (int c = 0; c < 3; ++c) x0p.at(3 + perm[i], c) = x0.at(3 + i, c);

  Tape tp;
  SparseGraph n1, n2;
  auto a = propagate_interaction(tp, build_interaction_adjacency(ds), 3, tp.constant(x0), 2, n1);
  auto b = propagate_interaction(tp, build_interaction_adjacency(permuted), 3,
                                 tp.constant(x0p), 2, n2);
  for (int i = 0; i < 4; ++i)
    for (int c = 0; c < 3; ++c)
      CHECK(tp.value(a).at(3 + i, c) == tp.value(b).at(3 + perm[i], c));
  for (int u = 0; u < 3; ++u)
    for (int c = 0; c < 3; ++c) CHECK(tp.value(a).at(u, c) == tp.value(b).at(u, c));
}

TEST_CASE("modality weight gradients flow through combined propagation") {
  // two tiny modality graphs; the loss depends on logits through the softmax
  // combination, checked against central differences
  auto sv = SparseGraph::from_entries(3, 3, {{0, 1, 0.8f}, {1, 0, 0.8f}, {1, 2, 0.3f}});
  auto st = SparseGraph::from_entries(3, 3, {{0, 2, 0.6f}, {2, 0, 0.6f}});
  std::vector<SparseGraph> graphs = {sv, st};
  FeatureGraphParts parts = split_feature_parts(graphs, {0.5f, 0.5f}, nullptr);

  Tensor x0 = random_tensor({3, 2}, 41);
  Tensor logits = Tensor::from_data({1, 2}, {0.2f, -0.1f});

  auto build = [&](auto& tp, const auto& ids) {
    auto alpha = tp.row_softmax(ids[1]);
    auto y0 = tp.mul_scalar(tp.spmm(&parts.modality[0], &parts.modality_t[0], ids[0]),
                            tp.slice_cols(alpha, 0, 1));
    auto y1 = tp.mul_scalar(tp.spmm(&parts.modality[1], &parts.modality_t[1], ids[0]),
                            tp.slice_cols(alpha, 1, 2));
    return tp.sumsq(tp.add(y0, y1));
  };
  CHECK(grad_check(build, {x0, logits}, 1e-4) < 1e-4);
}
