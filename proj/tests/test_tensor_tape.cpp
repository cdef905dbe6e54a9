#include <doctest.h>

#include <cmath>
#include <vector>

#include "slif/grad_check.hpp"
#include "slif/rng.hpp"
#include "slif/tape.hpp"
#include "slif/tensor.hpp"

using namespace slif;

namespace {

Tensor random_tensor(std::vector<int64_t> shape, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i)
    t[i] = static_cast<float>(rng.next_uniform(lo, hi));
  return t;
}

}  // namespace

TEST_CASE("tensor basics and shape checks") {
  Tensor t = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.at(1, 2) == 6.0f);
  CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1, 2, 3}), ShapeError);

  Tape tp;
  auto a = tp.constant(Tensor({2, 3}));
  auto b = tp.constant(Tensor({3, 2}));
  CHECK_THROWS_AS(tp.add(a, b), ShapeError);
}

TEST_CASE("non-finite forward raises a numeric error naming the op") {
  Tape tp;
  auto x = tp.constant(Tensor::from_data({2}, {0.0f, -1.0f}));
  try {
    tp.log_(x);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.op() == std::string("log"));
  }
}

TEST_CASE("tanh at zero has unit derivative") {
  Tape tp;
  auto x = tp.param(Tensor::from_data({1}, {0.0f}));
  auto y = tp.sum(tp.tanh_(x));
  CHECK(tp.scalar(y) == 0.0);
  tp.backward(y);
  CHECK(tp.grad(x)[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("row softmax of a constant row is uniform and rows sum to one") {
  Tape tp;
  auto x = tp.constant(Tensor::from_data({1, 3}, {2.5f, 2.5f, 2.5f}));
  auto y = tp.row_softmax(x);
  for (int i = 0; i < 3; ++i)
    CHECK(tp.value(y)[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));

  Rng rng(11);
  for (int rep = 0; rep < 1000; ++rep) {
    Tape t2;
    auto r = t2.constant(random_tensor({1, 7}, rng, -30.0f, 30.0f));
    auto s = t2.row_softmax(r);
    double total = 0.0;
    for (int i = 0; i < 7; ++i) total += t2.value(s)[i];
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("row softmax is shift invariant") {
  Rng rng(5);
  Tensor base = random_tensor({4, 6}, rng, -2.0f, 2.0f);
  Tensor shifted = base;
  for (int64_t r = 0; r < 4; ++r)
    for (int64_t c = 0; c < 6; ++c) shifted.at(r, c) += 3.25f;

  Tape tp;
  auto a = tp.row_softmax(tp.constant(base));
  auto b = tp.row_softmax(tp.constant(shifted));
  for (int64_t i = 0; i < 24; ++i)
    CHECK(tp.value(a)[i] == doctest::Approx(tp.value(b)[i]).epsilon(1e-6));
}

TEST_CASE("cosine similarity: orthogonal, identical, and zero rows") {
  Tape tp;
  auto a = tp.constant(Tensor::from_data({3, 2}, {1, 0, 3, 4, 0, 0}));
  auto b = tp.constant(Tensor::from_data({3, 2}, {0, 1, 3, 4, 1, 1}));
  auto sims = tp.cosine_matrix(a, b);
  CHECK(tp.value(sims).at(0, 0) == doctest::Approx(0.0));        // orthogonal
  CHECK(tp.value(sims).at(1, 1) == doctest::Approx(1.0));        // identical
  CHECK(tp.value(sims).at(2, 0) == doctest::Approx(0.0));        // zero vector rule
  CHECK(tp.value(sims).at(2, 1) == doctest::Approx(0.0));
}

TEST_CASE("detach blocks gradients and keeps values") {
  Tensor v = Tensor::from_data({3}, {1.0f, -2.0f, 0.5f});
  Tensor w = Tensor::from_data({3}, {0.25f, 4.0f, -1.0f});

  Tape tp;
  auto vid = tp.param(v);
  auto wid = tp.param(w);
  auto loss = tp.sum(tp.mul(tp.detach(vid), wid));
  tp.backward(loss);
  for (int i = 0; i < 3; ++i) {
    CHECK(tp.grad(vid)[i] == 0.0f);
    CHECK(tp.grad(wid)[i] == v[i]);
  }

  // detach(detach(v)) is value-equal to v
  Tape t2;
  auto x = t2.param(v);
  auto dd = t2.detach(t2.detach(x));
  for (int i = 0; i < 3; ++i) CHECK(t2.value(dd)[i] == v[i]);
}

TEST_CASE("detach never changes forward values") {
  Rng rng(17);
  Tensor a = random_tensor({4, 3}, rng);
  Tensor b = random_tensor({4, 3}, rng);

  auto run = [&](bool use_detach) {
    Tape tp;
    auto ia = tp.param(a);
    auto ib = tp.param(b);
    auto lhs = use_detach ? tp.detach(ia) : ia;
    auto y = tp.sum(tp.tanh_(tp.mul(lhs, ib)));
    return tp.scalar(y);
  };
  CHECK(run(false) == run(true));
}

TEST_CASE("fan-out accumulates gradients additively") {
  Tensor v = Tensor::from_data({2}, {0.3f, -0.7f});

  // y = x*x + x*x + x*x (three paths) vs z = 3 * x*x (single path)
  Tape tp;
  auto x = tp.param(v);
  auto sq = tp.mul(x, x);
  auto y = tp.sum(tp.add(tp.add(sq, sq), sq));
  tp.backward(y);

  Tape t2;
  auto x2 = t2.param(v);
  auto z = t2.sum(t2.scale(t2.mul(x2, x2), 3.0));
  t2.backward(z);

  for (int i = 0; i < 2; ++i)
    CHECK(tp.grad(x)[i] == doctest::Approx(t2.grad(x2)[i]).epsilon(1e-6));
}

TEST_CASE("grad_check on the quadratic is tight") {
  Rng rng(23);
  Tensor theta = random_tensor({5, 3}, rng);
  double err = grad_check(
      [](auto& tp, const auto& ids) { return tp.scale(tp.sumsq(ids[0]), 0.5); }, {theta}, 1e-4);
  CHECK(err < 1e-5);
}

TEST_CASE("grad_check rejects out-of-range epsilon") {
  Tensor theta = Tensor::from_data({1}, {1.0f});
  auto quad = [](auto& tp, const auto& ids) { return tp.sumsq(ids[0]); };
  CHECK_THROWS_AS(grad_check(quad, {theta}, 1e-7), ConfigError);
  CHECK_THROWS_AS(grad_check(quad, {theta}, 1e-2), ConfigError);
}

// Every primitive's reverse rule is validated against central differences of
// the double-precision forward at eps = 1e-4.
TEST_CASE("per-primitive gradients match central differences") {
  Rng rng(41);
  const double eps = 1e-4;
  const double tol = 1e-4;

  Tensor a = random_tensor({4, 3}, rng);
  Tensor b = random_tensor({4, 3}, rng);
  Tensor m = random_tensor({3, 5}, rng);
  Tensor s = random_tensor({1}, rng);

  SUBCASE("add/sub/mul/scale") {
    auto build = [](auto& tp, const auto& ids) {
      auto t = tp.add(ids[0], ids[1]);
      t = tp.sub(t, tp.scale(ids[1], 0.5));
      t = tp.mul(t, ids[0]);
      return tp.sum(t);
    };
    CHECK(grad_check(build, {a, b}, eps) < tol);
  }
  SUBCASE("mul_scalar") {
    auto build = [](auto& tp, const auto& ids) {
      return tp.sum(tp.mul_scalar(ids[0], ids[1]));
    };
    CHECK(grad_check(build, {a, s}, eps) < tol);
  }
  SUBCASE("matmul") {
    auto build = [](auto& tp, const auto& ids) {
      return tp.sumsq(tp.matmul(ids[0], ids[1]));
    };
    CHECK(grad_check(build, {a, m}, eps) < tol);
  }
  SUBCASE("matmul_nt") {
    auto build = [](auto& tp, const auto& ids) {
      return tp.sumsq(tp.matmul_nt(ids[0], ids[1]));
    };
    CHECK(grad_check(build, {a, b}, eps) < tol);
  }
  SUBCASE("gather/slice/concat rows") {
    auto build = [](auto& tp, const auto& ids) {
      auto g = tp.gather_rows(ids[0], {2, 0, 2, 1});
      auto sl = tp.slice_rows(ids[1], 1, 3);
      return tp.sumsq(tp.concat_rows(g, sl));
    };
    CHECK(grad_check(build, {a, b}, eps) < tol);
  }
  SUBCASE("concat/slice cols, add_rowvec, mul_colvec") {
    Tensor bias = random_tensor({1, 6}, rng);
    Tensor colv = random_tensor({4, 1}, rng);
    auto build = [](auto& tp, const auto& ids) {
      auto cc = tp.concat_cols({ids[0], ids[1]});
      cc = tp.add_rowvec(cc, ids[2]);
      cc = tp.mul_colvec(cc, ids[3]);
      return tp.sumsq(tp.slice_cols(cc, 1, 5));
    };
    CHECK(grad_check(build, {a, b, bias, colv}, eps) < tol);
  }
  SUBCASE("tanh/exp/softplus") {
    auto build = [](auto& tp, const auto& ids) {
      auto t = tp.tanh_(ids[0]);
      t = tp.add(t, tp.exp_(ids[0]));
      return tp.sum(tp.softplus(t));
    };
    CHECK(grad_check(build, {a}, eps) < tol);
  }
  SUBCASE("log") {
    Tensor pos = random_tensor({3, 3}, rng, 0.5f, 2.0f);
    auto build = [](auto& tp, const auto& ids) { return tp.sum(tp.log_(ids[0])); };
    CHECK(grad_check(build, {pos}, eps) < tol);
  }
  SUBCASE("row_softmax") {
    auto build = [](auto& tp, const auto& ids) {
      return tp.sumsq(tp.row_softmax(ids[0]));
    };
    CHECK(grad_check(build, {a}, eps) < tol);
  }
  SUBCASE("row_sum/row_diag/row_logsumexp_offdiag") {
    Tensor sq = random_tensor({5, 5}, rng);
    auto build = [](auto& tp, const auto& ids) {
      auto lse = tp.row_logsumexp_offdiag(ids[0]);
      auto d = tp.row_diag(ids[0]);
      return tp.sum(tp.add(tp.row_sum(tp.sub(lse, d)), d));
    };
    CHECK(grad_check(build, {sq}, eps) < tol);
  }
  SUBCASE("l2_normalize/row_dot/cosine") {
    Tensor fa = random_tensor({4, 3}, rng, 0.5f, 1.5f);
    Tensor fb = random_tensor({4, 3}, rng, 0.5f, 1.5f);
    auto build = [](auto& tp, const auto& ids) {
      auto c = tp.cosine_matrix(ids[0], ids[1]);
      auto r = tp.row_dot(ids[0], ids[1]);
      return tp.add(tp.sumsq(c), tp.sum(r));
    };
    CHECK(grad_check(build, {fa, fb}, eps) < tol);
  }
  SUBCASE("pairwise_sqdist") {
    auto build = [](auto& tp, const auto& ids) {
      return tp.sum(tp.pairwise_sqdist(ids[0]));
    };
    CHECK(grad_check(build, {a}, eps) < tol);
  }
  SUBCASE("spmm") {
    SparseGraph g = SparseGraph::from_entries(
        4, 4, {{0, 1, 0.5f}, {1, 0, 0.5f}, {2, 3, 1.5f}, {3, 2, 1.5f}, {1, 2, -0.25f}});
    SparseGraph gt = g.transposed();
    auto build = [&](auto& tp, const auto& ids) {
      return tp.sumsq(tp.spmm(&g, &gt, ids[0]));
    };
    CHECK(grad_check(build, {a}, eps) < tol);
  }
  SUBCASE("segment_softmax and segment_weighted_rows") {
    Tensor scores = random_tensor({5, 1}, rng);
    Tensor rows = random_tensor({5, 3}, rng);
    std::vector<int64_t> offsets = {0, 2, 5};
    std::vector<int32_t> targets = {1, 3};
    auto build = [&](auto& tp, const auto& ids) {
      auto alpha = tp.segment_softmax(ids[0], offsets);
      auto out = tp.segment_weighted_rows(alpha, ids[1], offsets, targets, 4);
      return tp.sumsq(out);
    };
    CHECK(grad_check(build, {scores, rows}, eps) < tol);
  }
  SUBCASE("relation_transform") {
    Tensor x = random_tensor({5, 4}, rng);
    Tensor w = random_tensor({2, 4, 4}, rng);
    std::vector<int32_t> rel = {0, 1, 0, 0, 1};
    auto build = [&](auto& tp, const auto& ids) {
      return tp.sumsq(tp.relation_transform(ids[0], rel, ids[1]));
    };
    CHECK(grad_check(build, {x, w}, eps) < tol);
  }
}

TEST_CASE("zero rows through l2_normalize stay zero with zero gradient") {
  Tensor x = Tensor::from_data({2, 3}, {0, 0, 0, 1, 2, 2});
  Tape tp;
  auto id = tp.param(x);
  auto y = tp.l2_normalize_rows(id);
  CHECK(tp.value(y).at(0, 0) == 0.0f);
  CHECK(tp.value(y).at(1, 0) == doctest::Approx(1.0 / 3.0));
  auto loss = tp.sum(y);
  tp.backward(loss);
  for (int c = 0; c < 3; ++c) CHECK(tp.grad(id).at(0, c) == 0.0f);
}
