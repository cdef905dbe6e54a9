#include <doctest.h>

#include <cmath>

#include "slif/fusion.hpp"
#include "slif/grad_check.hpp"
#include "slif/rng.hpp"

using namespace slif;

namespace {

Tensor random_tensor(std::vector<int64_t> shape, uint64_t seed, float lo = -1.0f,
                     float hi = 1.0f) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.next_uniform(lo, hi));
  return t;
}

struct Fixture {
  int64_t n = 4, d = 3;
  Tensor xb = random_tensor({4, 3}, 1);
  Tensor xm = random_tensor({4, 3}, 2);
  Tensor xk = random_tensor({4, 3}, 3);
  Tensor w = random_tensor({9, 3}, 4);
  Tensor b = random_tensor({1, 3}, 5);
};

}  // namespace

TEST_CASE("zero attention parameters give uniform weights") {
  Fixture f;
  Tape tp;
  auto out = fuse_item_branches<float>(
      tp, {tp.constant(f.xb), tp.constant(f.xm), tp.constant(f.xk)}, {true, true, true},
      tp.constant(Tensor({9, 3})), tp.constant(Tensor({1, 3})), -1, FusionMode::kAilf, f.d);
  for (int64_t i = 0; i < f.n; ++i)
    for (int c = 0; c < 3; ++c)
      CHECK(tp.value(out.alpha).at(i, c) == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("attention weights are shift-invariant in the bias and sum to one") {
  Fixture f;
  Tensor b_shift = f.b;
  for (int c = 0; c < 3; ++c) b_shift.at(0, c) += 4.5f;

  Tape tp;
  auto base = fuse_item_branches<float>(
      tp, {tp.constant(f.xb), tp.constant(f.xm), tp.constant(f.xk)}, {true, true, true},
      tp.constant(f.w), tp.constant(f.b), -1, FusionMode::kAilf, f.d);
  auto shifted = fuse_item_branches<float>(
      tp, {tp.constant(f.xb), tp.constant(f.xm), tp.constant(f.xk)}, {true, true, true},
      tp.constant(f.w), tp.constant(b_shift), -1, FusionMode::kAilf, f.d);

  for (int64_t i = 0; i < f.n; ++i) {
    double row = 0.0;
    for (int c = 0; c < 3; ++c) {
      row += tp.value(base.alpha).at(i, c);
      CHECK(tp.value(base.alpha).at(i, c) ==
            doctest::Approx(tp.value(shifted.alpha).at(i, c)).epsilon(1e-5));
    }
    CHECK(row == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("a saturated channel reproduces that branch exactly") {
  Fixture f;
  Tensor b_hot = Tensor::from_data({1, 3}, {1000.0f, 0.0f, 0.0f});
  Tape tp;
  auto out = fuse_item_branches<float>(
      tp, {tp.constant(f.xb), tp.constant(f.xm), tp.constant(f.xk)}, {true, true, true},
      tp.constant(Tensor({9, 3})), tp.constant(b_hot), -1, FusionMode::kAilf, f.d);
  for (int64_t i = 0; i < f.n * f.d; ++i) CHECK(tp.value(out.unified)[i] == f.xb[i]);
}

TEST_CASE("identical branches are a fixed point of any weighting") {
  Fixture f;
  Tape tp;
  auto v = tp.constant(f.xb);
  auto out = fuse_item_branches<float>(tp, {v, v, v}, {true, true, true}, tp.constant(f.w),
                                       tp.constant(f.b), -1, FusionMode::kAilf, f.d);
  for (int64_t i = 0; i < f.n * f.d; ++i)
    CHECK(tp.value(out.unified)[i] == doctest::Approx(f.xb[i]).epsilon(1e-6));
}

TEST_CASE("fused output stays in the coordinate-wise convex hull") {
  Fixture f;
  Tape tp;
  auto out = fuse_item_branches<float>(
      tp, {tp.constant(f.xb), tp.constant(f.xm), tp.constant(f.xk)}, {true, true, true},
      tp.constant(f.w), tp.constant(f.b), -1, FusionMode::kAilf, f.d);
  for (int64_t i = 0; i < f.n; ++i)
    for (int64_t c = 0; c < f.d; ++c) {
      float lo = std::min({f.xb.at(i, c), f.xm.at(i, c), f.xk.at(i, c)});
      float hi = std::max({f.xb.at(i, c), f.xm.at(i, c), f.xk.at(i, c)});
      CHECK(tp.value(out.unified).at(i, c) >= lo - 1e-6f);
      CHECK(tp.value(out.unified).at(i, c) <= hi + 1e-6f);
    }
}

TEST_CASE("gradients through fusion match central differences") {
  Fixture f;
  auto build = [&](auto& tp, const auto& ids) {
    auto out = fuse_item_branches(tp, {ids[0], ids[1], ids[2]}, {true, true, true}, ids[3],
                                  ids[4], -1, FusionMode::kAilf, 3);
    return tp.sumsq(out.unified);
  };
  CHECK(grad_check(build, {f.xb, f.xm, f.xk, f.w, f.b}, 1e-4) < 1e-4);
}

TEST_CASE("ablated branches renormalize over the remainder") {
  Fixture f;
  Tape tp;
  // only the interaction branch: alpha is forced to one
  auto solo = fuse_item_branches<float>(tp, {tp.constant(f.xb), -1, -1}, {true, false, false},
                                        tp.constant(f.w), tp.constant(f.b), -1,
                                        FusionMode::kAilf, f.d);
  for (int64_t i = 0; i < f.n * f.d; ++i) CHECK(tp.value(solo.unified)[i] == f.xb[i]);
  for (int64_t i = 0; i < f.n; ++i) CHECK(tp.value(solo.alpha)[i] == 1.0f);

  // two active branches: weights live on a 2-simplex
  auto duo = fuse_item_branches<float>(tp, {tp.constant(f.xb), -1, tp.constant(f.xk)},
                                       {true, false, true}, tp.constant(f.w), tp.constant(f.b),
                                       -1, FusionMode::kAilf, f.d);
  for (int64_t i = 0; i < f.n; ++i)
    CHECK(tp.value(duo.alpha).at(i, 0) + tp.value(duo.alpha).at(i, 1) ==
          doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("sum baseline is the additive identity on zero branches") {
  Fixture f;
  Tape tp;
  auto out = fuse_item_branches<float>(
      tp, {tp.constant(f.xb), tp.constant(Tensor({4, 3})), tp.constant(Tensor({4, 3}))},
      {true, true, true}, -1, -1, -1, FusionMode::kSum, f.d);
  for (int64_t i = 0; i < f.n * f.d; ++i) CHECK(tp.value(out.unified)[i] == f.xb[i]);
}

TEST_CASE("concat with a block-identity-sum projection equals the sum baseline") {
  Fixture f;
  // projection stacking three identity blocks: concat * P == xb + xm + xk
  Tensor proj({9, 3});
  for (int blk = 0; blk < 3; ++blk)
    for (int c = 0; c < 3; ++c) proj.at(blk * 3 + c, c) = 1.0f;

  Tape tp;
  auto cat = fuse_item_branches<float>(
      tp, {tp.constant(f.xb), tp.constant(f.xm), tp.constant(f.xk)}, {true, true, true}, -1, -1,
      tp.constant(proj), FusionMode::kConcat, f.d);
  auto sum = fuse_item_branches<float>(
      tp, {tp.constant(f.xb), tp.constant(f.xm), tp.constant(f.xk)}, {true, true, true}, -1, -1,
      -1, FusionMode::kSum, f.d);
  for (int64_t i = 0; i < f.n * f.d; ++i)
    CHECK(tp.value(cat.unified)[i] == doctest::Approx(tp.value(sum.unified)[i]).epsilon(1e-6));
}

TEST_CASE("plain attention differs from the scaled variant unless logits are equal") {
  Fixture f;
  Tape tp;
  auto scaled = fuse_item_branches<float>(
      tp, {tp.constant(f.xb), tp.constant(f.xm), tp.constant(f.xk)}, {true, true, true},
      tp.constant(f.w), tp.constant(f.b), -1, FusionMode::kAilf, f.d);
  auto plain = fuse_item_branches<float>(
      tp, {tp.constant(f.xb), tp.constant(f.xm), tp.constant(f.xk)}, {true, true, true},
      tp.constant(f.w), tp.constant(f.b), -1, FusionMode::kAttention, f.d);
  double diff = 0.0;
  for (int64_t i = 0; i < f.n * f.d; ++i)
    diff = std::max(diff, std::abs(static_cast<double>(tp.value(scaled.unified)[i]) -
                                   tp.value(plain.unified)[i]));
  CHECK(diff > 1e-4);  // sqrt(d) scaling changes the softmax

  // equal logits (zero parameters) make the two modes coincide
  auto scaled0 = fuse_item_branches<float>(
      tp, {tp.constant(f.xb), tp.constant(f.xm), tp.constant(f.xk)}, {true, true, true},
      tp.constant(Tensor({9, 3})), tp.constant(Tensor({1, 3})), -1, FusionMode::kAilf, f.d);
  auto plain0 = fuse_item_branches<float>(
      tp, {tp.constant(f.xb), tp.constant(f.xm), tp.constant(f.xk)}, {true, true, true},
      tp.constant(Tensor({9, 3})), tp.constant(Tensor({1, 3})), -1, FusionMode::kAttention, f.d);
  for (int64_t i = 0; i < f.n * f.d; ++i)
    CHECK(tp.value(scaled0.unified)[i] == tp.value(plain0.unified)[i]);
}
