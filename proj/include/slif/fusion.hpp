#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "slif/tape.hpp"

namespace slif {

enum class FusionMode { kAilf, kConcat, kSum, kAttention };

inline FusionMode fusion_mode_from_string(const std::string& s) {
  if (s == "ailf") return FusionMode::kAilf;
  if (s == "concat") return FusionMode::kConcat;
  if (s == "sum") return FusionMode::kSum;
  if (s == "attention") return FusionMode::kAttention;
  throw ConfigError("unknown fusion_mode '" + s + "'");
}

inline const char* fusion_mode_name(FusionMode m) {
  switch (m) {
    case FusionMode::kAilf:
      return "ailf";
    case FusionMode::kConcat:
      return "concat";
    case FusionMode::kSum:
      return "sum";
    default:
      return "attention";
  }
}

// Branch order is fixed: [interaction, feature, kg].
template <typename T>
struct FusionIds {
  typename TapeT<T>::Id alpha = -1;    // B x n_active attention weights (-1 for sum/concat)
  typename TapeT<T>::Id unified = -1;  // B x d
  std::array<bool, 3> active{};
};

// Attention-based item-level fusion plus the baseline aggregators. Ablated
// branches are excluded from the softmax (weights renormalize over the
// remaining branches); their concat slots are zero so no gradient reaches
// the corresponding projection rows.
template <typename T>
FusionIds<T> fuse_item_branches(TapeT<T>& tp, std::array<typename TapeT<T>::Id, 3> branch,
                                std::array<bool, 3> active, typename TapeT<T>::Id fusion_w,
                                typename TapeT<T>::Id fusion_b,
                                typename TapeT<T>::Id concat_proj, FusionMode mode, int64_t d) {
  using Id = typename TapeT<T>::Id;
  FusionIds<T> out;
  out.active = active;

  std::vector<Id> active_ids;
  for (int b = 0; b < 3; ++b)
    if (active[b]) active_ids.push_back(branch[b]);
  if (active_ids.empty()) throw ConfigError("fusion: no active branches");
  const int64_t rows = tp.value(active_ids[0]).rows();

  if (mode == FusionMode::kSum) {
    auto acc = active_ids[0];
    for (size_t k = 1; k < active_ids.size(); ++k) acc = tp.add(acc, active_ids[k]);
    out.unified = acc;
    return out;
  }

  if (mode == FusionMode::kConcat) {
    auto cc = tp.concat_cols(active_ids);
    out.unified = tp.matmul(cc, concat_proj);
    return out;
  }

  // AILF (and the plain-attention baseline, which skips the 1/sqrt(d) scale):
  // logits from the concatenation of all three slots, zeros standing in for
  // ablated branches.
  std::vector<Id> slots;
  for (int b = 0; b < 3; ++b)
    slots.push_back(active[b] ? branch[b] : tp.zeros({rows, d}));
  auto logits = tp.add_rowvec(tp.matmul(tp.concat_cols(slots), fusion_w), fusion_b);
  if (mode == FusionMode::kAilf) logits = tp.scale(logits, 1.0 / std::sqrt(static_cast<double>(d)));

  std::vector<Id> active_logits;
  for (int b = 0; b < 3; ++b)
    if (active[b]) active_logits.push_back(tp.slice_cols(logits, b, b + 1));
  auto packed = active_logits.size() == 1 ? active_logits[0] : tp.concat_cols(active_logits);
  out.alpha = tp.row_softmax(packed);

  Id unified = -1;
  for (size_t k = 0; k < active_ids.size(); ++k) {
    auto weighted = tp.mul_colvec(active_ids[k],
                                  tp.slice_cols(out.alpha, static_cast<int64_t>(k),
                                                static_cast<int64_t>(k) + 1));
    unified = (k == 0) ? weighted : tp.add(unified, weighted);
  }
  out.unified = unified;
  return out;
}

}  // namespace slif
