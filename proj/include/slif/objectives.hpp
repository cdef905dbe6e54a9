#pragma once

#include <cmath>
#include <string>

#include "slif/tape.hpp"

namespace slif {

enum class IntraForm { kLiteral, kLogSumExp };

inline IntraForm intra_form_from_string(const std::string& s) {
  if (s == "literal") return IntraForm::kLiteral;
  if (s == "logsumexp") return IntraForm::kLogSumExp;
  throw ConfigError("unknown intra_form '" + s + "'");
}

inline const char* intra_form_name(IntraForm f) {
  return f == IntraForm::kLiteral ? "literal" : "logsumexp";
}

// One modality's alignment term: InfoNCE with the anchor rows against the
// detached unified rows, cosine similarities, the positive pair excluded
// from the denominator, mean over anchors. Needs a batch of at least 2.
template <typename T>
typename TapeT<T>::Id inter_modal_term(TapeT<T>& tp, typename TapeT<T>::Id anchors,
                                       typename TapeT<T>::Id unified, double tau) {
  if (tau <= 0.0) throw ConfigError("inter-modal temperature must be positive");
  auto targets = tp.l2_normalize_rows(tp.detach(unified));
  auto sims = tp.scale(tp.matmul_nt(tp.l2_normalize_rows(anchors), targets), 1.0 / tau);
  auto positives = tp.row_diag(sims);
  auto denominators = tp.row_logsumexp_offdiag(sims);
  return tp.mean(tp.sub(denominators, positives));
}

// One modality's spread penalty over squared distances of (optionally
// L2-normalized) rows. The literal form reduces to (t/B^2) * sum of squared
// distances; the logsumexp form is -log of the mean Gaussian affinity.
//
// For large batches the literal form uses the Gram identity
//   sum_ij ||f_i - f_j||^2 = 2B sum_i ||f_i||^2 - 2 ||sum_i f_i||^2
// which avoids materializing the B x B distance matrix.
template <typename T>
typename TapeT<T>::Id intra_modal_term(TapeT<T>& tp, typename TapeT<T>::Id reps, double t,
                                       IntraForm form, bool normalize_rows) {
  if (t <= 0.0) throw ConfigError("intra-modal temperature must be positive");
  auto f = normalize_rows ? tp.l2_normalize_rows(reps) : reps;
  const int64_t batch = tp.value(reps).rows();
  if (form == IntraForm::kLiteral) {
    constexpr int64_t kPairwiseLimit = 32;
    if (batch > kPairwiseLimit) {
      auto row_norms = tp.sum(tp.row_dot(f, f));
      auto column_sums = tp.matmul(tp.constant(TensorT<T>::full({1, batch}, T(1))), f);
      auto total = tp.sub(tp.scale(row_norms, 2.0 * static_cast<double>(batch)),
                          tp.scale(tp.sumsq(column_sums), 2.0));
      return tp.scale(total, t / static_cast<double>(batch * batch));
    }
    return tp.scale(tp.sum(tp.pairwise_sqdist(f)), t / static_cast<double>(batch * batch));
  }
  auto lse = tp.log_(tp.sum(tp.exp_(tp.scale(tp.pairwise_sqdist(f), -t))));
  return tp.sub(tp.constant(TensorT<T>::scalar(static_cast<T>(
                    2.0 * std::log(static_cast<double>(batch))))),
                lse);
}

// Pairwise ranking loss: mean of -ln sigmoid(pos - neg).
template <typename T>
typename TapeT<T>::Id bpr_loss(TapeT<T>& tp, typename TapeT<T>::Id pos_scores,
                               typename TapeT<T>::Id neg_scores) {
  return tp.mean(tp.softplus(tp.sub(neg_scores, pos_scores)));
}

// bpr + beta * inter + gamma * intra + eta * ||theta||^2; pass -1 for absent
// terms (ablations).
template <typename T>
typename TapeT<T>::Id weighted_total(TapeT<T>& tp, typename TapeT<T>::Id bpr,
                                     typename TapeT<T>::Id inter, typename TapeT<T>::Id intra,
                                     typename TapeT<T>::Id reg_sumsq, double beta, double gamma,
                                     double eta) {
  auto total = bpr;
  if (inter >= 0) total = tp.add(total, tp.scale(inter, beta));
  if (intra >= 0) total = tp.add(total, tp.scale(intra, gamma));
  if (reg_sumsq >= 0) total = tp.add(total, tp.scale(reg_sumsq, eta));
  return total;
}

}  // namespace slif
