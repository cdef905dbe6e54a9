#pragma once

#include <vector>

#include "slif/tensor.hpp"

namespace slif {

struct MetricsReport {
  std::vector<int> k_list;
  std::vector<double> recall;     // aligned with k_list
  std::vector<double> ndcg;
  std::vector<double> precision;
  int64_t users_evaluated = 0;

  double at(int k, const std::vector<double>& column) const;
  double recall_at(int k) const { return at(k, recall); }
  double ndcg_at(int k) const { return at(k, ndcg); }
  double precision_at(int k) const { return at(k, precision); }
};

// Full-ranking metrics. Row r of `scores` holds one evaluation user's score
// for every item; `mask_sets[r]` (train/seen items) are forced out of the
// ranking, `relevant_sets[r]` is that user's held-out set. Users with empty
// relevant sets are skipped. Ties rank the lower item id first.
MetricsReport evaluate_rankings(const Tensor& scores,
                                const std::vector<std::vector<int32_t>>& mask_sets,
                                const std::vector<std::vector<int32_t>>& relevant_sets,
                                const std::vector<int>& k_list);

// True when the last `patience` evaluations failed to improve on the best.
bool early_stop(const std::vector<double>& history, int patience);

}  // namespace slif
