#include "slif/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "slif/errors.hpp"

namespace slif {

double MetricsReport::at(int k, const std::vector<double>& column) const {
  for (size_t i = 0; i < k_list.size(); ++i)
    if (k_list[i] == k) return column[i];
  throw ConfigError("metrics report does not contain K=" + std::to_string(k));
}

MetricsReport evaluate_rankings(const Tensor& scores,
                                const std::vector<std::vector<int32_t>>& mask_sets,
                                const std::vector<std::vector<int32_t>>& relevant_sets,
                                const std::vector<int>& k_list) {
  const int64_t rows = scores.rows();
  const int64_t items = scores.cols();
  if (static_cast<int64_t>(mask_sets.size()) != rows ||
      static_cast<int64_t>(relevant_sets.size()) != rows)
    throw ShapeError("evaluate_rankings: per-user set count mismatch");
  if (k_list.empty()) throw ConfigError("evaluate_rankings: empty K list");
  const int max_k = *std::max_element(k_list.begin(), k_list.end());

  MetricsReport report;
  report.k_list = k_list;
  report.recall.assign(k_list.size(), 0.0);
  report.ndcg.assign(k_list.size(), 0.0);
  report.precision.assign(k_list.size(), 0.0);

  // per-user metric rows computed independently, averaged sequentially
  std::vector<std::vector<double>> per_user(static_cast<size_t>(rows));
  std::vector<uint8_t> counted(static_cast<size_t>(rows), 0);

#pragma omp parallel for schedule(dynamic, 16)
  for (int64_t r = 0; r < rows; ++r) {
    if (relevant_sets[r].empty()) continue;

    std::vector<std::pair<float, int32_t>> ranked;
    ranked.reserve(static_cast<size_t>(items));
    {
      std::vector<uint8_t> masked(static_cast<size_t>(items), 0);
      for (int32_t m : mask_sets[r]) masked[static_cast<size_t>(m)] = 1;
      for (int64_t i = 0; i < items; ++i)
        if (!masked[static_cast<size_t>(i)])
          ranked.emplace_back(scores.at(r, i), static_cast<int32_t>(i));
    }
    const size_t keep = std::min<size_t>(static_cast<size_t>(max_k), ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<int64_t>(keep), ranked.end(),
                      [](const auto& a, const auto& b) {
                        return a.first != b.first ? a.first > b.first : a.second < b.second;
                      });

    std::vector<uint8_t> relevant(static_cast<size_t>(items), 0);
    for (int32_t t : relevant_sets[r]) relevant[static_cast<size_t>(t)] = 1;
    const double rel_count = static_cast<double>(relevant_sets[r].size());

    std::vector<double> row;
    for (int k : k_list) {
      const size_t depth = std::min<size_t>(static_cast<size_t>(k), keep);
      int hits = 0;
      double dcg = 0.0;
      for (size_t pos = 0; pos < depth; ++pos)
        if (relevant[static_cast<size_t>(ranked[pos].second)]) {
          ++hits;
          dcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
        }
      double idcg = 0.0;
      const size_t ideal = std::min<size_t>(static_cast<size_t>(k), relevant_sets[r].size());
      for (size_t pos = 0; pos < ideal; ++pos)
        idcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
      row.push_back(hits / rel_count);
      row.push_back(idcg > 0 ? dcg / idcg : 0.0);
      row.push_back(static_cast<double>(hits) / k);
    }
    per_user[static_cast<size_t>(r)] = std::move(row);
    counted[static_cast<size_t>(r)] = 1;
  }

  for (int64_t r = 0; r < rows; ++r) {
    if (!counted[static_cast<size_t>(r)]) continue;
    report.users_evaluated++;
    const auto& row = per_user[static_cast<size_t>(r)];
    for (size_t k = 0; k < k_list.size(); ++k) {
      report.recall[k] += row[3 * k];
      report.ndcg[k] += row[3 * k + 1];
      report.precision[k] += row[3 * k + 2];
    }
  }
  if (report.users_evaluated > 0)
    for (size_t k = 0; k < k_list.size(); ++k) {
      report.recall[k] /= static_cast<double>(report.users_evaluated);
      report.ndcg[k] /= static_cast<double>(report.users_evaluated);
      report.precision[k] /= static_cast<double>(report.users_evaluated);
    }
  return report;
}

bool early_stop(const std::vector<double>& history, int patience) {
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (static_cast<int>(history.size()) <= patience) return false;
  size_t best = 0;
  for (size_t i = 1; i < history.size(); ++i)
    if (history[i] > history[best]) best = i;  // first maximum is retained
  return history.size() - 1 - best >= static_cast<size_t>(patience);
}

}  // namespace slif
