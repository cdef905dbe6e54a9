#include "slif/sparse_graph.hpp"

#include <algorithm>
#include <cmath>

#include "slif/errors.hpp"

namespace slif {

SparseGraph SparseGraph::from_entries(int64_t num_rows, int64_t num_cols,
                                      std::vector<Entry> entries, char combine) {
  for (const Entry& e : entries) {
    if (e.row < 0 || e.row >= num_rows || e.col < 0 || e.col >= num_cols)
      throw ValidationError("sparse entry (" + std::to_string(e.row) + "," +
                            std::to_string(e.col) + ") outside " + std::to_string(num_rows) +
                            "x" + std::to_string(num_cols));
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  SparseGraph g(num_rows, num_cols);
  g.col_indices_.reserve(entries.size());
  g.weights_.reserve(entries.size());
  size_t i = 0;
  while (i < entries.size()) {
    size_t j = i + 1;
    float w = entries[i].weight;
    while (j < entries.size() && entries[j].row == entries[i].row &&
           entries[j].col == entries[i].col) {
      w = (combine == 'M') ? std::max(w, entries[j].weight) : w + entries[j].weight;
      ++j;
    }
    g.col_indices_.push_back(entries[i].col);
    g.weights_.push_back(w);
    g.row_offsets_[entries[i].row + 1]++;
    i = j;
  }
  for (int64_t r = 0; r < num_rows; ++r) g.row_offsets_[r + 1] += g.row_offsets_[r];
  return g;
}

SparseGraph SparseGraph::dense(const Tensor& dense, float drop_below_abs) {
  std::vector<Entry> entries;
  for (int64_t r = 0; r < dense.rows(); ++r)
    for (int64_t c = 0; c < dense.cols(); ++c) {
      float w = dense.at(r, c);
      if (std::fabs(w) > drop_below_abs)
        entries.push_back({static_cast<int32_t>(r), static_cast<int32_t>(c), w});
    }
  return from_entries(dense.rows(), dense.cols(), std::move(entries));
}

float SparseGraph::get(int64_t r, int64_t c) const {
  auto first = col_indices_.begin() + row_begin(r);
  auto last = col_indices_.begin() + row_end(r);
  auto it = std::lower_bound(first, last, static_cast<int32_t>(c));
  if (it == last || *it != c) return 0.0f;
  return weights_[static_cast<size_t>(it - col_indices_.begin())];
}

SparseGraph SparseGraph::transposed() const {
  std::vector<Entry> entries;
  entries.reserve(col_indices_.size());
  for (int64_t r = 0; r < num_rows_; ++r)
    for (int64_t e = row_begin(r); e < row_end(r); ++e)
      entries.push_back({col_indices_[e], static_cast<int32_t>(r), weights_[e]});
  return from_entries(num_cols_, num_rows_, std::move(entries));
}

Tensor SparseGraph::to_dense() const {
  Tensor d({num_rows_, num_cols_});
  for (int64_t r = 0; r < num_rows_; ++r)
    for (int64_t e = row_begin(r); e < row_end(r); ++e) d.at(r, col_indices_[e]) = weights_[e];
  return d;
}

bool SparseGraph::operator==(const SparseGraph& other) const {
  return num_rows_ == other.num_rows_ && num_cols_ == other.num_cols_ &&
         row_offsets_ == other.row_offsets_ && col_indices_ == other.col_indices_ &&
         weights_ == other.weights_;
}

bool SparseGraph::is_symmetric() const {
  if (num_rows_ != num_cols_) return false;
  for (int64_t r = 0; r < num_rows_; ++r)
    for (int64_t e = row_begin(r); e < row_end(r); ++e)
      if (get(col_indices_[e], r) != weights_[e]) return false;
  return true;
}

void SparseGraph::validate() const {
  if (static_cast<int64_t>(row_offsets_.size()) != num_rows_ + 1)
    throw ShapeError("sparse graph: row_offsets size mismatch");
  if (row_offsets_.front() != 0 || row_offsets_.back() != nnz())
    throw ValidationError("sparse graph: offset bounds broken");
  for (int64_t r = 0; r < num_rows_; ++r) {
    if (row_offsets_[r] > row_offsets_[r + 1])
      throw ValidationError("sparse graph: non-monotone row offsets");
    for (int64_t e = row_begin(r); e < row_end(r); ++e) {
      if (col_indices_[e] < 0 || col_indices_[e] >= num_cols_)
        throw ValidationError("sparse graph: column index out of range");
      if (e + 1 < row_end(r) && col_indices_[e] >= col_indices_[e + 1])
        throw ValidationError("sparse graph: columns not strictly increasing in row " +
                              std::to_string(r));
      if (!std::isfinite(weights_[e]))
        throw ValidationError("sparse graph: non-finite weight");
    }
  }
}

}  // namespace slif
