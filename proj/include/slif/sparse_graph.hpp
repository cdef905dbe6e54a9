#pragma once

#include <cstdint>
#include <vector>

#include "slif/tensor.hpp"

namespace slif {

// Weighted sparse adjacency in compressed-row form. Shared by the interaction
// graph, per-modality feature graphs, the item correlation graph and the
// enhanced graphs. Column indices are strictly increasing within each row.
class SparseGraph {
 public:
  SparseGraph() : row_offsets_(1, 0) {}
  SparseGraph(int64_t num_rows, int64_t num_cols)
      : num_rows_(num_rows), num_cols_(num_cols), row_offsets_(num_rows + 1, 0) {}

  struct Entry {
    int32_t row;
    int32_t col;
    float weight;
  };

  // Builds from unordered (row, col, weight) entries. Duplicate coordinates
  // are combined with `combine` ('+' sums, 'M' keeps the max).
  static SparseGraph from_entries(int64_t num_rows, int64_t num_cols, std::vector<Entry> entries,
                                  char combine = '+');

  static SparseGraph dense(const Tensor& dense, float drop_below_abs = 0.0f);

  int64_t num_rows() const { return num_rows_; }
  int64_t num_cols() const { return num_cols_; }
  int64_t nnz() const { return static_cast<int64_t>(col_indices_.size()); }

  const std::vector<int64_t>& row_offsets() const { return row_offsets_; }
  const std::vector<int32_t>& col_indices() const { return col_indices_; }
  const std::vector<float>& weights() const { return weights_; }
  std::vector<float>& weights() { return weights_; }

  int64_t row_begin(int64_t r) const { return row_offsets_[r]; }
  int64_t row_end(int64_t r) const { return row_offsets_[r + 1]; }
  int64_t row_nnz(int64_t r) const { return row_end(r) - row_begin(r); }

  float get(int64_t r, int64_t c) const;

  SparseGraph transposed() const;
  Tensor to_dense() const;

  // Entry-wise equality of structure and weights.
  bool operator==(const SparseGraph& other) const;

  bool is_symmetric() const;

  // Throws ShapeError/ValidationError if the CSR invariants are broken:
  // monotone offsets, in-range strictly-increasing columns, finite weights.
  void validate() const;

  // y = G x (rows of x are node features).
  template <typename T>
  TensorT<T> multiply(const TensorT<T>& x) const {
    if (x.rows() != num_cols_)
      throw ShapeError("spmm: graph cols " + std::to_string(num_cols_) + " vs input rows " +
                       std::to_string(x.rows()));
    const int64_t d = x.cols();
    TensorT<T> y({num_rows_, d});
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < num_rows_; ++r) {
      for (int64_t c = 0; c < d; ++c) {
        double acc = 0.0;
        for (int64_t e = row_begin(r); e < row_end(r); ++e)
          acc += static_cast<double>(weights_[e]) * static_cast<double>(x.at(col_indices_[e], c));
        y.at(r, c) = static_cast<T>(acc);
      }
    }
    return y;
  }

 private:
  int64_t num_rows_ = 0;
  int64_t num_cols_ = 0;
  std::vector<int64_t> row_offsets_;
  std::vector<int32_t> col_indices_;
  std::vector<float> weights_;
};

}  // namespace slif
