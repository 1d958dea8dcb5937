#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sigaug {

struct Triplet {
  std::size_t row = 0;
  std::size_t col = 0;
  std::int64_t value = 0;
};

// Compressed sparse row matrix of 64-bit integers. Column indices within a
// row are strictly increasing and explicit zeros are never stored.
class CsrMatrix {
 public:
  CsrMatrix() = default;
  CsrMatrix(std::size_t rows, std::size_t cols);

  // Duplicate coordinates are summed; resulting zeros are dropped.
  static CsrMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets);
  static CsrMatrix from_dense(std::size_t rows, std::size_t cols, std::span<const std::int64_t> dense);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
  std::span<const std::size_t> col_idx() const noexcept { return col_idx_; }
  std::span<const std::int64_t> values() const noexcept { return values_; }

  std::span<const std::size_t> row_cols(std::size_t r) const;
  std::span<const std::int64_t> row_values(std::size_t r) const;

  std::int64_t at(std::size_t r, std::size_t c) const;

  CsrMatrix transpose() const;
  bool is_symmetric() const;
  std::vector<std::int64_t> to_dense() const;

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;

 private:
  friend class CsrBuilder;

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_idx_;
  std::vector<std::int64_t> values_;
};

// Row-by-row construction; rows must be appended in order with sorted columns.
class CsrBuilder {
 public:
  CsrBuilder(std::size_t rows, std::size_t cols);
  void push(std::size_t col, std::int64_t value);
  void end_row();
  CsrMatrix finish() &&;

 private:
  CsrMatrix m_;
};

// Below this size products go through a dense kernel.
inline constexpr std::size_t kDenseProductThreshold = 512;

CsrMatrix multiply(const CsrMatrix& a, const CsrMatrix& b);
CsrMatrix multiply_sparse(const CsrMatrix& a, const CsrMatrix& b);
CsrMatrix multiply_dense(const CsrMatrix& a, const CsrMatrix& b);

CsrMatrix add(const CsrMatrix& a, const CsrMatrix& b);
CsrMatrix subtract(const CsrMatrix& a, const CsrMatrix& b);

// (a * b)(i, j) for a symmetric b, via the merge of row i of a and row j of b.
std::int64_t product_entry_symmetric(const CsrMatrix& a, std::size_t i, const CsrMatrix& b,
                                     std::size_t j);

}  // namespace sigaug
