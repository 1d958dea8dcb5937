#include "sigaug/sparse.hpp"

#include <algorithm>
#include <thread>

#include "sigaug/error.hpp"

namespace sigaug {

CsrMatrix::CsrMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

CsrMatrix CsrMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                   std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols) throw ArgumentError("triplet out of range");
  }
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  CsrBuilder builder(rows, cols);
  std::size_t next_row = 0;
  for (std::size_t i = 0; i < triplets.size();) {
    const auto row = triplets[i].row;
    const auto col = triplets[i].col;
    std::int64_t sum = 0;
    for (; i < triplets.size() && triplets[i].row == row && triplets[i].col == col; ++i) {
      sum += triplets[i].value;
    }
    while (next_row < row) {
      builder.end_row();
      ++next_row;
    }
    builder.push(col, sum);
  }
  while (next_row < rows) {
    builder.end_row();
    ++next_row;
  }
  return std::move(builder).finish();
}

CsrMatrix CsrMatrix::from_dense(std::size_t rows, std::size_t cols,
                                std::span<const std::int64_t> dense) {
  if (dense.size() != rows * cols) throw ArgumentError("dense buffer size mismatch");
  CsrBuilder builder(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) builder.push(c, dense[r * cols + c]);
    builder.end_row();
  }
  return std::move(builder).finish();
}

std::span<const std::size_t> CsrMatrix::row_cols(std::size_t r) const {
  return std::span<const std::size_t>(col_idx_).subspan(row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]);
}

std::span<const std::int64_t> CsrMatrix::row_values(std::size_t r) const {
  return std::span<const std::int64_t>(values_).subspan(row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]);
}

std::int64_t CsrMatrix::at(std::size_t r, std::size_t c) const {
  if (r >= rows_ || c >= cols_) throw ArgumentError("matrix index out of range");
  const auto cols = row_cols(r);
  const auto it = std::lower_bound(cols.begin(), cols.end(), c);
  if (it == cols.end() || *it != c) return 0;
  return values_[row_ptr_[r] + static_cast<std::size_t>(it - cols.begin())];
}

CsrMatrix CsrMatrix::transpose() const {
  CsrMatrix t(cols_, rows_);
  t.col_idx_.resize(nnz());
  t.values_.resize(nnz());
  for (auto c : col_idx_) ++t.row_ptr_[c + 1];
  for (std::size_t r = 0; r < cols_; ++r) t.row_ptr_[r + 1] += t.row_ptr_[r];
  std::vector<std::size_t> cursor(t.row_ptr_.begin(), t.row_ptr_.end() - 1);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const auto dst = cursor[col_idx_[k]]++;
      t.col_idx_[dst] = r;
      t.values_[dst] = values_[k];
    }
  }
  return t;
}

bool CsrMatrix::is_symmetric() const { return rows_ == cols_ && *this == transpose(); }

std::vector<std::int64_t> CsrMatrix::to_dense() const {
  std::vector<std::int64_t> dense(rows_ * cols_, 0);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      dense[r * cols_ + col_idx_[k]] = values_[k];
    }
  }
  return dense;
}

CsrBuilder::CsrBuilder(std::size_t rows, std::size_t cols) {
  m_.rows_ = rows;
  m_.cols_ = cols;
  m_.row_ptr_.reserve(rows + 1);
}

void CsrBuilder::push(std::size_t col, std::int64_t value) {
  if (value == 0) return;
  m_.col_idx_.push_back(col);
  m_.values_.push_back(value);
}

void CsrBuilder::end_row() { m_.row_ptr_.push_back(m_.col_idx_.size()); }

CsrMatrix CsrBuilder::finish() && {
  if (m_.row_ptr_.size() != m_.rows_ + 1) throw ArgumentError("CsrBuilder: row count mismatch");
  return std::move(m_);
}

namespace {

void check_product_shapes(const CsrMatrix& a, const CsrMatrix& b) {
  if (a.cols() != b.rows()) throw ArgumentError("matrix product dimension mismatch");
}

struct RowBlock {
  std::vector<std::size_t> row_len;
  std::vector<std::size_t> cols;
  std::vector<std::int64_t> values;
};

// Gustavson row-merge with a dense accumulator over rows [begin, end).
RowBlock multiply_rows(const CsrMatrix& a, const CsrMatrix& b, std::size_t begin,
                       std::size_t end) {
  RowBlock block;
  block.row_len.reserve(end - begin);
  std::vector<std::int64_t> acc(b.cols(), 0);
  std::vector<char> touched(b.cols(), 0);
  std::vector<std::size_t> pattern;
  for (std::size_t r = begin; r < end; ++r) {
    pattern.clear();
    const auto a_cols = a.row_cols(r);
    const auto a_vals = a.row_values(r);
    for (std::size_t k = 0; k < a_cols.size(); ++k) {
      const auto b_cols = b.row_cols(a_cols[k]);
      const auto b_vals = b.row_values(a_cols[k]);
      for (std::size_t m = 0; m < b_cols.size(); ++m) {
        const auto c = b_cols[m];
        if (!touched[c]) {
          touched[c] = 1;
          pattern.push_back(c);
        }
        acc[c] += a_vals[k] * b_vals[m];
      }
    }
    std::sort(pattern.begin(), pattern.end());
    std::size_t len = 0;
    for (auto c : pattern) {
      if (acc[c] != 0) {
        block.cols.push_back(c);
        block.values.push_back(acc[c]);
        ++len;
      }
      acc[c] = 0;
      touched[c] = 0;
    }
    block.row_len.push_back(len);
  }
  return block;
}

}  // namespace

CsrMatrix multiply_sparse(const CsrMatrix& a, const CsrMatrix& b) {
  check_product_shapes(a, b);
  const std::size_t rows = a.rows();
  std::size_t workers = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  if (rows < 4096) workers = 1;
  workers = std::min(workers, rows == 0 ? std::size_t{1} : rows);

  std::vector<RowBlock> blocks(workers);
  const std::size_t chunk = (rows + workers - 1) / std::max<std::size_t>(workers, 1);
  if (workers == 1) {
    blocks[0] = multiply_rows(a, b, 0, rows);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      const auto begin = std::min(rows, w * chunk);
      const auto end = std::min(rows, begin + chunk);
      pool.emplace_back([&, w, begin, end] { blocks[w] = multiply_rows(a, b, begin, end); });
    }
  }

  CsrBuilder builder(rows, b.cols());
  for (const auto& block : blocks) {
    std::size_t k = 0;
    for (auto len : block.row_len) {
      for (std::size_t e = 0; e < len; ++e, ++k) builder.push(block.cols[k], block.values[k]);
      builder.end_row();
    }
  }
  return std::move(builder).finish();
}

CsrMatrix multiply_dense(const CsrMatrix& a, const CsrMatrix& b) {
  check_product_shapes(a, b);
  const auto n = a.rows();
  const auto m = b.cols();
  const auto db = b.to_dense();
  std::vector<std::int64_t> out(n * m, 0);
  for (std::size_t r = 0; r < n; ++r) {
    const auto a_cols = a.row_cols(r);
    const auto a_vals = a.row_values(r);
    std::int64_t* dst = out.data() + r * m;
    for (std::size_t k = 0; k < a_cols.size(); ++k) {
      const std::int64_t* src = db.data() + a_cols[k] * m;
      const auto w = a_vals[k];
      for (std::size_t c = 0; c < m; ++c) dst[c] += w * src[c];
    }
  }
  return CsrMatrix::from_dense(n, m, out);
}

CsrMatrix multiply(const CsrMatrix& a, const CsrMatrix& b) {
  if (a.rows() < kDenseProductThreshold && b.cols() < kDenseProductThreshold) {
    return multiply_dense(a, b);
  }
  return multiply_sparse(a, b);
}

namespace {

template <typename Op>
CsrMatrix merge(const CsrMatrix& a, const CsrMatrix& b, Op op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ArgumentError("matrix addition dimension mismatch");
  }
  CsrBuilder builder(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto ac = a.row_cols(r);
    const auto av = a.row_values(r);
    const auto bc = b.row_cols(r);
    const auto bv = b.row_values(r);
    std::size_t i = 0, j = 0;
    while (i < ac.size() || j < bc.size()) {
      if (j == bc.size() || (i < ac.size() && ac[i] < bc[j])) {
        builder.push(ac[i], op(av[i], 0));
        ++i;
      } else if (i == ac.size() || bc[j] < ac[i]) {
        builder.push(bc[j], op(0, bv[j]));
        ++j;
      } else {
        builder.push(ac[i], op(av[i], bv[j]));
        ++i;
        ++j;
      }
    }
    builder.end_row();
  }
  return std::move(builder).finish();
}

}  // namespace

CsrMatrix add(const CsrMatrix& a, const CsrMatrix& b) {
  return merge(a, b, [](std::int64_t x, std::int64_t y) { return x + y; });
}

CsrMatrix subtract(const CsrMatrix& a, const CsrMatrix& b) {
  return merge(a, b, [](std::int64_t x, std::int64_t y) { return x - y; });
}

std::int64_t product_entry_symmetric(const CsrMatrix& a, std::size_t i, const CsrMatrix& b,
                                     std::size_t j) {
  const auto ac = a.row_cols(i);
  const auto av = a.row_values(i);
  const auto bc = b.row_cols(j);
  const auto bv = b.row_values(j);
  std::int64_t sum = 0;
  std::size_t x = 0, y = 0;
  while (x < ac.size() && y < bc.size()) {
    if (ac[x] < bc[y]) {
      ++x;
    } else if (bc[y] < ac[x]) {
      ++y;
    } else {
      sum += av[x++] * bv[y++];
    }
  }
  return sum;
}

}  // namespace sigaug
