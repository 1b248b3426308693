#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "isqa/common.hpp"

namespace isqa {

// Row-major compressed sparse matrix. Within each row the column indices
// are strictly increasing.
struct SparseMatrix {
  Index n_rows = 0;
  Index n_cols = 0;
  std::vector<Index> row_offsets = {0};
  std::vector<Index> col_indices;
  std::vector<double> values;

  Index nnz() const { return static_cast<Index>(values.size()); }

  // A x, length n_rows.
  Vector multiply(const Vector& x) const;
  // A^T y, length n_cols.
  Vector multiply_transpose(const Vector& y) const;
  double row_dot(Index i, const Vector& x) const;
  // y += c * A[i,:]
  void add_scaled_row(Index i, double c, Vector& y) const;
  double row_squared_norm(Index i) const;

  // Checks every structural invariant (offsets monotone, indices in range
  // and strictly increasing per row). Used by tests and after parsing.
  bool structurally_valid() const;

  bool operator==(const SparseMatrix&) const = default;
};

// Examples as rows of `features`, labels restricted to {-1, +1}.
struct Dataset {
  SparseMatrix features;
  std::vector<double> labels;

  Index n_examples() const { return features.n_rows; }
  Index n_features() const { return features.n_cols; }
  bool operator==(const Dataset&) const = default;
};

// Parses LIBSVM text ("label idx:val idx:val ..." with 1-based strictly
// increasing indices). Labels are mapped by sign; zero labels are rejected.
// The feature count defaults to the largest index seen and may be raised
// with n_cols_override. Throws DataError naming the offending line.
Dataset parse_libsvm(std::istream& in, std::optional<Index> n_cols_override = {});
Dataset parse_libsvm(const std::string& text, std::optional<Index> n_cols_override = {});
Dataset load_libsvm_file(const std::string& path, std::optional<Index> n_cols_override = {});

// Inverse of parse_libsvm; values printed with 17 significant digits so
// a round trip reproduces the dataset exactly.
void write_libsvm(const Dataset& ds, std::ostream& out);
std::string write_libsvm(const Dataset& ds);

// Partition of [0, dim) into n_blocks contiguous ranges whose sizes differ
// by at most one; the remainder goes to the leading blocks.
std::vector<IndexRange> column_blocks(Index dim, Index n_blocks);

}  // namespace isqa
