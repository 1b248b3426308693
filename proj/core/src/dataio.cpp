#include "isqa/dataio.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>

namespace isqa {

Vector SparseMatrix::multiply(const Vector& x) const {
  Vector y = Vector::Zero(n_rows);
  for (Index i = 0; i < n_rows; ++i) y[i] = row_dot(i, x);
  return y;
}

Vector SparseMatrix::multiply_transpose(const Vector& y) const {
  Vector x = Vector::Zero(n_cols);
  for (Index i = 0; i < n_rows; ++i) add_scaled_row(i, y[i], x);
  return x;
}

double SparseMatrix::row_dot(Index i, const Vector& x) const {
  double acc = 0.0;
  for (Index p = row_offsets[i]; p < row_offsets[i + 1]; ++p)
    acc += values[p] * x[col_indices[p]];
  return acc;
}

void SparseMatrix::add_scaled_row(Index i, double c, Vector& y) const {
  if (c == 0.0) return;
  for (Index p = row_offsets[i]; p < row_offsets[i + 1]; ++p)
    y[col_indices[p]] += c * values[p];
}

double SparseMatrix::row_squared_norm(Index i) const {
  double acc = 0.0;
  for (Index p = row_offsets[i]; p < row_offsets[i + 1]; ++p)
    acc += values[p] * values[p];
  return acc;
}

bool SparseMatrix::structurally_valid() const {
  if (n_rows < 0 || n_cols < 0) return false;
  if (static_cast<Index>(row_offsets.size()) != n_rows + 1) return false;
  if (row_offsets.front() != 0) return false;
  if (row_offsets.back() != nnz()) return false;
  if (col_indices.size() != values.size()) return false;
  for (Index i = 0; i < n_rows; ++i) {
    if (row_offsets[i] > row_offsets[i + 1]) return false;
    for (Index p = row_offsets[i]; p < row_offsets[i + 1]; ++p) {
      if (col_indices[p] < 0 || col_indices[p] >= n_cols) return false;
      if (p > row_offsets[i] && col_indices[p] <= col_indices[p - 1]) return false;
    }
  }
  return true;
}

namespace {

[[noreturn]] void parse_fail(Index line_no, const std::string& what) {
  throw DataError("libsvm parse error at line " + std::to_string(line_no) + ": " + what);
}

double parse_double_token(const std::string& tok, Index line_no, const char* what) {
  double out = 0.0;
  // std::from_chars does not accept an explicit plus sign
  size_t skip = (tok.size() > 1 && tok[0] == '+') ? 1 : 0;
  auto [ptr, ec] = std::from_chars(tok.data() + skip, tok.data() + tok.size(), out);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    parse_fail(line_no, std::string("malformed ") + what + " '" + tok + "'");
  return out;
}

long parse_index_token(const std::string& tok, Index line_no) {
  long out = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    parse_fail(line_no, "malformed feature index '" + tok + "'");
  return out;
}

}  // namespace

Dataset parse_libsvm(std::istream& in, std::optional<Index> n_cols_override) {
  Dataset ds;
  SparseMatrix& m = ds.features;
  Index max_index = 0;  // 1-based
  Index line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // skip blank lines at end of file but reject interior content-free lines
    // the same way: a blank line simply contributes no example
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;

    double raw_label = parse_double_token(tok, line_no, "label");
    if (raw_label == 0.0) parse_fail(line_no, "zero label not allowed");
    ds.labels.push_back(raw_label > 0.0 ? 1.0 : -1.0);

    long prev_index = 0;
    while (ls >> tok) {
      auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
        parse_fail(line_no, "malformed feature token '" + tok + "'");
      long idx = parse_index_token(tok.substr(0, colon), line_no);
      double val = parse_double_token(tok.substr(colon + 1), line_no, "feature value");
      if (idx < 1) parse_fail(line_no, "feature index " + std::to_string(idx) + " < 1");
      if (idx == prev_index)
        parse_fail(line_no, "duplicate feature index " + std::to_string(idx));
      if (idx < prev_index)
        parse_fail(line_no, "feature indices not increasing at " + std::to_string(idx));
      prev_index = idx;
      m.col_indices.push_back(static_cast<Index>(idx - 1));
      m.values.push_back(val);
      if (idx > max_index) max_index = static_cast<Index>(idx);
    }
    m.row_offsets.push_back(m.nnz());
  }
  m.n_rows = static_cast<Index>(ds.labels.size());
  m.n_cols = max_index;
  if (n_cols_override) {
    if (*n_cols_override < max_index)
      throw DataError("feature-count override " + std::to_string(*n_cols_override) +
                      " below largest index " + std::to_string(max_index));
    m.n_cols = *n_cols_override;
  }
  return ds;
}

Dataset parse_libsvm(const std::string& text, std::optional<Index> n_cols_override) {
  std::istringstream in(text);
  return parse_libsvm(in, n_cols_override);
}

Dataset load_libsvm_file(const std::string& path, std::optional<Index> n_cols_override) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path + "'");
  return parse_libsvm(in, n_cols_override);
}

void write_libsvm(const Dataset& ds, std::ostream& out) {
  char buf[64];
  const SparseMatrix& m = ds.features;
  for (Index i = 0; i < m.n_rows; ++i) {
    out << (ds.labels[i] > 0 ? "+1" : "-1");
    for (Index p = m.row_offsets[i]; p < m.row_offsets[i + 1]; ++p) {
      std::snprintf(buf, sizeof(buf), "%.17g", m.values[p]);
      out << ' ' << (m.col_indices[p] + 1) << ':' << buf;
    }
    out << '\n';
  }
}

std::string write_libsvm(const Dataset& ds) {
  std::ostringstream out;
  write_libsvm(ds, out);
  return out.str();
}

std::vector<IndexRange> column_blocks(Index dim, Index n_blocks) {
  if (n_blocks < 1 || n_blocks > dim)
    throw ConfigError("block count " + std::to_string(n_blocks) +
                      " out of range for dimension " + std::to_string(dim));
  std::vector<IndexRange> ranges;
  ranges.reserve(n_blocks);
  const Index base = dim / n_blocks;
  const Index extra = dim % n_blocks;
  Index begin = 0;
  for (Index b = 0; b < n_blocks; ++b) {
    Index size = base + (b < extra ? 1 : 0);
    ranges.push_back({begin, begin + size});
    begin += size;
  }
  return ranges;
}

}  // namespace isqa
