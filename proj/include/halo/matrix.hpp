#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "halo/error.hpp"

namespace halo {

using Vec = std::vector<double>;

// Dense row-major matrix of decoder hidden states or projected image
// embeddings: rows = tokens, cols = hidden dimension.
struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major, rows*cols

  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), values(r * c, fill) {}

  static EmbeddingMatrix from_rows(const std::vector<Vec>& row_data) {
    if (row_data.empty() || row_data.front().empty())
      throw EmptyMatrix("from_rows: no data");
    EmbeddingMatrix m(row_data.size(), row_data.front().size());
    for (std::size_t r = 0; r < m.rows; ++r) {
      if (row_data[r].size() != m.cols)
        throw DimensionMismatch("from_rows: ragged rows");
      for (std::size_t c = 0; c < m.cols; ++c) m.values[r * m.cols + c] = row_data[r][c];
    }
    return m;
  }

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  const double* row(std::size_t r) const { return values.data() + r * cols; }
  double* row(std::size_t r) { return values.data() + r * cols; }

  Vec row_copy(std::size_t r) const {
    return Vec(row(r), row(r) + cols);
  }

  bool empty() const { return rows == 0 || cols == 0; }

  bool all_finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    return a.rows == b.rows && a.cols == b.cols && a.values == b.values;
  }
};

inline double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw DimensionMismatch("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(const Vec& v) { return std::sqrt(dot(v, v)); }

inline void add_scaled(Vec& dst, const Vec& src, double scale) {
  if (dst.size() != src.size()) throw DimensionMismatch("add_scaled: size mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

inline Vec scaled(const Vec& v, double scale) {
  Vec out(v);
  for (double& x : out) x *= scale;
  return out;
}

// Arithmetic mean over the token (row) axis.
inline Vec row_mean(const EmbeddingMatrix& m) {
  if (m.empty()) throw EmptyMatrix("row_mean: empty matrix");
  Vec mean(m.cols, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) mean[c] += m.at(r, c);
  for (double& v : mean) v /= static_cast<double>(m.rows);
  return mean;
}

}  // namespace halo
