#pragma once

/*
 * Dual-anchor hidden-state editing.
 *
 * The edit adds alpha * f(I) and subtracts beta * f(I') on every row of the
 * contiguous image-token span of a decoder hidden-state matrix, where f(I)
 * is the projected embedding of the original image (positive anchor) and
 * f(I') the projected embedding of the caption-reconstructed image
 * (negative anchor). Rows outside the span are passed through untouched.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "halo/error.hpp"
#include "halo/matrix.hpp"
#include "halo/rng.hpp"

namespace halo {

enum class TokenKind : std::uint8_t { text, image };

// Contiguous run of image-token positions in a decoder sequence.
struct TokenSpan {
  std::size_t start = 0;
  std::size_t length = 0;

  std::size_t end() const { return start + length; }  // exclusive
  bool contains(std::size_t i) const { return i >= start && i < end(); }

  friend bool operator==(const TokenSpan& a, const TokenSpan& b) {
    return a.start == b.start && a.length == b.length;
  }
};

// Finds the contiguous image span in a per-token kind mask.
inline TokenSpan identify_image_span(const std::vector<TokenKind>& mask) {
  std::size_t first = mask.size();
  std::size_t last = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] == TokenKind::image) {
      if (count == 0) first = i;
      last = i;
      ++count;
    }
  }
  if (count == 0) throw NoImageTokens("no image-flagged positions in mask");
  if (last - first + 1 != count)
    throw NonContiguousSpan("image-flagged positions are split by text positions");
  return TokenSpan{first, count};
}

// Mean over the token axis of an anchor matrix.
inline Vec pool_anchor(const EmbeddingMatrix& anchor_tokens) {
  if (anchor_tokens.empty()) throw EmptyMatrix("pool_anchor: empty matrix");
  return row_mean(anchor_tokens);
}

// Projected embeddings of the original image (positive) and the
// caption-reconstructed image (negative), plus their token-axis means.
struct AnchorPair {
  EmbeddingMatrix positive;
  EmbeddingMatrix negative;
  Vec pooled_positive;
  Vec pooled_negative;

  static AnchorPair make(EmbeddingMatrix positive, EmbeddingMatrix negative) {
    if (positive.rows != negative.rows || positive.cols != negative.cols)
      throw ShapeMismatch("anchor pair: positive and negative shapes differ");
    AnchorPair a;
    a.pooled_positive = pool_anchor(positive);
    a.pooled_negative = pool_anchor(negative);
    a.positive = std::move(positive);
    a.negative = std::move(negative);
    return a;
  }

  std::size_t token_count() const { return positive.rows; }
  std::size_t dim() const { return positive.cols; }

  friend bool operator==(const AnchorPair& a, const AnchorPair& b) {
    return a.positive == b.positive && a.negative == b.negative &&
           a.pooled_positive == b.pooled_positive && a.pooled_negative == b.pooled_negative;
  }
};

/// Applies row' = row + alpha*a_pos - beta*a_neg on every row inside span.
/// When the anchors carry exactly span.length tokens the addition is
/// position-aligned; otherwise the pooled anchor vectors are broadcast.
inline EmbeddingMatrix apply_dual_anchor_edit(const EmbeddingMatrix& hidden,
                                              const TokenSpan& span,
                                              const AnchorPair& anchors,
                                              double alpha, double beta) {
  if (hidden.empty()) throw InvalidSpan("edit: empty hidden matrix");
  if (span.length == 0 || span.end() > hidden.rows)
    throw InvalidSpan("edit: span outside hidden matrix");
  if (anchors.dim() != hidden.cols)
    throw DimensionMismatch("edit: anchor dimension differs from hidden dimension");
  if (!std::isfinite(alpha) || !std::isfinite(beta))
    throw InvalidParameter("edit: nonfinite coefficient");

  EmbeddingMatrix out = hidden;
  if (alpha == 0.0 && beta == 0.0) return out;

  const bool aligned = anchors.token_count() == span.length;
  for (std::size_t h = span.start; h < span.end(); ++h) {
    const double* pos = aligned ? anchors.positive.row(h - span.start)
                                : anchors.pooled_positive.data();
    const double* neg = aligned ? anchors.negative.row(h - span.start)
                                : anchors.pooled_negative.data();
    double* row = out.row(h);
    for (std::size_t c = 0; c < out.cols; ++c)
      row[c] += alpha * pos[c] - beta * neg[c];
  }
  return out;
}

enum class CoefficientKind { fixed, uniform, gaussian };

// How (alpha, beta) candidates are drawn. uniform draws from [lo, hi];
// gaussian draws N(mean, std) clipped to [lo, hi]; each emitted value is the
// average of avg_of draws and best_of candidate pairs are emitted for the
// harness to rank.
struct CoefficientStrategy {
  CoefficientKind kind = CoefficientKind::fixed;
  double lo = 0.0;
  double hi = 0.0;
  double mean = 0.0;
  double std = 0.0;
  int best_of = 1;
  int avg_of = 1;

  static CoefficientStrategy fixed(double value) {
    CoefficientStrategy s;
    s.kind = CoefficientKind::fixed;
    s.mean = value;
    s.lo = s.hi = value;
    return s;
  }

  static CoefficientStrategy uniform(double lo, double hi) {
    CoefficientStrategy s;
    s.kind = CoefficientKind::uniform;
    s.lo = lo;
    s.hi = hi;
    s.mean = 0.5 * (lo + hi);
    return s;
  }

  // The bounds double as the clipping range; the default parameterization
  // centers the distribution on the range with std = (hi-lo)/4.
  static CoefficientStrategy gaussian(double lo, double hi) {
    CoefficientStrategy s;
    s.kind = CoefficientKind::gaussian;
    s.lo = lo;
    s.hi = hi;
    s.mean = 0.5 * (lo + hi);
    s.std = 0.25 * (hi - lo);
    return s;
  }

  static CoefficientStrategy gaussian(double mean, double std, double lo, double hi) {
    CoefficientStrategy s;
    s.kind = CoefficientKind::gaussian;
    s.mean = mean;
    s.std = std;
    s.lo = lo;
    s.hi = hi;
    return s;
  }

  CoefficientStrategy with_best_of(int n) const {
    CoefficientStrategy s = *this;
    s.best_of = n;
    return s;
  }

  CoefficientStrategy with_avg_of(int n) const {
    CoefficientStrategy s = *this;
    s.avg_of = n;
    return s;
  }

  void validate() const {
    if (kind == CoefficientKind::uniform && !(lo < hi))
      throw InvalidStrategy("uniform strategy requires lo < hi");
    if (kind == CoefficientKind::gaussian) {
      if (!(std > 0.0)) throw InvalidStrategy("gaussian strategy requires std > 0");
      if (!(lo < hi)) throw InvalidStrategy("gaussian strategy requires lo < hi clip range");
    }
    if (best_of < 1 || avg_of < 1)
      throw InvalidStrategy("best_of and avg_of must be >= 1");
    if (!std::isfinite(lo) || !std::isfinite(hi) || !std::isfinite(mean) || !std::isfinite(std))
      throw InvalidStrategy("nonfinite strategy parameter");
  }

  friend bool operator==(const CoefficientStrategy& a, const CoefficientStrategy& b) {
    return a.kind == b.kind && a.lo == b.lo && a.hi == b.hi && a.mean == b.mean &&
           a.std == b.std && a.best_of == b.best_of && a.avg_of == b.avg_of;
  }
};

struct CoefficientPair {
  double alpha = 0.0;
  double beta = 0.0;

  friend bool operator==(const CoefficientPair& a, const CoefficientPair& b) {
    return a.alpha == b.alpha && a.beta == b.beta;
  }
};

/// Emits max(best_of, 1) candidate (alpha, beta) pairs in seed order.
/// tied forces beta = alpha within each pair; candidates are not ranked here.
inline std::vector<CoefficientPair> sample_coefficients(const CoefficientStrategy& strategy,
                                                        bool tied, std::uint64_t seed) {
  strategy.validate();
  const int n = std::max(strategy.best_of, 1);
  std::vector<CoefficientPair> out;
  out.reserve(static_cast<std::size_t>(n));

  if (strategy.kind == CoefficientKind::fixed) {
    out.assign(static_cast<std::size_t>(n), CoefficientPair{strategy.mean, strategy.mean});
    return out;
  }

  Rng rng(derive_seed(seed, "sample_coefficients"));
  auto draw_one = [&]() {
    if (strategy.kind == CoefficientKind::uniform) return rng.uniform(strategy.lo, strategy.hi);
    return std::clamp(rng.normal(strategy.mean, strategy.std), strategy.lo, strategy.hi);
  };
  auto draw_avg = [&]() {
    double sum = 0.0;
    for (int i = 0; i < strategy.avg_of; ++i) sum += draw_one();
    return sum / strategy.avg_of;
  };

  for (int i = 0; i < n; ++i) {
    double a = draw_avg();
    double b = tied ? a : draw_avg();
    out.push_back(CoefficientPair{a, b});
  }
  return out;
}

enum class SpanPolicy { adapter_provided, fixed_span };

// Full edit configuration: coefficients, target decoder layer (1-based),
// span policy and coefficient-sampling strategy.
struct EditConfig {
  double alpha = 0.1;
  double beta = 0.1;
  int layer = 3;       // 1-based decoder layer whose output is edited
  int num_layers = 32;
  SpanPolicy span_policy = SpanPolicy::adapter_provided;
  TokenSpan fixed_span{0, 1};  // used only under SpanPolicy::fixed_span
  CoefficientStrategy strategy = CoefficientStrategy::fixed(0.1);
  bool tied = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(std::isfinite(alpha) && alpha >= 0.0 && std::isfinite(beta) && beta >= 0.0))
      throw InvalidParameter("edit config: alpha and beta must be finite and >= 0");
    if (layer < 1 || layer > num_layers)
      throw InvalidParameter("edit config: layer must lie in [1, num_layers]");
    strategy.validate();
  }

  friend bool operator==(const EditConfig& a, const EditConfig& b) {
    return a.alpha == b.alpha && a.beta == b.beta && a.layer == b.layer &&
           a.num_layers == b.num_layers && a.span_policy == b.span_policy &&
           a.fixed_span == b.fixed_span && a.strategy == b.strategy &&
           a.tied == b.tied && a.seed == b.seed;
  }
};

}  // namespace halo
