#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "unirec/tensor/tensor.hpp"

UNIREC_NAMESPACE_BEGIN

// Fixed op vocabulary. Ops work on row-major matrices: a tensor of any rank
// is viewed as rows() x cols() where cols() is the last extent. The only
// broadcast is a row vector added across the leading axis (bias add).

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

/// Elementwise sum. `b` may also be a single row (shape [n] or [1 x n])
/// broadcast over every row of `a`.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Real factor);

/// Concatenates 2-D tensors along axis 0 (rows) or 1 (columns).
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t length);
/// Row selection with repetition; backward scatter-adds.
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> indices);

struct Segment {
    std::size_t begin = 0;
    std::size_t length = 0;
};

/// Mean over each contiguous row segment; output has one row per segment.
Tensor segment_mean(const Tensor& a, std::span<const Segment> segments);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Sum along the last axis, shape [rows x 1].
Tensor row_sum(const Tensor& a);

Tensor square(const Tensor& a);
/// Elementwise sqrt; inputs must be strictly positive.
Tensor sqrt(const Tensor& a);
Tensor relu(const Tensor& a);
/// Exact (erf-based) GELU.
Tensor gelu(const Tensor& a);

inline constexpr Real kLayerNormEps = Real(1e-5);

/// Row-wise layer norm with per-feature affine parameters.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Real eps = kLayerNormEps);
/// Max-subtracted softmax over the last axis.
Tensor softmax(const Tensor& x);
/// Row-wise division by the l2 norm. Zero rows raise NumericError.
Tensor l2_normalize(const Tensor& x);
/// Mean over rows of -log softmax(logits)[row, target[row]].
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets);

/// One attention problem inside a batched attention call: query rows
/// [q_begin, q_begin + q_len) attend to key/value rows
/// [kv_begin, kv_begin + kv_len).
struct AttentionSpan {
    std::size_t q_begin = 0;
    std::size_t q_len = 0;
    std::size_t kv_begin = 0;
    std::size_t kv_len = 0;
};

/// Multi-head scaled dot-product attention softmax(QK^T / sqrt(d_head)) V,
/// evaluated independently per span. Columns are split evenly across heads.
/// Keys whose `kv_mask` entry is zero are excluded; an empty mask means all
/// keys are visible. A span with no visible key raises NumericError.
Tensor segment_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::span<const AttentionSpan> spans,
                         std::size_t heads, std::span<const unsigned char> kv_mask = {});

/// Attention probabilities of `segment_attention` for inspection. Layout:
/// span-major, then head, then query row, then visible key.
std::vector<Real> attention_weights(const Tensor& q, const Tensor& k, std::span<const AttentionSpan> spans,
                                    std::size_t heads, std::span<const unsigned char> kv_mask = {});

UNIREC_NAMESPACE_END
