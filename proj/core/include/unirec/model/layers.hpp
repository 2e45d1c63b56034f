#pragma once

#include <random>
#include <span>
#include <string>

#include "unirec/tensor/gradcheck.hpp"
#include "unirec/tensor/ops.hpp"

UNIREC_NAMESPACE_BEGIN

/// y = x W + b with W [in x out] drawn from N(0, gain^2 / in).
struct Linear {
    Tensor w, b;

    Linear() = default;
    Linear(std::size_t in, std::size_t out, std::mt19937_64& rng, double gain = 1.0);

    Tensor operator()(const Tensor& x) const { return add(matmul(x, w), b); }
    std::size_t in_width() const { return w.dim(0); }
    std::size_t out_width() const { return w.dim(1); }
    void collect(NamedTensors& out, const std::string& prefix) const;
};

struct LayerNorm {
    Tensor gamma, beta;

    LayerNorm() = default;
    explicit LayerNorm(std::size_t d);

    Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma, beta); }
    void collect(NamedTensors& out, const std::string& prefix) const;
};

/// Projected multi-head attention over spans of a batched query/key set.
struct MultiHeadAttention {
    Linear q, k, v, o;
    std::size_t heads = 1;

    MultiHeadAttention() = default;
    MultiHeadAttention(std::size_t d, std::size_t heads, std::mt19937_64& rng, double out_gain);

    Tensor operator()(const Tensor& xq, const Tensor& xkv, std::span<const AttentionSpan> spans,
                      std::span<const unsigned char> kv_mask = {}) const;
    void collect(NamedTensors& out, const std::string& prefix) const;
};

struct FeedForward {
    Linear up, down;

    FeedForward() = default;
    FeedForward(std::size_t d, std::size_t mult, std::mt19937_64& rng, double out_gain);

    Tensor operator()(const Tensor& x) const { return down(gelu(up(x))); }
    void collect(NamedTensors& out, const std::string& prefix) const;
};

/// Pre-norm self-attention + FFN block.
struct EncoderLayer {
    LayerNorm ln_attn, ln_ffn;
    MultiHeadAttention attn;
    FeedForward ffn;

    EncoderLayer() = default;
    EncoderLayer(std::size_t d, std::size_t heads, std::size_t ffn_mult, std::mt19937_64& rng, double out_gain);

    /// `spans` must be self-spans (queries and keys cover the same rows).
    Tensor operator()(const Tensor& x, std::span<const AttentionSpan> spans) const;
    void collect(NamedTensors& out, const std::string& prefix) const;
};

/// Repeats every row of `x` `times` times, row-major: r0 r0 .. r1 r1 ..
Tensor repeat_rows(const Tensor& x, std::size_t times);
/// Stacks `times` copies of `x` vertically: x x x ..
Tensor tile_rows(const Tensor& x, std::size_t times);

UNIREC_NAMESPACE_END
