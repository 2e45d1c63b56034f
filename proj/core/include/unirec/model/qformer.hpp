#pragma once

#include <vector>

#include "unirec/model/layers.hpp"

UNIREC_NAMESPACE_BEGIN

struct QFormerConfig {
    std::size_t n_queries = 4;
    std::size_t n_layers = 2;
    std::size_t n_heads = 4;
    std::size_t d = 64;
    std::size_t ffn_mult = 4;

    void validate() const;
    /// Closed-form count of trainable scalars.
    std::size_t parameter_count() const;
};

/// Learnable queries refined by, per layer, query self-attention,
/// cross-attention to the inputs and an FFN, each pre-normed with a residual
/// connection; a final layer norm closes the stack.
class QFormer {
  public:
    QFormer() = default;
    QFormer(const QFormerConfig& config, std::mt19937_64& rng);

    const QFormerConfig& config() const { return config_; }

    /// `inputs` holds the tokens of several independent problems; group g
    /// owns rows [groups[g].begin, +length). Returns [groups * K x d], the K
    /// query outputs of each group in order. Masked input rows are invisible.
    Tensor forward(const Tensor& inputs, std::span<const Segment> groups,
                   std::span<const unsigned char> input_mask = {}) const;

    const Tensor& queries() const { return queries_; }
    void collect(NamedTensors& out, const std::string& prefix) const;

  private:
    struct Layer {
        LayerNorm ln_self, ln_cross, ln_inputs, ln_ffn;
        MultiHeadAttention self_attn, cross_attn;
        FeedForward ffn;
    };

    QFormerConfig config_;
    Tensor queries_;
    std::vector<Layer> layers_;
    LayerNorm ln_out_;
};

UNIREC_NAMESPACE_END
