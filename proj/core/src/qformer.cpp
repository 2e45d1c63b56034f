#include "unirec/model/qformer.hpp"

#include <cmath>

UNIREC_NAMESPACE_BEGIN

void QFormerConfig::validate() const {
    if (n_queries == 0) throw ConfigError("Q-Former needs at least one query");
    if (n_layers == 0) throw ConfigError("Q-Former needs at least one layer");
    if (n_heads == 0 || d % n_heads != 0) {
        throw ConfigError("Q-Former width d = " + std::to_string(d) + " is not divisible by n_heads = " +
                          std::to_string(n_heads));
    }
    if (ffn_mult == 0) throw ConfigError("Q-Former ffn_mult must be positive");
}

std::size_t QFormerConfig::parameter_count() const {
    const std::size_t attention = 4 * (d * d + d);
    const std::size_t ffn = (d * ffn_mult * d + ffn_mult * d) + (ffn_mult * d * d + d);
    const std::size_t norms = 4 * 2 * d;
    return n_queries * d + n_layers * (2 * attention + ffn + norms) + 2 * d;
}

QFormer::QFormer(const QFormerConfig& config, std::mt19937_64& rng) : config_(config) {
    config_.validate();
    const std::size_t d = config_.d;
    // unit scale, like the layer-normed activations the residual stream carries
    queries_ = Tensor::randn({config_.n_queries, d}, rng, Real(1), true);
    // residual branches scaled down with depth
    const double out_gain = 1.0 / std::sqrt(2.0 * static_cast<double>(config_.n_layers));
    for (std::size_t l = 0; l < config_.n_layers; ++l) {
        Layer layer{LayerNorm(d),
                    LayerNorm(d),
                    LayerNorm(d),
                    LayerNorm(d),
                    MultiHeadAttention(d, config_.n_heads, rng, out_gain),
                    MultiHeadAttention(d, config_.n_heads, rng, out_gain),
                    FeedForward(d, config_.ffn_mult, rng, out_gain)};
        layers_.push_back(std::move(layer));
    }
    ln_out_ = LayerNorm(d);
}

Tensor QFormer::forward(const Tensor& inputs, std::span<const Segment> groups,
                        std::span<const unsigned char> input_mask) const {
    const std::size_t K = config_.n_queries;
    if (groups.empty()) throw ShapeError("Q-Former forward needs at least one group");
    std::vector<AttentionSpan> self_spans, cross_spans;
    self_spans.reserve(groups.size());
    cross_spans.reserve(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].length == 0) throw NumericError("Q-Former group with no input tokens");
        self_spans.push_back({g * K, K, g * K, K});
        cross_spans.push_back({g * K, K, groups[g].begin, groups[g].length});
    }
    Tensor x = tile_rows(queries_, groups.size());
    for (const Layer& layer : layers_) {
        const Tensor hs = layer.ln_self(x);
        x = add(x, layer.self_attn(hs, hs, self_spans));
        const Tensor kv = layer.ln_inputs(inputs);
        x = add(x, layer.cross_attn(layer.ln_cross(x), kv, cross_spans, input_mask));
        x = add(x, layer.ffn(layer.ln_ffn(x)));
    }
    return ln_out_(x);
}

void QFormer::collect(NamedTensors& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".queries", queries_);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const std::string p = prefix + ".layer" + std::to_string(l);
        layers_[l].ln_self.collect(out, p + ".ln_self");
        layers_[l].self_attn.collect(out, p + ".self_attn");
        layers_[l].ln_cross.collect(out, p + ".ln_cross");
        layers_[l].ln_inputs.collect(out, p + ".ln_inputs");
        layers_[l].cross_attn.collect(out, p + ".cross_attn");
        layers_[l].ln_ffn.collect(out, p + ".ln_ffn");
        layers_[l].ffn.collect(out, p + ".ffn");
    }
    ln_out_.collect(out, prefix + ".ln_out");
}

UNIREC_NAMESPACE_END
