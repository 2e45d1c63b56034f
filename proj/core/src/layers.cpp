#include "unirec/model/layers.hpp"

#include <cmath>

UNIREC_NAMESPACE_BEGIN

Linear::Linear(std::size_t in, std::size_t out, std::mt19937_64& rng, double gain)
    : w(Tensor::randn({in, out}, rng, static_cast<Real>(gain / std::sqrt(static_cast<double>(in))), true)),
      b(Tensor::zeros({out}, true)) {}

void Linear::collect(NamedTensors& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".w", w);
    out.emplace_back(prefix + ".b", b);
}

LayerNorm::LayerNorm(std::size_t d) : gamma(Tensor::full({d}, Real(1), true)), beta(Tensor::zeros({d}, true)) {}

void LayerNorm::collect(NamedTensors& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".gamma", gamma);
    out.emplace_back(prefix + ".beta", beta);
}

MultiHeadAttention::MultiHeadAttention(std::size_t d, std::size_t heads_, std::mt19937_64& rng, double out_gain)
    : q(d, d, rng), k(d, d, rng), v(d, d, rng), o(d, d, rng, out_gain), heads(heads_) {
    if (heads == 0 || d % heads != 0) {
        throw ConfigError("attention width " + std::to_string(d) + " is not divisible by " + std::to_string(heads) +
                          " heads");
    }
}

Tensor MultiHeadAttention::operator()(const Tensor& xq, const Tensor& xkv, std::span<const AttentionSpan> spans,
                                      std::span<const unsigned char> kv_mask) const {
    return o(segment_attention(q(xq), k(xkv), v(xkv), spans, heads, kv_mask));
}

void MultiHeadAttention::collect(NamedTensors& out, const std::string& prefix) const {
    q.collect(out, prefix + ".q");
    k.collect(out, prefix + ".k");
    v.collect(out, prefix + ".v");
    o.collect(out, prefix + ".o");
}

FeedForward::FeedForward(std::size_t d, std::size_t mult, std::mt19937_64& rng, double out_gain)
    : up(d, d * mult, rng), down(d * mult, d, rng, out_gain) {}

void FeedForward::collect(NamedTensors& out, const std::string& prefix) const {
    up.collect(out, prefix + ".up");
    down.collect(out, prefix + ".down");
}

EncoderLayer::EncoderLayer(std::size_t d, std::size_t heads, std::size_t ffn_mult, std::mt19937_64& rng,
                           double out_gain)
    : ln_attn(d), ln_ffn(d), attn(d, heads, rng, out_gain), ffn(d, ffn_mult, rng, out_gain) {}

Tensor EncoderLayer::operator()(const Tensor& x, std::span<const AttentionSpan> spans) const {
    const Tensor h = ln_attn(x);
    const Tensor y = add(x, attn(h, h, spans));
    return add(y, ffn(ln_ffn(y)));
}

void EncoderLayer::collect(NamedTensors& out, const std::string& prefix) const {
    ln_attn.collect(out, prefix + ".ln_attn");
    attn.collect(out, prefix + ".attn");
    ln_ffn.collect(out, prefix + ".ln_ffn");
    ffn.collect(out, prefix + ".ffn");
}

Tensor repeat_rows(const Tensor& x, std::size_t times) {
    std::vector<std::size_t> idx;
    idx.reserve(x.rows() * times);
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t t = 0; t < times; ++t) idx.push_back(r);
    return gather_rows(x, idx);
}

Tensor tile_rows(const Tensor& x, std::size_t times) {
    std::vector<std::size_t> idx;
    idx.reserve(x.rows() * times);
    for (std::size_t t = 0; t < times; ++t)
        for (std::size_t r = 0; r < x.rows(); ++r) idx.push_back(r);
    return gather_rows(x, idx);
}

UNIREC_NAMESPACE_END
