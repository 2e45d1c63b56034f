#include "unirec/numeric/numeric_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "unirec/tensor/ops.hpp"
#include "unirec/train/optim.hpp"

UNIREC_NAMESPACE_BEGIN

namespace {

Tensor init_weight(std::mt19937_64& rng, std::size_t fan_in, std::size_t fan_out, double gain = 1.0) {
    return Tensor::randn({fan_in, fan_out}, rng, static_cast<Real>(gain / std::sqrt(static_cast<double>(fan_in))));
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return add(matmul(x, w), b); }

std::vector<Real> row_vector(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

NumericEncoder::NumericEncoder(NumericEncoderConfig config, std::uint64_t seed) : config_(config) {
    config_.validate();
    std::mt19937_64 rng(seed);
    const std::size_t f = config_.feature_width(), d = config_.d_out;
    w_lin_ = init_weight(rng, f, d);
    b_lin_ = Tensor::zeros({d});
    w_hidden_ = init_weight(rng, f, d);
    b_hidden_ = Tensor::zeros({d});
    w_out_ = init_weight(rng, d, d, 0.5);
    b_out_ = Tensor::zeros({d});
    w_dec1_ = init_weight(rng, d, d);
    b_dec1_ = Tensor::zeros({d});
    w_dec2_ = init_weight(rng, d, 1);
    b_dec2_ = Tensor::zeros({1});
    set_trainable(true);
}

Tensor NumericEncoder::features(std::span<const double> xs) const {
    const std::size_t f = config_.feature_width();
    std::vector<Real> data;
    data.reserve(xs.size() * f);
    for (double x : xs) {
        for (double v : scalar_features(x, config_)) data.push_back(static_cast<Real>(v));
    }
    return Tensor::from_data({xs.size(), f}, std::move(data));
}

Tensor NumericEncoder::encode(std::span<const double> xs) const {
    Tensor phi = features(xs);
    Tensor residual = linear(gelu(linear(phi, w_hidden_, b_hidden_)), w_out_, b_out_);
    return add(linear(phi, w_lin_, b_lin_), residual);
}

Tensor NumericEncoder::decode(const Tensor& embeddings) const {
    return linear(gelu(linear(embeddings, w_dec1_, b_dec1_)), w_dec2_, b_dec2_);
}

std::vector<Real> NumericEncoder::encode_one(double x) const {
    NoGradGuard guard;
    const double xs[1] = {x};
    return row_vector(encode(xs));
}

NamedTensors NumericEncoder::parameters() const {
    return {{"numeric.w_lin", w_lin_},       {"numeric.b_lin", b_lin_},   {"numeric.w_hidden", w_hidden_},
            {"numeric.b_hidden", b_hidden_}, {"numeric.w_out", w_out_},   {"numeric.b_out", b_out_},
            {"numeric.w_dec1", w_dec1_},     {"numeric.b_dec1", b_dec1_}, {"numeric.w_dec2", w_dec2_},
            {"numeric.b_dec2", b_dec2_}};
}

void NumericEncoder::set_trainable(bool trainable) {
    for (auto& [name, t] : parameters()) {
        Tensor handle = t;
        handle.set_requires_grad(trainable);
    }
}

NumericLosses numeric_pretrain_losses(const NumericEncoder& encoder, std::span<const double> batch,
                                      const NumericLossWeights& weights) {
    const std::size_t n = batch.size();
    if (n < 3) throw ConfigError("numeric pretraining needs a batch of at least 3 scalars");

    std::vector<double> sums(n);
    for (std::size_t i = 0; i < n; ++i) sums[i] = batch[i] + batch[(i + 1) % n];

    Tensor e = encoder.encode(batch);
    Tensor e_sum = encoder.encode(sums);
    std::vector<std::size_t> next(n);
    for (std::size_t i = 0; i < n; ++i) next[i] = (i + 1) % n;
    Tensor e_next = gather_rows(e, next);

    NumericLosses out;
    // mean over pairs of the squared l2 violation
    out.additivity = mean(row_sum(square(sub(sub(e_sum, e), e_next))));

    std::vector<Real> targets(batch.begin(), batch.end());
    Tensor target = Tensor::from_data({n, 1}, std::move(targets));
    out.invertibility = mean(square(sub(encoder.decode(e), target)));

    std::vector<std::size_t> anchors, positives, negatives;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = (i + 1) % n, k = (i + 2) % n;
        const double dj = std::abs(batch[i] - batch[j]);
        const double dk = std::abs(batch[i] - batch[k]);
        if (dj == dk) continue;
        anchors.push_back(i);
        positives.push_back(dj < dk ? j : k);
        negatives.push_back(dj < dk ? k : j);
    }
    if (anchors.empty()) {
        out.distance = Tensor::scalar(Real(0));
    } else {
        const Tensor tiny = Tensor::full({1}, Real(1e-12));
        Tensor ea = gather_rows(e, anchors);
        Tensor d_pos = sqrt(add(row_sum(square(sub(ea, gather_rows(e, positives)))), tiny));
        Tensor d_neg = sqrt(add(row_sum(square(sub(ea, gather_rows(e, negatives)))), tiny));
        const Tensor margin = Tensor::full({1}, static_cast<Real>(weights.margin));
        out.distance = mean(relu(add(sub(d_pos, d_neg), margin)));
    }

    out.total = add(add(scale(out.additivity, static_cast<Real>(weights.additivity)),
                        scale(out.invertibility, static_cast<Real>(weights.invertibility))),
                    scale(out.distance, static_cast<Real>(weights.distance)));
    return out;
}

NumericFitLog fit_numeric_encoder(NumericEncoder& encoder, const NumericFitConfig& config) {
    encoder.set_trainable(true);
    AdamWConfig opt_cfg;
    opt_cfg.lr = config.lr;
    opt_cfg.weight_decay = 0.0;
    AdamW opt(encoder.parameters(), opt_cfg);
    LrSchedule schedule{config.lr, config.warmup_steps, config.steps};
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> dist(config.low, config.high);

    NumericFitLog log;
    std::vector<double> batch(config.batch_size);
    for (std::size_t step = 1; step <= config.steps; ++step) {
        for (double& x : batch) x = dist(rng);
        opt.zero_grad();
        NumericLosses losses = numeric_pretrain_losses(encoder, batch, config.weights);
        losses.total.backward();
        clip_grad_norm(opt.params(), 1.0);
        opt.step(schedule.at(step));
        log.additivity.push_back(losses.additivity.item());
        log.invertibility.push_back(losses.invertibility.item());
        log.distance.push_back(losses.distance.item());
        log.total.push_back(losses.total.item());
    }
    opt.zero_grad();
    encoder.set_trainable(false);
    return log;
}

double additivity_violation(const NumericEncoder& encoder, std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) throw ConfigError("additivity_violation needs equal non-empty samples");
    NoGradGuard guard;
    std::vector<double> sums(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) sums[i] = a[i] + b[i];
    Tensor v = sub(sub(encoder.encode(sums), encoder.encode(a)), encoder.encode(b));
    return static_cast<double>(mean(row_sum(square(v))).item());
}

TimestampEncoder::TimestampEncoder(std::size_t d, std::uint64_t seed) : d_(d) {
    std::mt19937_64 rng(seed);
    projection_ = init_weight(rng, kTimeFeatureWidth, d);
}

std::vector<Real> TimestampEncoder::encode(std::int64_t t, const TimeSpan& span) const {
    const auto f = timestamp_features(t, span);
    std::vector<Real> out(d_, Real(0));
    auto w = projection_.data();
    for (std::size_t i = 0; i < kTimeFeatureWidth; ++i)
        for (std::size_t c = 0; c < d_; ++c) out[c] += static_cast<Real>(f[i]) * w[i * d_ + c];
    return out;
}

NamedTensors TimestampEncoder::parameters() const { return {{"time.projection", projection_}}; }

GeoEncoder::GeoEncoder(std::size_t d, std::uint64_t seed) : d_(d) {
    std::mt19937_64 rng(seed);
    projection_ = init_weight(rng, 3, d);
}

std::vector<Real> GeoEncoder::encode(double lat_deg, double lon_deg) const {
    const auto f = geo_features(lat_deg, lon_deg);
    std::vector<Real> out(d_, Real(0));
    auto w = projection_.data();
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t c = 0; c < d_; ++c) out[c] += static_cast<Real>(f[i]) * w[i * d_ + c];
    return out;
}

NamedTensors GeoEncoder::parameters() const { return {{"geo.projection", projection_}}; }

FieldNormalizer FieldNormalizer::fit(std::span<const double> values, double scale_bound, double half_width) {
    FieldNormalizer norm;
    if (values.empty()) return norm;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    norm.center = 0.5 * (*lo + *hi);
    const double half_range = 0.5 * (*hi - *lo);
    const double raw_scale = half_range > 0 ? half_width / half_range : 1.0;
    norm.scale = std::clamp(raw_scale, 1.0 / scale_bound, scale_bound);
    return norm;
}

UNIREC_NAMESPACE_END
