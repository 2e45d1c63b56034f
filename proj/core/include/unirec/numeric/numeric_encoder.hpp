#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "unirec/numeric/features.hpp"
#include "unirec/tensor/gradcheck.hpp"
#include "unirec/tensor/tensor.hpp"

UNIREC_NAMESPACE_BEGIN

/// Scalar encoder: Fourier + raw channels, a linear projection plus a
/// residual GELU branch, and a two-layer decoder back to the scalar.
class NumericEncoder {
  public:
    NumericEncoder(NumericEncoderConfig config, std::uint64_t seed);

    const NumericEncoderConfig& config() const { return config_; }
    std::size_t width() const { return config_.d_out; }

    /// Constant feature matrix [B x (2 n_freq + 2)].
    Tensor features(std::span<const double> xs) const;
    /// Embeddings [B x d]; differentiable w.r.t. the encoder parameters.
    Tensor encode(std::span<const double> xs) const;
    /// Scalar reconstructions [B x 1] from embeddings [B x d].
    Tensor decode(const Tensor& embeddings) const;
    std::vector<Real> encode_one(double x) const;

    /// Encoder and decoder tensors, names prefixed "numeric.".
    NamedTensors parameters() const;
    void set_trainable(bool trainable);

  private:
    NumericEncoderConfig config_;
    Tensor w_lin_, b_lin_;
    Tensor w_hidden_, b_hidden_, w_out_, b_out_;
    Tensor w_dec1_, b_dec1_, w_dec2_, b_dec2_;
};

struct NumericLossWeights {
    double additivity = 1.0;
    double invertibility = 1.0;
    double distance = 1.0;
    double margin = 0.1;
};

struct NumericLosses {
    Tensor additivity;
    Tensor invertibility;
    Tensor distance;
    Tensor total;
};

/// Additivity, invertibility and triplet distance losses on one batch of
/// scalars. Pairs are (x_i, x_{i+1}); each anchor x_i is compared with
/// x_{i+1} and x_{i+2}, the numerically closer one serving as positive.
/// Triplets with equal distances are skipped.
NumericLosses numeric_pretrain_losses(const NumericEncoder& encoder, std::span<const double> batch,
                                      const NumericLossWeights& weights = {});

struct NumericFitConfig {
    std::size_t steps = 500;
    std::size_t batch_size = 64;
    double lr = 3e-3;
    std::size_t warmup_steps = 20;
    double low = -10.0;
    double high = 10.0;
    std::uint64_t seed = 0;
    NumericLossWeights weights;
};

struct NumericFitLog {
    std::vector<double> additivity;
    std::vector<double> invertibility;
    std::vector<double> distance;
    std::vector<double> total;
};

/// Trains the encoder on uniform scalars with its own losses.
NumericFitLog fit_numeric_encoder(NumericEncoder& encoder, const NumericFitConfig& config);

/// Mean ||E(a+b) - E(a) - E(b)||^2 over the given pairs.
double additivity_violation(const NumericEncoder& encoder, std::span<const double> a, std::span<const double> b);

/// Frozen timestamp encoder: secular + cyclic channels through a fixed
/// projection to d.
class TimestampEncoder {
  public:
    TimestampEncoder(std::size_t d, std::uint64_t seed);
    std::size_t width() const { return d_; }
    std::vector<Real> encode(std::int64_t t, const TimeSpan& span) const;
    NamedTensors parameters() const;

  private:
    std::size_t d_;
    Tensor projection_;
};

/// Frozen geo encoder: unit-sphere coordinates through a fixed projection.
class GeoEncoder {
  public:
    GeoEncoder(std::size_t d, std::uint64_t seed);
    std::size_t width() const { return d_; }
    std::vector<Real> encode(double lat_deg, double lon_deg) const;
    NamedTensors parameters() const;

  private:
    std::size_t d_;
    Tensor projection_;
};

/// Affine normalization (x - center) * scale with the scale clamped to
/// [1/scale_bound, scale_bound].
struct FieldNormalizer {
    double center = 0.0;
    double scale = 1.0;

    double apply(double x) const { return (x - center) * scale; }
    /// Maps the observed range onto [-half_width, half_width] when the bound
    /// allows it.
    static FieldNormalizer fit(std::span<const double> values, double scale_bound, double half_width = 5.0);
};

/// Normalization statistics fitted once and frozen with the checkpoint.
struct NumericStats {
    std::map<std::string, FieldNormalizer> fields;
    TimeSpan time_span;
};

UNIREC_NAMESPACE_END
