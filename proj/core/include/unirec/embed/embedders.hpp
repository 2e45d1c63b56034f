#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "unirec/embed/sidecar.hpp"
#include "unirec/embed/values.hpp"
#include "unirec/numeric/numeric_encoder.hpp"

UNIREC_NAMESPACE_BEGIN

/// Lowercased alphanumeric tokens. Bytes >= 0x80 count as word characters
/// so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view s);

/// Unit vector with Gaussian entries drawn from a generator seeded by the
/// string hash. Used as the pseudo-embedding of opaque references.
std::vector<double> pseudo_random_unit(std::string_view key, std::size_t width, std::uint64_t seed);

/// Frozen native -> d projection with N(0, 1/d) entries, so unit inputs
/// map to vectors of norm close to one.
class FrozenProjection {
  public:
    FrozenProjection() = default;
    FrozenProjection(std::size_t in, std::size_t out, std::uint64_t seed);

    std::size_t in_width() const { return in_; }
    std::size_t out_width() const { return out_; }
    std::vector<Real> apply(const std::vector<double>& x) const;

  private:
    std::size_t in_ = 0, out_ = 0;
    std::vector<double> w_;  // in x out, row-major
};

/// Where a value comes from; sidecar lookups key on both fields.
struct EmbedContext {
    std::string entity_id;
    std::string attribute;
};

class ValueEmbedder {
  public:
    virtual ~ValueEmbedder() = default;
    virtual Modality modality() const = 0;
    virtual std::size_t native_width() const = 0;
    virtual std::size_t width() const = 0;
    /// Width-d embedding; throws DataError when the payload does not match
    /// the modality.
    virtual std::vector<Real> embed(const AttributeValue& value, const EmbedContext& ctx) const = 0;
};

/// Hashed bag of words with signed buckets, l2-normalized, then projected.
class TextEmbedder final : public ValueEmbedder {
  public:
    TextEmbedder(std::size_t d, std::uint64_t seed, std::size_t native_width = 256);

    Modality modality() const override { return Modality::text; }
    std::size_t native_width() const override { return native_; }
    std::size_t width() const override { return projection_.out_width(); }
    std::vector<Real> embed(const AttributeValue& value, const EmbedContext& ctx) const override;

    /// Unit-norm native vector. Throws DataError on blank input.
    std::vector<double> native(std::string_view s) const;
    std::vector<Real> project(const std::vector<double>& native) const { return projection_.apply(native); }
    std::vector<Real> embed_text(std::string_view s) const { return project(native(s)); }

  private:
    std::size_t native_;
    std::uint64_t seed_;
    FrozenProjection projection_;
};

/// Text of "category: <label>"; several labels average their native
/// vectors and renormalize before the projection.
class CategoricalEmbedder final : public ValueEmbedder {
  public:
    explicit CategoricalEmbedder(std::shared_ptr<const TextEmbedder> text) : text_(std::move(text)) {}

    Modality modality() const override { return Modality::categorical; }
    std::size_t native_width() const override { return text_->native_width(); }
    std::size_t width() const override { return text_->width(); }
    std::vector<Real> embed(const AttributeValue& value, const EmbedContext& ctx) const override;

    std::vector<double> native(const std::vector<std::string>& labels) const;
    std::vector<Real> embed_labels(const std::vector<std::string>& labels) const {
        return text_->project(native(labels));
    }

  private:
    std::shared_ptr<const TextEmbedder> text_;
};

/// Sidecar vectors (any width, each width with its own frozen projection)
/// or, failing that, a pseudo-embedding of the reference ids.
class ImageEmbedder final : public ValueEmbedder {
  public:
    ImageEmbedder(std::size_t d, std::uint64_t seed, std::shared_ptr<const FeatureSidecar> sidecar, bool strict,
                  std::size_t fallback_width = 64);

    Modality modality() const override { return Modality::image; }
    std::size_t native_width() const override { return fallback_width_; }
    std::size_t width() const override { return d_; }
    std::vector<Real> embed(const AttributeValue& value, const EmbedContext& ctx) const override;

    /// Projects a sidecar-style native vector of any registered width.
    std::vector<Real> project(const std::vector<float>& native) const;

  private:
    std::size_t d_;
    std::uint64_t seed_;
    std::shared_ptr<const FeatureSidecar> sidecar_;
    bool strict_;
    std::size_t fallback_width_;
    std::map<std::size_t, FrozenProjection> projections_;
};

/// Numeric encoder behind per-field normalization.
class NumberEmbedder final : public ValueEmbedder {
  public:
    NumberEmbedder(std::shared_ptr<const NumericEncoder> encoder, std::map<std::string, FieldNormalizer> fields)
        : encoder_(std::move(encoder)), fields_(std::move(fields)) {}

    Modality modality() const override { return Modality::number; }
    std::size_t native_width() const override { return encoder_->config().feature_width(); }
    std::size_t width() const override { return encoder_->width(); }
    std::vector<Real> embed(const AttributeValue& value, const EmbedContext& ctx) const override;

    double normalize(const std::string& field, double x) const;

  private:
    std::shared_ptr<const NumericEncoder> encoder_;
    std::map<std::string, FieldNormalizer> fields_;
};

class TimestampValueEmbedder final : public ValueEmbedder {
  public:
    TimestampValueEmbedder(std::size_t d, std::uint64_t seed, TimeSpan span) : encoder_(d, seed), span_(span) {}

    Modality modality() const override { return Modality::timestamp; }
    std::size_t native_width() const override { return kTimeFeatureWidth; }
    std::size_t width() const override { return encoder_.width(); }
    std::vector<Real> embed(const AttributeValue& value, const EmbedContext& ctx) const override;

  private:
    TimestampEncoder encoder_;
    TimeSpan span_;
};

class GeoValueEmbedder final : public ValueEmbedder {
  public:
    GeoValueEmbedder(std::size_t d, std::uint64_t seed) : encoder_(d, seed) {}

    Modality modality() const override { return Modality::geopoint; }
    std::size_t native_width() const override { return 3; }
    std::size_t width() const override { return encoder_.width(); }
    std::vector<Real> embed(const AttributeValue& value, const EmbedContext& ctx) const override;

  private:
    GeoEncoder encoder_;
};

struct RegistryOptions {
    std::size_t d = 64;
    std::uint64_t seed = 0x5eed;
    std::size_t text_native_width = 256;
    std::size_t image_fallback_width = 64;
    /// Image references must resolve through the sidecar.
    bool strict_images = false;
};

/// One frozen embedder per modality tag. For text and categorical
/// attributes a sidecar record for (entity, attribute) takes precedence, so
/// real backbone vectors can be dropped in.
class EmbedderRegistry {
  public:
    EmbedderRegistry(const RegistryOptions& options, std::shared_ptr<const NumericEncoder> numeric,
                     NumericStats stats, std::shared_ptr<const FeatureSidecar> sidecar = nullptr);

    std::size_t width() const { return options_.d; }
    const ValueEmbedder& embedder(Modality m) const { return *embedders_[static_cast<std::size_t>(m)]; }
    const TextEmbedder& text() const { return *text_; }
    const ImageEmbedder& image() const;
    const NumberEmbedder& number() const;

    /// Width-d value embedding; the attribute name is attached to any error.
    std::vector<Real> embed(Modality m, const AttributeValue& value, const EmbedContext& ctx) const;

  private:
    RegistryOptions options_;
    std::shared_ptr<const TextEmbedder> text_;
    std::shared_ptr<const FeatureSidecar> sidecar_;
    std::array<std::unique_ptr<ValueEmbedder>, kModalityCount> embedders_;
    // sidecar overrides for text and categorical attributes, one per width
    std::map<std::size_t, FrozenProjection> override_projections_;
};

UNIREC_NAMESPACE_END
