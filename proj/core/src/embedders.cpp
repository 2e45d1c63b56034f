#include "unirec/embed/embedders.hpp"

#include <cctype>
#include <cmath>
#include <random>

UNIREC_NAMESPACE_BEGIN

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t basis = 14695981039346656037ull) {
    std::uint64_t h = basis;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// splitmix64 finalizer; spreads FNV's weak low bits
std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) { return mix(seed ^ mix(salt)); }

bool is_word_byte(unsigned char c) { return c >= 0x80 || std::isalnum(c); }

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

double normalize_in_place(std::vector<double>& v) {
    double n2 = 0;
    for (double x : v) n2 += x * x;
    const double n = std::sqrt(n2);
    if (n > 0) {
        for (double& x : v) x /= n;
    }
    return n;
}

std::vector<double> mean_unit(const std::vector<std::vector<double>>& parts) {
    std::vector<double> out(parts.front().size(), 0.0);
    for (const auto& p : parts)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += p[i];
    for (double& x : out) x /= static_cast<double>(parts.size());
    return out;
}

const std::vector<std::string>& labels_of(const AttributeValue& value, Modality m) {
    if (!payload_matches(m, value)) {
        throw DataError(std::string(modality_name(m)) + " attribute expects a list of strings");
    }
    return std::get<std::vector<std::string>>(value);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : s) {
        if (is_word_byte(c)) {
            cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

std::vector<double> pseudo_random_unit(std::string_view key, std::size_t width, std::uint64_t seed) {
    std::mt19937_64 rng(mix(fnv1a(key) ^ seed));
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> v(width);
    do {
        for (double& x : v) x = dist(rng);
    } while (normalize_in_place(v) == 0.0);
    return v;
}

FrozenProjection::FrozenProjection(std::size_t in, std::size_t out, std::uint64_t seed)
    : in_(in), out_(out), w_(in * out) {
    if (in == 0 || out == 0) throw ConfigError("projection widths must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(out)));
    for (double& x : w_) x = dist(rng);
}

std::vector<Real> FrozenProjection::apply(const std::vector<double>& x) const {
    if (x.size() != in_) {
        throw ShapeError("projection expects width " + std::to_string(in_) + ", got " + std::to_string(x.size()));
    }
    std::vector<double> acc(out_, 0.0);
    for (std::size_t i = 0; i < in_; ++i) {
        if (x[i] == 0.0) continue;
        const double* row = w_.data() + i * out_;
        for (std::size_t c = 0; c < out_; ++c) acc[c] += x[i] * row[c];
    }
    return {acc.begin(), acc.end()};
}

// ---- text -------------------------------------------------------------------

TextEmbedder::TextEmbedder(std::size_t d, std::uint64_t seed, std::size_t native_width)
    : native_(native_width), seed_(seed), projection_(native_width, d, derive_seed(seed, 0x7e47)) {}

std::vector<double> TextEmbedder::native(std::string_view s) const {
    const std::string trimmed = trim(s);
    if (trimmed.empty()) throw DataError("cannot embed blank text");
    std::vector<std::string> tokens = tokenize(trimmed);
    // punctuation-only strings still deserve a stable embedding
    if (tokens.empty()) tokens.push_back(trimmed);
    std::vector<double> v(native_, 0.0);
    for (const auto& tok : tokens) {
        const std::uint64_t h = mix(fnv1a(tok) ^ seed_);
        v[h % native_] += (h >> 63) ? -1.0 : 1.0;
    }
    if (normalize_in_place(v) == 0.0) return pseudo_random_unit(trimmed, native_, seed_);
    return v;
}

std::vector<Real> TextEmbedder::embed(const AttributeValue& value, const EmbedContext&) const {
    if (!payload_matches(Modality::text, value)) throw DataError("text attribute expects a string");
    return embed_text(std::get<std::string>(value));
}

// ---- categorical ------------------------------------------------------------

std::vector<double> CategoricalEmbedder::native(const std::vector<std::string>& labels) const {
    std::vector<std::vector<double>> parts;
    for (const auto& raw : labels) {
        const std::string label = trim(raw);
        if (!label.empty()) parts.push_back(text_->native("category: " + label));
    }
    if (parts.empty()) throw DataError("categorical attribute has no labels");
    if (parts.size() == 1) return parts.front();
    std::vector<double> v = mean_unit(parts);
    if (normalize_in_place(v) == 0.0) throw NumericError("categorical labels cancel to a zero vector");
    return v;
}

std::vector<Real> CategoricalEmbedder::embed(const AttributeValue& value, const EmbedContext&) const {
    return embed_labels(labels_of(value, Modality::categorical));
}

// ---- image ------------------------------------------------------------------

ImageEmbedder::ImageEmbedder(std::size_t d, std::uint64_t seed, std::shared_ptr<const FeatureSidecar> sidecar,
                             bool strict, std::size_t fallback_width)
    : d_(d), seed_(seed), sidecar_(std::move(sidecar)), strict_(strict), fallback_width_(fallback_width) {
    std::vector<std::size_t> widths{fallback_width_};
    if (sidecar_) {
        for (std::size_t w : sidecar_->widths()) widths.push_back(w);
    }
    for (std::size_t w : widths) {
        if (!projections_.count(w)) projections_.emplace(w, FrozenProjection(w, d_, derive_seed(seed_, w)));
    }
}

std::vector<Real> ImageEmbedder::project(const std::vector<float>& native) const {
    auto it = projections_.find(native.size());
    if (it == projections_.end()) {
        throw DataError("no image projection for native width " + std::to_string(native.size()));
    }
    std::vector<double> x(native.begin(), native.end());
    if (normalize_in_place(x) == 0.0) throw DataError("image feature vector is all zeros");
    return it->second.apply(x);
}

std::vector<Real> ImageEmbedder::embed(const AttributeValue& value, const EmbedContext& ctx) const {
    const auto& refs = labels_of(value, Modality::image);
    if (sidecar_) {
        if (const auto* v = sidecar_->find(ctx.entity_id, ctx.attribute)) return project(*v);
    }
    if (strict_) {
        throw DataError("missing image feature for " + ctx.entity_id + "/" + ctx.attribute);
    }
    std::vector<std::vector<double>> parts;
    for (const auto& r : refs) {
        if (!r.empty()) parts.push_back(pseudo_random_unit(r, fallback_width_, seed_));
    }
    if (parts.empty()) throw DataError("image attribute has no references");
    std::vector<double> v = parts.size() == 1 ? parts.front() : mean_unit(parts);
    if (normalize_in_place(v) == 0.0) throw NumericError("image references cancel to a zero vector");
    return projections_.at(fallback_width_).apply(v);
}

// ---- numbers, time, geo -----------------------------------------------------

double NumberEmbedder::normalize(const std::string& field, double x) const {
    auto it = fields_.find(field);
    return it == fields_.end() ? x : it->second.apply(x);
}

std::vector<Real> NumberEmbedder::embed(const AttributeValue& value, const EmbedContext& ctx) const {
    if (!payload_matches(Modality::number, value)) throw DataError("number attribute expects a number");
    return encoder_->encode_one(normalize(ctx.attribute, std::get<double>(value)));
}

std::vector<Real> TimestampValueEmbedder::embed(const AttributeValue& value, const EmbedContext&) const {
    if (!payload_matches(Modality::timestamp, value)) throw DataError("timestamp attribute expects an integer");
    return encoder_.encode(std::get<std::int64_t>(value), span_);
}

std::vector<Real> GeoValueEmbedder::embed(const AttributeValue& value, const EmbedContext&) const {
    if (!payload_matches(Modality::geopoint, value)) throw DataError("geopoint attribute expects lat/lon");
    const auto& g = std::get<GeoPoint>(value);
    return encoder_.encode(g.lat, g.lon);
}

// ---- registry ---------------------------------------------------------------

EmbedderRegistry::EmbedderRegistry(const RegistryOptions& options, std::shared_ptr<const NumericEncoder> numeric,
                                   NumericStats stats, std::shared_ptr<const FeatureSidecar> sidecar)
    : options_(options), sidecar_(std::move(sidecar)) {
    if (!numeric) throw ConfigError("embedder registry needs a numeric encoder");
    if (numeric->width() != options.d) {
        throw ConfigError("numeric encoder width " + std::to_string(numeric->width()) + " does not match d = " +
                          std::to_string(options.d));
    }
    text_ = std::make_shared<TextEmbedder>(options.d, derive_seed(options.seed, 1), options.text_native_width);
    auto put = [&](std::unique_ptr<ValueEmbedder> e) {
        embedders_[static_cast<std::size_t>(e->modality())] = std::move(e);
    };
    put(std::make_unique<TextEmbedder>(*text_));
    put(std::make_unique<CategoricalEmbedder>(text_));
    put(std::make_unique<ImageEmbedder>(options.d, derive_seed(options.seed, 2), sidecar_, options.strict_images,
                                        options.image_fallback_width));
    put(std::make_unique<NumberEmbedder>(std::move(numeric), std::move(stats.fields)));
    put(std::make_unique<TimestampValueEmbedder>(options.d, derive_seed(options.seed, 3), stats.time_span));
    put(std::make_unique<GeoValueEmbedder>(options.d, derive_seed(options.seed, 4)));
    if (sidecar_) {
        for (std::size_t w : sidecar_->widths()) {
            override_projections_.emplace(w, FrozenProjection(w, options.d, derive_seed(options.seed, 0x51de + w)));
        }
    }
}

const ImageEmbedder& EmbedderRegistry::image() const {
    return static_cast<const ImageEmbedder&>(embedder(Modality::image));
}

const NumberEmbedder& EmbedderRegistry::number() const {
    return static_cast<const NumberEmbedder&>(embedder(Modality::number));
}

std::vector<Real> EmbedderRegistry::embed(Modality m, const AttributeValue& value, const EmbedContext& ctx) const {
    std::vector<Real> out;
    try {
        if (!payload_matches(m, value)) {
            throw DataError(std::string("value does not match modality ") + modality_name(m));
        }
        const std::vector<float>* side = nullptr;
        if (sidecar_ && (m == Modality::text || m == Modality::categorical)) {
            side = sidecar_->find(ctx.entity_id, ctx.attribute);
        }
        if (side) {
            std::vector<double> x(side->begin(), side->end());
            if (normalize_in_place(x) == 0.0) throw DataError("sidecar feature vector is all zeros");
            out = override_projections_.at(side->size()).apply(x);
        } else {
            out = embedder(m).embed(value, ctx);
        }
    } catch (const DataError& e) {
        throw DataError("attribute '" + ctx.attribute + "': " + e.what());
    } catch (const NumericError& e) {
        throw NumericError("attribute '" + ctx.attribute + "': " + e.what());
    }
    for (Real v : out) {
        if (!std::isfinite(v)) throw NumericError("attribute '" + ctx.attribute + "': non-finite embedding");
    }
    return out;
}

UNIREC_NAMESPACE_END
