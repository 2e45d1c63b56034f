#pragma once

// Small hand-built dataset shared by the model and training tests.

#include <memory>

#include "unirec/data/records.hpp"
#include "unirec/data/sequences.hpp"
#include "unirec/data/synthetic.hpp"
#include "unirec/model/feature_store.hpp"

namespace toy {

using namespace unirec;

inline SchemaRegistry schema() {
    return SchemaRegistry("toy", {{"title", Modality::text, Level::item},
                                  {"category", Modality::categorical, Level::item},
                                  {"price", Modality::number, Level::item},
                                  {"image", Modality::image, Level::item},
                                  {"timestamp", Modality::timestamp, Level::interaction},
                                  {"text", Modality::text, Level::interaction},
                                  {"rating", Modality::number, Level::interaction}});
}

inline Review review(const char* text, double rating) {
    Review r;
    r.text = text;
    r.rating = rating;
    return r;
}

// Items: i1 {title, price, image}, i2 {title, category}, i3 {title},
// i4 {category, price} (no text), i5 an exact copy of i3.
// Interactions 0-5 belong to u1 in time order, 6-8 to u2.
// 6 and 7 share the item and lack reviews; they differ only in timestamp.
inline Dataset dataset() {
    Dataset data;
    data.schema = schema();
    using V = std::vector<std::string>;
    data.items = {
        {"i1", {{"title", Modality::text, std::string("red lipstick")},
                {"price", Modality::number, 6.99},
                {"image", Modality::image, V{"i1.jpg"}}}},
        {"i2", {{"title", Modality::text, std::string("cotton onesie")},
                {"category", Modality::categorical, V{"Baby", "Clothing"}}}},
        {"i3", {{"title", Modality::text, std::string("stroller wheel")}}},
        {"i4", {{"category", Modality::categorical, V{"Tools"}}, {"price", Modality::number, 24.5}}},
        {"i5", {{"title", Modality::text, std::string("stroller wheel")}}},
    };
    const std::int64_t t0 = 1'600'000'000;
    data.interactions = {
        {"u1", "i1", t0, std::nullopt, review("great colour", 5.0)},
        {"u1", "i2", t0 + 3600, std::nullopt, std::nullopt},
        {"u1", "i3", t0 + 86400, std::nullopt, review("broke fast", 1.0)},
        {"u1", "i4", t0 + 90000, std::nullopt, std::nullopt},
        {"u1", "i2", t0 + 99000, std::nullopt, review("soft", 4.0)},
        {"u1", "i1", t0 + 120000, std::nullopt, std::nullopt},
        {"u2", "i3", t0 + 5000, std::nullopt, std::nullopt},
        {"u2", "i3", t0 + 400000, std::nullopt, std::nullopt},
        {"u2", "i1", t0 + 500000, std::nullopt, review("ok", 3.0)},
    };
    return data;
}

inline EmbedderRegistry registry(std::size_t d) {
    RegistryOptions opts;
    opts.d = d;
    NumericStats stats;
    stats.time_span = {1'599'000'000, 1'601'000'000};
    auto enc = std::make_shared<NumericEncoder>(NumericEncoderConfig::for_width(d), 11);
    return EmbedderRegistry(opts, enc, stats);
}

inline FeatureStore store(std::size_t d) {
    const auto data = dataset();
    return FeatureStore::build(data, registry(d), {1'599'000'000, 1'601'000'000});
}

}  // namespace toy

namespace toy {

struct Synthetic {
    SyntheticDataset raw;
    FeatureStore fs;
    std::vector<UserSequence> users;
    Splits splits;
};

// A few dozen users over the planted-structure generator.
inline Synthetic synthetic(std::size_t d, std::uint64_t seed, std::size_t n_users = 48, std::size_t n_items = 40) {
    SyntheticSpec spec;
    spec.n_users = n_users;
    spec.n_items = n_items;
    spec.n_clusters = 4;
    spec.image_dim = 8;
    spec.seed = seed;
    Synthetic s{generate_synthetic(spec), {}, {}, {}};
    RegistryOptions opts;
    opts.d = d;
    NumericStats stats;
    stats.time_span = {spec.time_start, spec.time_end};
    auto enc = std::make_shared<NumericEncoder>(NumericEncoderConfig::for_width(d), seed + 1);
    EmbedderRegistry reg(opts, enc, stats, std::make_shared<FeatureSidecar>(s.raw.sidecar));
    s.fs = FeatureStore::build(s.raw.data, reg, stats.time_span);
    s.users = build_sequences(s.raw.data);
    s.splits = make_splits(s.users, 20);
    return s;
}

}  // namespace toy
