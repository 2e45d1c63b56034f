#include "unirec/train/pipeline.hpp"

#include <algorithm>
#include <limits>

#include "unirec/train/trainer.hpp"

UNIREC_NAMESPACE_BEGIN

NumericStats fit_numeric_stats(const Dataset& data, double scale_bound) {
    std::map<std::string, std::vector<double>> values;
    std::int64_t lo = std::numeric_limits<std::int64_t>::max(), hi = std::numeric_limits<std::int64_t>::min();
    auto see_time = [&](std::int64_t t) {
        lo = std::min(lo, t);
        hi = std::max(hi, t);
    };
    for (const auto& item : data.items) {
        for (const auto& a : item.attributes) {
            if (a.modality == Modality::number) values[a.name].push_back(std::get<double>(a.value));
            if (a.modality == Modality::timestamp) see_time(std::get<std::int64_t>(a.value));
        }
    }
    for (const auto& x : data.interactions) {
        see_time(x.timestamp);
        if (x.review && x.review->rating) values["rating"].push_back(*x.review->rating);
    }
    NumericStats stats;
    for (const auto& [name, v] : values) stats.fields[name] = FieldNormalizer::fit(v, scale_bound);
    if (lo <= hi) stats.time_span = {lo, hi};
    return stats;
}

std::uint64_t FrozenEncoders::hash() const { return parameter_hash(numeric->parameters()); }

FrozenEncoders restore_frozen_encoders(std::shared_ptr<NumericEncoder> numeric, NumericStats stats,
                                       const RegistryOptions& options, std::shared_ptr<const FeatureSidecar> sidecar) {
    FrozenEncoders f;
    numeric->set_trainable(false);
    f.numeric = std::move(numeric);
    f.stats = std::move(stats);
    f.sidecar = std::move(sidecar);
    f.registry = std::make_shared<EmbedderRegistry>(options, f.numeric, f.stats, f.sidecar);
    return f;
}

FrozenEncoders fit_frozen_encoders(const Dataset& data, const RegistryOptions& options, NumericFitConfig fit,
                                   std::shared_ptr<const FeatureSidecar> sidecar) {
    auto numeric = std::make_shared<NumericEncoder>(NumericEncoderConfig::for_width(options.d), fit.seed);
    fit_numeric_encoder(*numeric, fit);
    NumericStats stats = fit_numeric_stats(data, numeric->config().scale_bound);
    return restore_frozen_encoders(std::move(numeric), std::move(stats), options, std::move(sidecar));
}

UNIREC_NAMESPACE_END
