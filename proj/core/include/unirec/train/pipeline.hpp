#pragma once

#include <memory>

#include "unirec/data/records.hpp"
#include "unirec/embed/embedders.hpp"
#include "unirec/model/feature_store.hpp"

UNIREC_NAMESPACE_BEGIN

/// Per-field normalizers for every number attribute (item fields and the
/// review rating) and the timestamp range over items and interactions.
NumericStats fit_numeric_stats(const Dataset& data, double scale_bound);

/// The frozen side of the model: the fitted numeric encoder, its
/// normalization statistics and the embedder registry built on them.
struct FrozenEncoders {
    std::shared_ptr<NumericEncoder> numeric;
    NumericStats stats;
    std::shared_ptr<const FeatureSidecar> sidecar;
    std::shared_ptr<const EmbedderRegistry> registry;

    /// Hash of the numeric encoder parameters; constant once fitted.
    std::uint64_t hash() const;
    FeatureStore features(const Dataset& data) const { return FeatureStore::build(data, *registry, stats.time_span); }
};

/// Fits a fresh numeric encoder with its own losses, freezes it, and builds
/// the registry. `numeric_seed` drives the encoder init and its batches.
FrozenEncoders fit_frozen_encoders(const Dataset& data, const RegistryOptions& options,
                                   NumericFitConfig fit, std::shared_ptr<const FeatureSidecar> sidecar);

/// Rebuilds the frozen side from stored encoder weights and statistics.
FrozenEncoders restore_frozen_encoders(std::shared_ptr<NumericEncoder> numeric, NumericStats stats,
                                       const RegistryOptions& options, std::shared_ptr<const FeatureSidecar> sidecar);

UNIREC_NAMESPACE_END
