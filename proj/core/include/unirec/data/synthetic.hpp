#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "unirec/data/records.hpp"
#include "unirec/embed/sidecar.hpp"

UNIREC_NAMESPACE_BEGIN

/// Latent-factor generator. Items belong to clusters in a latent space and
/// every attribute is a noisy function of the item latent. Users prefer one
/// cluster early in their history and possibly another later (interest
/// shift); all timestamps share one global window, so recency is visible
/// through time alone.
struct SyntheticSpec {
    std::size_t n_users = 2000;
    std::size_t n_items = 500;
    std::size_t latent_dim = 16;
    std::size_t n_clusters = 10;
    /// Attribute noise: token/label corruption rate and numeric jitter scale.
    double noise = 0.1;
    /// Adds attr_alpha = g + e and attr_beta = -g + e' with a hidden per-item
    /// factor g that users like or dislike according to a per-user sign.
    bool schema_confusion = true;
    double confusion_weight = 1.5;
    bool interest_shift = true;
    std::size_t min_history = 8;
    std::size_t max_history = 22;
    double cluster_separation = 2.0;
    double cluster_spread = 1.0;
    /// Sharpness of the softmax over user-item affinity.
    double affinity_scale = 2.0;
    double missing_rate = 0.05;
    double review_rate = 0.7;
    std::size_t image_dim = 32;
    std::int64_t time_start = 1'500'000'000;
    std::int64_t time_end = 1'700'000'000;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Generator internals exposed for oracle scorers.
struct SyntheticTruth {
    std::vector<std::size_t> item_cluster;
    std::vector<std::vector<double>> item_latent;
    std::vector<double> item_factor;  // g; zero without schema confusion
    std::vector<std::size_t> user_early_cluster, user_late_cluster;
    std::vector<double> user_sign;
};

struct SyntheticDataset {
    Dataset data;
    FeatureSidecar sidecar;
    SyntheticTruth truth;
};

SchemaRegistry synthetic_schema(bool schema_confusion);
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

UNIREC_NAMESPACE_END
