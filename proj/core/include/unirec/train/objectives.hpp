#pragma once

#include <span>
#include <utility>
#include <vector>

#include "unirec/model/model.hpp"

UNIREC_NAMESPACE_BEGIN

/// Contrastive loss with in-batch negatives: row i of `anchors` should pick
/// row i of `positives` under cosine similarity / tau. Mean over rows.
Tensor info_nce(const Tensor& anchors, const Tensor& positives, double tau);

/// Keeps the pairs whose two items appear nowhere else in the kept set, so
/// no in-batch negative is a copy of a positive. Order is preserved.
std::vector<std::pair<std::size_t, std::size_t>> drop_collisions(
    std::span<const std::pair<std::size_t, std::size_t>> pairs);

struct PretrainLosses {
    Tensor contrast;
    Tensor recon;
    Tensor total;
    std::size_t pairs = 0;
};

/// Stage-one objective over adjacent item pairs (item indices):
/// info_nce between pooled item tokens plus lambda * reconstruction MSE
/// over every attribute of the encoded items. Pairs must be collision-free.
PretrainLosses pretrain_loss(const UniRecModel& model, const FeatureStore& fs,
                             std::span<const std::pair<std::size_t, std::size_t>> pairs, double lambda_recon,
                             double tau);

/// Stage-two objective: info_nce(user vectors, pooled target item tokens).
/// `targets` are item indices and must be distinct.
Tensor finetune_loss(const UniRecModel& model, const FeatureStore& fs,
                     const std::vector<std::vector<std::size_t>>& histories, std::span<const std::size_t> targets,
                     double tau);

UNIREC_NAMESPACE_END
