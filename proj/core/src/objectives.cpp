#include "unirec/train/objectives.hpp"

#include <algorithm>
#include <numeric>
#include <set>

UNIREC_NAMESPACE_BEGIN

Tensor info_nce(const Tensor& anchors, const Tensor& positives, double tau) {
    if (!(tau > 0)) throw ConfigError("temperature must be positive");
    if (anchors.shape() != positives.shape()) {
        throw ShapeError("info_nce: anchors " + shape_string(anchors.shape()) + " vs positives " +
                         shape_string(positives.shape()));
    }
    const std::size_t B = anchors.rows();
    if (B < 2) throw DataError("info_nce needs at least 2 pairs for in-batch negatives, got " + std::to_string(B));
    const Tensor logits =
        scale(matmul(l2_normalize(anchors), transpose(l2_normalize(positives))), static_cast<Real>(1.0 / tau));
    std::vector<std::size_t> targets(B);
    std::iota(targets.begin(), targets.end(), 0);
    return cross_entropy(logits, targets);
}

std::vector<std::pair<std::size_t, std::size_t>> drop_collisions(
    std::span<const std::pair<std::size_t, std::size_t>> pairs) {
    std::set<std::size_t> used;
    std::vector<std::pair<std::size_t, std::size_t>> kept;
    for (const auto& [a, b] : pairs) {
        if (a == b || used.count(a) || used.count(b)) continue;
        used.insert(a);
        used.insert(b);
        kept.emplace_back(a, b);
    }
    return kept;
}

PretrainLosses pretrain_loss(const UniRecModel& model, const FeatureStore& fs,
                             std::span<const std::pair<std::size_t, std::size_t>> pairs, double lambda_recon,
                             double tau) {
    std::vector<std::size_t> items;
    for (const auto& [a, b] : pairs) {
        items.push_back(a);
        items.push_back(b);
    }
    std::vector<std::size_t> sorted = items;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw DataError("pretrain batch repeats an item; drop collisions first");
    }
    const ItemEncoding enc = model.encode_items(fs, items);
    std::vector<std::size_t> left(pairs.size()), right(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        left[i] = 2 * i;
        right[i] = 2 * i + 1;
    }
    PretrainLosses out;
    out.pairs = pairs.size();
    out.contrast = info_nce(gather_rows(enc.pooled, left), gather_rows(enc.pooled, right), tau);
    const auto [pred, target] = model.reconstruct(fs, enc);
    out.recon = mean(square(sub(pred, target)));
    out.total = lambda_recon == 0 ? out.contrast
                                  : add(out.contrast, scale(out.recon, static_cast<Real>(lambda_recon)));
    return out;
}

Tensor finetune_loss(const UniRecModel& model, const FeatureStore& fs,
                     const std::vector<std::vector<std::size_t>>& histories, std::span<const std::size_t> targets,
                     double tau) {
    if (histories.size() != targets.size()) throw ShapeError("finetune_loss: one target per history");
    std::vector<std::size_t> sorted(targets.begin(), targets.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw DataError("finetune batch repeats a target item; drop collisions first");
    }
    const Tensor u = model.user_vectors(fs, histories);
    const ItemEncoding enc = model.encode_items(fs, targets);
    return info_nce(u, enc.pooled, tau);
}

UNIREC_NAMESPACE_END
