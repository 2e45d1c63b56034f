#include "unirec/model/feature_store.hpp"

#include <map>

UNIREC_NAMESPACE_BEGIN

std::string FeatureStore::interaction_entity(const Interaction& x) {
    return x.user_id + "/" + x.item_id + "/" + std::to_string(x.timestamp);
}

FeatureStore FeatureStore::build(const Dataset& data, const EmbedderRegistry& embedders, const TimeSpan& span) {
    FeatureStore fs;
    const std::size_t d = embedders.width();
    fs.d = d;
    fs.n_slots = data.schema.item_field_count();

    std::map<std::string, std::vector<Real>> name_cache;
    std::vector<Real> names, values, sums;
    fs.attr_offset.push_back(0);
    for (const auto& item : data.items) {
        if (item.attributes.empty()) throw DataError("item " + item.item_id + " has no attributes");
        fs.item_index.emplace(item.item_id, fs.item_ids.size());
        fs.item_ids.push_back(item.item_id);
        for (const auto& a : item.attributes) {
            const int slot = data.schema.item_slot(a.name);
            if (slot < 0) throw DataError("item " + item.item_id + ": attribute '" + a.name + "' not in schema");
            auto [it, fresh] = name_cache.try_emplace(a.name);
            if (fresh) it->second = embedders.text().embed_text(a.name);
            const auto v = embedders.embed(a.modality, a.value, {item.item_id, a.name});
            names.insert(names.end(), it->second.begin(), it->second.end());
            values.insert(values.end(), v.begin(), v.end());
            for (std::size_t c = 0; c < d; ++c) sums.push_back(it->second[c] + v[c]);
            fs.attr_type.push_back(static_cast<std::size_t>(a.modality));
            fs.attr_slot.push_back(static_cast<std::size_t>(slot));
            fs.attr_modality.push_back(a.modality);
        }
        fs.attr_offset.push_back(fs.attr_type.size());
    }
    const std::size_t n_attrs = fs.attr_type.size();
    if (n_attrs == 0) throw DataError("dataset has no item attributes");
    fs.name_rows = Tensor::from_data({n_attrs, d}, std::move(names));
    fs.value_rows = Tensor::from_data({n_attrs, d}, std::move(values));
    fs.name_value = Tensor::from_data({n_attrs, d}, std::move(sums));

    const std::size_t n = data.interactions.size();
    fs.inter_item.resize(n);
    fs.has_review.assign(n, 0);
    fs.review.assign(n * 3 * d, Real(0));
    fs.time.resize(n * kTimeFeatureWidth);
    for (std::size_t e = 0; e < n; ++e) {
        const auto& x = data.interactions[e];
        auto it = fs.item_index.find(x.item_id);
        if (it == fs.item_index.end()) throw DataError("interaction references unknown item " + x.item_id);
        fs.inter_item[e] = it->second;
        const auto tf = timestamp_features(x.timestamp, span);
        for (std::size_t k = 0; k < kTimeFeatureWidth; ++k) fs.time[e * kTimeFeatureWidth + k] = static_cast<Real>(tf[k]);
        if (!x.review) continue;
        fs.has_review[e] = 1;
        const std::string entity = interaction_entity(x);
        Real* row = fs.review.data() + e * 3 * d;
        auto put = [&](std::size_t block, const std::vector<Real>& v) {
            std::copy(v.begin(), v.end(), row + block * d);
        };
        if (const std::string text = x.review->combined_text(); !text.empty()) {
            put(0, embedders.embed(Modality::text, text, {entity, "text"}));
        }
        if (x.review->rating) put(1, embedders.embed(Modality::number, *x.review->rating, {entity, "rating"}));
        if (!x.review->image_refs.empty()) {
            put(2, embedders.embed(Modality::image, x.review->image_refs, {entity, "image_refs"}));
        }
    }
    return fs;
}

UNIREC_NAMESPACE_END
