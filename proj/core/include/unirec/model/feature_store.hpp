#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "unirec/data/records.hpp"
#include "unirec/embed/embedders.hpp"
#include "unirec/tensor/tensor.hpp"

UNIREC_NAMESPACE_BEGIN

/// Frozen embeddings computed once per dataset: the name and value vectors
/// of every item attribute and the review/time inputs of every
/// interaction. Everything trainable lives in the model.
struct FeatureStore {
    std::size_t d = 0;
    std::size_t n_slots = 0;  // item-level schema fields

    std::vector<std::string> item_ids;
    std::map<std::string, std::size_t> item_index;

    // Attributes of item i occupy rows [attr_offset[i], attr_offset[i + 1]).
    std::vector<std::size_t> attr_offset;
    std::vector<std::size_t> attr_type;  // modality index, row of the type table
    std::vector<std::size_t> attr_slot;  // item-level schema position
    std::vector<Modality> attr_modality;
    Tensor name_rows;   // [attrs x d] a_j
    Tensor value_rows;  // [attrs x d] v_j
    Tensor name_value;  // [attrs x d] a_j + v_j

    // Interactions, indexed like Dataset::interactions.
    std::vector<std::size_t> inter_item;
    std::vector<unsigned char> has_review;
    std::vector<Real> review;  // [n x 3d]: text | rating | image, zero blocks where absent
    std::vector<Real> time;    // [n x kTimeFeatureWidth]

    std::size_t n_items() const { return item_ids.size(); }
    std::size_t attr_count(std::size_t item) const { return attr_offset[item + 1] - attr_offset[item]; }

    /// Entity id used for interaction-level sidecar lookups.
    static std::string interaction_entity(const Interaction& x);

    static FeatureStore build(const Dataset& data, const EmbedderRegistry& embedders, const TimeSpan& span);
};

UNIREC_NAMESPACE_END
