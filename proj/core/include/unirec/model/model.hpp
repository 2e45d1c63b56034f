#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "unirec/model/feature_store.hpp"
#include "unirec/model/qformer.hpp"

UNIREC_NAMESPACE_BEGIN

enum class SchemaMode : std::uint8_t { triplet, value_only };
enum class FusionMode : std::uint8_t { qformer, mlp, self_attention, pure_text };
enum class UserMode : std::uint8_t { user_qformer, mean_items };
enum class ReaderMode : std::uint8_t { transformer, identity };

const char* to_string(SchemaMode m);
const char* to_string(FusionMode m);
const char* to_string(UserMode m);
const char* to_string(ReaderMode m);
/// Throw ConfigError naming the key on unknown values.
SchemaMode parse_schema_mode(std::string_view s);
FusionMode parse_fusion_mode(std::string_view s);
UserMode parse_user_mode(std::string_view s);
ReaderMode parse_reader_mode(std::string_view s);

struct ModelConfig {
    std::size_t d = 64;
    std::size_t k_item = 4;
    std::size_t k_user = 4;
    std::size_t n_layers = 2;
    std::size_t n_heads = 4;
    std::size_t ffn_mult = 4;
    std::size_t n_reader_layers = 2;
    std::size_t max_history = 20;
    SchemaMode schema_mode = SchemaMode::triplet;
    FusionMode fusion_mode = FusionMode::qformer;
    UserMode user_mode = UserMode::user_qformer;
    ReaderMode reader_mode = ReaderMode::transformer;
    /// Adds sinusoidal encodings of each interaction's distance from the end
    /// of the history. Off by default: chronology then enters only through
    /// the timestamp embedding.
    bool step_positions = false;

    void validate() const;
    QFormerConfig item_qformer() const { return {k_item, n_layers, n_heads, d, ffn_mult}; }
    QFormerConfig user_qformer() const { return {k_user, n_layers, n_heads, d, ffn_mult}; }
};

/// Item tokens for a set of distinct items: K rows per item, in order.
struct ItemEncoding {
    std::vector<std::size_t> items;
    Tensor tokens;  // [B*K x d]
    Tensor pooled;  // [B x d], mean over each item's K rows
};

/// Trainable state of the recommender. Parameter names carry a group
/// prefix: schema., item., recon., interaction., user., reader.
class UniRecModel {
  public:
    UniRecModel(const ModelConfig& config, std::size_t n_slots, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    std::size_t n_slots() const { return n_slots_; }

    /// Attribute rows feeding the item encoder under the active modes.
    std::vector<std::size_t> active_attributes(const FeatureStore& fs, std::size_t item) const;
    /// Fused attribute embeddings h = a + t + v (or v alone) for `rows`.
    Tensor attribute_inputs(const FeatureStore& fs, std::span<const std::size_t> rows) const;

    ItemEncoding encode_items(const FeatureStore& fs, std::span<const std::size_t> items) const;

    /// Interaction blocks [z_t ; c_t] + p_t for every event of every
    /// history, laid out history by history. Returns the block tokens and
    /// one segment per history.
    Tensor assemble_interactions(const FeatureStore& fs, const std::vector<std::vector<std::size_t>>& histories,
                                 const ItemEncoding& items, std::vector<Segment>& per_history) const;
    /// User tokens [B*K_user x d].
    Tensor encode_users(const FeatureStore& fs, const std::vector<std::vector<std::size_t>>& histories) const;
    /// Reader over user tokens: [B*K_user x d] -> [B x d].
    Tensor read(const Tensor& user_tokens, std::size_t batch) const;
    Tensor user_vectors(const FeatureStore& fs, const std::vector<std::vector<std::size_t>>& histories) const {
        return read(encode_users(fs, histories), histories.size());
    }

    /// Predicted value embeddings for the active attributes of the encoded
    /// items, and the matching detached targets.
    std::pair<Tensor, Tensor> reconstruct(const FeatureStore& fs, const ItemEncoding& enc) const;

    NamedTensors parameters() const;
    NamedTensors parameters_in(std::initializer_list<std::string_view> prefixes) const;
    NamedTensors parameters_except(std::initializer_list<std::string_view> prefixes) const;

  private:
    Tensor fuse_items(const FeatureStore& fs, std::span<const std::size_t> items, std::vector<std::size_t>& rows,
                      std::vector<Segment>& groups) const;

    ModelConfig config_;
    std::size_t n_slots_;

    Tensor type_table_;  // [6 x d]
    QFormer item_qformer_;
    Linear mlp_in_, mlp_out_;
    EncoderLayer sa_layer_;
    LayerNorm sa_norm_, mlp_norm_;

    Linear review_proj_, time_proj_;
    Tensor no_review_;  // [1 x d]
    QFormer user_qformer_;

    Linear soft_prompt_;
    std::vector<EncoderLayer> reader_layers_;
    LayerNorm reader_norm_;

    Linear recon_hidden_, recon_out_;
};

UNIREC_NAMESPACE_END
