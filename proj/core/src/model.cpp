#include "unirec/model/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

UNIREC_NAMESPACE_BEGIN

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::pair<E, const char*> (&table)[N], const char* key) {
    for (const auto& [value, name] : table) {
        if (s == name) return value;
    }
    std::string allowed;
    for (const auto& [value, name] : table) allowed += std::string(allowed.empty() ? "" : ", ") + name;
    throw ConfigError(std::string(key) + ": unknown value '" + std::string(s) + "' (expected one of " + allowed + ")");
}

template <typename E, std::size_t N>
const char* enum_name(E v, const std::pair<E, const char*> (&table)[N]) {
    for (const auto& [value, name] : table) {
        if (value == v) return name;
    }
    return "?";
}

constexpr std::pair<SchemaMode, const char*> kSchemaModes[] = {{SchemaMode::triplet, "triplet"},
                                                               {SchemaMode::value_only, "value_only"}};
constexpr std::pair<FusionMode, const char*> kFusionModes[] = {{FusionMode::qformer, "qformer"},
                                                               {FusionMode::mlp, "mlp"},
                                                               {FusionMode::self_attention, "self_attention"},
                                                               {FusionMode::pure_text, "pure_text"}};
constexpr std::pair<UserMode, const char*> kUserModes[] = {{UserMode::user_qformer, "user_qformer"},
                                                           {UserMode::mean_items, "mean_items"}};
constexpr std::pair<ReaderMode, const char*> kReaderModes[] = {{ReaderMode::transformer, "transformer"},
                                                               {ReaderMode::identity, "identity"}};

std::mt19937_64 module_rng(std::uint64_t seed, std::uint64_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(salt)};
    return std::mt19937_64(seq);
}

std::vector<Segment> uniform_segments(std::size_t groups, std::size_t length) {
    std::vector<Segment> s(groups);
    for (std::size_t g = 0; g < groups; ++g) s[g] = {g * length, length};
    return s;
}

std::vector<AttentionSpan> self_spans(std::span<const Segment> groups) {
    std::vector<AttentionSpan> s;
    s.reserve(groups.size());
    for (const auto& g : groups) s.push_back({g.begin, g.length, g.begin, g.length});
    return s;
}

bool has_prefix(const std::string& name, std::initializer_list<std::string_view> prefixes) {
    for (auto p : prefixes) {
        if (std::string_view(name).starts_with(p)) return true;
    }
    return false;
}

}  // namespace

const char* to_string(SchemaMode m) { return enum_name(m, kSchemaModes); }
const char* to_string(FusionMode m) { return enum_name(m, kFusionModes); }
const char* to_string(UserMode m) { return enum_name(m, kUserModes); }
const char* to_string(ReaderMode m) { return enum_name(m, kReaderModes); }
SchemaMode parse_schema_mode(std::string_view s) { return parse_enum(s, kSchemaModes, "schema_mode"); }
FusionMode parse_fusion_mode(std::string_view s) { return parse_enum(s, kFusionModes, "fusion_mode"); }
UserMode parse_user_mode(std::string_view s) { return parse_enum(s, kUserModes, "user_mode"); }
ReaderMode parse_reader_mode(std::string_view s) { return parse_enum(s, kReaderModes, "reader_mode"); }

void ModelConfig::validate() const {
    if (d == 0) throw ConfigError("d must be positive");
    if (k_item == 0 || k_user == 0) throw ConfigError("k_item and k_user must be at least 1");
    if (max_history == 0) throw ConfigError("max_history must be positive");
    item_qformer().validate();
    if (fusion_mode == FusionMode::pure_text && schema_mode == SchemaMode::triplet) {
        throw ConfigError("fusion_mode=pure_text uses value embeddings only; set schema_mode=value_only");
    }
}

UniRecModel::UniRecModel(const ModelConfig& config, std::size_t n_slots, std::uint64_t seed)
    : config_(config), n_slots_(n_slots) {
    config_.validate();
    if (n_slots_ == 0) throw ConfigError("model needs at least one item attribute slot");
    const std::size_t d = config_.d;
    {
        auto rng = module_rng(seed, 1);
        type_table_ = Tensor::randn({kModalityCount, d}, rng, Real(0.02), true);
    }
    {
        auto rng = module_rng(seed, 2);
        switch (config_.fusion_mode) {
            case FusionMode::qformer:
            case FusionMode::pure_text: item_qformer_ = QFormer(config_.item_qformer(), rng); break;
            case FusionMode::mlp:
                mlp_in_ = Linear(n_slots_ * d, d, rng);
                mlp_out_ = Linear(d, d, rng);
                mlp_norm_ = LayerNorm(d);
                break;
            case FusionMode::self_attention:
                sa_layer_ = EncoderLayer(d, config_.n_heads, config_.ffn_mult, rng, 1.0 / std::sqrt(2.0));
                sa_norm_ = LayerNorm(d);
                break;
        }
    }
    {
        auto rng = module_rng(seed, 3);
        review_proj_ = Linear(3 * d, d, rng);
        time_proj_ = Linear(kTimeFeatureWidth, d, rng);
        no_review_ = Tensor::randn({1, d}, rng, static_cast<Real>(1.0 / std::sqrt(static_cast<double>(d))), true);
    }
    if (config_.user_mode == UserMode::user_qformer) {
        auto rng = module_rng(seed, 4);
        QFormerConfig uc = config_.user_qformer();
        uc.validate();
        user_qformer_ = QFormer(uc, rng);
    }
    {
        auto rng = module_rng(seed, 5);
        soft_prompt_ = Linear(d, d, rng);
        if (config_.reader_mode == ReaderMode::transformer) {
            const double gain = 1.0 / std::sqrt(2.0 * static_cast<double>(std::max<std::size_t>(1, config_.n_reader_layers)));
            for (std::size_t l = 0; l < config_.n_reader_layers; ++l) {
                reader_layers_.emplace_back(d, config_.n_heads, config_.ffn_mult, rng, gain);
            }
            reader_norm_ = LayerNorm(d);
        }
    }
    {
        auto rng = module_rng(seed, 6);
        recon_hidden_ = Linear(d, d, rng);
        recon_out_ = Linear(d, d, rng);
    }
}

std::vector<std::size_t> UniRecModel::active_attributes(const FeatureStore& fs, std::size_t item) const {
    std::vector<std::size_t> rows;
    for (std::size_t r = fs.attr_offset[item]; r < fs.attr_offset[item + 1]; ++r) {
        if (config_.fusion_mode == FusionMode::pure_text && fs.attr_modality[r] != Modality::text) continue;
        rows.push_back(r);
    }
    if (rows.empty()) throw DataError("item " + fs.item_ids[item] + " has no text attribute for pure_text fusion");
    return rows;
}

Tensor UniRecModel::attribute_inputs(const FeatureStore& fs, std::span<const std::size_t> rows) const {
    if (config_.schema_mode == SchemaMode::value_only) return gather_rows(fs.value_rows, rows);
    std::vector<std::size_t> types(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) types[k] = fs.attr_type[rows[k]];
    return add(gather_rows(fs.name_value, rows), gather_rows(type_table_, types));
}

Tensor UniRecModel::fuse_items(const FeatureStore& fs, std::span<const std::size_t> items,
                               std::vector<std::size_t>& rows, std::vector<Segment>& groups) const {
    rows.clear();
    groups.clear();
    for (std::size_t item : items) {
        if (item >= fs.n_items()) throw DataError("item index " + std::to_string(item) + " out of range");
        const auto active = active_attributes(fs, item);
        groups.push_back({rows.size(), active.size()});
        rows.insert(rows.end(), active.begin(), active.end());
    }
    return attribute_inputs(fs, rows);
}

ItemEncoding UniRecModel::encode_items(const FeatureStore& fs, std::span<const std::size_t> items) const {
    if (items.empty()) throw DataError("encode_items needs at least one item");
    if (fs.d != config_.d) {
        throw ConfigError("feature width " + std::to_string(fs.d) + " does not match d = " + std::to_string(config_.d));
    }
    ItemEncoding enc;
    enc.items.assign(items.begin(), items.end());
    std::vector<std::size_t> rows;
    std::vector<Segment> groups;
    const Tensor inputs = fuse_items(fs, items, rows, groups);
    const std::size_t K = config_.k_item, B = items.size(), d = config_.d;

    switch (config_.fusion_mode) {
        case FusionMode::qformer:
        case FusionMode::pure_text:
            enc.tokens = item_qformer_.forward(inputs, groups);
            enc.pooled = segment_mean(enc.tokens, uniform_segments(B, K));
            break;
        case FusionMode::mlp: {
            // fixed slot layout, missing attributes read the zero row
            const Tensor padded = concat(std::vector<Tensor>{inputs, Tensor::zeros({1, d})}, 0);
            std::vector<std::size_t> idx(B * n_slots_, rows.size());
            for (std::size_t b = 0; b < B; ++b) {
                for (std::size_t k = 0; k < groups[b].length; ++k) {
                    const std::size_t pos = groups[b].begin + k;
                    idx[b * n_slots_ + fs.attr_slot[rows[pos]]] = pos;
                }
            }
            const Tensor slots = reshape(gather_rows(padded, idx), {B, n_slots_ * d});
            enc.pooled = mlp_norm_(mlp_out_(gelu(mlp_in_(slots))));
            enc.tokens = repeat_rows(enc.pooled, K);
            break;
        }
        case FusionMode::self_attention: {
            const Tensor x = sa_norm_(sa_layer_(inputs, self_spans(groups)));
            enc.pooled = segment_mean(x, groups);
            enc.tokens = repeat_rows(enc.pooled, K);
            break;
        }
    }
    return enc;
}

Tensor UniRecModel::assemble_interactions(const FeatureStore& fs,
                                          const std::vector<std::vector<std::size_t>>& histories,
                                          const ItemEncoding& items, std::vector<Segment>& per_history) const {
    const std::size_t K = config_.k_item, d = config_.d;
    std::map<std::size_t, std::size_t> slot_of;
    for (std::size_t s = 0; s < items.items.size(); ++s) slot_of.emplace(items.items[s], s);

    std::vector<std::size_t> events;
    per_history.clear();
    for (const auto& h : histories) {
        if (h.empty()) throw DataError("empty interaction history");
        if (h.size() > config_.max_history) {
            throw DataError("history of " + std::to_string(h.size()) + " interactions exceeds max_history " +
                            std::to_string(config_.max_history));
        }
        per_history.push_back({events.size() * (K + 1), h.size() * (K + 1)});
        events.insert(events.end(), h.begin(), h.end());
    }
    const std::size_t M = events.size();

    std::vector<Real> review_rows, time_rows;
    std::vector<std::size_t> reviewed, plain;
    for (std::size_t m = 0; m < M; ++m) {
        const std::size_t e = events[m];
        const Real* t = fs.time.data() + e * kTimeFeatureWidth;
        time_rows.insert(time_rows.end(), t, t + kTimeFeatureWidth);
        if (fs.has_review[e]) {
            const Real* r = fs.review.data() + e * 3 * d;
            review_rows.insert(review_rows.end(), r, r + 3 * d);
            reviewed.push_back(m);
        } else {
            plain.push_back(m);
        }
    }

    // rows: item tokens, then reviewed c_t, then the no-review vector per plain event
    std::vector<Tensor> parts{items.tokens};
    const std::size_t review_base = items.tokens.rows();
    if (!reviewed.empty()) {
        parts.push_back(review_proj_(Tensor::from_data({reviewed.size(), 3 * d}, std::move(review_rows))));
    }
    const std::size_t plain_base = review_base + reviewed.size();
    if (!plain.empty()) parts.push_back(gather_rows(no_review_, std::vector<std::size_t>(plain.size(), 0)));
    std::vector<std::size_t> c_row(M);
    for (std::size_t k = 0; k < reviewed.size(); ++k) c_row[reviewed[k]] = review_base + k;
    for (std::size_t k = 0; k < plain.size(); ++k) c_row[plain[k]] = plain_base + k;

    std::vector<std::size_t> idx;
    idx.reserve(M * (K + 1));
    for (std::size_t m = 0; m < M; ++m) {
        auto it = slot_of.find(fs.inter_item[events[m]]);
        if (it == slot_of.end()) throw DataError("interaction item missing from the item encoding");
        for (std::size_t r = 0; r < K; ++r) idx.push_back(it->second * K + r);
        idx.push_back(c_row[m]);
    }
    const Tensor blocks = gather_rows(parts.size() == 1 ? parts[0] : concat(parts, 0), idx);

    Tensor p = time_proj_(Tensor::from_data({M, kTimeFeatureWidth}, std::move(time_rows)));
    if (config_.step_positions) {
        std::vector<Real> pe(M * d);
        std::size_t m = 0;
        for (const auto& h : histories) {
            for (std::size_t t = 0; t < h.size(); ++t, ++m) {
                const double pos = static_cast<double>(h.size() - 1 - t);
                for (std::size_t c = 0; c < d; c += 2) {
                    const double freq = std::pow(10000.0, -static_cast<double>(c) / static_cast<double>(d));
                    pe[m * d + c] = static_cast<Real>(std::sin(pos * freq));
                    if (c + 1 < d) pe[m * d + c + 1] = static_cast<Real>(std::cos(pos * freq));
                }
            }
        }
        p = add(p, Tensor::from_data({M, d}, std::move(pe)));
    }
    return add(blocks, repeat_rows(p, K + 1));
}

Tensor UniRecModel::encode_users(const FeatureStore& fs, const std::vector<std::vector<std::size_t>>& histories) const {
    if (histories.empty()) throw DataError("encode_users needs at least one history");
    std::vector<std::size_t> unique;
    for (const auto& h : histories)
        for (std::size_t e : h) {
            if (e >= fs.inter_item.size()) throw DataError("interaction index out of range");
            unique.push_back(fs.inter_item[e]);
        }
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    if (unique.empty()) throw DataError("empty interaction history");
    const ItemEncoding items = encode_items(fs, unique);

    std::vector<Segment> per_history;
    const Tensor tokens = assemble_interactions(fs, histories, items, per_history);
    if (config_.user_mode == UserMode::user_qformer) return user_qformer_.forward(tokens, per_history);

    // mean over each interaction block, then over the history, tiled to K_user
    const std::size_t K1 = config_.k_item + 1;
    const Tensor per_event = segment_mean(tokens, uniform_segments(tokens.rows() / K1, K1));
    std::vector<Segment> per_user;
    for (const auto& s : per_history) per_user.push_back({s.begin / K1, s.length / K1});
    return repeat_rows(segment_mean(per_event, per_user), config_.k_user);
}

Tensor UniRecModel::read(const Tensor& user_tokens, std::size_t batch) const {
    const auto groups = uniform_segments(batch, config_.k_user);
    if (user_tokens.rows() != batch * config_.k_user) {
        throw ShapeError("reader expects " + std::to_string(batch * config_.k_user) + " user tokens, got " +
                         std::to_string(user_tokens.rows()));
    }
    Tensor x = soft_prompt_(user_tokens);
    if (config_.reader_mode == ReaderMode::identity) return segment_mean(x, groups);
    const auto spans = self_spans(groups);
    for (const auto& layer : reader_layers_) x = layer(x, spans);
    return segment_mean(reader_norm_(x), groups);
}

std::pair<Tensor, Tensor> UniRecModel::reconstruct(const FeatureStore& fs, const ItemEncoding& enc) const {
    const std::size_t K = config_.k_item;
    std::vector<std::size_t> rows, types;
    std::vector<AttentionSpan> spans;
    for (std::size_t b = 0; b < enc.items.size(); ++b) {
        const auto active = active_attributes(fs, enc.items[b]);
        spans.push_back({rows.size(), active.size(), b * K, K});
        rows.insert(rows.end(), active.begin(), active.end());
    }
    for (std::size_t r : rows) types.push_back(fs.attr_type[r]);
    const Tensor queries = add(gather_rows(fs.name_rows, rows), gather_rows(type_table_, types));
    const Tensor read_out = segment_attention(queries, enc.tokens, enc.tokens, spans, 1);
    const Tensor pred = recon_out_(gelu(recon_hidden_(read_out)));
    return {pred, gather_rows(fs.value_rows, rows).detach()};
}

NamedTensors UniRecModel::parameters() const {
    NamedTensors out;
    out.emplace_back("schema.type_table", type_table_);
    switch (config_.fusion_mode) {
        case FusionMode::qformer:
        case FusionMode::pure_text: item_qformer_.collect(out, "item.qformer"); break;
        case FusionMode::mlp:
            mlp_in_.collect(out, "item.mlp_in");
            mlp_out_.collect(out, "item.mlp_out");
            mlp_norm_.collect(out, "item.mlp_norm");
            break;
        case FusionMode::self_attention:
            sa_layer_.collect(out, "item.self_attention");
            sa_norm_.collect(out, "item.self_attention_norm");
            break;
    }
    recon_hidden_.collect(out, "recon.hidden");
    recon_out_.collect(out, "recon.out");
    review_proj_.collect(out, "interaction.review_proj");
    out.emplace_back("interaction.no_review", no_review_);
    time_proj_.collect(out, "interaction.time_proj");
    if (config_.user_mode == UserMode::user_qformer) user_qformer_.collect(out, "user.qformer");
    soft_prompt_.collect(out, "reader.soft_prompt");
    for (std::size_t l = 0; l < reader_layers_.size(); ++l) {
        reader_layers_[l].collect(out, "reader.layer" + std::to_string(l));
    }
    if (config_.reader_mode == ReaderMode::transformer) reader_norm_.collect(out, "reader.norm");
    return out;
}

NamedTensors UniRecModel::parameters_in(std::initializer_list<std::string_view> prefixes) const {
    NamedTensors out;
    for (auto& p : parameters()) {
        if (has_prefix(p.first, prefixes)) out.push_back(std::move(p));
    }
    return out;
}

NamedTensors UniRecModel::parameters_except(std::initializer_list<std::string_view> prefixes) const {
    NamedTensors out;
    for (auto& p : parameters()) {
        if (!has_prefix(p.first, prefixes)) out.push_back(std::move(p));
    }
    return out;
}

UNIREC_NAMESPACE_END
