#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "unirec/embed/values.hpp"

UNIREC_NAMESPACE_BEGIN

enum class Level : std::uint8_t { item, interaction };

const char* level_name(Level l);

/// How a raw JSON value becomes a typed payload.
///   currency   "$1,299.00" -> 1299
///   percent    "15%" -> 0.15
///   comma_list "Mexican, Burgers" -> {"Mexican", "Burgers"}
///   iso_date   "2016-03-09" -> unix seconds at UTC midnight
///   unix_ms    1634275259292 -> 1634275259
enum class ParseRule : std::uint8_t { none, currency, percent, comma_list, iso_date, unix_ms };

const char* parse_rule_name(ParseRule r);
ParseRule parse_parse_rule(std::string_view s);

struct SchemaField {
    std::string name;
    Modality modality = Modality::text;
    Level level = Level::item;
    ParseRule parse = ParseRule::none;
    // geopoints may be assembled from two raw keys
    std::string lat_key = "latitude";
    std::string lon_key = "longitude";
};

/// Review keys an interaction-level field may name.
inline constexpr std::string_view kReviewKeys[] = {"title", "text", "rating", "image_refs"};

/// Ordered attribute inventory of one dataset. Item-level order fixes the
/// slot order used wherever a deterministic attribute order is needed.
class SchemaRegistry {
  public:
    SchemaRegistry() = default;
    SchemaRegistry(std::string name, std::vector<SchemaField> fields);

    const std::string& name() const { return name_; }
    const std::vector<SchemaField>& fields() const { return fields_; }
    std::vector<const SchemaField*> fields_at(Level level) const;
    const SchemaField* find(std::string_view name, Level level) const;
    /// Index among the item-level fields, or -1.
    int item_slot(std::string_view name) const;
    std::size_t item_field_count() const;

    /// FNV-1a over the canonical serialization.
    std::uint64_t hash() const;
    std::string to_json() const;
    /// Throws DataError on unknown modality tags, duplicates or bad rules.
    static SchemaRegistry from_json(std::string_view text);
    static SchemaRegistry load(const std::string& path);
    void save(const std::string& path) const;

  private:
    void validate() const;

    std::string name_;
    std::vector<SchemaField> fields_;
};

UNIREC_NAMESPACE_END
