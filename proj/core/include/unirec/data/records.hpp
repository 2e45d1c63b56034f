#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "unirec/data/schema.hpp"

UNIREC_NAMESPACE_BEGIN

struct Attribute {
    std::string name;
    Modality modality = Modality::text;
    AttributeValue value;
    bool operator==(const Attribute&) const = default;
};

struct ItemRecord {
    std::string item_id;
    /// Present attributes in schema order.
    std::vector<Attribute> attributes;
    bool operator==(const ItemRecord&) const = default;
};

struct Review {
    std::optional<std::string> title;
    std::optional<std::string> text;
    std::optional<double> rating;
    std::vector<std::string> image_refs;

    bool empty() const { return !title && !text && !rating && image_refs.empty(); }
    /// Title and text joined with a space; empty when neither is present.
    std::string combined_text() const;
    bool operator==(const Review&) const = default;
};

struct Interaction {
    std::string user_id;
    std::string item_id;
    std::int64_t timestamp = 0;
    std::optional<GeoPoint> location;
    std::optional<Review> review;
    bool operator==(const Interaction&) const = default;
};

struct LoadOptions {
    bool strict = false;
    /// Messages kept in the report (counts are always exact).
    std::size_t max_messages = 20;
};

struct LoadReport {
    std::size_t lines = 0;
    std::size_t items = 0;
    std::size_t interactions = 0;
    std::size_t malformed = 0;
    std::size_t dropped_attributes = 0;
    std::size_t dangling = 0;
    std::vector<std::string> messages;
};

struct Dataset {
    SchemaRegistry schema;
    std::vector<ItemRecord> items;
    /// File order; per-user chronology is recovered by a stable sort.
    std::vector<Interaction> interactions;

    std::map<std::string, std::size_t> item_index() const;
    bool operator==(const Dataset& o) const { return items == o.items && interactions == o.interactions; }
};

/// Converts a raw JSON-text value to the payload for `field`. Throws
/// DataError describing the mismatch.
AttributeValue parse_attribute_value(const SchemaField& field, const std::string& json_value);

/// Parses "$6.99"-style strings under the given rule.
double parse_number(std::string_view raw, ParseRule rule);
std::int64_t parse_timestamp(std::string_view raw, ParseRule rule);

/// Reads canonical JSONL. Malformed lines, unknown attributes and dangling
/// item references are counted and skipped, or abort with the line number
/// in strict mode.
Dataset load_dataset(const std::string& path, const SchemaRegistry& schema, const LoadOptions& options = {},
                     LoadReport* report = nullptr);
Dataset parse_dataset(std::istream& in, const SchemaRegistry& schema, const LoadOptions& options = {},
                      LoadReport* report = nullptr, const std::string& source = "<input>");

/// Canonical JSONL: items first, then interactions, both in stored order.
void save_dataset(const std::string& path, const Dataset& data);
void write_dataset(std::ostream& out, const Dataset& data);

UNIREC_NAMESPACE_END
