#include "unirec/data/schema.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

UNIREC_NAMESPACE_BEGIN

namespace {

constexpr std::pair<ParseRule, const char*> kRuleNames[] = {
    {ParseRule::none, "none"},         {ParseRule::currency, "currency"}, {ParseRule::percent, "percent"},
    {ParseRule::comma_list, "comma_list"}, {ParseRule::iso_date, "iso_date"}, {ParseRule::unix_ms, "unix_ms"},
};

bool rule_fits(Modality m, ParseRule r) {
    switch (r) {
        case ParseRule::none: return true;
        case ParseRule::currency:
        case ParseRule::percent: return m == Modality::number;
        case ParseRule::comma_list: return m == Modality::categorical || m == Modality::image;
        case ParseRule::iso_date:
        case ParseRule::unix_ms: return m == Modality::timestamp;
    }
    return false;
}

Modality review_key_modality(std::string_view key) {
    if (key == "rating") return Modality::number;
    if (key == "image_refs") return Modality::image;
    return Modality::text;
}

}  // namespace

const char* level_name(Level l) { return l == Level::item ? "item" : "interaction"; }

const char* parse_rule_name(ParseRule r) {
    for (auto [rule, name] : kRuleNames) {
        if (rule == r) return name;
    }
    return "?";
}

ParseRule parse_parse_rule(std::string_view s) {
    for (auto [rule, name] : kRuleNames) {
        if (s == name) return rule;
    }
    throw DataError("unknown parse rule '" + std::string(s) + "'");
}

SchemaRegistry::SchemaRegistry(std::string name, std::vector<SchemaField> fields)
    : name_(std::move(name)), fields_(std::move(fields)) {
    validate();
}

void SchemaRegistry::validate() const {
    std::set<std::pair<std::string, Level>> seen;
    for (const auto& f : fields_) {
        if (f.name.empty()) throw DataError("schema field with empty name");
        if (!seen.insert({f.name, f.level}).second) {
            throw DataError("duplicate schema field '" + f.name + "' at level " + level_name(f.level));
        }
        if (!rule_fits(f.modality, f.parse)) {
            throw DataError("parse rule " + std::string(parse_rule_name(f.parse)) + " does not apply to " +
                            modality_name(f.modality) + " field '" + f.name + "'");
        }
        if (f.level == Level::interaction) {
            if (f.name == "timestamp") {
                if (f.modality != Modality::timestamp) throw DataError("interaction timestamp must be a timestamp");
                continue;
            }
            const bool known = std::find(std::begin(kReviewKeys), std::end(kReviewKeys), f.name) != std::end(kReviewKeys);
            if (!known) throw DataError("interaction-level field '" + f.name + "' is not a review key");
            if (review_key_modality(f.name) != f.modality) {
                throw DataError("review field '" + f.name + "' must be " + modality_name(review_key_modality(f.name)));
            }
        }
    }
    if (item_field_count() == 0) throw DataError("schema has no item-level fields");
}

std::vector<const SchemaField*> SchemaRegistry::fields_at(Level level) const {
    std::vector<const SchemaField*> out;
    for (const auto& f : fields_) {
        if (f.level == level) out.push_back(&f);
    }
    return out;
}

const SchemaField* SchemaRegistry::find(std::string_view name, Level level) const {
    for (const auto& f : fields_) {
        if (f.level == level && f.name == name) return &f;
    }
    return nullptr;
}

int SchemaRegistry::item_slot(std::string_view name) const {
    int slot = 0;
    for (const auto& f : fields_) {
        if (f.level != Level::item) continue;
        if (f.name == name) return slot;
        ++slot;
    }
    return -1;
}

std::size_t SchemaRegistry::item_field_count() const {
    return static_cast<std::size_t>(
        std::count_if(fields_.begin(), fields_.end(), [](const SchemaField& f) { return f.level == Level::item; }));
}

std::string SchemaRegistry::to_json() const {
    nlohmann::ordered_json j;
    j["name"] = name_;
    j["fields"] = nlohmann::ordered_json::array();
    for (const auto& f : fields_) {
        nlohmann::ordered_json jf;
        jf["name"] = f.name;
        jf["modality"] = modality_name(f.modality);
        jf["level"] = level_name(f.level);
        jf["parse"] = parse_rule_name(f.parse);
        if (f.modality == Modality::geopoint) {
            jf["lat_key"] = f.lat_key;
            jf["lon_key"] = f.lon_key;
        }
        j["fields"].push_back(std::move(jf));
    }
    return j.dump(2);
}

std::uint64_t SchemaRegistry::hash() const {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : to_json()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

SchemaRegistry SchemaRegistry::from_json(std::string_view text) {
    try {
        const auto j = nlohmann::json::parse(text);
        std::vector<SchemaField> fields;
        for (const auto& jf : j.at("fields")) {
            SchemaField f;
            f.name = jf.at("name").get<std::string>();
            f.modality = parse_modality(jf.at("modality").get<std::string>());
            const std::string level = jf.value("level", "item");
            if (level == "item") {
                f.level = Level::item;
            } else if (level == "interaction") {
                f.level = Level::interaction;
            } else {
                throw DataError("field '" + f.name + "': unknown level '" + level + "'");
            }
            f.parse = parse_parse_rule(jf.value("parse", "none"));
            f.lat_key = jf.value("lat_key", f.lat_key);
            f.lon_key = jf.value("lon_key", f.lon_key);
            fields.push_back(std::move(f));
        }
        return SchemaRegistry(j.value("name", ""), std::move(fields));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed schema registry: ") + e.what());
    }
}

SchemaRegistry SchemaRegistry::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open schema registry " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return from_json(buf.str());
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

void SchemaRegistry::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write schema registry " + path);
    out << to_json() << '\n';
}

UNIREC_NAMESPACE_END
