#include "unirec/data/records.hpp"

#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "unirec/numeric/features.hpp"

UNIREC_NAMESPACE_BEGIN

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_commas(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto pos = s.find(',', start);
        const auto end = pos == std::string_view::npos ? s.size() : pos;
        std::string part = trim(s.substr(start, end - start));
        if (!part.empty()) out.push_back(std::move(part));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string flatten_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_array()) {
        std::string out;
        for (const auto& e : v) {
            std::string part = trim(flatten_text(e));
            if (part.empty()) continue;
            if (!out.empty()) out += ' ';
            out += part;
        }
        return out;
    }
    if (v.is_object()) {
        std::string out;
        for (const auto& [k, e] : v.items()) {
            std::string part = trim(flatten_text(e));
            if (!out.empty()) out += ' ';
            out += k;
            if (!part.empty()) out += ' ' + part;
        }
        return out;
    }
    if (v.is_null()) return {};
    return v.dump();
}

std::vector<std::string> string_list(const json& v, ParseRule rule) {
    std::vector<std::string> out;
    auto add = [&](const std::string& s) {
        if (rule == ParseRule::comma_list) {
            for (auto& p : split_commas(s)) out.push_back(std::move(p));
        } else if (std::string t = trim(s); !t.empty()) {
            out.push_back(std::move(t));
        }
    };
    if (v.is_array()) {
        for (const auto& e : v) {
            if (e.is_null()) continue;
            add(e.is_string() ? e.get<std::string>() : e.dump());
        }
    } else if (v.is_string()) {
        add(v.get<std::string>());
    } else {
        add(v.dump());
    }
    return out;
}

GeoPoint parse_geo_object(const json& v) {
    if (!v.is_object()) throw DataError("geopoint must be an object with lat/lon");
    auto pick = [&](const char* a, const char* b) -> double {
        if (v.contains(a)) return v.at(a).get<double>();
        if (v.contains(b)) return v.at(b).get<double>();
        throw DataError(std::string("geopoint lacks ") + a);
    };
    GeoPoint g{pick("lat", "latitude"), pick("lon", "longitude")};
    geo_features(g.lat, g.lon);  // range check
    return g;
}

double json_number(const json& v, ParseRule rule) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) return parse_number(v.get<std::string>(), rule);
    throw DataError("expected a number, got " + v.dump());
}

std::int64_t json_timestamp(const json& v, ParseRule rule) {
    std::int64_t t;
    if (v.is_number_integer()) {
        t = v.get<std::int64_t>();
        if (rule == ParseRule::unix_ms) t = t >= 0 ? t / 1000 : -((-t + 999) / 1000);
    } else if (v.is_number()) {
        double x = v.get<double>();
        if (rule == ParseRule::unix_ms) x /= 1000.0;
        t = static_cast<std::int64_t>(std::floor(x));
    } else if (v.is_string()) {
        t = parse_timestamp(v.get<std::string>(), rule);
    } else {
        throw DataError("expected a timestamp, got " + v.dump());
    }
    validate_timestamp(t);
    return t;
}

// nullopt when the value is null or blank
std::optional<AttributeValue> parse_value(const SchemaField& field, const json& v) {
    if (v.is_null()) return std::nullopt;
    switch (field.modality) {
        case Modality::text: {
            std::string s = trim(flatten_text(v));
            if (s.empty()) return std::nullopt;
            return AttributeValue{std::move(s)};
        }
        case Modality::categorical:
        case Modality::image: {
            auto list = string_list(v, field.parse);
            if (list.empty()) return std::nullopt;
            return AttributeValue{std::move(list)};
        }
        case Modality::number: {
            const double x = json_number(v, field.parse);
            if (!std::isfinite(x)) throw DataError("non-finite number");
            return AttributeValue{x};
        }
        case Modality::timestamp: return AttributeValue{json_timestamp(v, field.parse)};
        case Modality::geopoint: return AttributeValue{parse_geo_object(v)};
    }
    return std::nullopt;
}

json value_to_json(const SchemaField& field, const AttributeValue& value) {
    switch (field.modality) {
        case Modality::text: return std::get<std::string>(value);
        case Modality::categorical:
        case Modality::image: return std::get<std::vector<std::string>>(value);
        case Modality::number: return std::get<double>(value);
        case Modality::timestamp: {
            const auto t = std::get<std::int64_t>(value);
            return field.parse == ParseRule::unix_ms ? t * 1000 : t;
        }
        case Modality::geopoint: {
            const auto& g = std::get<GeoPoint>(value);
            return json{{"lat", g.lat}, {"lon", g.lon}};
        }
    }
    return nullptr;
}

class Loader {
  public:
    Loader(const SchemaRegistry& schema, const LoadOptions& options, LoadReport& report, std::string source)
        : schema_(schema), options_(options), report_(report), source_(std::move(source)) {}

    // Non-strict problems are counted and described; strict ones abort.
    void problem(std::size_t line, const std::string& what, std::size_t* counter) {
        const std::string msg = source_ + ":" + std::to_string(line) + ": " + what;
        if (options_.strict) throw DataError(msg);
        if (counter) ++*counter;
        if (report_.messages.size() < options_.max_messages) report_.messages.push_back(msg);
    }

    void item(std::size_t line, const json& j, Dataset& out) {
        ItemRecord rec;
        rec.item_id = id_string(j.at("item_id"));
        if (rec.item_id.empty()) throw DataError("empty item_id");
        if (item_ids_.count(rec.item_id)) throw DataError("duplicate item_id " + rec.item_id);
        const json attrs = j.value("attributes", json::object());
        if (!attrs.is_object()) throw DataError("attributes must be an object");
        std::set<std::string> consumed;
        for (const SchemaField* f : schema_.fields_at(Level::item)) {
            try {
                std::optional<AttributeValue> v;
                if (f->modality == Modality::geopoint && !attrs.contains(f->name) &&
                    (attrs.contains(f->lat_key) || attrs.contains(f->lon_key))) {
                    consumed.insert(f->lat_key);
                    consumed.insert(f->lon_key);
                    if (!attrs.contains(f->lat_key) || !attrs.contains(f->lon_key)) {
                        throw DataError("needs both " + f->lat_key + " and " + f->lon_key);
                    }
                    const auto& la = attrs.at(f->lat_key);
                    const auto& lo = attrs.at(f->lon_key);
                    if (!la.is_null() && !lo.is_null()) {
                        v = parse_value(*f, json{{"lat", json_number(la, ParseRule::none)},
                                                 {"lon", json_number(lo, ParseRule::none)}});
                    }
                } else if (attrs.contains(f->name)) {
                    consumed.insert(f->name);
                    v = parse_value(*f, attrs.at(f->name));
                }
                if (v) rec.attributes.push_back({f->name, f->modality, std::move(*v)});
            } catch (const std::exception& e) {
                problem(line, "item " + rec.item_id + ", attribute '" + f->name + "': " + e.what(),
                        &report_.dropped_attributes);
            }
        }
        for (const auto& [key, v] : attrs.items()) {
            if (!consumed.count(key)) {
                problem(line, "item " + rec.item_id + ": unknown attribute '" + key + "'", &report_.dropped_attributes);
            }
        }
        if (rec.attributes.empty()) throw DataError("item " + rec.item_id + " has no usable attributes");
        item_ids_.insert(rec.item_id);
        out.items.push_back(std::move(rec));
        ++report_.items;
    }

    void interaction(std::size_t line, const json& j, Dataset& out) {
        Interaction x;
        x.user_id = id_string(j.at("user_id"));
        x.item_id = id_string(j.at("item_id"));
        if (x.user_id.empty() || x.item_id.empty()) throw DataError("empty user_id or item_id");
        const SchemaField* ts = schema_.find("timestamp", Level::interaction);
        x.timestamp = json_timestamp(j.at("timestamp"), ts ? ts->parse : ParseRule::none);
        if (j.contains("location") && !j.at("location").is_null()) x.location = parse_geo_object(j.at("location"));
        if (j.contains("review") && !j.at("review").is_null()) {
            const json& r = j.at("review");
            if (!r.is_object()) throw DataError("review must be an object");
            Review rev;
            for (const auto& [key, v] : r.items()) {
                const SchemaField* f = schema_.find(key, Level::interaction);
                if (!f) {
                    problem(line, "unknown review field '" + key + "'", &report_.dropped_attributes);
                    continue;
                }
                try {
                    auto pv = parse_value(*f, v);
                    if (!pv) continue;
                    if (key == "title") rev.title = std::get<std::string>(*pv);
                    if (key == "text") rev.text = std::get<std::string>(*pv);
                    if (key == "rating") rev.rating = std::get<double>(*pv);
                    if (key == "image_refs") rev.image_refs = std::get<std::vector<std::string>>(*pv);
                } catch (const std::exception& e) {
                    problem(line, "review field '" + key + "': " + e.what(), &report_.dropped_attributes);
                }
            }
            if (!rev.empty()) x.review = std::move(rev);
        }
        lines_.push_back(line);
        out.interactions.push_back(std::move(x));
    }

    void resolve(Dataset& out) {
        std::vector<Interaction> kept;
        kept.reserve(out.interactions.size());
        for (std::size_t k = 0; k < out.interactions.size(); ++k) {
            auto& x = out.interactions[k];
            if (!item_ids_.count(x.item_id)) {
                problem(lines_[k], "interaction references unknown item " + x.item_id, &report_.dangling);
                continue;
            }
            kept.push_back(std::move(x));
        }
        out.interactions = std::move(kept);
        report_.interactions = out.interactions.size();
    }

  private:
    static std::string id_string(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

    const SchemaRegistry& schema_;
    const LoadOptions& options_;
    LoadReport& report_;
    std::string source_;
    std::set<std::string> item_ids_;
    std::vector<std::size_t> lines_;
};

}  // namespace

std::string Review::combined_text() const {
    if (title && text) return *title + " " + *text;
    if (title) return *title;
    if (text) return *text;
    return {};
}

std::map<std::string, std::size_t> Dataset::item_index() const {
    std::map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < items.size(); ++i) idx.emplace(items[i].item_id, i);
    return idx;
}

double parse_number(std::string_view raw, ParseRule rule) {
    std::string s = trim(raw);
    double divisor = 1.0;
    if (rule == ParseRule::currency) {
        std::string cleaned;
        for (std::size_t i = 0; i < s.size(); ++i) {
            const unsigned char c = s[i];
            if (std::isdigit(c) || c == '.' || c == '-' || c == '+' || c == 'e' || c == 'E') cleaned += s[i];
            else if (c == ',' || c == ' ' || c == '$' || c >= 0x80) continue;  // separators, symbols, UTF-8 signs
            else if (std::isalpha(c)) continue;  // "USD 5"
            else throw DataError("cannot parse currency '" + std::string(raw) + "'");
        }
        s = std::move(cleaned);
    } else if (rule == ParseRule::percent) {
        if (!s.empty() && s.back() == '%') s = trim(std::string_view(s).substr(0, s.size() - 1));
        divisor = 100.0;
    }
    double x = 0;
    const char* end = s.data() + s.size();
    const char* begin = s.data();
    if (begin != end && *begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, x);
    if (s.empty() || ec != std::errc() || ptr != end || !std::isfinite(x)) {
        throw DataError("cannot parse number from '" + std::string(raw) + "'");
    }
    return x / divisor;
}

std::int64_t parse_timestamp(std::string_view raw, ParseRule rule) {
    const std::string s = trim(raw);
    if (rule == ParseRule::iso_date) {
        int y = 0;
        unsigned mo = 0, d = 0, hh = 0, mm = 0, ss = 0;
        char tail = 0;
        const int n = std::sscanf(s.c_str(), "%d-%u-%u%*[ T]%u:%u:%u%c", &y, &mo, &d, &hh, &mm, &ss, &tail);
        if (!(n == 3 || n == 6) || hh > 23 || mm > 59 || ss > 60) {
            throw DataError("cannot parse date '" + std::string(raw) + "'");
        }
        using namespace std::chrono;
        const year_month_day ymd{year{y}, month{mo}, day{d}};
        if (!ymd.ok()) throw DataError("invalid date '" + std::string(raw) + "'");
        const auto days_since = sys_days{ymd}.time_since_epoch().count();
        return static_cast<std::int64_t>(days_since) * kSecondsPerDay + hh * 3600 + mm * 60 + ss;
    }
    std::int64_t t = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), t);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw DataError("cannot parse timestamp '" + std::string(raw) + "'");
    }
    if (rule == ParseRule::unix_ms) t = t >= 0 ? t / 1000 : -((-t + 999) / 1000);
    return t;
}

AttributeValue parse_attribute_value(const SchemaField& field, const std::string& json_value) {
    json v;
    try {
        v = json::parse(json_value);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed value: ") + e.what());
    }
    auto out = parse_value(field, v);
    if (!out) throw DataError("attribute '" + field.name + "' is empty");
    return std::move(*out);
}

Dataset parse_dataset(std::istream& in, const SchemaRegistry& schema, const LoadOptions& options,
                      LoadReport* report, const std::string& source) {
    LoadReport local;
    LoadReport& rep = report ? *report : local;
    rep = LoadReport{};
    Dataset out;
    out.schema = schema;
    Loader loader(schema, options, rep, source);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        ++rep.lines;
        try {
            const json j = json::parse(line);
            const std::string kind = j.at("kind").get<std::string>();
            if (kind == "item") {
                loader.item(line_no, j, out);
            } else if (kind == "interaction") {
                loader.interaction(line_no, j, out);
            } else {
                throw DataError("unknown record kind '" + kind + "'");
            }
        } catch (const json::exception& e) {
            loader.problem(line_no, std::string("malformed record: ") + e.what(), &rep.malformed);
        } catch (const DataError& e) {
            // strict-mode aborts already carry the location
            if (options.strict && std::string_view(e.what()).starts_with(source + ":")) throw;
            loader.problem(line_no, e.what(), &rep.malformed);
        }
    }
    loader.resolve(out);
    return out;
}

Dataset load_dataset(const std::string& path, const SchemaRegistry& schema, const LoadOptions& options,
                     LoadReport* report) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset " + path);
    return parse_dataset(in, schema, options, report, path);
}

void write_dataset(std::ostream& out, const Dataset& data) {
    for (const auto& item : data.items) {
        ojson j;
        j["kind"] = "item";
        j["item_id"] = item.item_id;
        ojson attrs = ojson::object();
        for (const auto& a : item.attributes) {
            const SchemaField* f = data.schema.find(a.name, Level::item);
            if (!f) throw DataError("item " + item.item_id + " carries attribute '" + a.name + "' outside the schema");
            attrs[a.name] = value_to_json(*f, a.value);
        }
        j["attributes"] = std::move(attrs);
        out << j.dump() << '\n';
    }
    const SchemaField* ts = data.schema.find("timestamp", Level::interaction);
    for (const auto& x : data.interactions) {
        ojson j;
        j["kind"] = "interaction";
        j["user_id"] = x.user_id;
        j["item_id"] = x.item_id;
        j["timestamp"] = ts && ts->parse == ParseRule::unix_ms ? x.timestamp * 1000 : x.timestamp;
        if (x.location) j["location"] = ojson{{"lat", x.location->lat}, {"lon", x.location->lon}};
        if (x.review) {
            ojson r = ojson::object();
            if (x.review->title) r["title"] = *x.review->title;
            if (x.review->text) r["text"] = *x.review->text;
            if (x.review->rating) r["rating"] = *x.review->rating;
            if (!x.review->image_refs.empty()) r["image_refs"] = x.review->image_refs;
            j["review"] = std::move(r);
        }
        out << j.dump() << '\n';
    }
}

void save_dataset(const std::string& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write dataset " + path);
    write_dataset(out, data);
}

UNIREC_NAMESPACE_END
