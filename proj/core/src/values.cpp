#include "unirec/embed/values.hpp"

UNIREC_NAMESPACE_BEGIN

const char* modality_name(Modality m) {
    switch (m) {
        case Modality::text: return "text";
        case Modality::categorical: return "categorical";
        case Modality::image: return "image";
        case Modality::number: return "number";
        case Modality::timestamp: return "timestamp";
        case Modality::geopoint: return "geopoint";
    }
    return "?";
}

std::optional<Modality> try_parse_modality(std::string_view tag) {
    for (Modality m : kAllModalities) {
        if (tag == modality_name(m)) return m;
    }
    return std::nullopt;
}

Modality parse_modality(std::string_view tag) {
    if (auto m = try_parse_modality(tag)) return *m;
    throw DataError("unknown modality tag '" + std::string(tag) + "'");
}

bool payload_matches(Modality m, const AttributeValue& value) {
    switch (m) {
        case Modality::text: return std::holds_alternative<std::string>(value);
        case Modality::categorical:
        case Modality::image: return std::holds_alternative<std::vector<std::string>>(value);
        case Modality::number: return std::holds_alternative<double>(value);
        case Modality::timestamp: return std::holds_alternative<std::int64_t>(value);
        case Modality::geopoint: return std::holds_alternative<GeoPoint>(value);
    }
    return false;
}

UNIREC_NAMESPACE_END
