#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "unirec/base.hpp"

UNIREC_NAMESPACE_BEGIN

enum class Modality : std::uint8_t { text = 0, categorical, image, number, timestamp, geopoint };

inline constexpr std::size_t kModalityCount = 6;
inline constexpr std::array<Modality, kModalityCount> kAllModalities = {
    Modality::text, Modality::categorical, Modality::image, Modality::number, Modality::timestamp, Modality::geopoint};

const char* modality_name(Modality m);
/// Throws DataError on an unknown tag.
Modality parse_modality(std::string_view tag);
std::optional<Modality> try_parse_modality(std::string_view tag);

struct GeoPoint {
    double lat = 0;
    double lon = 0;
    bool operator==(const GeoPoint&) const = default;
};

/// Text payloads are strings; categorical labels and image references are
/// lists (a single label is a list of one).
using AttributeValue = std::variant<std::string, std::vector<std::string>, double, std::int64_t, GeoPoint>;

/// True when the payload alternative is the one `m` expects.
bool payload_matches(Modality m, const AttributeValue& value);

UNIREC_NAMESPACE_END
