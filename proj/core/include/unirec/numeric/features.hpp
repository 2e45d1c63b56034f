#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "unirec/base.hpp"

UNIREC_NAMESPACE_BEGIN

struct NumericEncoderConfig {
    std::size_t n_freq = 32;
    double f_min = 1e-4;
    double f_max = 1e2;
    std::size_t d_out = 1024;
    double scale_bound = 10.0;

    /// Defaults for an output width `d`: 32 bands when they fit, otherwise as
    /// many as fit next to the two raw channels.
    static NumericEncoderConfig for_width(std::size_t d);

    void validate() const;
    std::size_t feature_width() const { return 2 * n_freq + 2; }
    /// f_k = f_min * (f_max / f_min)^(k / (n_freq - 1))
    std::vector<double> frequencies() const;
};

/// [sin(f_0 x) .. sin(f_{n-1} x), cos(f_0 x) .. cos(f_{n-1} x)]
std::vector<double> fourier_features(double x, const NumericEncoderConfig& config);

/// (sign(x) * log1p(|x|) / scale_bound, sign(x))
std::array<double, 2> raw_value_features(double x, double scale_bound);

/// Fourier block followed by the two raw channels.
std::vector<double> scalar_features(double x, const NumericEncoderConfig& config);

// ---- time ------------------------------------------------------------------

inline constexpr std::int64_t kSecondsPerDay = 86400;
inline constexpr std::int64_t kSecondsPerWeek = 7 * kSecondsPerDay;
/// 2100-01-01T00:00:00Z
inline constexpr std::int64_t kMaxTimestamp = 4102444800;

/// Observed timestamp range used for the secular channel.
struct TimeSpan {
    std::int64_t min_seconds = 0;
    std::int64_t max_seconds = 1;

    double normalize(std::int64_t t) const;
};

inline constexpr std::size_t kCyclicTimeWidth = 8;
inline constexpr std::size_t kTimeFeatureWidth = 1 + kCyclicTimeWidth;

void validate_timestamp(std::int64_t t);

/// sin/cos pairs for hour-of-day, day-of-week, day-of-year and month-of-year
/// (UTC).
std::array<double, kCyclicTimeWidth> cyclic_time_features(std::int64_t t);

/// Secular channel followed by the cyclic channels.
std::array<double, kTimeFeatureWidth> timestamp_features(std::int64_t t, const TimeSpan& span);

// ---- geo -------------------------------------------------------------------

/// Unit-sphere coordinates (cos(lat)cos(lon), cos(lat)sin(lon), sin(lat)),
/// degrees in.
std::array<double, 3> geo_features(double lat_deg, double lon_deg);

UNIREC_NAMESPACE_END
