#include "unirec/numeric/features.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <string>

UNIREC_NAMESPACE_BEGIN

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_finite(double x) {
    if (!std::isfinite(x)) throw NumericError("numeric encoder input is not finite");
}

double sign_of(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

}  // namespace

NumericEncoderConfig NumericEncoderConfig::for_width(std::size_t d) {
    NumericEncoderConfig cfg;
    cfg.d_out = d;
    const std::size_t fit = d >= 2 ? (d - 2) / 2 : 0;
    cfg.n_freq = std::min<std::size_t>(32, fit);
    return cfg;
}

void NumericEncoderConfig::validate() const {
    if (!(f_min > 0)) throw ConfigError("numeric encoder: f_min must be positive");
    if (!(f_max > f_min)) throw ConfigError("numeric encoder: f_max must exceed f_min");
    if (n_freq < 2) throw ConfigError("numeric encoder: n_freq must be at least 2");
    if (feature_width() > d_out) {
        throw ConfigError("numeric encoder: 2*n_freq+2 = " + std::to_string(feature_width()) +
                          " exceeds d_out = " + std::to_string(d_out));
    }
    if (!(scale_bound >= 1)) throw ConfigError("numeric encoder: scale_bound must be >= 1");
}

std::vector<double> NumericEncoderConfig::frequencies() const {
    std::vector<double> f(n_freq);
    const double ratio = f_max / f_min;
    for (std::size_t k = 0; k < n_freq; ++k) {
        f[k] = f_min * std::pow(ratio, static_cast<double>(k) / static_cast<double>(n_freq - 1));
    }
    // pin the endpoints against pow rounding
    f.front() = f_min;
    f.back() = f_max;
    return f;
}

std::vector<double> fourier_features(double x, const NumericEncoderConfig& config) {
    require_finite(x);
    const auto freqs = config.frequencies();
    std::vector<double> out(2 * freqs.size());
    for (std::size_t k = 0; k < freqs.size(); ++k) {
        out[k] = std::sin(freqs[k] * x);
        out[freqs.size() + k] = std::cos(freqs[k] * x);
    }
    return out;
}

std::array<double, 2> raw_value_features(double x, double scale_bound) {
    require_finite(x);
    const double s = sign_of(x);
    return {s * std::log1p(std::abs(x)) / scale_bound, s};
}

std::vector<double> scalar_features(double x, const NumericEncoderConfig& config) {
    std::vector<double> out = fourier_features(x, config);
    const auto raw = raw_value_features(x, config.scale_bound);
    out.push_back(raw[0]);
    out.push_back(raw[1]);
    return out;
}

double TimeSpan::normalize(std::int64_t t) const {
    const double width = static_cast<double>(std::max<std::int64_t>(1, max_seconds - min_seconds));
    return static_cast<double>(t - min_seconds) / width;
}

void validate_timestamp(std::int64_t t) {
    if (t < 0 || t >= kMaxTimestamp) {
        throw DataError("timestamp " + std::to_string(t) + " outside [1970, 2100)");
    }
}

std::array<double, kCyclicTimeWidth> cyclic_time_features(std::int64_t t) {
    validate_timestamp(t);
    using namespace std::chrono;
    const std::int64_t sec_of_day = t % kSecondsPerDay;
    const double day_fraction = static_cast<double>(sec_of_day) / static_cast<double>(kSecondsPerDay);
    const double hour_phase = day_fraction;
    const double week_phase = static_cast<double>(t % kSecondsPerWeek) / static_cast<double>(kSecondsPerWeek);

    const sys_days day{days{t / kSecondsPerDay}};
    const year_month_day ymd{day};
    const sys_days year_start{ymd.year() / January / 1};
    const double days_in_year = ymd.year().is_leap() ? 366.0 : 365.0;
    const double day_of_year = static_cast<double>((day - year_start).count());
    const double year_phase = (day_of_year + day_fraction) / days_in_year;

    const unsigned month = static_cast<unsigned>(ymd.month());
    const year_month_day_last month_end{ymd.year() / ymd.month() / last};
    const double days_in_month = static_cast<double>(static_cast<unsigned>(month_end.day()));
    const double day_of_month = static_cast<double>(static_cast<unsigned>(ymd.day()) - 1);
    const double month_phase = (static_cast<double>(month - 1) + (day_of_month + day_fraction) / days_in_month) / 12.0;

    std::array<double, kCyclicTimeWidth> out{};
    const double phases[4] = {hour_phase, week_phase, year_phase, month_phase};
    for (std::size_t i = 0; i < 4; ++i) {
        out[2 * i] = std::sin(kTwoPi * phases[i]);
        out[2 * i + 1] = std::cos(kTwoPi * phases[i]);
    }
    return out;
}

std::array<double, kTimeFeatureWidth> timestamp_features(std::int64_t t, const TimeSpan& span) {
    const auto cyc = cyclic_time_features(t);
    std::array<double, kTimeFeatureWidth> out{};
    out[0] = span.normalize(t);
    for (std::size_t i = 0; i < kCyclicTimeWidth; ++i) out[1 + i] = cyc[i];
    return out;
}

std::array<double, 3> geo_features(double lat_deg, double lon_deg) {
    if (!std::isfinite(lat_deg) || !std::isfinite(lon_deg) || lat_deg < -90.0 || lat_deg > 90.0 ||
        lon_deg < -180.0 || lon_deg > 180.0) {
        throw DataError("geopoint (" + std::to_string(lat_deg) + ", " + std::to_string(lon_deg) + ") out of range");
    }
    const double lat = lat_deg * std::numbers::pi / 180.0;
    const double lon = lon_deg * std::numbers::pi / 180.0;
    const double c = std::cos(lat);
    double x = c * std::cos(lon);
    double y = c * std::sin(lon);
    double z = std::sin(lat);
    // remove the residual rounding so the norm is 1 to within an ulp or two
    const double n = std::sqrt(x * x + y * y + z * z);
    x /= n;
    y /= n;
    z /= n;
    return {x, y, z};
}

UNIREC_NAMESPACE_END
