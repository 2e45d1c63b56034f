#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support/oracles.hpp"
#include "unirec/numeric/numeric_encoder.hpp"
#include "unirec/tensor/ops.hpp"

using namespace unirec;

namespace {

NumericEncoderConfig default_config() {
    NumericEncoderConfig cfg;
    cfg.d_out = 128;
    return cfg;
}

double moving_average(const std::vector<double>& v, std::size_t end, std::size_t window = 10) {
    double s = 0;
    for (std::size_t i = end - window; i < end; ++i) s += v[i];
    return s / static_cast<double>(window);
}

}  // namespace

TEST(FourierFeatures, ZeroInputGivesSinZeroCosOne) {
    const auto cfg = default_config();
    const auto f = fourier_features(0.0, cfg);
    ASSERT_EQ(f.size(), 2 * cfg.n_freq);
    for (std::size_t k = 0; k < cfg.n_freq; ++k) {
        EXPECT_EQ(f[k], 0.0);
        EXPECT_EQ(f[cfg.n_freq + k], 1.0);
    }
}

TEST(FourierFeatures, LogSpacedEndpoints) {
    const auto freqs = default_config().frequencies();
    ASSERT_EQ(freqs.size(), 32u);
    EXPECT_EQ(freqs.front(), 1e-4);
    EXPECT_EQ(freqs.back(), 1e2);
    for (std::size_t k = 1; k < freqs.size(); ++k) {
        EXPECT_NEAR(freqs[k] / freqs[k - 1], std::pow(1e6, 1.0 / 31.0), 1e-12);
    }
}

TEST(FourierFeatures, PiAtUnitFrequency) {
    NumericEncoderConfig cfg;
    cfg.n_freq = 5;
    cfg.f_min = 1e-2;
    cfg.f_max = 1e2;
    cfg.d_out = 16;
    ASSERT_NEAR(cfg.frequencies()[2], 1.0, 1e-15);
    const auto f = fourier_features(std::numbers::pi, cfg);
    EXPECT_NEAR(f[2], 0.0, 1e-12);
    EXPECT_NEAR(f[5 + 2], -1.0, 1e-12);
}

TEST(FourierFeatures, SinBlockOddCosBlockEven) {
    const auto cfg = default_config();
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-50, 50);
    for (int i = 0; i < 200; ++i) {
        const double x = u(rng);
        const auto pos = fourier_features(x, cfg);
        const auto neg = fourier_features(-x, cfg);
        for (std::size_t k = 0; k < cfg.n_freq; ++k) {
            EXPECT_EQ(neg[k], -pos[k]);
            EXPECT_EQ(neg[cfg.n_freq + k], pos[cfg.n_freq + k]);
        }
    }
}

TEST(FourierFeatures, RejectsNonFinite) {
    EXPECT_THROW(fourier_features(std::nan(""), default_config()), NumericError);
    EXPECT_THROW(fourier_features(INFINITY, default_config()), NumericError);
}

TEST(RawValueFeatures, ZeroAndMinusOne) {
    const auto z = raw_value_features(0.0, 10.0);
    EXPECT_EQ(z[0], 0.0);
    EXPECT_EQ(z[1], 0.0);
    const auto m = raw_value_features(-1.0, 10.0);
    EXPECT_DOUBLE_EQ(m[0], -std::log(2.0) / 10.0);
    EXPECT_EQ(m[1], -1.0);
}

TEST(RawValueFeatures, MagnitudeChannelIsMonotone) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        double x = u(rng), y = u(rng);
        if (x == y) continue;
        if (x > y) std::swap(x, y);
        EXPECT_LT(raw_value_features(x, 10)[0], raw_value_features(y, 10)[0]);
    }
}

TEST(NumericEncoderConfig, WidthMustHoldFeatures) {
    NumericEncoderConfig cfg;
    cfg.d_out = 32;  // 2*32+2 = 66 > 32
    EXPECT_THROW(cfg.validate(), ConfigError);
    EXPECT_NO_THROW(NumericEncoderConfig::for_width(32).validate());
    EXPECT_EQ(NumericEncoderConfig::for_width(32).n_freq, 15u);
    EXPECT_EQ(NumericEncoderConfig::for_width(1024).n_freq, 32u);
    cfg = NumericEncoderConfig::for_width(64);
    cfg.f_max = cfg.f_min;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(NumericEncoder, DeterministicAcrossCalls) {
    NumericEncoder enc(NumericEncoderConfig::for_width(32), 7);
    EXPECT_EQ(enc.encode_one(3.25), enc.encode_one(3.25));
    NumericEncoder same_seed(NumericEncoderConfig::for_width(32), 7);
    EXPECT_EQ(enc.encode_one(-1.5), same_seed.encode_one(-1.5));
}

TEST(NumericEncoder, OutputWidthMatchesModelWidth) {
    for (std::size_t d : {16u, 64u, 1024u}) {
        NumericEncoder enc(NumericEncoderConfig::for_width(d), 1);
        EXPECT_EQ(enc.encode_one(19.99).size(), d);
    }
}

TEST(NumericEncoder, RejectsNonFiniteInput) {
    NumericEncoder enc(NumericEncoderConfig::for_width(16), 1);
    EXPECT_THROW(enc.encode_one(std::nan("")), NumericError);
}

TEST(NumericLosses, ZeroPairAdditivityIsSquaredNormOfEncodedZero) {
    NumericEncoder enc(NumericEncoderConfig::for_width(16), 3);
    std::vector<double> zeros{0.0, 0.0, 0.0};
    NoGradGuard guard;
    const auto losses = numeric_pretrain_losses(enc, zeros);
    double norm2 = 0;
    for (Real v : enc.encode_one(0.0)) norm2 += static_cast<double>(v) * v;
    EXPECT_NEAR(losses.additivity.item(), norm2, 1e-9 * std::max(1.0, norm2));
    EXPECT_GT(norm2, 0.0);
    // all-equal batch has no usable triplet
    EXPECT_EQ(losses.distance.item(), 0.0);
}

TEST(NumericLosses, RejectsTinyBatch) {
    NumericEncoder enc(NumericEncoderConfig::for_width(16), 3);
    std::vector<double> two{1.0, 2.0};
    EXPECT_THROW(numeric_pretrain_losses(enc, two), ConfigError);
}

TEST(NumericLosses, NonNegativeAndDecreasingEarlyInTraining) {
    NumericEncoder enc(NumericEncoderConfig::for_width(32), 11);
    NumericFitConfig fit;
    fit.steps = 100;
    fit.seed = 5;
    const auto log = fit_numeric_encoder(enc, fit);
    for (std::size_t i = 0; i < log.total.size(); ++i) {
        EXPECT_GE(log.additivity[i], 0.0);
        EXPECT_GE(log.invertibility[i], 0.0);
        EXPECT_GE(log.distance[i], 0.0);
    }
    EXPECT_LT(moving_average(log.additivity, 100), moving_average(log.additivity, 10));
    EXPECT_LT(moving_average(log.invertibility, 100), moving_average(log.invertibility, 10));
    EXPECT_LT(moving_average(log.distance, 100), moving_average(log.distance, 10));
}

TEST(NumericLosses, GradientsMatchFiniteDifferences) {
    // fp64 tier; a small fixed batch away from hinge kinks
    NumericEncoder enc(NumericEncoderConfig::for_width(8), 17);
    std::vector<double> batch{-2.0, 0.5, 3.0, 7.5, -6.0};
    NumericLossWeights w;
    w.margin = 5.0;  // keeps every triplet active (smooth region)
    GradCheckOptions opts;
    const auto report = check_gradients([&] { return numeric_pretrain_losses(enc, batch, w).total; },
                                        enc.parameters(), opts);
    EXPECT_LT(report.max_rel_error, 1e-4) << report.worst_tensor << "[" << report.worst_index << "] " << report.worst_analytic << " vs "
                                                 << report.worst_numeric;
}

TEST(TimeFeatures, QuarterCycleOfHourChannel) {
    const std::int64_t midnight = 1634256000;  // 2021-10-15T00:00:00Z
    const auto at0 = cyclic_time_features(midnight);
    EXPECT_NEAR(at0[0], 0.0, 1e-15);
    EXPECT_NEAR(at0[1], 1.0, 1e-15);
    const auto at6 = cyclic_time_features(midnight + 6 * 3600);
    EXPECT_NEAR(at6[0], 1.0, 1e-15);
    EXPECT_NEAR(at6[1], 0.0, 1e-15);
}

TEST(TimeFeatures, MidnightNeighboursAreCloseNoonIsFar) {
    const std::int64_t day = 1634256000;
    auto dist = [](const auto& a, const auto& b) {
        double s = 0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return std::sqrt(s);
    };
    const auto late = cyclic_time_features(day + 86400 - 60);  // 23:59
    const auto early = cyclic_time_features(day + 86400 + 60);  // 00:01 next day
    const auto noon = cyclic_time_features(day + 12 * 3600);
    EXPECT_GE(dist(late, noon), 50.0 * dist(late, early));
}

TEST(TimeFeatures, WeeklyShiftIsBitExactOnHourAndWeekday) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::int64_t> u(0, kMaxTimestamp - kSecondsPerWeek - 1);
    for (int i = 0; i < 500; ++i) {
        const std::int64_t t = u(rng);
        const auto a = cyclic_time_features(t);
        const auto b = cyclic_time_features(t + kSecondsPerWeek);
        for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(a[c], b[c]);
        const auto d = cyclic_time_features(t + kSecondsPerDay);
        EXPECT_EQ(a[0], d[0]);
        EXPECT_EQ(a[1], d[1]);
    }
}

TEST(TimeFeatures, RejectsOutOfRange) {
    EXPECT_THROW(cyclic_time_features(-1), DataError);
    EXPECT_THROW(cyclic_time_features(kMaxTimestamp), DataError);
}

TEST(TimeFeatures, SecularChannelSpansUnitInterval) {
    TimeSpan span{1000, 2000};
    EXPECT_EQ(timestamp_features(1000, span)[0], 0.0);
    EXPECT_EQ(timestamp_features(2000, span)[0], 1.0);
    EXPECT_EQ(timestamp_features(1500, span)[0], 0.5);
}

TEST(GeoFeatures, EquatorAndPole) {
    const auto p = geo_features(0, 0);
    EXPECT_EQ(p[0], 1.0);
    EXPECT_EQ(p[1], 0.0);
    EXPECT_EQ(p[2], 0.0);
    for (double lon : {-180.0, -37.0, 0.0, 122.4}) {
        const auto n = geo_features(90, lon);
        EXPECT_NEAR(n[0], 0.0, 1e-12);
        EXPECT_NEAR(n[1], 0.0, 1e-12);
        EXPECT_NEAR(n[2], 1.0, 1e-12);
    }
}

TEST(GeoFeatures, UnitNormAndRangeChecks) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> lat(-90, 90), lon(-180, 180);
    for (int i = 0; i < 1000; ++i) {
        const auto p = geo_features(lat(rng), lon(rng));
        EXPECT_NEAR(p[0] * p[0] + p[1] * p[1] + p[2] * p[2], 1.0, 1e-12);
    }
    EXPECT_THROW(geo_features(91, 0), DataError);
    EXPECT_THROW(geo_features(0, -181), DataError);
}

TEST(GeoFeatures, ChordOrderingAgreesWithGreatCircle) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> lat(-90, 90), lon(-180, 180);
    auto chord = [](const std::array<double, 3>& a, const std::array<double, 3>& b) {
        return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
    };
    int agree = 0, total = 0;
    for (int i = 0; i < 1000; ++i) {
        const double la[3] = {lat(rng), lat(rng), lat(rng)};
        const double lo[3] = {lon(rng), lon(rng), lon(rng)};
        const double g1 = oracle::haversine(la[0], lo[0], la[1], lo[1]);
        const double g2 = oracle::haversine(la[0], lo[0], la[2], lo[2]);
        if (std::abs(g1 - g2) < 1e-9) continue;
        const auto p = geo_features(la[0], lo[0]), q = geo_features(la[1], lo[1]), r = geo_features(la[2], lo[2]);
        ++total;
        agree += ((chord(p, q) < chord(p, r)) == (g1 < g2));
    }
    EXPECT_EQ(agree, total);
}

TEST(FieldNormalizer, ScaleIsClampedToBound) {
    std::vector<double> prices{0.0, 2000.0};
    const auto wide = FieldNormalizer::fit(prices, 10.0);
    EXPECT_DOUBLE_EQ(wide.scale, 0.1);
    EXPECT_DOUBLE_EQ(wide.center, 1000.0);
    std::vector<double> ratings{4.4, 4.6};
    EXPECT_DOUBLE_EQ(FieldNormalizer::fit(ratings, 10.0).scale, 10.0);
    std::vector<double> mid{-2.0, 8.0};
    EXPECT_DOUBLE_EQ(FieldNormalizer::fit(mid, 10.0).apply(8.0), 5.0);
}

TEST(FrozenEncoders, TimestampAndGeoHaveModelWidth) {
    TimestampEncoder te(24, 1);
    GeoEncoder ge(24, 2);
    EXPECT_EQ(te.encode(1634256000, TimeSpan{1600000000, 1700000000}).size(), 24u);
    EXPECT_EQ(ge.encode(37.78, -122.39).size(), 24u);
}
