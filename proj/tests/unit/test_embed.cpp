#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "unirec/embed/embedders.hpp"

using namespace unirec;

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    return ab / std::sqrt(aa * bb);
}

double norm(const std::vector<double>& a) {
    double s = 0;
    for (double x : a) s += x * x;
    return std::sqrt(s);
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("unirec_test_" + name)).string();
}

EmbedderRegistry make_registry(std::size_t d, std::shared_ptr<const FeatureSidecar> sidecar = nullptr,
                               bool strict = false) {
    RegistryOptions opts;
    opts.d = d;
    opts.strict_images = strict;
    NumericStats stats;
    stats.time_span = {1'500'000'000, 1'700'000'000};
    stats.fields["price"] = FieldNormalizer{10.0, 0.5};
    auto enc = std::make_shared<NumericEncoder>(NumericEncoderConfig::for_width(d), 3);
    return EmbedderRegistry(opts, enc, stats, std::move(sidecar));
}

}  // namespace

TEST(Tokenize, LowercasesAndSplitsOnNonAlphanumerics) {
    EXPECT_EQ(tokenize("Red-Lipstick,  GLOSS!"), (std::vector<std::string>{"red", "lipstick", "gloss"}));
    EXPECT_TRUE(tokenize(" ,;- ").empty());
    EXPECT_EQ(tokenize("caf\xc3\xa9 au lait").front(), "caf\xc3\xa9");
}

TEST(TextEmbedder, BagOfWordsIgnoresOrderAndCase) {
    TextEmbedder text(32, 1);
    EXPECT_EQ(text.embed_text("a b"), text.embed_text("b  A"));
    EXPECT_EQ(text.embed_text("a b").size(), 32u);
}

TEST(TextEmbedder, NativeVectorIsUnitNorm) {
    TextEmbedder text(32, 1);
    for (const char* s : {"x", "red lipstick", "Lurrose 100Pcs Full Cover Fake Toenails", "!!!"}) {
        EXPECT_NEAR(norm(text.native(s)), 1.0, 1e-12) << s;
    }
    EXPECT_THROW(text.native("   "), DataError);
}

TEST(TextEmbedder, TokenOverlapDrivesNativeSimilarity) {
    TextEmbedder text(32, 1);
    const auto a = text.native("red lipstick");
    const auto b = text.native("red lipstick gloss");
    const auto c = text.native("stroller wheel");
    // With five distinct tokens in distinct buckets, cos(a,b) is 2/sqrt(6)
    // and cos(a,c) is 0 exactly.
    EXPECT_NEAR(cosine(a, b), 2.0 / std::sqrt(6.0), 1e-12);
    EXPECT_NEAR(cosine(a, c), 0.0, 1e-12);
    EXPECT_GT(cosine(a, b), cosine(a, c));
}

TEST(CategoricalEmbedder, PrefixSeparatesFromFreeText) {
    auto text = std::make_shared<TextEmbedder>(32, 1);
    CategoricalEmbedder cat(text);
    EXPECT_NE(cat.embed_labels({"Beauty"}), text->embed_text("Beauty"));
    EXPECT_EQ(cat.embed_labels({"Beauty"}), text->embed_text("category: Beauty"));
    EXPECT_EQ(cat.embed_labels({"Beauty"}), cat.embed_labels({"Beauty"}));
}

TEST(CategoricalEmbedder, MultiLabelIsRenormalizedMean) {
    auto text = std::make_shared<TextEmbedder>(32, 1);
    CategoricalEmbedder cat(text);
    const std::vector<std::string> labels{"Mexican", "Burgers", "Gastropubs"};
    std::vector<double> expect(text->native_width(), 0.0);
    for (const auto& l : labels) {
        const auto v = text->native("category: " + l);
        for (std::size_t i = 0; i < v.size(); ++i) expect[i] += v[i] / 3.0;
    }
    const double n = norm(expect);
    for (double& x : expect) x /= n;
    const auto got = cat.native(labels);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expect[i], 1e-15);
    EXPECT_EQ(cat.embed_labels(labels), text->project(got));
}

TEST(ImageEmbedder, SidecarVectorOfAnyWidthProjectsToD) {
    auto sidecar = std::make_shared<FeatureSidecar>();
    std::vector<float> clip(768);
    for (std::size_t i = 0; i < clip.size(); ++i) clip[i] = static_cast<float>(std::sin(0.1 * i));
    sidecar->put("B07G9GWFSM", "image", clip);
    ImageEmbedder img(48, 9, sidecar, false);
    const AttributeValue refs = std::vector<std::string>{"MAIN"};
    const auto out = img.embed(refs, {"B07G9GWFSM", "image"});
    EXPECT_EQ(out.size(), 48u);
    EXPECT_EQ(out, img.project(clip));
}

TEST(ImageEmbedder, FallbackIsDeterministicAndStrictModeRejects) {
    ImageEmbedder img(16, 9, nullptr, false);
    const AttributeValue refs = std::vector<std::string>{"photo_1.jpg"};
    EXPECT_EQ(img.embed(refs, {"i1", "image"}), img.embed(refs, {"i2", "image"}));
    EXPECT_NE(img.embed(refs, {"i1", "image"}), img.embed(AttributeValue{std::vector<std::string>{"photo_2.jpg"}}, {}));
    ImageEmbedder strict(16, 9, std::make_shared<FeatureSidecar>(), true);
    EXPECT_THROW(strict.embed(refs, {"i1", "image"}), DataError);
}

TEST(EmbedderRegistry, TotalOverModalitiesWithWidthD) {
    const auto reg = make_registry(24);
    const std::vector<std::pair<Modality, AttributeValue>> cases = {
        {Modality::text, std::string("soft cotton onesie")},
        {Modality::categorical, std::vector<std::string>{"Baby"}},
        {Modality::image, std::vector<std::string>{"img-7"}},
        {Modality::number, 6.99},
        {Modality::timestamp, std::int64_t{1634275259}},
        {Modality::geopoint, GeoPoint{37.7817529521, -122.39612197}},
    };
    for (const auto& [m, v] : cases) {
        EXPECT_EQ(reg.embedder(m).modality(), m);
        const auto out = reg.embed(m, v, {"item-1", "attr"});
        ASSERT_EQ(out.size(), 24u) << modality_name(m);
        for (Real x : out) EXPECT_TRUE(std::isfinite(x));
        EXPECT_EQ(out, reg.embed(m, v, {"item-1", "attr"}));
    }
}

TEST(EmbedderRegistry, PayloadMismatchNamesAttribute) {
    const auto reg = make_registry(16);
    try {
        reg.embed(Modality::number, std::string("cheap"), {"item-1", "price"});
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("price"), std::string::npos);
    }
}

TEST(EmbedderRegistry, FieldNormalizationAppliesPerAttribute) {
    const auto reg = make_registry(16);
    // price is normalized as (x - 10) * 0.5, other fields pass through
    EXPECT_EQ(reg.embed(Modality::number, 14.0, {"i", "price"}), reg.embed(Modality::number, 2.0, {"i", "weight"}));
}

TEST(EmbedderRegistry, SidecarOverridesTextAttributes) {
    auto sidecar = std::make_shared<FeatureSidecar>();
    sidecar->put("item-1", "title", std::vector<float>(40, 0.5f));
    const auto reg = make_registry(16, sidecar);
    const AttributeValue title = std::string("cotton onesie");
    EXPECT_NE(reg.embed(Modality::text, title, {"item-1", "title"}), reg.text().embed_text("cotton onesie"));
    EXPECT_EQ(reg.embed(Modality::text, title, {"item-2", "title"}), reg.text().embed_text("cotton onesie"));
}

TEST(EmbedderRegistry, RejectsWidthMismatch) {
    RegistryOptions opts;
    opts.d = 32;
    auto enc = std::make_shared<NumericEncoder>(NumericEncoderConfig::for_width(16), 1);
    EXPECT_THROW(EmbedderRegistry(opts, enc, {}), ConfigError);
}

TEST(Modality, ParseIsTotalOverTheSixTags) {
    for (Modality m : kAllModalities) EXPECT_EQ(parse_modality(modality_name(m)), m);
    EXPECT_THROW(parse_modality("audio"), DataError);
}

TEST(FeatureSidecar, RoundTripAndLineNumberedErrors) {
    FeatureSidecar s;
    s.put("u1", "review_image", {1.5f, -2.0f, 0.25f});
    s.put("i9", "image", std::vector<float>(768, 0.125f));
    const auto path = temp_path("sidecar.jsonl");
    s.save(path);
    const auto back = FeatureSidecar::load(path);
    EXPECT_EQ(back.records(), s.records());
    EXPECT_EQ(back.widths(), (std::vector<std::size_t>{3, 768}));

    std::ofstream(path) << R"({"entity_id":"a","attribute":"image","vector":[1,2]})" << "\n{broken\n";
    try {
        FeatureSidecar::load(path);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
    }
    std::filesystem::remove(path);
}
