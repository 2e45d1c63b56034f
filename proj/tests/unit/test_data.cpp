#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "support/oracles.hpp"
#include "unirec/data/sequences.hpp"
#include "unirec/data/synthetic.hpp"

using namespace unirec;

namespace {

const char* kYelpSchema = R"({
  "name": "yelp-sample",
  "fields": [
    {"name": "name", "modality": "text", "level": "item"},
    {"name": "location", "modality": "geopoint", "level": "item", "lat_key": "latitude", "lon_key": "longitude"},
    {"name": "stars", "modality": "number", "level": "item"},
    {"name": "categories", "modality": "categorical", "level": "item", "parse": "comma_list"},
    {"name": "price", "modality": "number", "level": "item", "parse": "currency"},
    {"name": "timestamp", "modality": "timestamp", "level": "interaction"},
    {"name": "rating", "modality": "number", "level": "interaction"},
    {"name": "text", "modality": "text", "level": "interaction"}
  ]
})";

Dataset parse(const std::string& jsonl, bool strict, LoadReport* report = nullptr) {
    std::istringstream in(jsonl);
    LoadOptions opts;
    opts.strict = strict;
    return parse_dataset(in, SchemaRegistry::from_json(kYelpSchema), opts, report, "fixture");
}

Interaction edge(int u, int i, std::int64_t t = 0) {
    Interaction x;
    x.user_id = "u" + std::to_string(u);
    x.item_id = "i" + std::to_string(i);
    x.timestamp = t;
    return x;
}

std::vector<std::pair<int, int>> as_pairs(const std::vector<Interaction>& xs) {
    std::vector<std::pair<int, int>> out;
    for (const auto& x : xs) out.push_back({std::stoi(x.user_id.substr(1)), std::stoi(x.item_id.substr(1))});
    return out;
}

SyntheticSpec small_spec(std::uint64_t seed) {
    SyntheticSpec s;
    s.n_users = 60;
    s.n_items = 80;
    s.n_clusters = 4;
    s.seed = seed;
    return s;
}

}  // namespace

TEST(SchemaRegistry, JsonRoundTripAndHash) {
    const auto s = SchemaRegistry::from_json(kYelpSchema);
    EXPECT_EQ(s.item_field_count(), 5u);
    EXPECT_EQ(s.item_slot("stars"), 2);
    EXPECT_EQ(s.item_slot("rating"), -1);
    const auto back = SchemaRegistry::from_json(s.to_json());
    EXPECT_EQ(back.to_json(), s.to_json());
    EXPECT_EQ(back.hash(), s.hash());
    EXPECT_NE(synthetic_schema(true).hash(), synthetic_schema(false).hash());
}

TEST(SchemaRegistry, RejectsInvalidEntries) {
    EXPECT_THROW(SchemaRegistry::from_json(R"({"fields":[{"name":"x","modality":"audio"}]})"), DataError);
    EXPECT_THROW(SchemaRegistry::from_json(
                     R"({"fields":[{"name":"x","modality":"text"},{"name":"x","modality":"number"}]})"),
                 DataError);
    EXPECT_THROW(SchemaRegistry::from_json(R"({"fields":[{"name":"x","modality":"text","parse":"currency"}]})"),
                 DataError);
    EXPECT_THROW(SchemaRegistry::from_json(
                     R"({"fields":[{"name":"x","modality":"text"},{"name":"mood","modality":"text","level":"interaction"}]})"),
                 DataError);
}

TEST(ParseRules, CurrencyPercentAndDates) {
    EXPECT_DOUBLE_EQ(parse_number("$6.99", ParseRule::currency), 6.99);
    EXPECT_DOUBLE_EQ(parse_number("$1,299.00", ParseRule::currency), 1299.0);
    EXPECT_DOUBLE_EQ(parse_number("15%", ParseRule::percent), 0.15);
    EXPECT_DOUBLE_EQ(parse_number(" 4.5 ", ParseRule::none), 4.5);
    EXPECT_THROW(parse_number("$6.99", ParseRule::none), DataError);
    EXPECT_THROW(parse_number("cheap", ParseRule::currency), DataError);
    EXPECT_EQ(parse_timestamp("2016-03-09", ParseRule::iso_date), 1457481600);
    EXPECT_EQ(parse_timestamp("2016-03-09 01:02:03", ParseRule::iso_date), 1457481600 + 3723);
    EXPECT_EQ(parse_timestamp("1634275259292", ParseRule::unix_ms), 1634275259);
    EXPECT_THROW(parse_timestamp("2016-02-30", ParseRule::iso_date), DataError);
}

TEST(LoadDataset, LatLonMergeIntoOneGeopoint) {
    const auto d = parse(
        R"({"kind":"item","item_id":"tnhfDv5Il8EaGSXZGiuQGg","attributes":{"name":"Garaje","latitude":37.7817529521,"longitude":-122.39612197,"stars":4.5,"categories":"Mexican, Burgers, Gastropubs"}})",
        true);
    ASSERT_EQ(d.items.size(), 1u);
    const auto& attrs = d.items[0].attributes;
    ASSERT_EQ(attrs.size(), 4u);
    int geo = 0;
    for (const auto& a : attrs) geo += a.modality == Modality::geopoint;
    EXPECT_EQ(geo, 1);
    EXPECT_EQ(attrs[1].name, "location");
    EXPECT_EQ(std::get<GeoPoint>(attrs[1].value), (GeoPoint{37.7817529521, -122.39612197}));
    EXPECT_EQ(std::get<std::vector<std::string>>(attrs[3].value),
              (std::vector<std::string>{"Mexican", "Burgers", "Gastropubs"}));
}

TEST(LoadDataset, CurrencyFieldParses) {
    const auto d = parse(R"({"kind":"item","item_id":"B07G9GWFSM","attributes":{"name":"Lurrose Toenails","price":"$6.99"}})",
                         true);
    EXPECT_EQ(std::get<double>(d.items[0].attributes[1].value), 6.99);
}

TEST(LoadDataset, StrictModeAbortsWithLineNumber) {
    const std::string jsonl =
        "{\"kind\":\"item\",\"item_id\":\"a\",\"attributes\":{\"name\":\"A\"}}\n"
        "\n"
        "{\"kind\":\"item\",\"item_id\":\"b\",\"attributes\":{\"name\":\"B\",\"colour\":\"red\"}}\n";
    try {
        parse(jsonl, true);
        FAIL() << "expected a DataError";
    } catch (const DataError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("fixture:3:"), std::string::npos) << msg;
        EXPECT_NE(msg.find("colour"), std::string::npos) << msg;
    }
    LoadReport rep;
    const auto d = parse(jsonl, false, &rep);
    EXPECT_EQ(d.items.size(), 2u);
    EXPECT_EQ(rep.dropped_attributes, 1u);
    EXPECT_EQ(rep.lines, 2u);
}

TEST(LoadDataset, MalformedAndDanglingAreCountedOrFatal) {
    const std::string jsonl =
        "{\"kind\":\"item\",\"item_id\":\"a\",\"attributes\":{\"name\":\"A\"}}\n"
        "{not json\n"
        "{\"kind\":\"interaction\",\"user_id\":\"u\",\"item_id\":\"a\",\"timestamp\":1457481600,"
        "\"review\":{\"rating\":4,\"text\":\"tasty\"}}\n"
        "{\"kind\":\"interaction\",\"user_id\":\"u\",\"item_id\":\"zzz\",\"timestamp\":1457481601}\n"
        "{\"kind\":\"item\",\"item_id\":\"empty\",\"attributes\":{\"name\":\"   \"}}\n";
    LoadReport rep;
    const auto d = parse(jsonl, false, &rep);
    EXPECT_EQ(rep.malformed, 2u);  // bad JSON, item without usable attributes
    EXPECT_EQ(rep.dangling, 1u);
    ASSERT_EQ(d.interactions.size(), 1u);
    EXPECT_EQ(d.interactions[0].review->rating, 4.0);
    EXPECT_THROW(parse(jsonl, true), DataError);
}

TEST(LoadDataset, RoundTripIsStructurallyEqual) {
    const auto synth = generate_synthetic(small_spec(3));
    std::stringstream buf;
    write_dataset(buf, synth.data);
    LoadOptions strict;
    strict.strict = true;
    const auto back = parse_dataset(buf, synth.data.schema, strict);
    EXPECT_TRUE(back == synth.data);
}

TEST(Synthetic, SameSeedSameBytes) {
    std::stringstream a, b, c;
    write_dataset(a, generate_synthetic(small_spec(7)).data);
    write_dataset(b, generate_synthetic(small_spec(7)).data);
    write_dataset(c, generate_synthetic(small_spec(8)).data);
    EXPECT_EQ(a.str(), b.str());
    EXPECT_NE(a.str(), c.str());
}

TEST(Synthetic, ShapesAndConfusionAttributes) {
    const auto s = generate_synthetic(small_spec(1));
    EXPECT_EQ(s.data.items.size(), 80u);
    EXPECT_EQ(build_sequences(s.data).size(), 60u);
    for (const auto& item : s.data.items) {
        double alpha = 0, beta = 0;
        for (const auto& a : item.attributes) {
            if (a.name == "attr_alpha") alpha = std::get<double>(a.value);
            if (a.name == "attr_beta") beta = std::get<double>(a.value);
        }
        EXPECT_NE(alpha, 0.0);
        EXPECT_NE(beta, 0.0);
    }
    // alpha and beta share one distribution: compare the first two moments
    double ma = 0, mb = 0, va = 0, vb = 0;
    auto spec = small_spec(2);
    spec.n_items = 4000;
    spec.n_users = 1;
    const auto big = generate_synthetic(spec);
    for (const auto& item : big.data.items) {
        const double a = std::get<double>(item.attributes[item.attributes.size() - 2].value);
        const double b = std::get<double>(item.attributes.back().value);
        ma += a, mb += b, va += a * a, vb += b * b;
    }
    const double n = 4000;
    EXPECT_NEAR(ma / n, mb / n, 0.1);
    EXPECT_NEAR(va / n, vb / n, 0.15);
}

TEST(Synthetic, InfeasibleSpecIsRejected) {
    auto s = small_spec(1);
    s.max_history = 100;  // more than the 80 items
    EXPECT_THROW(generate_synthetic(s), ConfigError);
    s = small_spec(1);
    s.min_history = 1;
    EXPECT_THROW(generate_synthetic(s), ConfigError);
}

TEST(FiveCore, IdentityWhenAlreadyDense) {
    std::vector<Interaction> xs;
    for (int u = 0; u < 6; ++u)
        for (int i = 0; i < 6; ++i) xs.push_back(edge(u, i));
    EXPECT_EQ(five_core_filter(xs), xs);
}

TEST(FiveCore, CascadeMatchesBruteForceOnChain) {
    // users 0..4 rate items 0..4 (a 5x5 block); user 5 rates items 0, 1
    // and 5; users 0..3 also rate item 5, which starts with degree 5.
    // Dropping user 5 leaves item 5 with four ratings, so it goes too.
    std::vector<Interaction> xs;
    for (int u = 0; u < 5; ++u)
        for (int i = 0; i < 5; ++i) xs.push_back(edge(u, i));
    for (int i : {0, 1, 5}) xs.push_back(edge(5, i));
    for (int u = 0; u < 4; ++u) xs.push_back(edge(u, 5));
    ASSERT_EQ(xs.size(), 32u);
    const auto got = as_pairs(five_core_filter(xs));
    EXPECT_EQ(got, oracle::k_core_fixpoint(as_pairs(xs), 5));
    EXPECT_EQ(got.size(), 25u);
}

TEST(FiveCore, MatchesBruteForceOnRandomGraphs) {
    std::mt19937_64 rng(11);
    for (int g = 0; g < 20; ++g) {
        std::uniform_int_distribution<int> users(0, 11), items(0, 9);
        std::set<std::pair<int, int>> edges;
        const int m = 40 + g * 3;
        while (static_cast<int>(edges.size()) < m) edges.insert({users(rng), items(rng)});
        std::vector<Interaction> xs;
        for (auto [u, i] : edges) xs.push_back(edge(u, i));
        const auto expect = oracle::k_core_fixpoint(as_pairs(xs), 5);
        if (expect.empty()) {
            EXPECT_THROW(five_core_filter(xs), DataError);
            continue;
        }
        const auto got = five_core_filter(xs);
        EXPECT_EQ(as_pairs(got), expect) << "graph " << g;
        std::map<std::string, int> ud, id;
        for (const auto& x : got) ++ud[x.user_id], ++id[x.item_id];
        for (auto [k, v] : ud) EXPECT_GE(v, 5);
        for (auto [k, v] : id) EXPECT_GE(v, 5);
    }
}

TEST(Sequences, ChronologicalWithFileOrderTies) {
    Dataset d;
    d.interactions = {edge(1, 1, 30), edge(1, 2, 10), edge(1, 3, 30), edge(0, 4, 5)};
    const auto seqs = build_sequences(d);
    ASSERT_EQ(seqs.size(), 2u);
    EXPECT_EQ(seqs[0].user_id, "u0");
    EXPECT_EQ(seqs[1].events, (std::vector<std::size_t>{1, 0, 2}));
}

TEST(Windows, LengthTwentyFive) {
    const auto w = make_windows(25);
    ASSERT_EQ(w.train.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(w.train[k].target, 20 + k);
        EXPECT_EQ(w.train[k].history.size(), 20u);
        EXPECT_EQ(w.train[k].history.front(), k);
    }
    EXPECT_EQ(w.valid->target, 23u);
    EXPECT_EQ(w.test->target, 24u);
    EXPECT_EQ(w.test->history.size(), 20u);
}

TEST(Windows, LengthTwentyOneGivesOnePaddedWindow) {
    const auto w = make_windows(21);
    ASSERT_EQ(w.train.size(), 1u);
    EXPECT_EQ(w.train[0].target, 18u);
    EXPECT_EQ(w.train[0].history.size(), 18u);
}

TEST(Windows, MinimalHistories) {
    const auto two = make_windows(2);
    EXPECT_TRUE(two.train.empty());
    EXPECT_FALSE(two.valid);
    ASSERT_TRUE(two.test);
    EXPECT_EQ(two.test->history, (std::vector<std::size_t>{0}));
    EXPECT_TRUE(make_windows(3).train.empty());
    EXPECT_EQ(make_windows(4).train.size(), 1u);
    EXPECT_FALSE(make_windows(1).test);
}

TEST(Windows, NoCrossingAndTargetsUsedAtMostOnce) {
    for (std::size_t n = 1; n <= 60; ++n) {
        const auto w = make_windows(n);
        std::multiset<std::size_t> targets;
        for (const auto& win : w.train) {
            targets.insert(win.target);
            EXPECT_LT(win.target + 2, n + 0) << n;
            for (std::size_t p : win.history) EXPECT_LT(p, win.target);
            EXPECT_LE(win.history.size(), 20u);
        }
        if (w.valid) targets.insert(w.valid->target);
        if (w.test) targets.insert(w.test->target);
        for (std::size_t t : targets) EXPECT_EQ(targets.count(t), 1u) << n;
    }
}
