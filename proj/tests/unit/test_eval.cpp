#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "support/oracles.hpp"
#include "support/toy_data.hpp"
#include "unirec/eval/evaluate.hpp"

using namespace unirec;

namespace {

// Queries over an abstract corpus with `seen` random history items.
std::vector<EvalQuery> abstract_queries(std::size_t users, std::size_t n_items, std::size_t seen, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<EvalQuery> out(users);
    for (std::size_t u = 0; u < users; ++u) {
        out[u].user_id = "u" + std::to_string(u);
        std::vector<std::size_t> all(n_items);
        for (std::size_t i = 0; i < n_items; ++i) all[i] = i;
        std::shuffle(all.begin(), all.end(), rng);
        out[u].truth = all[0];
        out[u].seen.assign(all.begin() + 1, all.begin() + 1 + seen);
    }
    return out;
}

// Sort-based rank: position of the truth after ordering by (score desc, id asc).
std::size_t sorted_rank(const std::vector<double>& scores, const std::vector<std::size_t>& ids) {
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return ids[a] < ids[b];
    });
    return static_cast<std::size_t>(std::find(order.begin(), order.end(), 0) - order.begin()) + 1;
}

}  // namespace

TEST(Negatives, ExcludeHistoryAndTruth) {
    std::vector<std::size_t> excluded;
    for (std::size_t i = 0; i < 10; ++i) excluded.push_back(i * 7);
    excluded.push_back(149);
    const auto neg = sample_negatives(excluded, 150, 99, 3, "u42");
    ASSERT_EQ(neg.size(), 99u);
    const std::set<std::size_t> uniq(neg.begin(), neg.end());
    EXPECT_EQ(uniq.size(), 99u);
    for (std::size_t x : excluded) EXPECT_EQ(uniq.count(x), 0u);
    for (std::size_t x : neg) EXPECT_LT(x, 150u);
    EXPECT_EQ(neg, sample_negatives(excluded, 150, 99, 3, "u42"));
    EXPECT_NE(neg, sample_negatives(excluded, 150, 99, 3, "u43"));
    EXPECT_NE(neg, sample_negatives(excluded, 150, 99, 4, "u42"));
}

TEST(Negatives, InsufficientCorpusReportsCounts) {
    try {
        sample_negatives(std::vector<std::size_t>{1, 2}, 50, 99, 0, "u1");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("48 eligible"), std::string::npos) << e.what();
    }
}

TEST(Ranking, DotWithBasisVectorAndTies) {
    // u = e1, pooled first components (3, 1, 2): the truth c1 ranks first
    const std::vector<std::size_t> ids{10, 11, 12};
    EXPECT_EQ(rank_of_first(std::vector<double>{3, 1, 2}, ids), 1u);
    EXPECT_EQ(rank_of_first(std::vector<double>{2, 1, 3}, ids), 2u);
    EXPECT_EQ(rank_of_first(std::vector<double>{1, 3, 2}, ids), 3u);
    // identical scores: ascending id decides
    EXPECT_EQ(rank_of_first(std::vector<double>{1, 1, 1}, std::vector<std::size_t>{5, 9, 2}), 2u);
    EXPECT_EQ(rank_of_first(std::vector<double>{1, 1, 1}, std::vector<std::size_t>{1, 9, 2}), 1u);
    // positive scaling keeps the rank
    const std::vector<double> s{0.3, -1.2, 0.7, 0.3, 2.0};
    const std::vector<std::size_t> ids5{4, 0, 1, 2, 3};
    std::vector<double> scaled = s;
    for (double& x : scaled) x *= 17.5;
    EXPECT_EQ(rank_of_first(s, ids5), rank_of_first(scaled, ids5));
}

TEST(Metrics, ClosedForms) {
    const auto first = metrics_from_rank(1, 10);
    EXPECT_EQ(first.rr, 1.0);
    EXPECT_EQ(first.hit, 1.0);
    EXPECT_EQ(first.ndcg, 1.0);
    EXPECT_EQ(metrics_from_rank(3, 10).ndcg, 0.5);
    const auto miss = metrics_from_rank(15, 10);
    EXPECT_EQ(miss.rr, 1.0 / 15);
    EXPECT_EQ(miss.hit, 0.0);
    EXPECT_EQ(miss.ndcg, 0.0);
    for (std::size_t r = 1; r < 30; ++r) {
        const auto a = metrics_from_rank(r, 10), b = metrics_from_rank(r + 1, 10);
        EXPECT_LE(a.ndcg, a.hit);
        EXPECT_GE(a.rr, b.rr);
        EXPECT_GE(a.ndcg, b.ndcg);
        EXPECT_GE(a.hit, b.hit);
    }
}

TEST(Evaluate, RandomScorerHitsTenPercent) {
    const auto queries = abstract_queries(1000, 300, 20, 1);
    EvalConfig cfg;
    cfg.seed = 5;
    const auto report = evaluate_queries(queries, 300, random_scorer(9), cfg);
    EXPECT_NEAR(report.hit.at(10), 0.100, 0.02);
    EXPECT_EQ(report.users, 1000u);
}

TEST(Evaluate, OracleScorerIsPerfect) {
    const auto queries = abstract_queries(40, 300, 20, 2);
    Scorer oracle = [&](std::size_t q, std::span<const std::size_t> c) {
        std::vector<double> s(c.size(), 0.0);
        for (std::size_t i = 0; i < c.size(); ++i) s[i] = c[i] == queries[q].truth ? 1.0 : 0.0;
        return s;
    };
    const auto report = evaluate_queries(queries, 300, oracle, {});
    EXPECT_EQ(report.mrr, 1.0);
    EXPECT_EQ(report.hit.at(10), 1.0);
    EXPECT_EQ(report.ndcg.at(10), 1.0);
}

TEST(Evaluate, MatchesBruteForceOnFiftyUsers) {
    const auto queries = abstract_queries(50, 400, 30, 3);
    // coarse scores so that ties are common
    auto score_of = [](std::size_t q, std::size_t item) {
        return std::floor(std::fmod(std::sin(static_cast<double>(q * 1000 + item)) * 1e4, 7.0));
    };
    Scorer scorer = [&](std::size_t q, std::span<const std::size_t> c) {
        std::vector<double> s;
        for (std::size_t i : c) s.push_back(score_of(q, i));
        return s;
    };
    EvalConfig cfg;
    cfg.ks = {1, 5, 10};
    cfg.threads = 3;
    const auto report = evaluate_queries(queries, 400, scorer, cfg);

    long double rr = 0, hit10 = 0, ndcg10 = 0, hit1 = 0;
    for (std::size_t q = 0; q < queries.size(); ++q) {
        const auto& cand = report.per_query[q].candidates;
        ASSERT_EQ(cand.size(), 100u);
        ASSERT_EQ(cand[0], queries[q].truth);
        std::vector<double> scores;
        std::vector<long> ids;
        for (std::size_t i : cand) {
            scores.push_back(score_of(q, i));
            ids.push_back(static_cast<long>(i));
        }
        const std::size_t rank = sorted_rank(scores, cand);
        EXPECT_EQ(report.per_query[q].rank, rank);
        const auto m10 = oracle::metrics_from_scores(scores, ids, 10);
        EXPECT_EQ(m10.rank, rank);
        rr += m10.rr;
        hit10 += m10.hit;
        ndcg10 += m10.ndcg;
        hit1 += oracle::metrics_from_scores(scores, ids, 1).hit;
    }
    EXPECT_NEAR(report.mrr, static_cast<double>(rr / 50), 1e-15);
    EXPECT_NEAR(report.hit.at(10), static_cast<double>(hit10 / 50), 1e-15);
    EXPECT_NEAR(report.ndcg.at(10), static_cast<double>(ndcg10 / 50), 1e-15);
    EXPECT_NEAR(report.hit.at(1), static_cast<double>(hit1 / 50), 1e-15);
}

TEST(Evaluate, ThreadCountDoesNotChangeResults) {
    const auto syn = toy::synthetic(16, 3, 48, 160);
    ModelConfig mc;
    mc.d = 16;
    mc.k_item = 2;
    mc.k_user = 2;
    mc.n_heads = 2;
    UniRecModel model(mc, syn.fs.n_slots, 1);
    const auto queries = make_queries(syn.splits.test, syn.users, syn.fs);
    EvalConfig one, four;
    one.batch_size = 7;
    four.threads = 4;
    const auto a = evaluate_model(model, syn.fs, queries, one);
    const auto b = evaluate_model(model, syn.fs, queries, four);
    const auto c = evaluate_model(model, syn.fs, queries, four);
    EXPECT_EQ(a.mrr, b.mrr);
    EXPECT_EQ(b.mrr, c.mrr);
    for (std::size_t q = 0; q < queries.size(); ++q) EXPECT_EQ(a.per_query[q].rank, b.per_query[q].rank);
}

TEST(Evaluate, QueriesExcludeWholeHistory) {
    const auto syn = toy::synthetic(16, 3, 48, 160);
    const auto queries = make_queries(syn.splits.test, syn.users, syn.fs);
    ASSERT_EQ(queries.size(), syn.users.size());
    for (const auto& q : queries) {
        EXPECT_TRUE(std::binary_search(q.seen.begin(), q.seen.end(), q.truth));
    }
    const auto report = evaluate_queries(queries, syn.fs.n_items(), random_scorer(1), {});
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto& c = report.per_query[i].candidates;
        for (std::size_t k = 1; k < c.size(); ++k) {
            EXPECT_FALSE(std::binary_search(queries[i].seen.begin(), queries[i].seen.end(), c[k]));
        }
    }
}

TEST(Evaluate, EmptySplitAndBadConfig) {
    EXPECT_THROW(evaluate_queries({}, 10, random_scorer(1), {}), DataError);
    EvalConfig bad;
    bad.n_negatives = 0;
    const auto queries = abstract_queries(2, 300, 5, 1);
    EXPECT_THROW(evaluate_queries(queries, 300, random_scorer(1), bad), ConfigError);
}

TEST(PlantedSignal, NearestCentroidOnAttributesFindsTheCluster) {
    SyntheticSpec spec;
    // two well-separated clusters and sharp, noise-free preferences
    spec.n_users = 500;
    spec.n_items = 500;
    spec.n_clusters = 2;
    spec.cluster_separation = 4.0;
    spec.affinity_scale = 8.0;
    spec.image_dim = 128;
    spec.noise = 0.0;
    spec.missing_rate = 0.0;
    spec.interest_shift = false;
    spec.schema_confusion = false;
    spec.seed = 1;
    const auto raw = generate_synthetic(spec);
    const auto users = build_sequences(raw.data);
    const auto splits = make_splits(users, 20);
    const auto index = raw.data.item_index();
    // attribute vectors: the pseudo-image sidecar of each item
    std::vector<std::vector<float>> feat(raw.data.items.size());
    for (std::size_t i = 0; i < raw.data.items.size(); ++i) {
        const auto* v = raw.sidecar.find(raw.data.items[i].item_id, "image");
        ASSERT_NE(v, nullptr);
        feat[i] = *v;
    }
    std::vector<EvalQuery> queries;
    for (const Sample& s : splits.test) {
        EvalQuery q;
        q.user_id = users[s.user].user_id;
        for (std::size_t e : users[s.user].events) q.seen.push_back(index.at(raw.data.interactions[e].item_id));
        for (std::size_t e : s.history) q.history.push_back(index.at(raw.data.interactions[e].item_id));
        std::sort(q.seen.begin(), q.seen.end());
        q.seen.erase(std::unique(q.seen.begin(), q.seen.end()), q.seen.end());
        q.truth = index.at(raw.data.interactions[s.target].item_id);
        queries.push_back(q);
    }
    // score = <mean history vector, candidate vector>
    Scorer centroid = [&](std::size_t q, std::span<const std::size_t> cand) {
        std::vector<double> c(feat[0].size(), 0.0);
        for (std::size_t item : queries[q].history)
            for (std::size_t k = 0; k < c.size(); ++k) c[k] += feat[item][k];
        std::vector<double> s;
        for (std::size_t item : cand) {
            double dot = 0;
            for (std::size_t k = 0; k < c.size(); ++k) dot += feat[item][k] * c[k];
            s.push_back(dot);
        }
        return s;
    };
    const auto report = evaluate_queries(queries, raw.data.items.size(), centroid, {});
    EXPECT_GT(report.hit.at(10), 0.9);
}
