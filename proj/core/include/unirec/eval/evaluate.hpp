#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "unirec/data/sequences.hpp"
#include "unirec/model/model.hpp"

UNIREC_NAMESPACE_BEGIN

struct EvalConfig {
    std::size_t n_negatives = 99;
    std::vector<std::size_t> ks{10};
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    /// Samples encoded per forward pass.
    std::size_t batch_size = 64;

    void validate() const;
};

struct RankMetrics {
    double rr = 0;
    double hit = 0;
    double ndcg = 0;
};

/// RR = 1/rank; Hit@k and NDCG@k = 1/log2(rank + 1) when rank <= k.
RankMetrics metrics_from_rank(std::size_t rank, std::size_t k);

/// Uniform draw without replacement from items [0, n_items) outside
/// `excluded` (history plus truth). The stream depends only on (seed, user).
std::vector<std::size_t> sample_negatives(std::span<const std::size_t> excluded, std::size_t n_items,
                                          std::size_t count, std::uint64_t seed, std::string_view user_id);

/// 1-based rank of candidates[0] under descending score; equal scores are
/// ordered by ascending item id.
std::size_t rank_of_first(std::span<const double> scores, std::span<const std::size_t> item_ids);

/// One leave-one-out problem.
struct EvalQuery {
    std::string user_id;
    std::vector<std::size_t> history;  // interaction indices fed to the model
    std::vector<std::size_t> seen;     // item indices excluded from negatives
    std::size_t truth = 0;             // item index
};

struct QueryResult {
    std::size_t rank = 0;
    std::vector<std::size_t> candidates;  // truth first
};

struct EvalReport {
    std::size_t users = 0;
    double mrr = 0;
    std::map<std::size_t, double> hit;
    std::map<std::size_t, double> ndcg;
    std::vector<QueryResult> per_query;
};

/// Per query, scores every candidate (truth first) and returns the scores.
using Scorer = std::function<std::vector<double>(std::size_t query, std::span<const std::size_t> candidates)>;

/// Builds leave-one-out queries from split samples; `seen` is the user's
/// whole interaction history.
std::vector<EvalQuery> make_queries(std::span<const Sample> samples, const std::vector<UserSequence>& users,
                                    const FeatureStore& fs);

/// Samples negatives, ranks and aggregates (compensated means). Queries are
/// scored on `config.threads` workers; results do not depend on the count.
EvalReport evaluate_queries(std::span<const EvalQuery> queries, std::size_t n_items, const Scorer& scorer,
                            const EvalConfig& config);

/// Mean-pooled item tokens for every item, [n_items x d], no graph.
std::vector<std::vector<double>> item_embeddings(const UniRecModel& model, const FeatureStore& fs,
                                                 const EvalConfig& config);
/// Reader outputs for every query history, no graph.
std::vector<std::vector<double>> user_embeddings(const UniRecModel& model, const FeatureStore& fs,
                                                 std::span<const EvalQuery> queries, const EvalConfig& config);

/// Scores by dot(u, pooled z) against precomputed item embeddings.
EvalReport evaluate_model(const UniRecModel& model, const FeatureStore& fs, std::span<const EvalQuery> queries,
                          const EvalConfig& config);

/// Uniform random scores, seeded per query.
Scorer random_scorer(std::uint64_t seed);

/// Splits [0, n) into contiguous chunks run on up to `threads` workers.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t, std::size_t)>& body);

UNIREC_NAMESPACE_END
