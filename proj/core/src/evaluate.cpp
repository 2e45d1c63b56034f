#include "unirec/eval/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

UNIREC_NAMESPACE_BEGIN

namespace {

std::uint64_t mix(std::uint64_t seed, std::string_view key) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ (seed * 0x9e3779b97f4a7c15ULL);
    for (unsigned char c : key) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    // splitmix finalizer
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebULL;
    return h ^ (h >> 31);
}

struct Kahan {
    double sum = 0, carry = 0;
    void add(double x) {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

}  // namespace

void EvalConfig::validate() const {
    if (n_negatives < 1) throw ConfigError("eval.n_negatives must be at least 1");
    if (ks.empty()) throw ConfigError("eval.ks must list at least one cutoff");
    for (std::size_t k : ks)
        if (k < 1) throw ConfigError("eval.ks entries must be positive");
    if (threads < 1) throw ConfigError("eval.threads must be at least 1");
    if (batch_size < 1) throw ConfigError("eval.batch_size must be at least 1");
}

RankMetrics metrics_from_rank(std::size_t rank, std::size_t k) {
    if (rank < 1) throw ConfigError("rank is 1-based");
    RankMetrics m;
    m.rr = 1.0 / static_cast<double>(rank);
    if (rank <= k) {
        m.hit = 1.0;
        m.ndcg = 1.0 / std::log2(static_cast<double>(rank) + 1.0);
    }
    return m;
}

std::vector<std::size_t> sample_negatives(std::span<const std::size_t> excluded, std::size_t n_items,
                                          std::size_t count, std::uint64_t seed, std::string_view user_id) {
    std::vector<std::size_t> skip(excluded.begin(), excluded.end());
    std::sort(skip.begin(), skip.end());
    std::vector<std::size_t> eligible;
    eligible.reserve(n_items);
    for (std::size_t i = 0; i < n_items; ++i) {
        if (!std::binary_search(skip.begin(), skip.end(), i)) eligible.push_back(i);
    }
    if (eligible.size() < count) {
        throw DataError("user " + std::string(user_id) + ": " + std::to_string(eligible.size()) +
                        " eligible negatives for " + std::to_string(count) + " requested (corpus " +
                        std::to_string(n_items) + ", excluded " + std::to_string(skip.size()) + ")");
    }
    std::mt19937_64 rng(mix(seed, user_id));
    // partial Fisher-Yates
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, eligible.size() - 1);
        std::swap(eligible[i], eligible[pick(rng)]);
    }
    eligible.resize(count);
    return eligible;
}

std::size_t rank_of_first(std::span<const double> scores, std::span<const std::size_t> item_ids) {
    if (scores.empty() || scores.size() != item_ids.size()) throw ShapeError("rank_of_first: scores and ids differ");
    std::size_t rank = 1;
    for (std::size_t j = 1; j < scores.size(); ++j) {
        if (scores[j] > scores[0] || (scores[j] == scores[0] && item_ids[j] < item_ids[0])) ++rank;
    }
    return rank;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t, std::size_t)>& body) {
    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n));
    if (workers == 1) {
        if (n > 0) body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk, end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end] {
            try {
                body(begin, end);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

std::vector<EvalQuery> make_queries(std::span<const Sample> samples, const std::vector<UserSequence>& users,
                                    const FeatureStore& fs) {
    std::vector<EvalQuery> out;
    out.reserve(samples.size());
    for (const Sample& s : samples) {
        const UserSequence& u = users.at(s.user);
        EvalQuery q;
        q.user_id = u.user_id;
        q.history = s.history;
        for (std::size_t e : u.events) q.seen.push_back(fs.inter_item[e]);
        std::sort(q.seen.begin(), q.seen.end());
        q.seen.erase(std::unique(q.seen.begin(), q.seen.end()), q.seen.end());
        q.truth = fs.inter_item[s.target];
        out.push_back(std::move(q));
    }
    return out;
}

EvalReport evaluate_queries(std::span<const EvalQuery> queries, std::size_t n_items, const Scorer& scorer,
                            const EvalConfig& config) {
    config.validate();
    if (queries.empty()) throw DataError("evaluation split is empty");
    EvalReport report;
    report.users = queries.size();
    report.per_query.resize(queries.size());
    parallel_for(queries.size(), config.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const EvalQuery& q = queries[i];
            std::vector<std::size_t> excluded = q.seen;
            excluded.push_back(q.truth);
            QueryResult& r = report.per_query[i];
            r.candidates.push_back(q.truth);
            const auto neg = sample_negatives(excluded, n_items, config.n_negatives, config.seed, q.user_id);
            r.candidates.insert(r.candidates.end(), neg.begin(), neg.end());
            const auto scores = scorer(i, r.candidates);
            if (scores.size() != r.candidates.size()) throw ShapeError("scorer returned the wrong number of scores");
            for (double s : scores)
                if (!std::isfinite(s)) throw NumericError("non-finite candidate score for user " + q.user_id);
            r.rank = rank_of_first(scores, r.candidates);
        }
    });
    Kahan rr;
    std::map<std::size_t, Kahan> hit, ndcg;
    for (const auto& r : report.per_query) {
        rr.add(1.0 / static_cast<double>(r.rank));
        for (std::size_t k : config.ks) {
            const RankMetrics m = metrics_from_rank(r.rank, k);
            hit[k].add(m.hit);
            ndcg[k].add(m.ndcg);
        }
    }
    const double n = static_cast<double>(report.users);
    report.mrr = rr.sum / n;
    for (std::size_t k : config.ks) {
        report.hit[k] = hit[k].sum / n;
        report.ndcg[k] = ndcg[k].sum / n;
    }
    return report;
}

std::vector<std::vector<double>> item_embeddings(const UniRecModel& model, const FeatureStore& fs,
                                                 const EvalConfig& config) {
    const std::size_t n = fs.n_items(), d = model.config().d;
    std::vector<std::vector<double>> out(n);
    const std::size_t batch = config.batch_size;
    const std::size_t chunks = (n + batch - 1) / batch;
    parallel_for(chunks, config.threads, [&](std::size_t begin, std::size_t end) {
        NoGradGuard guard;
        for (std::size_t c = begin; c < end; ++c) {
            std::vector<std::size_t> items;
            for (std::size_t i = c * batch; i < std::min(n, (c + 1) * batch); ++i) items.push_back(i);
            const auto enc = model.encode_items(fs, items);
            const auto data = enc.pooled.data();
            for (std::size_t b = 0; b < items.size(); ++b) {
                out[items[b]].assign(data.begin() + b * d, data.begin() + (b + 1) * d);
            }
        }
    });
    return out;
}

std::vector<std::vector<double>> user_embeddings(const UniRecModel& model, const FeatureStore& fs,
                                                 std::span<const EvalQuery> queries, const EvalConfig& config) {
    const std::size_t n = queries.size(), d = model.config().d;
    std::vector<std::vector<double>> out(n);
    const std::size_t batch = config.batch_size;
    const std::size_t chunks = (n + batch - 1) / batch;
    parallel_for(chunks, config.threads, [&](std::size_t begin, std::size_t end) {
        NoGradGuard guard;
        for (std::size_t c = begin; c < end; ++c) {
            std::vector<std::vector<std::size_t>> histories;
            const std::size_t lo = c * batch, hi = std::min(n, (c + 1) * batch);
            for (std::size_t i = lo; i < hi; ++i) histories.push_back(queries[i].history);
            const Tensor u = model.user_vectors(fs, histories);
            const auto data = u.data();
            for (std::size_t i = lo; i < hi; ++i) {
                out[i].assign(data.begin() + (i - lo) * d, data.begin() + (i - lo + 1) * d);
            }
        }
    });
    return out;
}

EvalReport evaluate_model(const UniRecModel& model, const FeatureStore& fs, std::span<const EvalQuery> queries,
                          const EvalConfig& config) {
    config.validate();
    const auto items = item_embeddings(model, fs, config);
    const auto users = user_embeddings(model, fs, queries, config);
    Scorer dot = [&](std::size_t q, std::span<const std::size_t> candidates) {
        std::vector<double> scores;
        scores.reserve(candidates.size());
        for (std::size_t c : candidates) {
            double s = 0;
            for (std::size_t k = 0; k < users[q].size(); ++k) s += users[q][k] * items[c][k];
            scores.push_back(s);
        }
        return scores;
    };
    return evaluate_queries(queries, fs.n_items(), dot, config);
}

Scorer random_scorer(std::uint64_t seed) {
    return [seed](std::size_t query, std::span<const std::size_t> candidates) {
        std::mt19937_64 rng(mix(seed, std::to_string(query)));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<double> s(candidates.size());
        for (double& x : s) x = u(rng);
        return s;
    };
}

UNIREC_NAMESPACE_END
