#include "unirec/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

UNIREC_NAMESPACE_BEGIN

namespace {

constexpr const char* kSyllables[] = {"ka", "lo", "mi", "ru", "ze", "po", "ta", "ne", "vi", "su", "de", "ga"};
constexpr std::size_t kSyllableCount = std::size(kSyllables);
constexpr const char* kCategoryNames[] = {"Skincare", "Fragrance", "Haircare", "Makeup",  "Nails",  "Bath",
                                          "Strollers", "Feeding",  "Toys",     "Bedding", "Apparel", "Diapers"};
constexpr const char* kPraise[] = {"great", "love", "works", "perfect", "nice"};
constexpr const char* kComplaint[] = {"broke", "meh", "returned", "cheap", "smells"};
constexpr std::size_t kWordsPerCluster = 12;
constexpr std::size_t kSharedWords = 40;

std::string pseudo_word(std::size_t id) {
    std::string w;
    for (int k = 0; k < 3; ++k) {
        w += kSyllables[id % kSyllableCount];
        id /= kSyllableCount;
    }
    return w;
}

std::string cluster_word(std::size_t cluster, std::size_t w) { return pseudo_word(kSharedWords + cluster * kWordsPerCluster + w); }

std::string category_name(std::size_t c) {
    return c < std::size(kCategoryNames) ? kCategoryNames[c] : "Category " + std::to_string(c + 1);
}

std::string padded_id(char prefix, std::size_t i, std::size_t n) {
    const std::size_t digits = std::to_string(n).size();
    std::string s = std::to_string(i + 1);
    return std::string(1, prefix) + std::string(digits > s.size() ? digits - s.size() : 0, '0') + s;
}

double round_to(double x, double step) { return std::round(x / step) * step; }

class Gen {
  public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}
    double normal() { return normal_(rng_); }
    double uniform() { return uniform_(rng_); }
    std::size_t below(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
    std::vector<double> gaussian(std::size_t n, double scale) {
        std::vector<double> v(n);
        for (double& x : v) x = scale * normal();
        return v;
    }
    std::vector<double> unit(std::size_t n) {
        auto v = gaussian(n, 1.0);
        double s = 0;
        for (double x : v) s += x * x;
        for (double& x : v) x /= std::sqrt(s);
        return v;
    }
    std::mt19937_64& engine() { return rng_; }

  private:
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

void SyntheticSpec::validate() const {
    if (n_users == 0 || n_items == 0) throw ConfigError("synthetic: n_users and n_items must be positive");
    if (latent_dim == 0 || image_dim == 0) throw ConfigError("synthetic: latent_dim and image_dim must be positive");
    if (n_clusters == 0 || n_clusters > n_items) throw ConfigError("synthetic: need 1 <= n_clusters <= n_items");
    if (interest_shift && n_clusters < 2) throw ConfigError("synthetic: interest_shift needs two clusters");
    if (min_history < 2 || max_history < min_history) {
        throw ConfigError("synthetic: need 2 <= min_history <= max_history");
    }
    if (max_history > n_items) {
        throw ConfigError("synthetic: max_history " + std::to_string(max_history) + " exceeds the " +
                          std::to_string(n_items) + " items a user can interact with");
    }
    if (!(noise >= 0) || !(missing_rate >= 0 && missing_rate < 1) || !(review_rate >= 0 && review_rate <= 1)) {
        throw ConfigError("synthetic: noise must be >= 0 and rates within [0, 1)");
    }
    if (!(time_start >= 0 && time_end > time_start)) throw ConfigError("synthetic: empty time window");
}

SchemaRegistry synthetic_schema(bool schema_confusion) {
    std::vector<SchemaField> f = {
        {"title", Modality::text, Level::item, ParseRule::none},
        {"category", Modality::categorical, Level::item, ParseRule::comma_list},
        {"description", Modality::text, Level::item, ParseRule::none},
        {"price", Modality::number, Level::item, ParseRule::currency},
        {"average_rating", Modality::number, Level::item, ParseRule::none},
        {"released", Modality::timestamp, Level::item, ParseRule::none},
        {"location", Modality::geopoint, Level::item, ParseRule::none},
        {"image", Modality::image, Level::item, ParseRule::none},
    };
    if (schema_confusion) {
        f.push_back({"attr_alpha", Modality::number, Level::item, ParseRule::none});
        f.push_back({"attr_beta", Modality::number, Level::item, ParseRule::none});
    }
    f.push_back({"timestamp", Modality::timestamp, Level::interaction, ParseRule::none});
    f.push_back({"title", Modality::text, Level::interaction, ParseRule::none});
    f.push_back({"text", Modality::text, Level::interaction, ParseRule::none});
    f.push_back({"rating", Modality::number, Level::interaction, ParseRule::none});
    f.push_back({"image_refs", Modality::image, Level::interaction, ParseRule::none});
    return SchemaRegistry(schema_confusion ? "synthetic-confusion" : "synthetic", std::move(f));
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Gen gen(spec.seed);
    const std::size_t L = spec.latent_dim, C = spec.n_clusters;
    const double inv_sqrt_l = 1.0 / std::sqrt(static_cast<double>(L));

    std::vector<std::vector<double>> centroids(C);
    for (auto& c : centroids) c = gen.gaussian(L, spec.cluster_separation * inv_sqrt_l);
    std::vector<std::vector<std::vector<double>>> word_dirs(C);
    for (auto& dirs : word_dirs) {
        dirs.resize(kWordsPerCluster);
        for (auto& d : dirs) d = gen.unit(L);
    }
    const auto dir_price = gen.unit(L), dir_rating = gen.unit(L), dir_release = gen.unit(L);
    const auto dir_lat = gen.unit(L), dir_lon = gen.unit(L);
    std::vector<std::vector<double>> image_map(spec.image_dim);
    for (auto& row : image_map) row = gen.gaussian(L, 1.0);

    SyntheticDataset out;
    auto& truth = out.truth;
    out.data.schema = synthetic_schema(spec.schema_confusion);

    auto noisy_word = [&](const std::string& w) {
        return gen.uniform() < spec.noise ? pseudo_word(gen.below(kSharedWords + C * kWordsPerCluster)) : w;
    };
    auto present = [&] { return gen.uniform() >= spec.missing_rate; };

    for (std::size_t i = 0; i < spec.n_items; ++i) {
        const std::size_t c = i % C;
        std::vector<double> z = gen.gaussian(L, spec.cluster_spread * inv_sqrt_l);
        for (std::size_t k = 0; k < L; ++k) z[k] += centroids[c][k];
        const double g = spec.schema_confusion ? gen.normal() : 0.0;

        // words whose directions best match the item's offset from its centroid
        std::vector<std::pair<double, std::size_t>> word_rank;
        std::vector<double> offset(L);
        for (std::size_t k = 0; k < L; ++k) offset[k] = z[k] - centroids[c][k];
        for (std::size_t w = 0; w < kWordsPerCluster; ++w) word_rank.push_back({-dot(offset, word_dirs[c][w]), w});
        std::sort(word_rank.begin(), word_rank.end());

        ItemRecord item;
        item.item_id = padded_id('i', i, spec.n_items);
        auto add = [&](const char* name, Modality m, AttributeValue v) { item.attributes.push_back({name, m, std::move(v)}); };

        add("title", Modality::text,
            noisy_word(cluster_word(c, word_rank[0].second)) + " " + noisy_word(cluster_word(c, word_rank[1].second)) +
                " " + pseudo_word(gen.below(kSharedWords)));
        if (present()) {
            const std::size_t label = gen.uniform() < spec.noise ? gen.below(C) : c;
            add("category", Modality::categorical, std::vector<std::string>{category_name(label)});
        }
        if (present()) {
            std::string d = "with";
            for (std::size_t r = 0; r < 3; ++r) d += " " + noisy_word(cluster_word(c, word_rank[r].second));
            d += " " + pseudo_word(gen.below(kSharedWords)) + " " + pseudo_word(gen.below(kSharedWords));
            add("description", Modality::text, d);
        }
        if (present()) {
            const double p = std::exp(3.0 + 0.6 * dot(z, dir_price) + 0.3 * spec.noise * gen.normal());
            add("price", Modality::number, round_to(p, 0.01));
        }
        if (present()) {
            const double r = std::clamp(3.5 + 0.6 * dot(z, dir_rating) + spec.noise * gen.normal(), 1.0, 5.0);
            add("average_rating", Modality::number, round_to(r, 0.1));
        }
        if (present()) {
            const double years = 1.5 + 0.8 * dot(z, dir_release) + 0.3 * spec.noise * gen.normal();
            const auto back = static_cast<std::int64_t>(std::clamp(years, 0.0, 4.0) * 365.0 * 86400.0);
            add("released", Modality::timestamp, std::int64_t{std::max<std::int64_t>(0, spec.time_start - back)});
        }
        if (present()) {
            const double lat = std::clamp(30.0 + 12.0 * dot(z, dir_lat) + spec.noise * gen.normal(), -89.0, 89.0);
            const double lon = std::clamp(-100.0 + 25.0 * dot(z, dir_lon) + spec.noise * gen.normal(), -179.0, 179.0);
            add("location", Modality::geopoint, GeoPoint{round_to(lat, 1e-6), round_to(lon, 1e-6)});
        }
        if (present()) {
            add("image", Modality::image, std::vector<std::string>{"img/" + item.item_id + ".jpg"});
            std::vector<float> v(spec.image_dim);
            for (std::size_t r = 0; r < spec.image_dim; ++r) {
                v[r] = static_cast<float>(dot(image_map[r], z) + spec.noise * gen.normal());
            }
            out.sidecar.put(item.item_id, "image", std::move(v));
        }
        if (spec.schema_confusion) {
            add("attr_alpha", Modality::number, round_to(g + 0.25 * gen.normal(), 1e-4));
            add("attr_beta", Modality::number, round_to(-g + 0.25 * gen.normal(), 1e-4));
        }
        out.data.items.push_back(std::move(item));
        truth.item_cluster.push_back(c);
        truth.item_latent.push_back(std::move(z));
        truth.item_factor.push_back(g);
    }

    std::vector<double> logits(spec.n_items);
    for (std::size_t u = 0; u < spec.n_users; ++u) {
        const std::string user_id = padded_id('u', u, spec.n_users);
        const std::size_t a = gen.below(C);
        std::size_t b = a;
        if (spec.interest_shift) b = (a + 1 + gen.below(C - 1)) % C;
        auto taste = [&](std::size_t cluster) {
            auto t = gen.gaussian(L, 0.5 * spec.cluster_spread * inv_sqrt_l);
            for (std::size_t k = 0; k < L; ++k) t[k] += centroids[cluster][k];
            return t;
        };
        const auto theta_a = taste(a), theta_b = taste(b);
        const double sign = gen.uniform() < 0.5 ? -1.0 : 1.0;
        truth.user_early_cluster.push_back(a);
        truth.user_late_cluster.push_back(b);
        truth.user_sign.push_back(sign);

        const std::size_t n = spec.min_history + gen.below(spec.max_history - spec.min_history + 1);
        std::vector<std::int64_t> times(n);
        std::uniform_int_distribution<std::int64_t> when(spec.time_start, spec.time_end);
        for (auto& t : times) t = when(gen.engine());
        std::sort(times.begin(), times.end());

        std::vector<char> taken(spec.n_items, 0);
        for (std::size_t k = 0; k < n; ++k) {
            const auto& theta = (spec.interest_shift && 2 * k >= n) ? theta_b : theta_a;
            double hi = -1e300;
            for (std::size_t i = 0; i < spec.n_items; ++i) {
                logits[i] = spec.affinity_scale * dot(theta, truth.item_latent[i]) +
                            spec.confusion_weight * sign * truth.item_factor[i];
                if (!taken[i]) hi = std::max(hi, logits[i]);
            }
            double total = 0;
            for (std::size_t i = 0; i < spec.n_items; ++i) total += taken[i] ? 0.0 : std::exp(logits[i] - hi);
            double r = gen.uniform() * total;
            std::size_t pick = spec.n_items;
            for (std::size_t i = 0; i < spec.n_items; ++i) {
                if (taken[i]) continue;
                pick = i;
                r -= std::exp(logits[i] - hi);
                if (r <= 0) break;
            }
            taken[pick] = 1;

            Interaction x;
            x.user_id = user_id;
            x.item_id = out.data.items[pick].item_id;
            x.timestamp = times[k];
            if (gen.uniform() < spec.review_rate) {
                Review rev;
                const double liking = sign * truth.item_factor[pick] + 0.5 * gen.normal();
                rev.rating = std::clamp(std::round(3.5 + liking), 1.0, 5.0);
                const auto& mood = *rev.rating >= 3.0 ? kPraise : kComplaint;
                rev.text = std::string(mood[gen.below(5)]) + " " +
                           cluster_word(truth.item_cluster[pick], gen.below(kWordsPerCluster));
                if (gen.uniform() < 0.5) rev.title = mood[gen.below(5)];
                if (gen.uniform() < 0.15) rev.image_refs.push_back("rev/" + user_id + "_" + std::to_string(k) + ".jpg");
                x.review = std::move(rev);
            }
            out.data.interactions.push_back(std::move(x));
        }
    }
    return out;
}

UNIREC_NAMESPACE_END
