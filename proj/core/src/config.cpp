#include "unirec/io/config.hpp"

#include <concepts>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

UNIREC_NAMESPACE_BEGIN

using json = nlohmann::json;

namespace {

// Walks one JSON object, remembering which keys were read so the rest can
// be reported as unknown.
class Section {
  public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
    }

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* find(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void read(const std::string& key, bool& out) {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) throw type_error(key, "a boolean");
            out = v->get<bool>();
        }
    }
    template <std::unsigned_integral U>
    void read(const std::string& key, U& out) {
        if (const json* v = find(key)) out = static_cast<U>(unsigned_value(key, *v));
    }
    void read(const std::string& key, std::int64_t& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_integer()) throw type_error(key, "an integer");
            out = v->get<std::int64_t>();
        }
    }
    void read(const std::string& key, double& out) {
        if (const json* v = find(key)) {
            if (!v->is_number()) throw type_error(key, "a number");
            out = v->get<double>();
        }
    }
    void read(const std::string& key, std::string& out) {
        if (const json* v = find(key)) {
            if (!v->is_string()) throw type_error(key, "a string");
            out = v->get<std::string>();
        }
    }
    void read(const std::string& key, std::vector<std::size_t>& out) {
        if (const json* v = find(key)) {
            if (!v->is_array()) throw type_error(key, "an array of integers");
            out.clear();
            for (const auto& e : *v) out.push_back(unsigned_value(key, e));
        }
    }
    template <typename E, typename Parse>
    void read_enum(const std::string& key, E& out, Parse parse) {
        std::string s;
        read(key, s);
        if (s.empty()) return;
        try {
            out = parse(s);
        } catch (const ConfigError& e) {
            throw ConfigError((path_.empty() ? "" : path_ + ".") + e.what());
        }
    }

    Section sub(const std::string& key) {
        static const json empty = json::object();
        const json* v = find(key);
        return Section(v ? *v : empty, key_path(key));
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) throw ConfigError("unknown config key '" + key_path(key) + "'");
        }
    }

  private:
    std::string where() const { return path_.empty() ? "config" : path_; }

    ConfigError type_error(const std::string& key, const char* expected) const {
        return ConfigError(key_path(key) + ": expected " + expected);
    }

    std::uint64_t unsigned_value(const std::string& key, const json& v) const {
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
            throw type_error(key, "a non-negative integer");
        }
        return v.get<std::uint64_t>();
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

const char* source_name(DataSource s) { return s == DataSource::synthetic ? "synthetic" : "jsonl"; }

DataSource parse_source(std::string_view s) {
    if (s == "synthetic") return DataSource::synthetic;
    if (s == "jsonl") return DataSource::jsonl;
    throw ConfigError("source: unknown value '" + std::string(s) + "' (expected one of synthetic, jsonl)");
}

// Rethrows a sub-validator's message under the section it came from.
template <typename F>
void within(const char* section, F&& check) {
    try {
        check();
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        if (msg.rfind(section, 0) == 0) throw;
        throw ConfigError(std::string(section) + ": " + msg);
    }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::uint64_t RunConfig::model_seed() const { return derive_seed(seed, 1); }
std::uint64_t RunConfig::numeric_seed() const { return derive_seed(seed, 2); }
std::uint64_t RunConfig::train_seed(Stage stage) const { return derive_seed(seed, stage == Stage::pretrain ? 3 : 4); }
std::uint64_t RunConfig::eval_seed() const { return derive_seed(seed, 5); }

SyntheticSpec RunConfig::synthetic_spec() const {
    SyntheticSpec s = synthetic;
    s.seed = data_seed();
    return s;
}

RegistryOptions RunConfig::registry_options() const {
    RegistryOptions r = registry;
    r.d = model.d;
    return r;
}

NumericFitConfig RunConfig::numeric_fit() const {
    NumericFitConfig f = numeric;
    f.seed = numeric_seed();
    return f;
}

TrainConfig RunConfig::train_config(Stage stage) const {
    TrainConfig t = train;
    t.epochs = stage == Stage::pretrain ? stages.pretrain_epochs : stages.finetune_epochs;
    t.seed = train_seed(stage);
    return t;
}

EvalConfig RunConfig::eval_config() const {
    EvalConfig e = eval;
    e.seed = eval_seed();
    return e;
}

void RunConfig::validate() const {
    if (model.fusion_mode == FusionMode::pure_text && model.schema_mode == SchemaMode::triplet) {
        throw ConfigError("model.fusion_mode=pure_text conflicts with model.schema_mode=triplet (use value_only)");
    }
    within("model", [&] {
        model.validate();
        if (model.user_mode == UserMode::user_qformer) model.user_qformer().validate();
    });
    within("train", [&] { train.validate(); });
    within("eval", [&] { eval.validate(); });
    if (data.source == DataSource::jsonl) {
        if (data.dataset.empty() || data.schema.empty()) {
            throw ConfigError("data.source=jsonl requires data.dataset and data.schema");
        }
    } else {
        within("synthetic", [&] { synthetic_spec().validate(); });
    }
    if (data.five_core && data.core_k < 1) throw ConfigError("data.core_k must be at least 1");
    if (numeric.steps < 1 || numeric.batch_size < 3) {
        throw ConfigError("numeric.steps must be positive and numeric.batch_size at least 3");
    }
    if (!(numeric.lr > 0)) throw ConfigError("numeric.lr must be positive");
    if (!(numeric.low < numeric.high)) throw ConfigError("numeric.low must be below numeric.high");
    if (registry.text_native_width < 1 || registry.image_fallback_width < 1) {
        throw ConfigError("registry.text_native_width and registry.image_fallback_width must be positive");
    }
}

std::string RunConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["data"] = {{"source", source_name(data.source)},
                 {"dataset", data.dataset},
                 {"schema", data.schema},
                 {"sidecar", data.sidecar},
                 {"strict", data.strict},
                 {"five_core", data.five_core},
                 {"core_k", data.core_k}};
    const SyntheticSpec& s = synthetic;
    j["synthetic"] = {{"n_users", s.n_users},
                      {"n_items", s.n_items},
                      {"latent_dim", s.latent_dim},
                      {"n_clusters", s.n_clusters},
                      {"noise", s.noise},
                      {"schema_confusion", s.schema_confusion},
                      {"confusion_weight", s.confusion_weight},
                      {"interest_shift", s.interest_shift},
                      {"min_history", s.min_history},
                      {"max_history", s.max_history},
                      {"cluster_separation", s.cluster_separation},
                      {"cluster_spread", s.cluster_spread},
                      {"affinity_scale", s.affinity_scale},
                      {"missing_rate", s.missing_rate},
                      {"review_rate", s.review_rate},
                      {"image_dim", s.image_dim},
                      {"time_start", s.time_start},
                      {"time_end", s.time_end}};
    j["synthetic"]["seed"] = synthetic_seed ? json(*synthetic_seed) : json(nullptr);
    j["registry"] = {{"seed", registry.seed},
                     {"text_native_width", registry.text_native_width},
                     {"image_fallback_width", registry.image_fallback_width},
                     {"strict_images", registry.strict_images}};
    j["numeric"] = {{"steps", numeric.steps},
                    {"batch_size", numeric.batch_size},
                    {"lr", numeric.lr},
                    {"warmup_steps", numeric.warmup_steps},
                    {"low", numeric.low},
                    {"high", numeric.high},
                    {"weights",
                     {{"additivity", numeric.weights.additivity},
                      {"invertibility", numeric.weights.invertibility},
                      {"distance", numeric.weights.distance},
                      {"margin", numeric.weights.margin}}}};
    j["model"] = {{"d", model.d},
                  {"k_item", model.k_item},
                  {"k_user", model.k_user},
                  {"n_layers", model.n_layers},
                  {"n_heads", model.n_heads},
                  {"ffn_mult", model.ffn_mult},
                  {"n_reader_layers", model.n_reader_layers},
                  {"max_history", model.max_history},
                  {"schema_mode", to_string(model.schema_mode)},
                  {"fusion_mode", to_string(model.fusion_mode)},
                  {"user_mode", to_string(model.user_mode)},
                  {"reader_mode", to_string(model.reader_mode)},
                  {"step_positions", model.step_positions}};
    j["train"] = {{"lr", train.lr},
                  {"beta1", train.beta1},
                  {"beta2", train.beta2},
                  {"weight_decay", train.weight_decay},
                  {"warmup_steps", train.warmup_steps},
                  {"tau", train.tau},
                  {"lambda_recon", train.lambda_recon},
                  {"batch_size", train.batch_size},
                  {"grad_clip", train.grad_clip},
                  {"max_steps", train.max_steps},
                  {"pretrain_epochs", stages.pretrain_epochs},
                  {"finetune_epochs", stages.finetune_epochs},
                  {"freeze_qformers", stages.freeze_qformers}};
    j["eval"] = {{"n_negatives", eval.n_negatives},
                 {"ks", eval.ks},
                 {"threads", eval.threads},
                 {"batch_size", eval.batch_size}};
    return j.dump();
}

std::uint64_t RunConfig::hash() const {
    // results do not depend on the worker count, so it stays out of the hash
    json j = json::parse(to_json());
    j["eval"].erase("threads");
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : j.dump()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string RunConfig::hash_hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
    return buf;
}

RunConfig RunConfig::from_json(std::string_view text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig c;
    Section top(root, "");
    top.read("seed", c.seed);
    {
        Section s = top.sub("data");
        s.read_enum("source", c.data.source, parse_source);
        s.read("dataset", c.data.dataset);
        s.read("schema", c.data.schema);
        s.read("sidecar", c.data.sidecar);
        s.read("strict", c.data.strict);
        s.read("five_core", c.data.five_core);
        s.read("core_k", c.data.core_k);
        s.finish();
    }
    {
        Section s = top.sub("synthetic");
        SyntheticSpec& y = c.synthetic;
        s.read("n_users", y.n_users);
        s.read("n_items", y.n_items);
        s.read("latent_dim", y.latent_dim);
        s.read("n_clusters", y.n_clusters);
        s.read("noise", y.noise);
        s.read("schema_confusion", y.schema_confusion);
        s.read("confusion_weight", y.confusion_weight);
        s.read("interest_shift", y.interest_shift);
        s.read("min_history", y.min_history);
        s.read("max_history", y.max_history);
        s.read("cluster_separation", y.cluster_separation);
        s.read("cluster_spread", y.cluster_spread);
        s.read("affinity_scale", y.affinity_scale);
        s.read("missing_rate", y.missing_rate);
        s.read("review_rate", y.review_rate);
        s.read("image_dim", y.image_dim);
        s.read("time_start", y.time_start);
        s.read("time_end", y.time_end);
        if (const json* v = s.find("seed"); v && !v->is_null()) {
            std::uint64_t seed = 0;
            s.read("seed", seed);
            c.synthetic_seed = seed;
        }
        s.finish();
    }
    {
        Section s = top.sub("registry");
        s.read("seed", c.registry.seed);
        s.read("text_native_width", c.registry.text_native_width);
        s.read("image_fallback_width", c.registry.image_fallback_width);
        s.read("strict_images", c.registry.strict_images);
        s.finish();
    }
    {
        Section s = top.sub("numeric");
        s.read("steps", c.numeric.steps);
        s.read("batch_size", c.numeric.batch_size);
        s.read("lr", c.numeric.lr);
        s.read("warmup_steps", c.numeric.warmup_steps);
        s.read("low", c.numeric.low);
        s.read("high", c.numeric.high);
        Section w = s.sub("weights");
        w.read("additivity", c.numeric.weights.additivity);
        w.read("invertibility", c.numeric.weights.invertibility);
        w.read("distance", c.numeric.weights.distance);
        w.read("margin", c.numeric.weights.margin);
        w.finish();
        s.finish();
    }
    {
        Section s = top.sub("model");
        ModelConfig& m = c.model;
        s.read("d", m.d);
        s.read("k_item", m.k_item);
        s.read("k_user", m.k_user);
        s.read("n_layers", m.n_layers);
        s.read("n_heads", m.n_heads);
        s.read("ffn_mult", m.ffn_mult);
        s.read("n_reader_layers", m.n_reader_layers);
        s.read("max_history", m.max_history);
        s.read_enum("schema_mode", m.schema_mode, parse_schema_mode);
        s.read_enum("fusion_mode", m.fusion_mode, parse_fusion_mode);
        s.read_enum("user_mode", m.user_mode, parse_user_mode);
        s.read_enum("reader_mode", m.reader_mode, parse_reader_mode);
        s.read("step_positions", m.step_positions);
        s.finish();
    }
    {
        Section s = top.sub("train");
        TrainConfig& t = c.train;
        s.read("lr", t.lr);
        s.read("beta1", t.beta1);
        s.read("beta2", t.beta2);
        s.read("weight_decay", t.weight_decay);
        s.read("warmup_steps", t.warmup_steps);
        s.read("tau", t.tau);
        s.read("lambda_recon", t.lambda_recon);
        s.read("batch_size", t.batch_size);
        s.read("grad_clip", t.grad_clip);
        s.read("max_steps", t.max_steps);
        s.read("pretrain_epochs", c.stages.pretrain_epochs);
        s.read("finetune_epochs", c.stages.finetune_epochs);
        s.read("freeze_qformers", c.stages.freeze_qformers);
        s.finish();
    }
    {
        Section s = top.sub("eval");
        s.read("n_negatives", c.eval.n_negatives);
        s.read("ks", c.eval.ks);
        s.read("threads", c.eval.threads);
        s.read("batch_size", c.eval.batch_size);
        s.finish();
    }
    top.finish();
    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

UNIREC_NAMESPACE_END
