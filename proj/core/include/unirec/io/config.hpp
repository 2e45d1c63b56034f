#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "unirec/data/synthetic.hpp"
#include "unirec/embed/embedders.hpp"
#include "unirec/eval/evaluate.hpp"
#include "unirec/model/model.hpp"
#include "unirec/numeric/numeric_encoder.hpp"
#include "unirec/train/trainer.hpp"

UNIREC_NAMESPACE_BEGIN

enum class DataSource : std::uint8_t { synthetic, jsonl };

struct DataConfig {
    DataSource source = DataSource::synthetic;
    std::string dataset;  // canonical JSONL
    std::string schema;   // schema registry JSON
    std::string sidecar;  // optional feature sidecar
    bool strict = false;
    bool five_core = true;
    std::size_t core_k = 5;
};

struct StageConfig {
    std::size_t pretrain_epochs = 50;
    std::size_t finetune_epochs = 50;
    /// Fine-tune only the interaction projections and the reader.
    bool freeze_qformers = false;
};

/// Everything one run depends on. Sub-seeds are derived from `seed`, so a
/// single override reseeds the whole run.
struct RunConfig {
    std::uint64_t seed = 0;
    DataConfig data;
    /// Used when data.source is synthetic. `synthetic.seed` follows the run
    /// seed unless pinned by the file.
    SyntheticSpec synthetic;
    std::optional<std::uint64_t> synthetic_seed;
    RegistryOptions registry;
    NumericFitConfig numeric;
    ModelConfig model;
    TrainConfig train;
    StageConfig stages;
    EvalConfig eval;

    /// Throws ConfigError naming the offending keys.
    void validate() const;

    std::uint64_t model_seed() const;
    std::uint64_t numeric_seed() const;
    std::uint64_t train_seed(Stage stage) const;
    std::uint64_t eval_seed() const;
    std::uint64_t data_seed() const { return synthetic_seed.value_or(seed); }

    /// Effective settings as synthesized for a given stage.
    SyntheticSpec synthetic_spec() const;
    RegistryOptions registry_options() const;
    NumericFitConfig numeric_fit() const;
    TrainConfig train_config(Stage stage) const;
    EvalConfig eval_config() const;

    /// Canonical form: every key, sorted, no whitespace.
    std::string to_json() const;
    /// FNV-1a of the canonical form.
    std::uint64_t hash() const;
    std::string hash_hex() const;

    /// Missing keys keep their defaults; unknown keys, wrong types and
    /// invalid combinations throw ConfigError naming the key.
    static RunConfig from_json(std::string_view text);
    static RunConfig load(const std::string& path);
};

/// splitmix64 finalizer over (seed, salt).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

UNIREC_NAMESPACE_END
