#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "unirec/data/sequences.hpp"
#include "unirec/model/model.hpp"

UNIREC_NAMESPACE_BEGIN

struct TrainConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 0.01;
    std::size_t warmup_steps = 20;
    double tau = 0.07;
    double lambda_recon = 0.5;
    std::size_t epochs = 50;
    std::size_t batch_size = 16;
    double grad_clip = 1.0;
    std::uint64_t seed = 0;
    /// Caps the optimizer steps of a stage (0 = epochs decide).
    std::size_t max_steps = 0;

    void validate() const;
};

enum class Stage : std::uint8_t { pretrain, finetune };
const char* to_string(Stage s);

struct StepRecord {
    Stage stage = Stage::pretrain;
    std::size_t epoch = 0;
    std::size_t step = 0;
    std::size_t batch = 0;  // pairs kept after collision dropping
    double lr = 0;
    double loss = 0;
    double contrast = 0;
    double recon = 0;
    double grad_norm = 0;
};

struct EpochRecord {
    Stage stage = Stage::pretrain;
    std::size_t epoch = 0;
    std::size_t steps = 0;
    double mean_loss = 0;
};

struct TrainHooks {
    std::function<void(const StepRecord&)> on_step;
    std::function<void(const EpochRecord&)> on_epoch;
    /// Hash of the frozen modality encoders; checked after every step.
    std::function<std::uint64_t()> frozen_hash;
};

struct StageResult {
    std::size_t steps = 0;
    std::size_t skipped_batches = 0;
    std::vector<double> losses;  // per step
    std::vector<double> epoch_loss;
};

/// FNV-1a over names, shapes and raw values.
std::uint64_t parameter_hash(const NamedTensors& params);

/// Parameter groups each stage optimizes.
std::vector<std::string_view> stage_groups(Stage stage, bool freeze_qformers);

/// One adjacent item pair per user with at least two interactions before
/// the held-out tail, drawn with `rng`.
std::vector<std::pair<std::size_t, std::size_t>> sample_adjacent_pairs(const std::vector<UserSequence>& users,
                                                                       const FeatureStore& fs, std::mt19937_64& rng);

StageResult run_pretrain(UniRecModel& model, const FeatureStore& fs, const std::vector<UserSequence>& users,
                         const TrainConfig& config, const TrainHooks& hooks = {});

/// `freeze_qformers` keeps the item and user encoders fixed and trains only
/// the interaction projections and the reader.
StageResult run_finetune(UniRecModel& model, const FeatureStore& fs, std::span<const Sample> samples,
                         const TrainConfig& config, bool freeze_qformers = false, const TrainHooks& hooks = {});

UNIREC_NAMESPACE_END
