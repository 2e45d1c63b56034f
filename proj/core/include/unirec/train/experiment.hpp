#pragma once

#include <memory>
#include <string>
#include <vector>

#include "unirec/eval/evaluate.hpp"
#include "unirec/io/checkpoint.hpp"
#include "unirec/io/config.hpp"

UNIREC_NAMESPACE_BEGIN

/// Dataset after loading (or synthesis) and k-core filtering, with its user
/// sequences and leave-one-out splits.
struct PreparedData {
    Dataset data;
    std::shared_ptr<const FeatureSidecar> sidecar;
    std::vector<UserSequence> users;
    Splits splits;
    LoadReport load_report;
    std::size_t raw_interactions = 0;
    std::size_t raw_items = 0;
};

/// Keeps the k-core of the interaction graph and the items it references.
Dataset apply_core_filter(Dataset data, std::size_t k);

PreparedData prepare_data(const RunConfig& config);

enum class EvalSplit : std::uint8_t { valid, test };

/// One configured run: frozen encoders, feature store and model over a
/// prepared dataset.
class Experiment {
  public:
    /// Fits the frozen encoders and initializes a fresh model.
    Experiment(RunConfig config, std::shared_ptr<const PreparedData> data);
    /// Restores the frozen encoders and model weights from `ckpt` after
    /// checking it against the config and the dataset schema.
    Experiment(RunConfig config, std::shared_ptr<const PreparedData> data, const Checkpoint& ckpt);

    const RunConfig& config() const { return config_; }
    const PreparedData& data() const { return *data_; }
    const FrozenEncoders& frozen() const { return frozen_; }
    const FeatureStore& features() const { return fs_; }
    UniRecModel& model() { return *model_; }
    const UniRecModel& model() const { return *model_; }

    /// The frozen-hash hook is filled in when absent.
    StageResult pretrain(TrainHooks hooks = {});
    StageResult finetune(TrainHooks hooks = {});

    EvalReport evaluate(EvalSplit split = EvalSplit::test) const;
    Checkpoint checkpoint(const std::string& stage) const;

  private:
    RunConfig config_;
    std::shared_ptr<const PreparedData> data_;
    FrozenEncoders frozen_;
    FeatureStore fs_;
    std::unique_ptr<UniRecModel> model_;
};

/// Pretrain, finetune, evaluate on the test split.
EvalReport run_pipeline(const RunConfig& config, std::shared_ptr<const PreparedData> data);

struct Variant {
    std::string name;
    RunConfig config;
};

/// The four cells of the triplet x user-token grid, full model first:
/// full, w/o Triplet, w/o User Token, w/o Both.
std::vector<Variant> ablation_cells(const RunConfig& base);
/// Item fusion alternatives: Pure Text, MLP Fusion, Self-Attention Fusion
/// and the Q-Former.
std::vector<Variant> fusion_rows(const RunConfig& base);

inline constexpr std::size_t kSweepTokenCounts[] = {1, 2, 4, 8, 16};

UNIREC_NAMESPACE_END
