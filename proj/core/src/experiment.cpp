#include "unirec/train/experiment.hpp"

#include <set>

UNIREC_NAMESPACE_BEGIN

Dataset apply_core_filter(Dataset data, std::size_t k) {
    data.interactions = five_core_filter(data.interactions, k);
    std::set<std::string> used;
    for (const auto& x : data.interactions) used.insert(x.item_id);
    std::erase_if(data.items, [&](const ItemRecord& item) { return !used.count(item.item_id); });
    return data;
}

PreparedData prepare_data(const RunConfig& config) {
    PreparedData p;
    if (config.data.source == DataSource::synthetic) {
        SyntheticDataset raw = generate_synthetic(config.synthetic_spec());
        p.data = std::move(raw.data);
        p.sidecar = std::make_shared<FeatureSidecar>(std::move(raw.sidecar));
    } else {
        const SchemaRegistry schema = SchemaRegistry::load(config.data.schema);
        LoadOptions options;
        options.strict = config.data.strict;
        p.data = load_dataset(config.data.dataset, schema, options, &p.load_report);
        if (!config.data.sidecar.empty()) {
            p.sidecar = std::make_shared<FeatureSidecar>(FeatureSidecar::load(config.data.sidecar));
        }
    }
    p.raw_interactions = p.data.interactions.size();
    p.raw_items = p.data.items.size();
    if (config.data.five_core) p.data = apply_core_filter(std::move(p.data), config.data.core_k);
    p.users = build_sequences(p.data);
    p.splits = make_splits(p.users, config.model.max_history);
    return p;
}

Experiment::Experiment(RunConfig config, std::shared_ptr<const PreparedData> data)
    : config_(std::move(config)), data_(std::move(data)) {
    config_.validate();
    frozen_ = fit_frozen_encoders(data_->data, config_.registry_options(), config_.numeric_fit(), data_->sidecar);
    fs_ = frozen_.features(data_->data);
    model_ = std::make_unique<UniRecModel>(config_.model, fs_.n_slots, config_.model_seed());
}

Experiment::Experiment(RunConfig config, std::shared_ptr<const PreparedData> data, const Checkpoint& ckpt)
    : config_(std::move(config)), data_(std::move(data)) {
    config_.validate();
    check_compatible(ckpt, config_, data_->data.schema.hash());
    frozen_ = restore_frozen_encoders(restore_numeric_encoder(ckpt), ckpt.stats, config_.registry_options(),
                                      data_->sidecar);
    fs_ = frozen_.features(data_->data);
    if (fs_.n_slots != ckpt.n_slots) {
        throw ConfigError("checkpoint/config mismatch on \"n_slots\": checkpoint " + std::to_string(ckpt.n_slots) +
                          ", dataset " + std::to_string(fs_.n_slots));
    }
    model_ = std::make_unique<UniRecModel>(config_.model, fs_.n_slots, config_.model_seed());
    restore_tensors(ckpt, model_->parameters());
}

StageResult Experiment::pretrain(TrainHooks hooks) {
    if (!hooks.frozen_hash) hooks.frozen_hash = [this] { return frozen_.hash(); };
    return run_pretrain(*model_, fs_, data_->users, config_.train_config(Stage::pretrain), hooks);
}

StageResult Experiment::finetune(TrainHooks hooks) {
    if (!hooks.frozen_hash) hooks.frozen_hash = [this] { return frozen_.hash(); };
    return run_finetune(*model_, fs_, data_->splits.train, config_.train_config(Stage::finetune),
                        config_.stages.freeze_qformers, hooks);
}

EvalReport Experiment::evaluate(EvalSplit split) const {
    const auto& samples = split == EvalSplit::test ? data_->splits.test : data_->splits.valid;
    const auto queries = make_queries(samples, data_->users, fs_);
    return evaluate_model(*model_, fs_, queries, config_.eval_config());
}

Checkpoint Experiment::checkpoint(const std::string& stage) const {
    return capture_checkpoint(config_, *model_, frozen_, data_->data.schema.hash(), stage);
}

EvalReport run_pipeline(const RunConfig& config, std::shared_ptr<const PreparedData> data) {
    Experiment e(config, std::move(data));
    e.pretrain();
    e.finetune();
    return e.evaluate();
}

std::vector<Variant> ablation_cells(const RunConfig& base) {
    auto cell = [&](const char* name, SchemaMode schema, UserMode user) {
        RunConfig c = base;
        c.model.schema_mode = schema;
        c.model.user_mode = user;
        return Variant{name, c};
    };
    return {cell("full", SchemaMode::triplet, UserMode::user_qformer),
            cell("w/o Triplet", SchemaMode::value_only, UserMode::user_qformer),
            cell("w/o User Token", SchemaMode::triplet, UserMode::mean_items),
            cell("w/o Both", SchemaMode::value_only, UserMode::mean_items)};
}

std::vector<Variant> fusion_rows(const RunConfig& base) {
    auto row = [&](const char* name, FusionMode fusion) {
        RunConfig c = base;
        c.model.fusion_mode = fusion;
        // text-only values carry no schema triplet
        if (fusion == FusionMode::pure_text) c.model.schema_mode = SchemaMode::value_only;
        return Variant{name, c};
    };
    return {row("Pure Text", FusionMode::pure_text), row("MLP Fusion", FusionMode::mlp),
            row("Self-Attention Fusion", FusionMode::self_attention), row("UniRec", FusionMode::qformer)};
}

UNIREC_NAMESPACE_END
