#include "unirec/train/model_check.hpp"

#include <chrono>

#include "unirec/data/sequences.hpp"
#include "unirec/data/synthetic.hpp"
#include "unirec/train/objectives.hpp"
#include "unirec/train/pipeline.hpp"

UNIREC_NAMESPACE_BEGIN

ModelConfig gradcheck_model_config(const ModelConfig& modes) {
    ModelConfig c = modes;
    c.d = 8;
    c.k_item = 2;
    c.k_user = 2;
    c.n_layers = 2;
    c.n_heads = 2;
    c.ffn_mult = 2;
    c.n_reader_layers = 1;
    c.max_history = 2;
    return c;
}

std::vector<GradcheckCase> whole_model_gradcheck(const ModelConfig& modes, std::uint64_t seed) {
    const ModelConfig config = gradcheck_model_config(modes);
    SyntheticSpec spec;
    spec.n_users = 4;
    spec.n_items = 8;
    spec.n_clusters = 2;
    spec.min_history = 4;
    spec.max_history = 6;
    spec.image_dim = 8;
    spec.interest_shift = false;
    spec.seed = seed;
    const SyntheticDataset raw = generate_synthetic(spec);
    RegistryOptions options;
    options.d = config.d;
    options.text_native_width = 32;
    NumericFitConfig fit;
    fit.steps = 5;
    fit.seed = seed;
    const auto frozen =
        fit_frozen_encoders(raw.data, options, fit, std::make_shared<FeatureSidecar>(raw.sidecar));
    const FeatureStore fs = frozen.features(raw.data);
    const auto users = build_sequences(raw.data);
    const UniRecModel model(config, fs.n_slots, seed);

    std::vector<GradcheckCase> out;
    auto run = [&](std::string name, const std::function<Tensor()>& loss, const NamedTensors& params) {
        const auto t0 = std::chrono::steady_clock::now();
        GradcheckCase c{std::move(name), check_gradients(loss, params), 0};
        c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.push_back(std::move(c));
    };

    const std::vector<std::pair<std::size_t, std::size_t>> pairs{{0, 1}, {2, 3}};
    run("pretrain", [&] { return pretrain_loss(model, fs, pairs, 0.5, 0.07).total; },
        model.parameters_in({"schema.", "item.", "recon."}));

    // T = 2: the first two events of two users, scored against two items
    std::vector<std::vector<std::size_t>> histories;
    for (std::size_t u = 0; u < 2; ++u) histories.push_back({users[u].events[0], users[u].events[1]});
    const std::vector<std::size_t> targets{4, 5};
    run("finetune", [&] { return finetune_loss(model, fs, histories, targets, 0.07); },
        model.parameters_in({"schema.", "item.", "interaction.", "user.", "reader."}));
    return out;
}

UNIREC_NAMESPACE_END

#if defined(UNIREC_REAL_DOUBLE)

#include "unirec/io/config.hpp"
#include "unirec/train/gradcheck_fp64.hpp"

namespace unirec::fp64 {

std::vector<GradcheckRow> gradcheck_from_config(const std::string& config_path, std::optional<std::uint64_t> seed) {
    RunConfig c = RunConfig::load(config_path);
    if (seed) c.seed = *seed;
    std::vector<GradcheckRow> rows;
    for (const auto& k : whole_model_gradcheck(c.model, c.model_seed())) {
        rows.push_back({k.name, k.report.checked, k.report.max_rel_error, k.report.worst_tensor, k.report.worst_index,
                        k.seconds});
    }
    return rows;
}

}  // namespace unirec::fp64

#endif
