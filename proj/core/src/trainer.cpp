#include "unirec/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

#include "unirec/train/objectives.hpp"
#include "unirec/train/optim.hpp"

UNIREC_NAMESPACE_BEGIN

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv(std::uint64_t& h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
}

// Turns off gradients outside the stage's groups for the scope's lifetime.
class TrainableScope {
  public:
    TrainableScope(const UniRecModel& model, const std::vector<std::string_view>& groups) {
        for (auto& [name, t] : model.parameters()) {
            const bool on = std::any_of(groups.begin(), groups.end(),
                                        [&](std::string_view g) { return std::string_view(name).starts_with(g); });
            Tensor handle = t;
            handle.zero_grad();
            handle.set_requires_grad(on);
            all_.push_back(handle);
            if (on) trainable_.emplace_back(name, t);
        }
    }
    ~TrainableScope() {
        for (auto& t : all_) {
            t.zero_grad();
            t.set_requires_grad(true);
        }
    }
    TrainableScope(const TrainableScope&) = delete;
    TrainableScope& operator=(const TrainableScope&) = delete;

    const NamedTensors& trainable() const { return trainable_; }

  private:
    std::vector<Tensor> all_;
    NamedTensors trainable_;
};

std::mt19937_64 stage_rng(std::uint64_t seed, Stage stage) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stage) + 101u};
    return std::mt19937_64(seq);
}

std::size_t planned_steps(std::size_t n, const TrainConfig& config) {
    const std::size_t per_epoch = (n + config.batch_size - 1) / config.batch_size;
    const std::size_t total = per_epoch * config.epochs;
    return config.max_steps > 0 ? std::min(total, config.max_steps) : total;
}

// Shared optimizer loop. `next_loss(batch_begin, batch_end, record)` builds
// the loss of one batch, or returns an empty tensor to skip it.
template <typename BatchLoss, typename Shuffle>
StageResult run_stage(Stage stage, UniRecModel& model, std::size_t n, const TrainConfig& config, bool freeze_qformers,
                      const TrainHooks& hooks, Shuffle&& shuffle, BatchLoss&& batch_loss) {
    config.validate();
    StageResult result;
    if (n == 0) throw DataError(std::string(to_string(stage)) + ": no training examples");
    TrainableScope scope(model, stage_groups(stage, freeze_qformers));
    AdamWConfig opt_cfg{config.lr, config.beta1, config.beta2, 1e-8, config.weight_decay};
    AdamW opt(scope.trainable(), opt_cfg);
    const std::size_t total = planned_steps(n, config);
    LrSchedule schedule{config.lr, config.warmup_steps, std::max<std::size_t>(total, 1)};
    const std::uint64_t frozen_before = hooks.frozen_hash ? hooks.frozen_hash() : 0;

    for (std::size_t epoch = 1; epoch <= config.epochs && result.steps < total; ++epoch) {
        shuffle(epoch);
        double epoch_sum = 0;
        std::size_t epoch_steps = 0;
        for (std::size_t begin = 0; begin < n && result.steps < total; begin += config.batch_size) {
            StepRecord rec;
            rec.stage = stage;
            rec.epoch = epoch;
            opt.zero_grad();
            Tensor loss = batch_loss(begin, std::min(n, begin + config.batch_size), rec);
            if (!loss.defined()) {
                ++result.skipped_batches;
                continue;
            }
            loss.backward();
            rec.grad_norm = clip_grad_norm(opt.params(), config.grad_clip);
            rec.step = ++result.steps;
            rec.lr = schedule.at(rec.step);
            opt.step(rec.lr);
            rec.loss = static_cast<double>(loss.item());
            if (!std::isfinite(rec.loss)) {
                throw NumericError(std::string(to_string(stage)) + ": loss is not finite at step " +
                                   std::to_string(rec.step));
            }
            if (hooks.frozen_hash && hooks.frozen_hash() != frozen_before) {
                throw NumericError("frozen modality encoder changed during " + std::string(to_string(stage)));
            }
            result.losses.push_back(rec.loss);
            epoch_sum += rec.loss;
            ++epoch_steps;
            if (hooks.on_step) hooks.on_step(rec);
        }
        const double mean_loss = epoch_steps ? epoch_sum / static_cast<double>(epoch_steps) : 0.0;
        result.epoch_loss.push_back(mean_loss);
        if (hooks.on_epoch) hooks.on_epoch({stage, epoch, epoch_steps, mean_loss});
    }
    opt.zero_grad();
    return result;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(lr > 0)) throw ConfigError("train.lr must be positive");
    if (!(tau > 0)) throw ConfigError("train.tau must be positive");
    if (warmup_steps < 1) throw ConfigError("train.warmup_steps must be at least 1");
    if (!(grad_clip > 0)) throw ConfigError("train.grad_clip must be positive");
    if (batch_size < 2) throw ConfigError("train.batch_size must be at least 2 for in-batch negatives");
    if (!(lambda_recon >= 0)) throw ConfigError("train.lambda_recon must be non-negative");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw ConfigError("train.betas must lie in [0, 1)");
    if (!(weight_decay >= 0)) throw ConfigError("train.weight_decay must be non-negative");
}

const char* to_string(Stage s) { return s == Stage::pretrain ? "pretrain" : "finetune"; }

std::uint64_t parameter_hash(const NamedTensors& params) {
    std::uint64_t h = kFnvOffset;
    for (const auto& [name, t] : params) {
        fnv(h, name.data(), name.size());
        for (std::size_t dim : t.shape()) {
            const std::uint64_t v = dim;
            fnv(h, &v, sizeof v);
        }
        const auto data = t.data();
        fnv(h, data.data(), data.size() * sizeof(Real));
    }
    return h;
}

std::vector<std::string_view> stage_groups(Stage stage, bool freeze_qformers) {
    if (stage == Stage::pretrain) return {"schema.", "item.", "recon."};
    if (freeze_qformers) return {"interaction.", "reader."};
    return {"schema.", "item.", "interaction.", "user.", "reader."};
}

std::vector<std::pair<std::size_t, std::size_t>> sample_adjacent_pairs(const std::vector<UserSequence>& users,
                                                                       const FeatureStore& fs, std::mt19937_64& rng) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& u : users) {
        // the last two events are held out for validation and test
        if (u.events.size() < 4) continue;
        const std::size_t prefix = u.events.size() - 2;
        std::uniform_int_distribution<std::size_t> pick(0, prefix - 2);
        const std::size_t t = pick(rng);
        pairs.emplace_back(fs.inter_item[u.events[t]], fs.inter_item[u.events[t + 1]]);
    }
    return pairs;
}

StageResult run_pretrain(UniRecModel& model, const FeatureStore& fs, const std::vector<UserSequence>& users,
                         const TrainConfig& config, const TrainHooks& hooks) {
    auto rng = stage_rng(config.seed, Stage::pretrain);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::size_t eligible = 0;
    for (const auto& u : users) eligible += u.events.size() >= 4 ? 1 : 0;
    auto shuffle = [&](std::size_t) {
        pairs = sample_adjacent_pairs(users, fs, rng);
        std::shuffle(pairs.begin(), pairs.end(), rng);
    };
    auto batch = [&](std::size_t begin, std::size_t end, StepRecord& rec) -> Tensor {
        const auto kept = drop_collisions(std::span(pairs).subspan(begin, end - begin));
        if (kept.size() < 2) return {};
        const PretrainLosses l = pretrain_loss(model, fs, kept, config.lambda_recon, config.tau);
        rec.batch = kept.size();
        rec.contrast = static_cast<double>(l.contrast.item());
        rec.recon = static_cast<double>(l.recon.item());
        return l.total;
    };
    return run_stage(Stage::pretrain, model, eligible, config, false, hooks, shuffle, batch);
}

StageResult run_finetune(UniRecModel& model, const FeatureStore& fs, std::span<const Sample> samples,
                         const TrainConfig& config, bool freeze_qformers, const TrainHooks& hooks) {
    auto rng = stage_rng(config.seed, Stage::finetune);
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto shuffle = [&](std::size_t) { std::shuffle(order.begin(), order.end(), rng); };
    auto batch = [&](std::size_t begin, std::size_t end, StepRecord& rec) -> Tensor {
        std::vector<std::vector<std::size_t>> histories;
        std::vector<std::size_t> targets;
        std::set<std::size_t> seen;
        for (std::size_t i = begin; i < end; ++i) {
            const Sample& s = samples[order[i]];
            const std::size_t item = fs.inter_item[s.target];
            if (!seen.insert(item).second) continue;
            histories.push_back(s.history);
            targets.push_back(item);
        }
        if (targets.size() < 2) return {};
        rec.batch = targets.size();
        Tensor loss = finetune_loss(model, fs, histories, targets, config.tau);
        rec.contrast = static_cast<double>(loss.item());
        return loss;
    };
    return run_stage(Stage::finetune, model, samples.size(), config, freeze_qformers, hooks, shuffle, batch);
}

UNIREC_NAMESPACE_END
