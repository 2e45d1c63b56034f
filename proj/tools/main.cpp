// unirec: data generation, training, evaluation and the ablation/sweep
// experiments over one JSON run config.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "unirec/data/synthetic.hpp"
#include "unirec/io/checkpoint.hpp"
#include "unirec/io/config.hpp"
#include "unirec/train/experiment.hpp"
#include "unirec/train/gradcheck_fp64.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace unirec;

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    bool strict = false;
    std::optional<std::size_t> threads;
};

void add_common(CLI::App& cmd, CommonFlags& f) {
    cmd.add_option("--config", f.config, "run config (JSON)")->required()->check(CLI::ExistingFile);
    cmd.add_option("--seed", f.seed, "overrides the config seed");
    cmd.add_option("--out", f.out, "output directory");
    cmd.add_flag("--strict", f.strict, "abort on the first malformed data record");
    cmd.add_option("--threads", f.threads, "evaluation workers")->check(CLI::PositiveNumber);
}

RunConfig load_config(const CommonFlags& f) {
    RunConfig c = RunConfig::load(f.config);
    if (f.seed) c.seed = *f.seed;
    if (f.strict) c.data.strict = true;
    if (f.threads) c.eval.threads = *f.threads;
    c.validate();
    return c;
}

fs::path out_dir(const CommonFlags& f) {
    fs::path p(f.out);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw DataError("cannot create output directory " + f.out + ": " + ec.message());
    return p;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw DataError("cannot write " + p.string());
    return out;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string metric_header(const EvalConfig& e) {
    std::string h = "users,mrr";
    for (std::size_t k : e.ks) h += ",hit@" + std::to_string(k);
    for (std::size_t k : e.ks) h += ",ndcg@" + std::to_string(k);
    return h;
}

std::string metric_cells(const EvalReport& r, const EvalConfig& e) {
    std::string s = std::to_string(r.users) + "," + fmt(r.mrr);
    for (std::size_t k : e.ks) s += "," + fmt(r.hit.at(k));
    for (std::size_t k : e.ks) s += "," + fmt(r.ndcg.at(k));
    return s;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// One JSON object per optimizer step.
TrainHooks logging_hooks(std::ostream& log, const std::string& config_hash) {
    TrainHooks h;
    h.on_step = [&log, config_hash](const StepRecord& r) {
        json j = {{"config_hash", config_hash}, {"stage", to_string(r.stage)}, {"epoch", r.epoch},
                  {"step", r.step},       {"batch", r.batch},           {"lr", r.lr},
                  {"loss", r.loss},       {"contrast", r.contrast},     {"recon", r.recon},
                  {"grad_norm", r.grad_norm}};
        log << j.dump() << '\n';
    };
    h.on_epoch = [](const EpochRecord& e) {
        std::fprintf(stderr, "%s epoch %zu: %zu steps, mean loss %.4f\n", to_string(e.stage), e.epoch, e.steps,
                     e.mean_loss);
    };
    return h;
}

std::shared_ptr<const PreparedData> prepare(const RunConfig& c) {
    auto p = std::make_shared<const PreparedData>(prepare_data(c));
    if (p->load_report.malformed + p->load_report.dangling + p->load_report.dropped_attributes > 0) {
        std::fprintf(stderr, "data: skipped %zu malformed lines, %zu dangling references, %zu attributes\n",
                     p->load_report.malformed, p->load_report.dangling, p->load_report.dropped_attributes);
    }
    return p;
}

// ---- commands ---------------------------------------------------------------

void cmd_synth(const CommonFlags& f) {
    const RunConfig c = load_config(f);
    const fs::path dir = out_dir(f);
    const SyntheticDataset raw = generate_synthetic(c.synthetic_spec());
    save_dataset((dir / "dataset.jsonl").string(), raw.data);
    raw.data.schema.save((dir / "schema.json").string());
    raw.sidecar.save((dir / "sidecar.jsonl").string());
    std::printf("wrote %zu items, %zu interactions, %zu sidecar vectors to %s (config %s)\n", raw.data.items.size(),
                raw.data.interactions.size(), raw.sidecar.size(), dir.string().c_str(), c.hash_hex().c_str());
}

void cmd_preprocess(const CommonFlags& f) {
    const RunConfig c = load_config(f);
    const fs::path dir = out_dir(f);
    const auto p = prepare(c);
    save_dataset((dir / "filtered.jsonl").string(), p->data);
    auto out = open_out(dir / "splits.jsonl");
    const auto& inter = p->data.interactions;
    auto emit = [&](const char* split, const std::vector<Sample>& samples) {
        for (const Sample& s : samples) {
            json history = json::array();
            for (std::size_t e : s.history) history.push_back(inter[e].item_id);
            out << json{{"split", split},
                        {"user_id", p->users[s.user].user_id},
                        {"history", history},
                        {"target", inter[s.target].item_id}}
                       .dump()
                << '\n';
        }
    };
    emit("train", p->splits.train);
    emit("valid", p->splits.valid);
    emit("test", p->splits.test);
    const json report = {{"config_hash", c.hash_hex()},
                         {"raw_items", p->raw_items},
                         {"raw_interactions", p->raw_interactions},
                         {"items", p->data.items.size()},
                         {"interactions", p->data.interactions.size()},
                         {"users", p->users.size()},
                         {"train", p->splits.train.size()},
                         {"valid", p->splits.valid.size()},
                         {"test", p->splits.test.size()},
                         {"malformed", p->load_report.malformed},
                         {"dangling", p->load_report.dangling}};
    open_out(dir / "preprocess.json") << report.dump(2) << '\n';
    std::printf("%s\n", report.dump().c_str());
}

void cmd_pretrain(const CommonFlags& f) {
    const RunConfig c = load_config(f);
    const fs::path dir = out_dir(f);
    Experiment e(c, prepare(c));
    auto log = open_out(dir / "pretrain_log.jsonl");
    const auto t0 = std::chrono::steady_clock::now();
    const StageResult r = e.pretrain(logging_hooks(log, c.hash_hex()));
    save_checkpoint((dir / "pretrain.ckpt").string(), e.checkpoint("pretrain"));
    std::printf("pretrain: %zu steps in %.1fs, checkpoint %s (config %s)\n", r.steps, elapsed(t0),
                (dir / "pretrain.ckpt").string().c_str(), c.hash_hex().c_str());
}

void cmd_finetune(const CommonFlags& f, const std::string& from, bool cold_start) {
    const RunConfig c = load_config(f);
    if (from.empty() && !cold_start) {
        throw ConfigError("finetune needs --checkpoint (a pretrain checkpoint) or --cold-start");
    }
    const fs::path dir = out_dir(f);
    const auto data = prepare(c);
    std::unique_ptr<Experiment> e = from.empty() ? std::make_unique<Experiment>(c, data)
                                                 : std::make_unique<Experiment>(c, data, load_checkpoint(from));
    auto log = open_out(dir / "finetune_log.jsonl");
    const auto t0 = std::chrono::steady_clock::now();
    const StageResult r = e->finetune(logging_hooks(log, c.hash_hex()));
    save_checkpoint((dir / "finetune.ckpt").string(), e->checkpoint("finetune"));
    std::printf("finetune: %zu steps in %.1fs, checkpoint %s (config %s)\n", r.steps, elapsed(t0),
                (dir / "finetune.ckpt").string().c_str(), c.hash_hex().c_str());
}

// Enough of a feature store to resolve queries without any encoders.
FeatureStore index_only(const Dataset& data) {
    FeatureStore store;
    store.item_index = data.item_index();
    for (const auto& item : data.items) store.item_ids.push_back(item.item_id);
    for (const auto& x : data.interactions) store.inter_item.push_back(store.item_index.at(x.item_id));
    return store;
}

void cmd_evaluate(const CommonFlags& f, const std::string& from, const std::string& scorer, const std::string& split) {
    const RunConfig c = load_config(f);
    const fs::path dir = out_dir(f);
    const auto data = prepare(c);
    const EvalConfig ec = c.eval_config();
    const auto& samples = split == "valid" ? data->splits.valid : data->splits.test;
    EvalReport report;
    if (scorer == "model") {
        if (from.empty()) throw ConfigError("evaluate --scorer model needs --checkpoint");
        Experiment e(c, data, load_checkpoint(from));
        report = e.evaluate(split == "valid" ? EvalSplit::valid : EvalSplit::test);
    } else {
        const FeatureStore store = index_only(data->data);
        const auto queries = make_queries(samples, data->users, store);
        // candidates arrive truth first
        const Scorer oracle = [](std::size_t, std::span<const std::size_t> cand) {
            std::vector<double> s(cand.size(), 0.0);
            s[0] = 1.0;
            return s;
        };
        report = evaluate_queries(queries, store.n_items(), scorer == "oracle" ? oracle : random_scorer(ec.seed), ec);
    }
    const std::string header = "config_hash,scorer,split," + metric_header(ec);
    const std::string row = c.hash_hex() + "," + scorer + "," + split + "," + metric_cells(report, ec);
    open_out(dir / "metrics.csv") << header << '\n' << row << '\n';
    std::printf("%s\n%s\n", header.c_str(), row.c_str());
}

void cmd_ablate(const CommonFlags& f, std::size_t n_seeds, const std::string& grid) {
    const RunConfig base = load_config(f);
    const fs::path dir = out_dir(f);
    std::vector<std::pair<std::string, Variant>> plan;
    if (grid == "cells" || grid == "all")
        for (auto& v : ablation_cells(base)) plan.emplace_back("cells", std::move(v));
    if (grid == "fusion" || grid == "all")
        for (auto& v : fusion_rows(base)) plan.emplace_back("fusion", std::move(v));

    const EvalConfig ec = base.eval_config();
    auto out = open_out(dir / "ablation.csv");
    out << "config_hash,grid,variant,seed,variant_hash," << metric_header(ec) << '\n';
    for (std::size_t s = 0; s < n_seeds; ++s) {
        RunConfig seeded = base;
        seeded.seed = base.seed + s;
        const auto data = prepare(seeded);
        for (const auto& [g, v] : plan) {
            RunConfig c = v.config;
            c.seed = seeded.seed;
            const auto t0 = std::chrono::steady_clock::now();
            const EvalReport r = run_pipeline(c, data);
            out << base.hash_hex() << ',' << g << ',' << v.name << ',' << c.seed << ',' << c.hash_hex() << ','
                << metric_cells(r, ec) << '\n';
            out.flush();
            std::fprintf(stderr, "[%s] %-22s seed %llu: MRR %.4f (%.0fs)\n", g.c_str(), v.name.c_str(),
                         static_cast<unsigned long long>(c.seed), r.mrr, elapsed(t0));
        }
    }
    std::printf("wrote %s (config %s)\n", (dir / "ablation.csv").string().c_str(), base.hash_hex().c_str());
}

void cmd_sweep(const CommonFlags& f) {
    const RunConfig base = load_config(f);
    const fs::path dir = out_dir(f);
    const auto data = prepare(base);
    const EvalConfig ec = base.eval_config();
    struct Row {
        std::string level;
        std::size_t k;
        std::string hash;
        EvalReport report;
    };
    std::vector<Row> rows;
    for (const char* level : {"item", "user"}) {
        for (std::size_t k : kSweepTokenCounts) {
            RunConfig c = base;
            (std::string(level) == "item" ? c.model.k_item : c.model.k_user) = k;
            const auto t0 = std::chrono::steady_clock::now();
            rows.push_back({level, k, c.hash_hex(), run_pipeline(c, data)});
            std::fprintf(stderr, "K_%s = %2zu: MRR %.4f (%.0fs)\n", level, k, rows.back().report.mrr, elapsed(t0));
        }
    }
    auto out = open_out(dir / "sweep_tokens.csv");
    out << "config_hash,level,k,variant_hash," << metric_header(ec) << ",best\n";
    for (const Row& r : rows) {
        // best marks the highest MRR within a level, first K on ties
        bool best = true;
        for (const Row& o : rows)
            if (o.level == r.level && (o.report.mrr > r.report.mrr || (o.report.mrr == r.report.mrr && o.k < r.k)))
                best = false;
        out << base.hash_hex() << ',' << r.level << ',' << r.k << ',' << r.hash << ',' << metric_cells(r.report, ec)
            << ',' << (best ? 1 : 0) << '\n';
    }
    std::printf("wrote %s (config %s)\n", (dir / "sweep_tokens.csv").string().c_str(), base.hash_hex().c_str());
}

int cmd_gradcheck(const CommonFlags& f, double tolerance) {
    const RunConfig c = load_config(f);
    const fs::path dir = out_dir(f);
    const auto rows = fp64::gradcheck_from_config(f.config, f.seed);
    auto out = open_out(dir / "gradcheck.csv");
    out << "config_hash,case,checked,max_rel_error,worst_tensor,worst_index,seconds,passed\n";
    bool ok = true;
    for (const auto& r : rows) {
        const bool pass = r.max_rel_error < tolerance;
        ok = ok && pass;
        char err[32];
        std::snprintf(err, sizeof err, "%.3e", r.max_rel_error);
        out << c.hash_hex() << ',' << r.name << ',' << r.checked << ',' << err << ',' << r.worst_tensor << ','
            << r.worst_index << ',' << fmt(r.seconds) << ',' << (pass ? 1 : 0) << '\n';
        std::printf("%-9s %6zu entries  max rel err %s (worst %s[%zu])  %.1fs  %s\n", r.name.c_str(), r.checked, err,
                    r.worst_tensor.c_str(), r.worst_index, r.seconds, pass ? "ok" : "FAIL");
    }
    if (!ok) {
        std::fprintf(stderr, "gradcheck failed: tolerance %.1e (config %s)\n", tolerance, c.hash_hex().c_str());
        return 3;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"UniRec: schema-aware multimodal sequential recommendation"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string checkpoint, scorer = "model", split = "test", grid = "all";
    bool cold_start = false;
    std::size_t seeds = 1;
    double tolerance = 1e-4;

    auto* synth = app.add_subcommand("synth-data", "write a synthetic dataset as canonical JSONL");
    auto* pre = app.add_subcommand("preprocess", "k-core filter and leave-one-out splits");
    auto* pretrain = app.add_subcommand("pretrain", "stage one: item contrastive + reconstruction");
    auto* finetune = app.add_subcommand("finetune", "stage two: next-item InfoNCE");
    auto* evaluate = app.add_subcommand("evaluate", "99-negative ranking metrics");
    auto* ablate = app.add_subcommand("ablate", "triplet x user-token cells and the fusion grid");
    auto* sweep = app.add_subcommand("sweep-tokens", "K_item and K_user in {1, 2, 4, 8, 16}");
    auto* grad = app.add_subcommand("gradcheck", "whole-model finite-difference check");
    for (auto* cmd : {synth, pre, pretrain, finetune, evaluate, ablate, sweep, grad}) add_common(*cmd, flags);

    finetune->add_option("--checkpoint", checkpoint, "pretrain checkpoint")->check(CLI::ExistingFile);
    finetune->add_flag("--cold-start", cold_start, "start from a fresh model");
    evaluate->add_option("--checkpoint", checkpoint, "model checkpoint")->check(CLI::ExistingFile);
    evaluate->add_option("--scorer", scorer)->check(CLI::IsMember({"model", "oracle", "random"}));
    evaluate->add_option("--split", split)->check(CLI::IsMember({"test", "valid"}));
    ablate->add_option("--seeds", seeds, "consecutive seeds starting at the run seed")->check(CLI::PositiveNumber);
    ablate->add_option("--grid", grid)->check(CLI::IsMember({"cells", "fusion", "all"}));
    grad->add_option("--tolerance", tolerance, "max relative error");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*synth) cmd_synth(flags);
        if (*pre) cmd_preprocess(flags);
        if (*pretrain) cmd_pretrain(flags);
        if (*finetune) cmd_finetune(flags, checkpoint, cold_start);
        if (*evaluate) cmd_evaluate(flags, checkpoint, scorer, split);
        if (*ablate) cmd_ablate(flags, seeds, grid);
        if (*sweep) cmd_sweep(flags);
        if (*grad) return cmd_gradcheck(flags, tolerance);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 3;
    }
    return 0;
}
