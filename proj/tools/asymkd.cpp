#include <cstdio>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "asymkd/experiment.hpp"
#include "asymkd/io.hpp"
#include "json.hpp"

namespace {

using namespace asymkd;
using nlohmann::json;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::string protocol;
    uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    bool strict = false;
    bool no_strict = false;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required = true) {
    auto* opt = cmd->add_option("--config", f.config_path, "Experiment config JSON");
    if (config_required) opt->required();
    cmd->add_option("--seed", f.seed, "Master seed override")->each([&f](const std::string&) {
        f.seed_set = true;
    });
    cmd->add_option("--out", f.out_dir, "Output directory override");
    cmd->add_option("--protocol", f.protocol, "Evaluation protocol: sym or asym");
    cmd->add_option("--threads", f.threads, "Worker threads (ablate only)");
    cmd->add_flag("--strict-determinism", f.strict, "Omit timestamps from results rows");
    cmd->add_flag("--no-strict-determinism", f.no_strict, "Include timestamps in results rows");
}

ExperimentConfig resolve_config(const CommonFlags& f) {
    ExperimentConfig cfg = f.config_path.empty() ? default_experiment_config()
                                                 : load_experiment_config(f.config_path);
    if (f.seed_set) cfg.seed = f.seed;
    if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
    if (!f.protocol.empty()) cfg.protocol = protocol_from_string(f.protocol);
    if (f.threads > 0) cfg.threads = f.threads;
    if (f.strict) cfg.strict_determinism = true;
    if (f.no_strict) cfg.strict_determinism = false;
    cfg.resolve();
    return cfg;
}

int cmd_gen_data(const CommonFlags& f) {
    ExperimentConfig cfg = resolve_config(f);
    run_gen_data(cfg);
    std::printf("dataset: %s\n", cfg.data_dir.c_str());
    std::printf("classes=%d train=%d db=%d queries=%d d_in=%d d_teacher=%d seed=%llu\n",
                cfg.data.num_classes, cfg.data.train_size, cfg.data.db_size, cfg.data.num_queries,
                cfg.data.d_in, cfg.data.d_teacher, static_cast<unsigned long long>(cfg.seed));
    std::printf("config_digest=%s\n", config_digest(cfg).c_str());
    return 0;
}

int cmd_train(const CommonFlags& f) {
    ExperimentConfig cfg = resolve_config(f);
    const TrainOutputs out = run_train(cfg);
    std::printf("checkpoint: %s\n", out.checkpoint_dir.string().c_str());
    std::printf("log: %s\n", out.log_path.string().c_str());
    std::printf("best_epoch=%d best_val=%.17g\n", out.result.best_epoch, out.result.best_val);
    std::printf("config_digest=%s\n", config_digest(cfg).c_str());
    return 0;
}

int cmd_eval(const CommonFlags& f, const std::string& checkpoint) {
    ExperimentConfig cfg = resolve_config(f);
    const std::string ckpt = checkpoint.empty() ? cfg.out_dir : checkpoint;
    const EvalOutputs out = run_eval(cfg, ckpt, cfg.protocol);
    std::printf("protocol=%s mAP=%.6f mP@10=%.6f skipped=%d\n", to_string(cfg.protocol).c_str(),
                out.report.map, out.report.mp10, out.report.skipped_queries);
    std::printf("results: %s\n", out.results_path.string().c_str());
    std::printf("config_digest=%s\n", config_digest(cfg).c_str());
    return 0;
}

int cmd_mine_preview(const CommonFlags& f, int anchor, int epochs, const std::string& checkpoint) {
    ExperimentConfig cfg = resolve_config(f);
    const SyntheticDataset ds = load_dataset(cfg.data_dir);
    const TeacherModel teacher = load_teacher(std::filesystem::path(cfg.data_dir) / "teacher.f32");
    StudentModel student = checkpoint.empty()
                               ? StudentModel(make_default_arch(cfg.data.d_in, teacher.dim()),
                                              mix_seed(cfg.seed, 3))
                               : load_student(checkpoint).first;

    MiningConfig mc = cfg.train.mining;
    mc.mode = cfg.train.loss.mode;
    mc.seed = cfg.seed;
    mc.pool_size = std::min<int>(mc.pool_size, static_cast<int>(ds.train.size()));

    std::string csv = "epoch,rank,id,similarity\n";
    char buf[96];
    for (int epoch = 0; epoch < epochs; ++epoch) {
        const auto pool = refresh_epoch_pool(ds.train, mc, epoch);
        const auto mined = mine_hard_negatives({anchor}, student, teacher, ds.train, pool, mc);
        const Vec a = student.forward(ds.train.input_of(anchor));
        int rank = 1;
        for (int id : mined.at(anchor)) {
            const double s = pair_similarity(a, id, ds.train.input_of(id), mc.mode, student, teacher);
            std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.17g\n", epoch, rank++, id, s);
            csv += buf;
        }
    }
    if (f.out_dir.empty()) {
        std::fputs(csv.c_str(), stdout);
    } else {
        std::filesystem::create_directories(cfg.out_dir);
        write_text_file(std::filesystem::path(cfg.out_dir) / "mine_preview.csv", csv);
        std::printf("wrote %s\n",
                    (std::filesystem::path(cfg.out_dir) / "mine_preview.csv").string().c_str());
    }
    return 0;
}

struct SweepRow {
    std::string label;
    std::string status = "ok";
    RunSummary summary;
};

int cmd_ablate(const CommonFlags& f, const std::string& table_path) {
    json sweep;
    try {
        sweep = json::parse(read_text_file(f.config_path));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("sweep parse error: ") + e.what());
    }
    const json base = sweep.value("base", json::object());
    const json runs = sweep.value("runs", json::array());
    if (!runs.is_array()) throw ConfigError("sweep: \"runs\" must be an array");

    std::vector<ExperimentConfig> configs;
    std::vector<SweepRow> rows(runs.size());
    for (size_t i = 0; i < runs.size(); ++i) {
        json layered = {{"defaults", base}, {"overrides", runs[i]}};
        ExperimentConfig cfg = config_from_json_text(layered.dump());
        if (f.seed_set) {
            cfg.seed = f.seed;
            cfg.resolve();
        }
        rows[i].label = to_string(cfg.train.loss.kind);
        configs.push_back(std::move(cfg));
    }

    const int threads = std::max(1, f.threads > 0 ? f.threads : 1);
    auto worker = [&](size_t begin, size_t step) {
        for (size_t i = begin; i < configs.size(); i += step) {
            try {
                rows[i].summary = run_pipeline(configs[i]);
            } catch (const TrainingDiverged& e) {
                rows[i].status = std::string("diverged: ") + e.what();
            } catch (const std::exception& e) {
                rows[i].status = std::string("failed: ") + e.what();
            }
        }
    };
    if (threads == 1 || configs.size() < 2) {
        worker(0, 1);
    } else {
        std::vector<std::thread> pool;
        const size_t n = std::min<size_t>(static_cast<size_t>(threads), configs.size());
        for (size_t t = 0; t < n; ++t) pool.emplace_back(worker, t, n);
        for (auto& th : pool) th.join();
    }

    std::string csv =
        "loss,mode,self_positive,use_positives,use_negatives,sym_mAP,asym_mAP,seed,status\n";
    char buf[224];
    for (size_t i = 0; i < configs.size(); ++i) {
        const LossConfig& l = configs[i].train.loss;
        std::snprintf(buf, sizeof(buf), "%s,%s,%d,%d,%d,%.6f,%.6f,%llu,%s\n",
                      to_string(l.kind).c_str(), to_string(l.mode).c_str(),
                      l.include_self_positive ? 1 : 0, l.use_positives ? 1 : 0,
                      l.use_negatives ? 1 : 0, rows[i].summary.sym_map, rows[i].summary.asym_map,
                      static_cast<unsigned long long>(configs[i].seed), rows[i].status.c_str());
        csv += buf;
    }
    if (table_path.empty()) {
        std::fputs(csv.c_str(), stdout);
    } else {
        const std::filesystem::path p(table_path);
        if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
        write_text_file(p, csv);
        std::printf("wrote %s\n", table_path.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Asymmetric metric learning: train a student against a frozen teacher"};
    app.require_subcommand(1);

    CommonFlags gen_f, train_f, eval_f, mine_f, ablate_f;
    std::string eval_checkpoint, mine_checkpoint, ablate_table;
    int mine_anchor = 0, mine_epochs = 5;

    auto* gen = app.add_subcommand("gen-data", "Generate the synthetic dataset and teacher table");
    add_common(gen, gen_f, false);

    auto* tr = app.add_subcommand("train", "Train a student and write the best checkpoint");
    add_common(tr, train_f);

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint and append to results.csv");
    add_common(ev, eval_f);
    ev->add_option("--checkpoint", eval_checkpoint, "Checkpoint directory (default: out dir)");

    auto* mine = app.add_subcommand("mine-preview", "Dump mined negatives per epoch for one anchor");
    add_common(mine, mine_f);
    mine->add_option("--anchor", mine_anchor, "Anchor id")->required();
    mine->add_option("--epochs", mine_epochs, "Epochs to preview");
    mine->add_option("--checkpoint", mine_checkpoint, "Student checkpoint (default: random init)");

    auto* ab = app.add_subcommand("ablate", "Run a sweep of loss configurations");
    add_common(ab, ablate_f);
    ab->add_option("--table", ablate_table, "Comparison table output path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gen_f);
        if (tr->parsed()) return cmd_train(train_f);
        if (ev->parsed()) return cmd_eval(eval_f, eval_checkpoint);
        if (mine->parsed()) return cmd_mine_preview(mine_f, mine_anchor, mine_epochs, mine_checkpoint);
        if (ab->parsed()) return cmd_ablate(ablate_f, ablate_table);
    } catch (const asymkd::TrainingDiverged& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
    return 0;
}
