#pragma once

#include <filesystem>
#include <string>

#include "asymkd/dataset.hpp"
#include "asymkd/evaluation.hpp"
#include "asymkd/trainer.hpp"

namespace asymkd {

/// Full experiment description: dataset, loss, training, mining, protocol.
/// Serialized as a single JSON document; files may layer `defaults` and
/// `overrides` objects on top of the built-in full-scale defaults.
struct ExperimentConfig {
    DatasetConfig data;
    TrainConfig train;
    Protocol protocol = Protocol::Asymmetric;
    std::string data_dir = "data";
    std::string out_dir = "out";
    uint64_t seed = 1;
    int threads = 1;
    bool strict_determinism = true;

    /// Propagates the master seed and fills mode-dependent defaults
    /// (epochs: 100 symmetric / 300 asymmetric; learning rate per loss).
    void resolve();
};

ExperimentConfig default_experiment_config();

/// Desk-scale configuration mirroring the full-scale recipe at toy size:
/// 50 classes, 2000/500/50 split, 200 tuples per epoch, pool 1000, k=5.
ExperimentConfig desk_scale_config(LossKind kind, uint64_t seed);

/// Desk-scale initial learning rate per (loss, mode); the full-scale rates
/// assume pretrained convolutional backbones and are far too small for a
/// randomly initialized MLP.
double desk_learning_rate(LossKind kind, SimilarityMode mode);

ExperimentConfig config_from_json_text(const std::string& text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
std::string config_to_json_text(const ExperimentConfig& cfg);

/// FNV-1a digest of the canonical serialized config.
std::string config_digest(const ExperimentConfig& cfg);

/// gen-data: writes the dataset directory plus the frozen teacher table.
void run_gen_data(const ExperimentConfig& cfg);

struct TrainOutputs {
    TrainResult result;
    std::filesystem::path checkpoint_dir;
    std::filesystem::path log_path;
};
/// train: loads dataset + teacher from data_dir, trains, writes the best
/// checkpoint and the training log CSV under out_dir.
TrainOutputs run_train(const ExperimentConfig& cfg);

struct EvalOutputs {
    EvalReport report;
    std::filesystem::path results_path;
};
/// eval: loads dataset, teacher and checkpoint, fits whitening in the space
/// the protocol requires, evaluates, and appends a row to results.csv.
EvalOutputs run_eval(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint_dir,
                     Protocol protocol);

/// One results.csv row (without trailing newline). `timestamp` may be empty
/// for deterministic comparisons.
std::string results_row(const EvalReport& report, const ExperimentConfig& cfg,
                        const std::string& timestamp);
inline constexpr const char* kResultsHeader =
    "# asymkd-results-v1\ntimestamp,protocol,loss,mode,mAP,mP@10,seed,config_digest\n";

/// In-memory pipeline (generate -> train -> evaluate both protocols),
/// used by the ablation sweep and the acceptance suite.
struct RunSummary {
    double sym_map = 0.0;
    double sym_mp10 = 0.0;
    double asym_map = 0.0;
    double asym_mp10 = 0.0;
    double best_val = 0.0;
    int best_epoch = -1;
};
RunSummary run_pipeline(const ExperimentConfig& cfg);

/// Symmetric mAP of the teacher ranking its own space (the student replaced
/// by the teacher on the query side).
double teacher_symmetric_map(const SyntheticDataset& ds, const TeacherModel& teacher);

}  // namespace asymkd
