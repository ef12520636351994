#pragma once

#include <functional>
#include <vector>

#include "asymkd/dataset.hpp"
#include "asymkd/losses.hpp"
#include "asymkd/mining.hpp"
#include "asymkd/models.hpp"

namespace asymkd {

struct TrainConfig {
    LossConfig loss;
    double learning_rate = -1.0;  // eta_0; negative means published_learning_rate(loss, mode)
    double lr_decay = 0.99;      // per epoch
    double weight_decay = 1e-6;  // decoupled L2 on theta each step
    int epochs = 100;
    int tuples_per_epoch = 2000;
    int batch_tuples = 10;
    int positives_per_tuple = 1;
    int negatives_per_tuple = 5;
    int unlabeled_per_tuple = 6;  // teacher-only losses: same overall tuple size
    double validation_fraction = 0.1;
    int patience = 20;  // epochs without validation improvement before stopping
    uint64_t seed = 0;
    MiningConfig mining;

    /// Called after each epoch's mining pass with the mined negatives.
    std::function<void(int epoch, const std::unordered_map<int, std::vector<int>>&)>
        mining_observer;

    double resolved_learning_rate() const;
    void validate() const;
};

struct EpochLog {
    int epoch;
    double lr;
    double train_loss;  // mean per-tuple loss
    double val_score;
    double best_so_far;
};

struct TrainResult {
    Vec best_theta;
    int best_epoch = -1;
    double best_val = 0.0;
    std::vector<EpochLog> log;
};

/// Fixed validation tuples drawn once at split time (mining-free).
struct ValidationSplit {
    std::vector<Tuple> tuples;
    std::vector<int> train_anchors;  // anchors available for training
};
ValidationSplit make_validation_split(const TrainingSet& set, const TrainConfig& cfg);

/// Mean per-anchor loss on the held-out tuples; lower is better.
double validation_score(const StudentModel& student, const TeacherModel& teacher,
                        const TrainingSet& set, const ValidationSplit& split,
                        const LossConfig& loss);

/// SGD minimization of the summed per-anchor loss over tuples, with per-epoch
/// mining, learning-rate decay, decoupled weight decay, and validation-based
/// best-model selection. Deterministic given the seed.
TrainResult train(const TrainingSet& set, const TeacherModel& teacher,
                  const StudentModel& student_init, const TrainConfig& cfg);

std::string training_log_csv(const std::vector<EpochLog>& log);

}  // namespace asymkd
