#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "asymkd/dataset.hpp"
#include "asymkd/trainer.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace asymkd;

namespace {

SyntheticDataset tiny_dataset(uint64_t seed = 3) {
    DatasetConfig cfg;
    cfg.num_classes = 8;
    cfg.train_size = 120;
    cfg.db_size = 40;
    cfg.num_queries = 10;
    cfg.d_in = 6;
    cfg.d_teacher = 6;
    cfg.seed = seed;
    return generate_synthetic(cfg);
}

TrainConfig base_config(LossKind kind, SimilarityMode mode) {
    TrainConfig cfg;
    cfg.loss = LossConfig::defaults(kind, mode);
    cfg.epochs = 4;
    cfg.tuples_per_epoch = 30;
    cfg.batch_tuples = 10;
    cfg.seed = 5;
    cfg.mining.pool_size = 120;
    cfg.mining.k_negatives = 5;
    return cfg;
}

}  // namespace

TEST_CASE("zero learning rate leaves theta bitwise unchanged") {
    const auto ds = tiny_dataset();
    const TeacherModel teacher = build_synthetic_teacher(ds);
    const StudentModel init(make_default_arch(6, 6), 11);
    auto cfg = base_config(LossKind::Contrastive, SimilarityMode::Asymmetric);
    cfg.learning_rate = 0.0;
    const auto result = train(ds.train, teacher, init, cfg);
    CHECK(result.best_theta == init.theta());
}

TEST_CASE("a pure weight-decay step shrinks theta by the exact factor") {
    // Teacher snapshotted from the student init: the regression gradient at
    // f = g is exactly zero, so one batch applies only weight decay.
    const auto ds = tiny_dataset();
    const StudentModel init(make_default_arch(6, 4), 13);
    std::map<int, Vec> table;
    for (int id : ds.train.ids) table[id] = init.forward(ds.train.input_of(id));
    const TeacherModel teacher(std::move(table));

    auto cfg = base_config(LossKind::Regression, SimilarityMode::Asymmetric);
    cfg.epochs = 1;
    cfg.tuples_per_epoch = 10;
    cfg.batch_tuples = 10;  // single batch
    cfg.learning_rate = 0.5;
    cfg.weight_decay = 1e-3;
    const auto result = train(ds.train, teacher, init, cfg);

    const double expected = 1.0 - cfg.learning_rate * cfg.weight_decay;
    for (size_t i = 0; i < init.theta().size(); ++i)
        CHECK(result.best_theta[i] == doctest::Approx(init.theta()[i] * expected).epsilon(1e-12));
}

TEST_CASE("learning rate follows the decay schedule exactly") {
    const auto ds = tiny_dataset();
    const TeacherModel teacher = build_synthetic_teacher(ds);
    const StudentModel init(make_default_arch(6, 6), 17);
    auto cfg = base_config(LossKind::Regression, SimilarityMode::Asymmetric);
    cfg.learning_rate = 0.05;
    cfg.epochs = 6;
    const auto result = train(ds.train, teacher, init, cfg);
    REQUIRE(result.log.size() == 6);
    for (size_t e = 0; e < result.log.size(); ++e)
        CHECK(result.log[e].lr ==
              doctest::Approx(0.05 * std::pow(0.99, static_cast<double>(e))).epsilon(1e-12));
}

TEST_CASE("training is bitwise reproducible") {
    const auto ds = tiny_dataset();
    const TeacherModel teacher = build_synthetic_teacher(ds);
    const StudentModel init(make_default_arch(6, 6), 19);
    for (LossKind kind : {LossKind::Contrastive, LossKind::Regression, LossKind::RKD}) {
        auto cfg = base_config(kind, SimilarityMode::Asymmetric);
        if (kind == LossKind::RKD) cfg.loss.mode = SimilarityMode::Symmetric;
        cfg.learning_rate = 0.01;
        const auto r1 = train(ds.train, teacher, init, cfg);
        const auto r2 = train(ds.train, teacher, init, cfg);
        CHECK(r1.best_theta == r2.best_theta);
        CHECK(training_log_csv(r1.log) == training_log_csv(r2.log));
    }
}

TEST_CASE("teacher table hash is unchanged by training") {
    const auto ds = tiny_dataset();
    const TeacherModel teacher = build_synthetic_teacher(ds);
    const uint64_t before = teacher.content_hash();
    const StudentModel init(make_default_arch(6, 6), 23);
    auto cfg = base_config(LossKind::Contrastive, SimilarityMode::Asymmetric);
    cfg.learning_rate = 0.05;
    train(ds.train, teacher, init, cfg);
    CHECK(teacher.content_hash() == before);
}

TEST_CASE("best model tracks the minimum validation score") {
    const auto ds = tiny_dataset();
    const TeacherModel teacher = build_synthetic_teacher(ds);
    const StudentModel init(make_default_arch(6, 6), 29);
    auto cfg = base_config(LossKind::Regression, SimilarityMode::Asymmetric);
    cfg.learning_rate = 0.05;
    cfg.epochs = 10;
    const auto result = train(ds.train, teacher, init, cfg);
    double min_val = result.log.front().val_score;
    for (const auto& row : result.log) {
        min_val = std::min(min_val, row.val_score);
        CHECK(row.best_so_far == min_val);  // non-increasing best column
    }
    CHECK(result.best_val == min_val);
    CHECK(result.log[static_cast<size_t>(result.best_epoch)].val_score == result.best_val);
}

TEST_CASE("early stopping fires after patience epochs without improvement") {
    const auto ds = tiny_dataset();
    const TeacherModel teacher = build_synthetic_teacher(ds);
    const StudentModel init(make_default_arch(6, 6), 31);
    auto cfg = base_config(LossKind::Regression, SimilarityMode::Asymmetric);
    cfg.learning_rate = 0.0;  // validation score constant after the first epoch
    cfg.epochs = 50;
    cfg.patience = 5;
    const auto result = train(ds.train, teacher, init, cfg);
    CHECK(result.log.size() == 6);  // epoch 0 improves from +inf, then 5 stale epochs
    CHECK(result.best_epoch == 0);
}

TEST_CASE("regression reaches a near-teacher validation score") {
    DatasetConfig dc;
    dc.num_classes = 10;
    dc.train_size = 300;
    dc.db_size = 60;
    dc.num_queries = 15;
    dc.d_in = 8;
    dc.d_teacher = 8;
    const auto ds = generate_synthetic(dc);
    const TeacherModel teacher = build_synthetic_teacher(ds);
    const StudentModel init(make_default_arch(8, 8), 37);
    auto cfg = base_config(LossKind::Regression, SimilarityMode::Asymmetric);
    cfg.learning_rate = 0.05;
    cfg.epochs = 50;
    cfg.tuples_per_epoch = 200;
    const auto result = train(ds.train, teacher, init, cfg);
    CHECK(result.best_val <= -0.95);
}

TEST_CASE("divergence is reported with epoch and batch") {
    const auto ds = tiny_dataset();
    const TeacherModel teacher = build_synthetic_teacher(ds);
    const StudentModel init(make_default_arch(6, 6), 41);
    auto cfg = base_config(LossKind::Regression, SimilarityMode::Asymmetric);
    cfg.learning_rate = 1e308;  // guaranteed overflow in the first update
    cfg.epochs = 3;
    try {
        train(ds.train, teacher, init, cfg);
        FAIL("expected TrainingDiverged");
    } catch (const TrainingDiverged& e) {
        CHECK(e.epoch >= 0);
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
}

TEST_CASE("mining observer sees per-epoch negatives for label-using losses only") {
    const auto ds = tiny_dataset();
    const TeacherModel teacher = build_synthetic_teacher(ds);
    const StudentModel init(make_default_arch(6, 6), 43);

    int mining_epochs = 0;
    auto cfg = base_config(LossKind::Contrastive, SimilarityMode::Asymmetric);
    cfg.learning_rate = 0.01;
    cfg.mining_observer = [&](int, const std::unordered_map<int, std::vector<int>>& mined) {
        ++mining_epochs;
        for (const auto& [a, negs] : mined) CHECK(negs.size() == 5);
    };
    train(ds.train, teacher, init, cfg);
    CHECK(mining_epochs == cfg.epochs);

    mining_epochs = 0;
    auto reg = base_config(LossKind::Regression, SimilarityMode::Asymmetric);
    reg.learning_rate = 0.01;
    reg.mining_observer = [&](int, const std::unordered_map<int, std::vector<int>>&) {
        ++mining_epochs;
    };
    train(ds.train, teacher, init, reg);
    CHECK(mining_epochs == 0);
}

TEST_CASE("invalid train configs are rejected") {
    TrainConfig cfg;
    cfg.loss = LossConfig::defaults(LossKind::Contrastive, SimilarityMode::Symmetric);
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.epochs = 1;
    cfg.lr_decay = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.lr_decay = 0.99;
    cfg.validation_fraction = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
