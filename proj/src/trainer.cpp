#include "asymkd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <unordered_set>

namespace asymkd {

double TrainConfig::resolved_learning_rate() const {
    return learning_rate >= 0.0 ? learning_rate : published_learning_rate(loss.kind, loss.mode);
}

void TrainConfig::validate() const {
    loss.validate();
    if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
    if (lr_decay <= 0.0 || lr_decay > 1.0) throw ConfigError("train config: lr_decay must be in (0, 1]");
    if (weight_decay < 0.0) throw ConfigError("train config: weight_decay must be >= 0");
    if (tuples_per_epoch < 1 || batch_tuples < 1)
        throw ConfigError("train config: tuples_per_epoch and batch_tuples must be >= 1");
    if (validation_fraction <= 0.0 || validation_fraction >= 1.0)
        throw ConfigError("train config: validation_fraction must be in (0, 1)");
    if (positives_per_tuple < 1 || negatives_per_tuple < 1 || unlabeled_per_tuple < 1)
        throw ConfigError("train config: tuple shape counts must be >= 1");
    if (patience < 1) throw ConfigError("train config: patience must be >= 1");
}

namespace {

std::vector<int> random_non_positives(const TrainingSet& set, int anchor, int count,
                                      std::mt19937_64& rng) {
    std::unordered_set<int> excluded(set.positives_of(anchor).begin(),
                                     set.positives_of(anchor).end());
    excluded.insert(anchor);
    std::vector<int> pool;
    pool.reserve(set.size());
    for (int id : set.ids)
        if (!excluded.count(id)) pool.push_back(id);
    if (pool.size() < static_cast<size_t>(count))
        throw ConfigError("not enough non-positive examples for anchor " + std::to_string(anchor));
    for (int j = 0; j < count; ++j) {
        std::uniform_int_distribution<size_t> pick(static_cast<size_t>(j), pool.size() - 1);
        std::swap(pool[static_cast<size_t>(j)], pool[pick(rng)]);
    }
    pool.resize(static_cast<size_t>(count));
    return pool;
}

std::vector<int> sample_positives(const TrainingSet& set, int anchor, int count,
                                  std::mt19937_64& rng) {
    const auto& pos = set.positives_of(anchor);
    if (pos.empty()) throw ConfigError("anchor " + std::to_string(anchor) + " has no positives");
    std::vector<int> out;
    for (int j = 0; j < count; ++j) {
        std::uniform_int_distribution<size_t> pick(0, pos.size() - 1);
        out.push_back(pos[pick(rng)]);
    }
    return out;
}

EmbeddingSources sources_for(const StudentModel& student, const TeacherModel& teacher,
                             const TrainingSet& set) {
    return EmbeddingSources{
        [&student, &set](int id) { return student.forward(set.input_of(id)); },
        [&teacher](int id) -> const Vec& { return teacher.embed(id); },
    };
}

}  // namespace

ValidationSplit make_validation_split(const TrainingSet& set, const TrainConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(mix_seed(cfg.seed, 0x5a11d));
    std::vector<int> ids = set.ids;
    std::shuffle(ids.begin(), ids.end(), rng);
    size_t n_val = static_cast<size_t>(std::llround(cfg.validation_fraction * static_cast<double>(ids.size())));
    n_val = std::clamp<size_t>(n_val, 1, ids.size() - 1);

    ValidationSplit split;
    split.train_anchors.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_val), ids.end());
    std::sort(split.train_anchors.begin(), split.train_anchors.end());

    std::vector<int> val_anchors(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::sort(val_anchors.begin(), val_anchors.end());
    for (int a : val_anchors) {
        Tuple t;
        t.anchor = a;
        switch (cfg.loss.kind) {
            case LossKind::Regression:
                break;
            case LossKind::RKD:
            case LossKind::DarkRank:
                t.unlabeled = sample_unlabeled(set, a, cfg.unlabeled_per_tuple, rng);
                break;
            default:
                if (cfg.loss.use_positives || cfg.loss.kind == LossKind::Triplet ||
                    cfg.loss.kind == LossKind::MultiSimilarity)
                    t.positives = sample_positives(set, a, cfg.positives_per_tuple, rng);
                if (cfg.loss.use_negatives || cfg.loss.kind == LossKind::Triplet ||
                    cfg.loss.kind == LossKind::MultiSimilarity)
                    t.negatives = random_non_positives(set, a, cfg.negatives_per_tuple, rng);
                break;
        }
        split.tuples.push_back(std::move(t));
    }
    return split;
}

double validation_score(const StudentModel& student, const TeacherModel& teacher,
                        const TrainingSet& set, const ValidationSplit& split,
                        const LossConfig& loss) {
    if (split.tuples.empty()) throw ConfigError("validation split is empty");
    const auto src = sources_for(student, teacher, set);
    double sum = 0.0;
    for (const auto& t : split.tuples) sum += evaluate_tuple(t, src, loss).value;
    return sum / static_cast<double>(split.tuples.size());
}

TrainResult train(const TrainingSet& set, const TeacherModel& teacher,
                  const StudentModel& student_init, const TrainConfig& cfg) {
    cfg.validate();
    const ValidationSplit split = make_validation_split(set, cfg);

    StudentModel student = student_init;
    const auto src = sources_for(student, teacher, set);

    const bool mines = cfg.loss.uses_labels() && cfg.loss.use_negatives;
    MiningConfig mc = cfg.mining;
    mc.mode = cfg.loss.mode;
    mc.pool_size = std::min<int>(mc.pool_size, static_cast<int>(set.size()));

    TrainResult result;
    result.best_val = std::numeric_limits<double>::infinity();
    double lr = cfg.resolved_learning_rate();
    int stale_epochs = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::mt19937_64 rng(mix_seed(cfg.seed, 0x70000 + static_cast<uint64_t>(epoch)));

        std::uniform_int_distribution<size_t> pick_anchor(0, split.train_anchors.size() - 1);
        std::vector<int> anchors(static_cast<size_t>(cfg.tuples_per_epoch));
        for (int& a : anchors) a = split.train_anchors[pick_anchor(rng)];

        std::unordered_map<int, std::vector<int>> mined;
        if (mines) {
            std::vector<int> unique_anchors(anchors);
            std::sort(unique_anchors.begin(), unique_anchors.end());
            unique_anchors.erase(std::unique(unique_anchors.begin(), unique_anchors.end()),
                                 unique_anchors.end());
            const auto pool = refresh_epoch_pool(set, mc, epoch);
            mined = mine_hard_negatives(unique_anchors, student, teacher, set, pool, mc);
            if (cfg.mining_observer) cfg.mining_observer(epoch, mined);
        }

        std::vector<Tuple> tuples;
        tuples.reserve(anchors.size());
        for (int a : anchors) {
            Tuple t;
            t.anchor = a;
            switch (cfg.loss.kind) {
                case LossKind::Regression:
                    break;
                case LossKind::RKD:
                case LossKind::DarkRank:
                    t.unlabeled = sample_unlabeled(set, a, cfg.unlabeled_per_tuple, rng);
                    break;
                default:
                    if (cfg.loss.use_positives || cfg.loss.kind == LossKind::Triplet ||
                        cfg.loss.kind == LossKind::MultiSimilarity)
                        t.positives = sample_positives(set, a, cfg.positives_per_tuple, rng);
                    if (mines) t.negatives = mined.at(a);
                    break;
            }
            tuples.push_back(std::move(t));
        }

        double epoch_loss = 0.0;
        const int num_batches =
            (cfg.tuples_per_epoch + cfg.batch_tuples - 1) / cfg.batch_tuples;
        for (int b = 0; b < num_batches; ++b) {
            Vec grad(student.num_params(), 0.0);
            double batch_value = 0.0;
            const int begin = b * cfg.batch_tuples;
            const int end = std::min(cfg.tuples_per_epoch, begin + cfg.batch_tuples);
            for (int ti = begin; ti < end; ++ti) {
                const LossTerm term = evaluate_tuple(tuples[static_cast<size_t>(ti)], src, cfg.loss);
                batch_value += term.value;
                for (const auto& [id, g] : term.grads) {
                    const Vec dtheta = student.backward(set.input_of(id), g);
                    for (size_t i = 0; i < grad.size(); ++i) grad[i] += dtheta[i];
                }
            }
            if (!std::isfinite(batch_value)) throw TrainingDiverged(epoch, b);
            epoch_loss += batch_value;

            Vec theta = student.theta();
            for (size_t i = 0; i < theta.size(); ++i)
                theta[i] -= lr * (grad[i] + cfg.weight_decay * theta[i]);
            student.set_theta(std::move(theta));
        }

        const double train_loss = epoch_loss / static_cast<double>(cfg.tuples_per_epoch);
        const double val = validation_score(student, teacher, set, split, cfg.loss);
        if (!std::isfinite(val)) throw TrainingDiverged(epoch, -1);
        if (val < result.best_val) {
            result.best_val = val;
            result.best_epoch = epoch;
            result.best_theta = student.theta();
            stale_epochs = 0;
        } else {
            ++stale_epochs;
        }
        result.log.push_back({epoch, lr, train_loss, val, result.best_val});
        lr *= cfg.lr_decay;
        if (stale_epochs >= cfg.patience) break;
    }
    return result;
}

std::string training_log_csv(const std::vector<EpochLog>& log) {
    std::string out = "epoch,lr,train_loss,val_score,best_so_far\n";
    char buf[160];
    for (const auto& row : log) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", row.epoch, row.lr,
                      row.train_loss, row.val_score, row.best_so_far);
        out += buf;
    }
    return out;
}

}  // namespace asymkd
