#pragma once

#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "asymkd/geometry.hpp"

namespace asymkd {

enum class LossKind { Contrastive, ContrastivePlus, Triplet, MultiSimilarity, Regression, RKD, DarkRank };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);
std::string to_string(SimilarityMode mode);
SimilarityMode mode_from_string(const std::string& name);

struct RkdConfig {
    double distance_weight = 1.0;
    double angle_weight = 2.0;
    double huber_delta = 1.0;
    bool normalize_distances = true;
    /// Measurement taken as the identity on the anchor with r = -sim; this
    /// configuration coincides with the regression loss.
    bool identity_regression = false;

    bool operator==(const RkdConfig&) const = default;
};

struct LossConfig {
    LossKind kind = LossKind::Contrastive;
    double margin = 0.7;
    double alpha = 1.0;
    double beta = 1.0;
    RkdConfig rkd;
    SimilarityMode mode = SimilarityMode::Symmetric;
    bool include_self_positive = false;
    bool use_positives = true;
    bool use_negatives = true;

    /// Published hyper-parameters per loss kind; ContrastivePlus is contrastive
    /// with asymmetric similarity, the anchor as its own positive, and both
    /// positives and negatives enabled.
    static LossConfig defaults(LossKind kind, SimilarityMode mode);
    void validate() const;
    bool uses_labels() const;

    bool operator==(const LossConfig&) const = default;
};

/// Initial learning rate per (loss, mode) as reported for the full-scale
/// experiments. Unlisted combinations inherit the single listed rate.
double published_learning_rate(LossKind kind, SimilarityMode mode);

/// A participating example with its resolved embedding (student- or
/// teacher-side, depending on the similarity mode).
struct Participant {
    int id;
    Vec embedding;
};

/// Loss value plus gradients w.r.t. every student-embedded participant,
/// keyed by example id. Teacher-side embeddings are constants.
struct LossTerm {
    double value = 0.0;
    std::unordered_map<int, Vec> grads;
};

LossTerm loss_contrastive(int anchor_id, const Vec& anchor_student,
                          const std::optional<Vec>& anchor_teacher,
                          const std::vector<Participant>& positives,
                          const std::vector<Participant>& negatives, const LossConfig& cfg);

LossTerm loss_triplet(int anchor_id, const Vec& anchor_student,
                      const std::vector<Participant>& positives,
                      const std::vector<Participant>& negatives, const LossConfig& cfg);

LossTerm loss_multi_similarity(int anchor_id, const Vec& anchor_student,
                               const std::vector<Participant>& positives,
                               const std::vector<Participant>& negatives, const LossConfig& cfg);

LossTerm loss_regression(int anchor_id, const Vec& anchor_student, const Vec& anchor_teacher);

/// Distance- and angle-wise relational loss between the raw student and
/// teacher spaces over {anchor} + U. Student side gets gradients for the
/// anchor and every element of U.
LossTerm loss_rkd(int anchor_id, const Vec& anchor_student, const Vec& anchor_teacher,
                  const std::vector<Participant>& unlabeled_student,
                  const std::vector<Vec>& unlabeled_teacher, const LossConfig& cfg);

/// Listwise ranking loss: teacher similarities S(a, x) define the ground
/// truth order, student similarities are symmetric (student space).
LossTerm loss_darkrank(int anchor_id, const Vec& anchor_student,
                       const std::vector<Participant>& unlabeled_student,
                       const std::vector<double>& teacher_similarities, const LossConfig& cfg);

/// One loss term of a batch: the anchor with its sampled positives, mined
/// negatives, or unlabeled examples, depending on the loss kind.
struct Tuple {
    int anchor;
    std::vector<int> positives;
    std::vector<int> negatives;
    std::vector<int> unlabeled;
};

/// Embedding resolvers used to assemble loss inputs.
struct EmbeddingSources {
    std::function<Vec(int)> student;         // f_theta(id)
    std::function<const Vec&(int)> teacher;  // g(id), frozen
};

LossTerm evaluate_tuple(const Tuple& tuple, const EmbeddingSources& src, const LossConfig& cfg);

}  // namespace asymkd
