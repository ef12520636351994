#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "asymkd/dataset.hpp"
#include "asymkd/models.hpp"

namespace asymkd {

struct MiningConfig {
    int pool_size = 1000;
    int k_negatives = 5;
    SimilarityMode mode = SimilarityMode::Symmetric;
    uint64_t seed = 0;
    /// When set, same-class candidates are excluded in addition to the anchor
    /// and P(a); supervision is pairs, so this is off unless studying label noise.
    bool strict_class_exclusion = false;

    bool operator==(const MiningConfig&) const = default;
};

/// Uniform random subset of the training set for one epoch; deterministic in
/// (seed, epoch).
std::vector<int> refresh_epoch_pool(const TrainingSet& set, const MiningConfig& cfg, int epoch);

/// Per anchor: the k pool candidates with the highest pair similarity under
/// cfg.mode, sorted descending, ties broken by ascending id. Candidates never
/// include the anchor or P(a). Under asymmetric mode the candidate side is the
/// frozen teacher table.
std::unordered_map<int, std::vector<int>> mine_hard_negatives(
    const std::vector<int>& anchors, const StudentModel& student, const TeacherModel& teacher,
    const TrainingSet& set, const std::vector<int>& pool, const MiningConfig& cfg);

}  // namespace asymkd
