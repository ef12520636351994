#include "asymkd/mining.hpp"

#include <algorithm>
#include <random>
#include <unordered_set>

namespace asymkd {

std::vector<int> refresh_epoch_pool(const TrainingSet& set, const MiningConfig& cfg, int epoch) {
    if (cfg.pool_size < 0 || static_cast<size_t>(cfg.pool_size) > set.size())
        throw ConfigError("mining: pool_size must be within [0, |X|]");
    std::mt19937_64 rng(mix_seed(cfg.seed, 0x9000 + static_cast<uint64_t>(epoch)));
    std::vector<int> ids = set.ids;
    for (int j = 0; j < cfg.pool_size; ++j) {
        std::uniform_int_distribution<size_t> pick(static_cast<size_t>(j), ids.size() - 1);
        std::swap(ids[static_cast<size_t>(j)], ids[pick(rng)]);
    }
    ids.resize(static_cast<size_t>(cfg.pool_size));
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::unordered_map<int, std::vector<int>> mine_hard_negatives(
    const std::vector<int>& anchors, const StudentModel& student, const TeacherModel& teacher,
    const TrainingSet& set, const std::vector<int>& pool, const MiningConfig& cfg) {
    if (cfg.k_negatives < 1) throw ConfigError("mining: k_negatives must be >= 1");

    // Candidate-side embeddings: computed once per call. Under asymmetric mode
    // they come from the frozen teacher table and are never recomputed.
    std::unordered_map<int, Vec> student_cache;
    if (cfg.mode == SimilarityMode::Symmetric)
        for (int id : pool) student_cache.emplace(id, student.forward(set.input_of(id)));

    std::unordered_map<int, std::vector<int>> mined;
    for (int a : anchors) {
        const Vec fa = student.forward(set.input_of(a));
        std::unordered_set<int> excluded(set.positives_of(a).begin(), set.positives_of(a).end());
        excluded.insert(a);

        std::vector<std::pair<double, int>> scored;  // (similarity, id)
        for (int x : pool) {
            if (excluded.count(x)) continue;
            if (cfg.strict_class_exclusion && set.class_of.at(x) == set.class_of.at(a)) continue;
            const double s = cfg.mode == SimilarityMode::Symmetric
                                 ? cosine_similarity(fa, student_cache.at(x))
                                 : cosine_similarity(fa, teacher.embed(x));
            scored.emplace_back(s, x);
        }
        if (scored.size() < static_cast<size_t>(cfg.k_negatives))
            throw ConfigError("mining: candidate pool smaller than k after exclusions for anchor " +
                              std::to_string(a));
        auto harder = [](const auto& l, const auto& r) {
            return l.first != r.first ? l.first > r.first : l.second < r.second;
        };
        std::partial_sort(scored.begin(), scored.begin() + cfg.k_negatives, scored.end(), harder);
        std::vector<int> negs(static_cast<size_t>(cfg.k_negatives));
        for (int i = 0; i < cfg.k_negatives; ++i) negs[static_cast<size_t>(i)] = scored[static_cast<size_t>(i)].second;
        mined.emplace(a, std::move(negs));
    }
    return mined;
}

}  // namespace asymkd
