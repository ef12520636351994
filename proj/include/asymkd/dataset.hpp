#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <unordered_map>
#include <vector>

#include "asymkd/geometry.hpp"

namespace asymkd {

/// Training examples with per-anchor positive sets. Negatives are produced by
/// mining; the class map exists for data generation and oracle tests only and
/// must never be read by losses.
struct TrainingSet {
    std::vector<int> ids;  // ascending
    std::unordered_map<int, Vec> inputs;
    std::unordered_map<int, std::vector<int>> positives;  // P(a), sorted
    std::unordered_map<int, int> class_of;                // oracle use only

    const Vec& input_of(int id) const;
    const std::vector<int>& positives_of(int id) const;
    size_t size() const { return ids.size(); }
};

struct RetrievalTask {
    std::vector<std::pair<int, Vec>> database;  // (id, input), ascending id
    std::vector<std::pair<int, Vec>> queries;
    std::unordered_map<int, std::vector<int>> positives;  // query id -> db ids
    std::unordered_map<int, std::vector<int>> ignore;     // optional, default empty
};

struct DatasetConfig {
    int num_classes = 50;
    int train_size = 2000;
    int db_size = 500;
    int num_queries = 50;
    int d_in = 32;
    int d_teacher = 32;
    double intra_class_noise = 0.2;
    double teacher_signal = 1.0;
    uint64_t seed = 1;

    bool operator==(const DatasetConfig&) const = default;
};

struct SyntheticDataset {
    DatasetConfig config;
    TrainingSet train;
    RetrievalTask task;
    std::map<int, int> classes;  // ground truth over all ids (train, db, query)
};

/// Draws one unit-norm class center per class; each example is its center plus
/// Gaussian noise (quantized through float32 so the on-disk format round-trips
/// bit-exactly). Train ids are [0, T), database [T, T+D), queries [T+D, T+D+Q).
SyntheticDataset generate_synthetic(const DatasetConfig& config);

/// k ids uniform without replacement from the training set minus the anchor.
std::vector<int> sample_unlabeled(const TrainingSet& set, int anchor, int k, std::mt19937_64& rng);

/// On-disk layout: meta.json, inputs.f32 (all examples in id order), pairs.json.
void save_dataset(const std::filesystem::path& dir, const SyntheticDataset& ds);
SyntheticDataset load_dataset(const std::filesystem::path& dir);

/// Deterministic per-(seed, stream) generator seeding.
uint64_t mix_seed(uint64_t seed, uint64_t stream);

}  // namespace asymkd
