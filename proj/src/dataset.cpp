#include "asymkd/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "asymkd/io.hpp"
#include "json.hpp"

namespace asymkd {

using nlohmann::json;

const Vec& TrainingSet::input_of(int id) const {
    auto it = inputs.find(id);
    if (it == inputs.end()) throw ConfigError("unknown training example id " + std::to_string(id));
    return it->second;
}

const std::vector<int>& TrainingSet::positives_of(int id) const {
    static const std::vector<int> empty;
    auto it = positives.find(id);
    return it == positives.end() ? empty : it->second;
}

uint64_t mix_seed(uint64_t seed, uint64_t stream) {
    // splitmix64 step over the combined state
    uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

namespace {

Vec random_unit_vector(int d, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec v(d);
    double n = 0.0;
    while (n == 0.0) {
        for (double& x : v) x = gauss(rng);
        n = norm(v);
    }
    for (double& x : v) x /= n;
    return v;
}

void validate(const DatasetConfig& c) {
    if (c.num_classes <= 0 || c.train_size <= 0 || c.db_size <= 0 || c.num_queries <= 0 ||
        c.d_in <= 0 || c.d_teacher <= 0)
        throw ConfigError("dataset config: all sizes and dimensions must be positive");
    if (c.train_size < 2 * c.num_classes)
        throw ConfigError("dataset config: train_size must be >= 2 * num_classes");
    if (c.intra_class_noise < 0.0)
        throw ConfigError("dataset config: intra_class_noise must be >= 0");
}

}  // namespace

SyntheticDataset generate_synthetic(const DatasetConfig& config) {
    validate(config);
    std::mt19937_64 rng(mix_seed(config.seed, 0));
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<Vec> centers(config.num_classes);
    for (auto& c : centers) c = random_unit_vector(config.d_in, rng);

    const double sigma = config.intra_class_noise / std::sqrt(static_cast<double>(config.d_in));
    auto draw_example = [&](int cls) {
        Vec v = centers[cls];
        for (double& x : v) x += sigma * gauss(rng);
        quantize_f32(v);
        return v;
    };

    SyntheticDataset ds;
    ds.config = config;

    // Classes are assigned round-robin within each split, so every class has
    // at least two training members (train_size >= 2 * num_classes).
    int next_id = 0;
    std::vector<std::vector<int>> train_by_class(config.num_classes);
    for (int i = 0; i < config.train_size; ++i, ++next_id) {
        const int cls = i % config.num_classes;
        ds.train.ids.push_back(next_id);
        ds.train.inputs.emplace(next_id, draw_example(cls));
        ds.train.class_of.emplace(next_id, cls);
        ds.classes.emplace(next_id, cls);
        train_by_class[cls].push_back(next_id);
    }

    std::vector<std::vector<int>> db_by_class(config.num_classes);
    for (int i = 0; i < config.db_size; ++i, ++next_id) {
        const int cls = i % config.num_classes;
        ds.task.database.emplace_back(next_id, draw_example(cls));
        ds.classes.emplace(next_id, cls);
        db_by_class[cls].push_back(next_id);
    }

    for (int i = 0; i < config.num_queries; ++i, ++next_id) {
        const int cls = i % config.num_classes;
        ds.task.queries.emplace_back(next_id, draw_example(cls));
        ds.classes.emplace(next_id, cls);
        ds.task.positives.emplace(next_id, db_by_class[cls]);
    }

    // Positives: 1-2 random same-class training examples per anchor, fixed at
    // generation time.
    for (int a : ds.train.ids) {
        const int cls = ds.train.class_of.at(a);
        std::vector<int> candidates;
        for (int x : train_by_class[cls])
            if (x != a) candidates.push_back(x);
        const int want = std::min<int>(static_cast<int>(candidates.size()),
                                       1 + static_cast<int>(rng() % 2));
        std::vector<int> picked;
        for (int j = 0; j < want; ++j) {
            std::uniform_int_distribution<size_t> pick(0, candidates.size() - 1);
            const size_t k = pick(rng);
            picked.push_back(candidates[k]);
            candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(k));
        }
        std::sort(picked.begin(), picked.end());
        ds.train.positives.emplace(a, std::move(picked));
    }

    return ds;
}

std::vector<int> sample_unlabeled(const TrainingSet& set, int anchor, int k, std::mt19937_64& rng) {
    if (k < 0) throw ConfigError("sample_unlabeled: k must be >= 0");
    if (static_cast<size_t>(k) > set.size() - 1)
        throw ConfigError("sample_unlabeled: k exceeds |X| - 1");
    std::vector<int> pool;
    pool.reserve(set.size() - 1);
    for (int id : set.ids)
        if (id != anchor) pool.push_back(id);
    // partial Fisher-Yates
    std::vector<int> out;
    out.reserve(static_cast<size_t>(k));
    for (int j = 0; j < k; ++j) {
        std::uniform_int_distribution<size_t> pick(j, pool.size() - 1);
        std::swap(pool[static_cast<size_t>(j)], pool[pick(rng)]);
        out.push_back(pool[static_cast<size_t>(j)]);
    }
    return out;
}

void save_dataset(const std::filesystem::path& dir, const SyntheticDataset& ds) {
    const auto& c = ds.config;
    json meta;
    meta["format_version"] = 1;
    meta["num_classes"] = c.num_classes;
    meta["train_size"] = c.train_size;
    meta["db_size"] = c.db_size;
    meta["num_queries"] = c.num_queries;
    meta["d_in"] = c.d_in;
    meta["d_teacher"] = c.d_teacher;
    meta["intra_class_noise"] = c.intra_class_noise;
    meta["teacher_signal"] = c.teacher_signal;
    meta["seed"] = c.seed;
    json classes = json::array();
    for (const auto& [id, cls] : ds.classes) {
        (void)id;
        classes.push_back(cls);
    }
    meta["classes"] = std::move(classes);
    write_text_file(dir / "meta.json", meta.dump(2) + "\n");

    std::vector<Vec> rows;
    rows.reserve(ds.classes.size());
    for (int id : ds.train.ids) rows.push_back(ds.train.input_of(id));
    for (const auto& [id, v] : ds.task.database) {
        (void)id;
        rows.push_back(v);
    }
    for (const auto& [id, v] : ds.task.queries) {
        (void)id;
        rows.push_back(v);
    }
    write_matrix_f32(dir / "inputs.f32", rows);

    json pairs;
    json anchors = json::object();
    for (int a : ds.train.ids) anchors[std::to_string(a)] = ds.train.positives_of(a);
    pairs["anchors"] = std::move(anchors);
    json queries = json::object();
    for (const auto& [q, v] : ds.task.queries) {
        (void)v;
        auto it = ds.task.positives.find(q);
        queries[std::to_string(q)] = it == ds.task.positives.end() ? std::vector<int>{} : it->second;
    }
    pairs["queries"] = std::move(queries);
    write_text_file(dir / "pairs.json", pairs.dump(2) + "\n");
}

SyntheticDataset load_dataset(const std::filesystem::path& dir) {
    const json meta = json::parse(read_text_file(dir / "meta.json"));
    SyntheticDataset ds;
    auto& c = ds.config;
    c.num_classes = meta.at("num_classes").get<int>();
    c.train_size = meta.at("train_size").get<int>();
    c.db_size = meta.at("db_size").get<int>();
    c.num_queries = meta.at("num_queries").get<int>();
    c.d_in = meta.at("d_in").get<int>();
    c.d_teacher = meta.at("d_teacher").get<int>();
    c.intra_class_noise = meta.at("intra_class_noise").get<double>();
    c.teacher_signal = meta.at("teacher_signal").get<double>();
    c.seed = meta.at("seed").get<uint64_t>();

    const auto rows = read_matrix_f32(dir / "inputs.f32");
    const auto classes = meta.at("classes").get<std::vector<int>>();
    const size_t total = static_cast<size_t>(c.train_size + c.db_size + c.num_queries);
    if (rows.size() != total || classes.size() != total)
        throw ConfigError("dataset at " + dir.string() + ": inconsistent sizes");

    int id = 0;
    for (int i = 0; i < c.train_size; ++i, ++id) {
        ds.train.ids.push_back(id);
        ds.train.inputs.emplace(id, rows[static_cast<size_t>(id)]);
        ds.train.class_of.emplace(id, classes[static_cast<size_t>(id)]);
        ds.classes.emplace(id, classes[static_cast<size_t>(id)]);
    }
    for (int i = 0; i < c.db_size; ++i, ++id) {
        ds.task.database.emplace_back(id, rows[static_cast<size_t>(id)]);
        ds.classes.emplace(id, classes[static_cast<size_t>(id)]);
    }
    for (int i = 0; i < c.num_queries; ++i, ++id) {
        ds.task.queries.emplace_back(id, rows[static_cast<size_t>(id)]);
        ds.classes.emplace(id, classes[static_cast<size_t>(id)]);
    }

    const json pairs = json::parse(read_text_file(dir / "pairs.json"));
    for (const auto& [key, val] : pairs.at("anchors").items())
        ds.train.positives.emplace(std::stoi(key), val.get<std::vector<int>>());
    for (const auto& [key, val] : pairs.at("queries").items())
        ds.task.positives.emplace(std::stoi(key), val.get<std::vector<int>>());
    return ds;
}

}  // namespace asymkd
