#include "asymkd/models.hpp"

#include <cmath>
#include <random>

#include "asymkd/io.hpp"
#include "json.hpp"

namespace asymkd {

using nlohmann::json;

TeacherModel::TeacherModel(std::map<int, Vec> table) : table_(std::move(table)) {
    if (table_.empty()) throw ConfigError("teacher table must not be empty");
    dim_ = static_cast<int>(table_.begin()->second.size());
    for (const auto& [id, v] : table_) {
        if (static_cast<int>(v.size()) != dim_)
            throw ConfigError("teacher table: inconsistent dimensionality");
        if (norm(v) == 0.0)
            throw DegenerateInputError("teacher table: zero embedding for id " + std::to_string(id));
        for (double x : v)
            if (!std::isfinite(x))
                throw DegenerateInputError("teacher table: non-finite embedding for id " +
                                           std::to_string(id));
    }
}

const Vec& TeacherModel::embed(int id) const {
    auto it = table_.find(id);
    if (it == table_.end()) throw ConfigError("teacher: unknown example id " + std::to_string(id));
    return it->second;
}

double TeacherModel::similarity(int a, int x) const {
    return cosine_similarity(embed(a), embed(x));
}

uint64_t TeacherModel::content_hash() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& [id, v] : table_) {
        h = fnv1a64(&id, sizeof(id), h);
        h = fnv1a64(v.data(), v.size() * sizeof(double), h);
    }
    return h;
}

TeacherModel build_synthetic_teacher(const SyntheticDataset& ds) {
    const auto& c = ds.config;
    std::mt19937_64 rng(mix_seed(c.seed, 1));
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Random linear map, entries N(0, 1/d_in) so ||A x|| is of order ||x||.
    std::vector<Vec> map(static_cast<size_t>(c.d_teacher), Vec(static_cast<size_t>(c.d_in)));
    const double scale = 1.0 / std::sqrt(static_cast<double>(c.d_in));
    for (auto& row : map)
        for (double& x : row) x = scale * gauss(rng);

    // One signal direction per class.
    std::vector<Vec> signal(static_cast<size_t>(c.num_classes));
    for (auto& s : signal) {
        s.resize(static_cast<size_t>(c.d_teacher));
        double n = 0.0;
        while (n == 0.0) {
            for (double& x : s) x = gauss(rng);
            n = norm(s);
        }
        for (double& x : s) x /= n;
    }

    auto embed = [&](const Vec& input, int cls) {
        Vec e(static_cast<size_t>(c.d_teacher));
        for (int i = 0; i < c.d_teacher; ++i)
            e[static_cast<size_t>(i)] = dot(map[static_cast<size_t>(i)], input) +
                                        c.teacher_signal * signal[static_cast<size_t>(cls)][static_cast<size_t>(i)];
        const double n = norm(e);
        if (n == 0.0) throw DegenerateInputError("synthetic teacher produced a zero embedding");
        for (double& x : e) x /= n;
        quantize_f32(e);
        return e;
    };

    std::map<int, Vec> table;
    for (int id : ds.train.ids) table.emplace(id, embed(ds.train.input_of(id), ds.classes.at(id)));
    for (const auto& [id, v] : ds.task.database) table.emplace(id, embed(v, ds.classes.at(id)));
    for (const auto& [id, v] : ds.task.queries) table.emplace(id, embed(v, ds.classes.at(id)));
    return TeacherModel(std::move(table));
}

void save_teacher(const std::filesystem::path& path, const TeacherModel& teacher) {
    std::vector<Vec> rows;
    rows.reserve(teacher.size());
    for (int id = 0; id < static_cast<int>(teacher.size()); ++id) rows.push_back(teacher.embed(id));
    write_matrix_f32(path, rows);
}

TeacherModel load_teacher(const std::filesystem::path& path) {
    const auto rows = read_matrix_f32(path);
    std::map<int, Vec> table;
    for (size_t i = 0; i < rows.size(); ++i) table.emplace(static_cast<int>(i), rows[i]);
    return TeacherModel(std::move(table));
}

StudentArch make_default_arch(int d_in, int d_out) {
    return StudentArch{d_in, {64}, d_out};
}

size_t StudentModel::expected_params() const {
    size_t n = 0;
    for (const auto& [in, out] : layer_dims_) n += static_cast<size_t>(in) * out + out;
    return n;
}

namespace {

std::pair<std::vector<std::pair<size_t, size_t>>, std::vector<std::pair<int, int>>>
layout_of(const StudentArch& arch) {
    if (arch.d_in <= 0 || arch.d_out <= 0) throw ConfigError("student arch: dimensions must be positive");
    for (int h : arch.hidden)
        if (h <= 0) throw ConfigError("student arch: hidden widths must be positive");
    std::vector<std::pair<int, int>> dims;
    int in = arch.d_in;
    for (int h : arch.hidden) {
        dims.emplace_back(in, h);
        in = h;
    }
    dims.emplace_back(in, arch.d_out);
    std::vector<std::pair<size_t, size_t>> offsets;
    size_t off = 0;
    for (const auto& [i, o] : dims) {
        offsets.emplace_back(off, off + static_cast<size_t>(i) * o);
        off += static_cast<size_t>(i) * o + o;
    }
    return {offsets, dims};
}

}  // namespace

StudentModel::StudentModel(StudentArch arch, uint64_t seed) : arch_(std::move(arch)) {
    std::tie(layer_offsets_, layer_dims_) = layout_of(arch_);
    theta_.resize(expected_params());
    std::mt19937_64 rng(seed);
    for (size_t l = 0; l < layer_dims_.size(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer_dims_[l].first));
        std::uniform_real_distribution<double> init(-bound, bound);
        const size_t begin = layer_offsets_[l].first;
        const size_t end = begin + static_cast<size_t>(layer_dims_[l].first) * layer_dims_[l].second +
                           static_cast<size_t>(layer_dims_[l].second);
        for (size_t i = begin; i < end; ++i) theta_[i] = init(rng);
    }
}

StudentModel::StudentModel(StudentArch arch, Vec theta) : arch_(std::move(arch)), theta_(std::move(theta)) {
    std::tie(layer_offsets_, layer_dims_) = layout_of(arch_);
    if (theta_.size() != expected_params())
        throw ConfigError("student: theta length does not match architecture");
}

void StudentModel::set_theta(Vec theta) {
    if (theta.size() != expected_params())
        throw ConfigError("student: theta length does not match architecture");
    theta_ = std::move(theta);
}

Vec StudentModel::forward(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != arch_.d_in)
        throw ConfigError("student forward: input dimension mismatch");
    Vec act(x.begin(), x.end());
    for (size_t l = 0; l < layer_dims_.size(); ++l) {
        const auto [in, out] = layer_dims_[l];
        const double* w = theta_.data() + layer_offsets_[l].first;
        const double* b = theta_.data() + layer_offsets_[l].second;
        Vec next(static_cast<size_t>(out));
        for (int o = 0; o < out; ++o) {
            double s = b[o];
            const double* row = w + static_cast<size_t>(o) * in;
            for (int i = 0; i < in; ++i) s += row[i] * act[static_cast<size_t>(i)];
            next[static_cast<size_t>(o)] = s;
        }
        if (l + 1 < layer_dims_.size())
            for (double& v : next) v = std::tanh(v);
        act = std::move(next);
    }
    return act;
}

Vec StudentModel::backward(std::span<const double> x, std::span<const double> upstream) const {
    if (static_cast<int>(x.size()) != arch_.d_in)
        throw ConfigError("student backward: input dimension mismatch");
    if (static_cast<int>(upstream.size()) != arch_.d_out)
        throw ConfigError("student backward: upstream dimension mismatch");

    // Forward, keeping post-activation values per layer.
    std::vector<Vec> acts;
    acts.emplace_back(x.begin(), x.end());
    for (size_t l = 0; l < layer_dims_.size(); ++l) {
        const auto [in, out] = layer_dims_[l];
        const double* w = theta_.data() + layer_offsets_[l].first;
        const double* b = theta_.data() + layer_offsets_[l].second;
        Vec next(static_cast<size_t>(out));
        for (int o = 0; o < out; ++o) {
            double s = b[o];
            const double* row = w + static_cast<size_t>(o) * in;
            for (int i = 0; i < in; ++i) s += row[i] * acts.back()[static_cast<size_t>(i)];
            next[static_cast<size_t>(o)] = s;
        }
        if (l + 1 < layer_dims_.size())
            for (double& v : next) v = std::tanh(v);
        acts.push_back(std::move(next));
    }

    Vec grad(theta_.size(), 0.0);
    Vec delta(upstream.begin(), upstream.end());
    for (size_t l = layer_dims_.size(); l-- > 0;) {
        const auto [in, out] = layer_dims_[l];
        const double* w = theta_.data() + layer_offsets_[l].first;
        double* gw = grad.data() + layer_offsets_[l].first;
        double* gb = grad.data() + layer_offsets_[l].second;
        const Vec& input = acts[l];
        for (int o = 0; o < out; ++o) {
            const double d = delta[static_cast<size_t>(o)];
            gb[o] += d;
            double* row = gw + static_cast<size_t>(o) * in;
            for (int i = 0; i < in; ++i) row[i] += d * input[static_cast<size_t>(i)];
        }
        if (l > 0) {
            Vec prev(static_cast<size_t>(in), 0.0);
            for (int o = 0; o < out; ++o) {
                const double d = delta[static_cast<size_t>(o)];
                const double* row = w + static_cast<size_t>(o) * in;
                for (int i = 0; i < in; ++i) prev[static_cast<size_t>(i)] += d * row[i];
            }
            // chain through tanh of the previous layer: tanh'(z) = 1 - tanh(z)^2
            for (int i = 0; i < in; ++i) {
                const double t = input[static_cast<size_t>(i)];
                prev[static_cast<size_t>(i)] *= 1.0 - t * t;
            }
            delta = std::move(prev);
        }
    }
    return grad;
}

double pair_similarity(std::span<const double> anchor_student_embedding, int other_id,
                       std::span<const double> other_input, SimilarityMode mode,
                       const StudentModel& student, const TeacherModel& teacher) {
    if (mode == SimilarityMode::Symmetric)
        return cosine_similarity(anchor_student_embedding, student.forward(other_input));
    return cosine_similarity(anchor_student_embedding, teacher.embed(other_id));
}

void save_student(const std::filesystem::path& dir, const StudentModel& student,
                  uint64_t seed, int epoch) {
    json j;
    j["d_in"] = student.arch().d_in;
    j["hidden"] = student.arch().hidden;
    j["d_out"] = student.arch().d_out;
    j["seed"] = seed;
    j["epoch"] = epoch;
    write_text_file(dir / "student.json", j.dump(2) + "\n");
    Vec theta = student.theta();
    quantize_f32(theta);
    write_matrix_f32(dir / "theta.f32", {theta});
}

std::pair<StudentModel, StudentCheckpoint> load_student(const std::filesystem::path& dir) {
    const json j = json::parse(read_text_file(dir / "student.json"));
    StudentCheckpoint ckpt;
    ckpt.arch.d_in = j.at("d_in").get<int>();
    ckpt.arch.hidden = j.at("hidden").get<std::vector<int>>();
    ckpt.arch.d_out = j.at("d_out").get<int>();
    ckpt.seed = j.at("seed").get<uint64_t>();
    ckpt.epoch = j.at("epoch").get<int>();
    auto rows = read_matrix_f32(dir / "theta.f32");
    if (rows.size() != 1) throw ConfigError("theta.f32 must hold exactly one row");
    return {StudentModel(ckpt.arch, std::move(rows.front())), ckpt};
}

}  // namespace asymkd
