#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "asymkd/dataset.hpp"
#include "asymkd/geometry.hpp"

namespace asymkd {

/// Frozen teacher: a precomputed embedding table keyed by example id.
class TeacherModel {
public:
    explicit TeacherModel(std::map<int, Vec> table);

    const Vec& embed(int id) const;
    double similarity(int a, int x) const;  // S(a, x), cosine in teacher space
    int dim() const { return dim_; }
    size_t size() const { return table_.size(); }
    uint64_t content_hash() const;

private:
    std::map<int, Vec> table_;
    int dim_ = 0;
};

/// Teacher for synthetic experiments: a fixed random linear map of the input
/// plus a per-class signal direction, L2-normalized and frozen. Embeddings are
/// quantized through float32 to match the on-disk table format.
TeacherModel build_synthetic_teacher(const SyntheticDataset& ds);

/// Teacher table serialization: ids are 0..n-1 in row order.
void save_teacher(const std::filesystem::path& path, const TeacherModel& teacher);
TeacherModel load_teacher(const std::filesystem::path& path);

struct StudentArch {
    int d_in = 0;
    std::vector<int> hidden;  // default set by make_default_arch
    int d_out = 0;

    bool operator==(const StudentArch&) const = default;
};
StudentArch make_default_arch(int d_in, int d_out);

/// Trainable MLP: affine -> tanh per hidden layer, final affine, no output
/// normalization (normalization lives inside cosine similarity).
class StudentModel {
public:
    StudentModel(StudentArch arch, uint64_t seed);         // random init
    StudentModel(StudentArch arch, Vec theta);             // from parameters

    Vec forward(std::span<const double> x) const;

    /// Exact reverse-mode gradient of the forward map contracted with
    /// `upstream` (a vector in output space); returns a gradient over theta.
    Vec backward(std::span<const double> x, std::span<const double> upstream) const;

    const Vec& theta() const { return theta_; }
    void set_theta(Vec theta);
    const StudentArch& arch() const { return arch_; }
    size_t num_params() const { return theta_.size(); }

private:
    StudentArch arch_;
    Vec theta_;
    std::vector<std::pair<size_t, size_t>> layer_offsets_;  // (weight, bias) per layer
    std::vector<std::pair<int, int>> layer_dims_;           // (in, out) per layer
    size_t expected_params() const;
};

/// Similarity between a student-embedded anchor and another example:
/// Symmetric compares against the student embedding of `other_input`,
/// Asymmetric against the frozen teacher embedding of `other_id`.
double pair_similarity(std::span<const double> anchor_student_embedding, int other_id,
                       std::span<const double> other_input, SimilarityMode mode,
                       const StudentModel& student, const TeacherModel& teacher);

struct StudentCheckpoint {
    StudentArch arch;
    uint64_t seed = 0;
    int epoch = 0;
};

/// Checkpoint: student.json (architecture, seed, epoch) next to theta.f32.
void save_student(const std::filesystem::path& dir, const StudentModel& student,
                  uint64_t seed, int epoch);
std::pair<StudentModel, StudentCheckpoint> load_student(const std::filesystem::path& dir);

}  // namespace asymkd
