#pragma once

#include <set>
#include <string>
#include <vector>

#include "asymkd/dataset.hpp"
#include "asymkd/models.hpp"

namespace asymkd {

enum class Protocol { Symmetric, Asymmetric };
std::string to_string(Protocol p);
Protocol protocol_from_string(const std::string& name);

enum class WhiteningSpace { Student, Teacher };

/// Linear transform v -> W (v - mean) fitted so positive-pair differences
/// become isotropic, followed by rotation onto the principal axes of the
/// projected data covariance.
struct WhiteningTransform {
    Vec mean;
    std::vector<Vec> projection;  // rows of W
    WhiteningSpace space = WhiteningSpace::Student;
    int dim() const { return static_cast<int>(mean.size()); }
};

inline constexpr double kWhiteningEigFloor = 1e-6;  // relative to the largest eigenvalue

WhiteningTransform fit_whitening(const std::vector<Vec>& embeddings,
                                 const std::vector<std::pair<size_t, size_t>>& positive_pairs,
                                 WhiteningSpace space, double eig_floor = kWhiteningEigFloor);

Vec apply_whitening(const WhiteningTransform& t, std::span<const double> v);

/// Identity transform, for evaluation without whitening.
WhiteningTransform identity_whitening(int dim, WhiteningSpace space);

/// Fits whitening on the training examples embedded in the space the protocol
/// requires: student space for symmetric testing, teacher space for asymmetric.
WhiteningTransform fit_whitening_for(Protocol protocol, const StudentModel& student,
                                     const TeacherModel& teacher, const TrainingSet& set);

/// Database ids by descending cosine similarity to the query; ignore-set
/// members removed before ranking, ties broken by ascending id.
std::vector<int> rank_database(std::span<const double> query,
                               const std::vector<std::pair<int, Vec>>& database,
                               const std::set<int>& ignore);

/// AP = (1/|P|) * sum over positives (indexed i = 1.. in rank order) of i / rank_i.
double average_precision(const std::vector<int>& ranked, const std::set<int>& positives);

struct EvalReport {
    std::vector<std::pair<int, double>> per_query_ap;  // query id, AP; skipped queries absent
    double map = 0.0;
    double mp10 = 0.0;
    Protocol protocol = Protocol::Symmetric;
    std::string config_digest;
    int skipped_queries = 0;  // queries with empty positive sets
};

/// Symmetric: database and queries embedded by the student. Asymmetric:
/// database by the teacher, queries by the student. Whitening must have been
/// fitted in the matching space.
EvalReport evaluate(Protocol protocol, const StudentModel& student, const TeacherModel& teacher,
                    const RetrievalTask& task, const WhiteningTransform& whitening,
                    const std::string& config_digest = "");

}  // namespace asymkd
