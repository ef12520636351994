#include "asymkd/evaluation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace asymkd {

std::string to_string(Protocol p) {
    return p == Protocol::Symmetric ? "sym" : "asym";
}

Protocol protocol_from_string(const std::string& name) {
    if (name == "sym" || name == "symmetric") return Protocol::Symmetric;
    if (name == "asym" || name == "asymmetric") return Protocol::Asymmetric;
    throw ConfigError("unknown protocol: " + name);
}

WhiteningTransform fit_whitening(const std::vector<Vec>& embeddings,
                                 const std::vector<std::pair<size_t, size_t>>& positive_pairs,
                                 WhiteningSpace space, double eig_floor) {
    if (embeddings.empty()) throw ConfigError("whitening: no embeddings");
    if (positive_pairs.size() < 2) throw ConfigError("whitening: need at least 2 positive pairs");
    const int d = static_cast<int>(embeddings.front().size());

    Eigen::MatrixXd X(static_cast<Eigen::Index>(embeddings.size()), d);
    for (size_t i = 0; i < embeddings.size(); ++i)
        for (int j = 0; j < d; ++j) X(static_cast<Eigen::Index>(i), j) = embeddings[i][static_cast<size_t>(j)];
    const Eigen::RowVectorXd mu = X.colwise().mean();

    // Covariance of positive-pair differences.
    Eigen::MatrixXd cs = Eigen::MatrixXd::Zero(d, d);
    for (const auto& [a, p] : positive_pairs) {
        if (a >= embeddings.size() || p >= embeddings.size())
            throw ConfigError("whitening: pair index out of range");
        const Eigen::VectorXd diff = X.row(static_cast<Eigen::Index>(a)) - X.row(static_cast<Eigen::Index>(p));
        cs += diff * diff.transpose();
    }
    cs /= static_cast<double>(positive_pairs.size());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cs);
    if (es.info() != Eigen::Success) throw ConfigError("whitening: eigendecomposition failed");
    Eigen::VectorXd ev = es.eigenvalues();
    const double top = ev.maxCoeff();
    Eigen::MatrixXd inv_sqrt;
    if (top <= 0.0) {
        // All positive pairs coincide (zero-noise data); nothing to whiten.
        inv_sqrt = Eigen::MatrixXd::Identity(d, d);
    } else {
        const double floor = eig_floor * top;
        for (int i = 0; i < d; ++i) ev(i) = std::max(ev(i), floor);
        inv_sqrt = es.eigenvectors() * ev.cwiseInverse().cwiseSqrt().asDiagonal() *
                   es.eigenvectors().transpose();
    }

    // Rotate onto the principal axes of the projected, centered data.
    Eigen::MatrixXd Xc = X.rowwise() - mu;
    Eigen::MatrixXd cd = inv_sqrt * (Xc.transpose() * Xc / static_cast<double>(embeddings.size())) *
                         inv_sqrt.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ed(cd);
    if (ed.info() != Eigen::Success) throw ConfigError("whitening: rotation eigendecomposition failed");
    // SelfAdjointEigenSolver orders eigenvalues ascending; flip to descending.
    Eigen::MatrixXd rot(d, d);
    for (int i = 0; i < d; ++i) rot.col(i) = ed.eigenvectors().col(d - 1 - i);
    const Eigen::MatrixXd W = rot.transpose() * inv_sqrt;

    WhiteningTransform t;
    t.space = space;
    t.mean.assign(mu.data(), mu.data() + d);
    t.projection.assign(static_cast<size_t>(d), Vec(static_cast<size_t>(d)));
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) t.projection[static_cast<size_t>(i)][static_cast<size_t>(j)] = W(i, j);
    return t;
}

Vec apply_whitening(const WhiteningTransform& t, std::span<const double> v) {
    if (static_cast<int>(v.size()) != t.dim())
        throw ConfigError("whitening: dimension mismatch");
    Vec centered(v.size());
    for (size_t i = 0; i < v.size(); ++i) centered[i] = v[i] - t.mean[i];
    Vec out(t.projection.size(), 0.0);
    for (size_t i = 0; i < t.projection.size(); ++i) out[i] = dot(t.projection[i], centered);
    return out;
}

WhiteningTransform identity_whitening(int dim, WhiteningSpace space) {
    WhiteningTransform t;
    t.space = space;
    t.mean.assign(static_cast<size_t>(dim), 0.0);
    t.projection.assign(static_cast<size_t>(dim), Vec(static_cast<size_t>(dim), 0.0));
    for (int i = 0; i < dim; ++i) t.projection[static_cast<size_t>(i)][static_cast<size_t>(i)] = 1.0;
    return t;
}

WhiteningTransform fit_whitening_for(Protocol protocol, const StudentModel& student,
                                     const TeacherModel& teacher, const TrainingSet& set) {
    const WhiteningSpace space =
        protocol == Protocol::Symmetric ? WhiteningSpace::Student : WhiteningSpace::Teacher;
    std::vector<Vec> embeddings;
    embeddings.reserve(set.size());
    std::unordered_map<int, size_t> index;
    for (int id : set.ids) {
        index.emplace(id, embeddings.size());
        embeddings.push_back(space == WhiteningSpace::Student ? student.forward(set.input_of(id))
                                                              : teacher.embed(id));
    }
    std::vector<std::pair<size_t, size_t>> pairs;
    for (int a : set.ids)
        for (int p : set.positives_of(a)) pairs.emplace_back(index.at(a), index.at(p));
    return fit_whitening(embeddings, pairs, space);
}

std::vector<int> rank_database(std::span<const double> query,
                               const std::vector<std::pair<int, Vec>>& database,
                               const std::set<int>& ignore) {
    std::vector<std::pair<double, int>> scored;
    scored.reserve(database.size());
    for (const auto& [id, v] : database) {
        if (ignore.count(id)) continue;
        scored.emplace_back(cosine_similarity(query, v), id);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& l, const auto& r) {
        return l.first != r.first ? l.first > r.first : l.second < r.second;
    });
    std::vector<int> ranked(scored.size());
    for (size_t i = 0; i < scored.size(); ++i) ranked[i] = scored[i].second;
    return ranked;
}

double average_precision(const std::vector<int>& ranked, const std::set<int>& positives) {
    if (positives.empty()) throw ConfigError("average_precision: empty positive set");
    double sum = 0.0;
    int hits = 0;
    for (size_t r = 0; r < ranked.size(); ++r) {
        if (positives.count(ranked[r])) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(r + 1);
        }
    }
    return sum / static_cast<double>(positives.size());
}

EvalReport evaluate(Protocol protocol, const StudentModel& student, const TeacherModel& teacher,
                    const RetrievalTask& task, const WhiteningTransform& whitening,
                    const std::string& config_digest) {
    const WhiteningSpace expected =
        protocol == Protocol::Symmetric ? WhiteningSpace::Student : WhiteningSpace::Teacher;
    if (whitening.space != expected)
        throw ConfigError("evaluate: whitening was fitted in the wrong space for this protocol");

    std::vector<std::pair<int, Vec>> database;
    database.reserve(task.database.size());
    for (const auto& [id, input] : task.database) {
        Vec e = protocol == Protocol::Symmetric ? student.forward(input) : teacher.embed(id);
        database.emplace_back(id, apply_whitening(whitening, e));
    }

    EvalReport report;
    report.protocol = protocol;
    report.config_digest = config_digest;
    double ap_sum = 0.0, p10_sum = 0.0;
    int counted = 0;
    for (const auto& [qid, input] : task.queries) {
        auto pit = task.positives.find(qid);
        if (pit == task.positives.end() || pit->second.empty()) {
            ++report.skipped_queries;
            continue;
        }
        const std::set<int> positives(pit->second.begin(), pit->second.end());
        std::set<int> ignore;
        if (auto iit = task.ignore.find(qid); iit != task.ignore.end())
            ignore.insert(iit->second.begin(), iit->second.end());

        const Vec q = apply_whitening(whitening, student.forward(input));
        const auto ranked = rank_database(q, database, ignore);
        const double ap = average_precision(ranked, positives);

        int top10_hits = 0;
        for (size_t r = 0; r < ranked.size() && r < 10; ++r)
            if (positives.count(ranked[r])) ++top10_hits;
        const double p10 = static_cast<double>(top10_hits) /
                           static_cast<double>(std::min<size_t>(10, positives.size()));

        report.per_query_ap.emplace_back(qid, ap);
        ap_sum += ap;
        p10_sum += p10;
        ++counted;
    }
    if (counted > 0) {
        report.map = ap_sum / counted;
        report.mp10 = p10_sum / counted;
    }
    return report;
}

}  // namespace asymkd
