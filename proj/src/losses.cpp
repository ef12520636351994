#include "asymkd/losses.hpp"

#include <algorithm>
#include <cmath>

namespace asymkd {

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::Contrastive: return "contrastive";
        case LossKind::ContrastivePlus: return "contrastive_plus";
        case LossKind::Triplet: return "triplet";
        case LossKind::MultiSimilarity: return "multi_similarity";
        case LossKind::Regression: return "regression";
        case LossKind::RKD: return "rkd";
        case LossKind::DarkRank: return "darkrank";
    }
    throw ConfigError("unknown loss kind");
}

LossKind loss_kind_from_string(const std::string& name) {
    for (LossKind k : {LossKind::Contrastive, LossKind::ContrastivePlus, LossKind::Triplet,
                       LossKind::MultiSimilarity, LossKind::Regression, LossKind::RKD,
                       LossKind::DarkRank})
        if (to_string(k) == name) return k;
    throw ConfigError("unknown loss kind: " + name);
}

std::string to_string(SimilarityMode mode) {
    return mode == SimilarityMode::Symmetric ? "sym" : "asym";
}

SimilarityMode mode_from_string(const std::string& name) {
    if (name == "sym" || name == "symmetric") return SimilarityMode::Symmetric;
    if (name == "asym" || name == "asymmetric") return SimilarityMode::Asymmetric;
    throw ConfigError("unknown similarity mode: " + name);
}

LossConfig LossConfig::defaults(LossKind kind, SimilarityMode mode) {
    LossConfig cfg;
    cfg.kind = kind;
    cfg.mode = mode;
    switch (kind) {
        case LossKind::Contrastive:
            cfg.margin = 0.7;
            break;
        case LossKind::ContrastivePlus:
            cfg.margin = 0.7;
            cfg.mode = SimilarityMode::Asymmetric;
            cfg.include_self_positive = true;
            break;
        case LossKind::Triplet:
            cfg.margin = 0.1;
            break;
        case LossKind::MultiSimilarity:
            cfg.margin = 0.6;
            cfg.alpha = 1.0;
            cfg.beta = 1.0;
            break;
        case LossKind::Regression:
            cfg.mode = SimilarityMode::Asymmetric;
            break;
        case LossKind::RKD:
        case LossKind::DarkRank:
            break;
    }
    return cfg;
}

void LossConfig::validate() const {
    if (kind == LossKind::ContrastivePlus &&
        (mode != SimilarityMode::Asymmetric || !include_self_positive || !use_positives ||
         !use_negatives))
        throw ConfigError(
            "contrastive_plus requires asymmetric mode with self-positive, positives and "
            "negatives enabled");
    if (kind == LossKind::Regression && mode != SimilarityMode::Asymmetric)
        throw ConfigError("regression is defined on asymmetric similarity only");
    if (include_self_positive && mode == SimilarityMode::Symmetric)
        throw ConfigError("self-positive under symmetric similarity is constant 1; use asymmetric mode");
    if (kind == LossKind::MultiSimilarity && (alpha <= 0.0 || beta <= 0.0))
        throw ConfigError("multi_similarity requires alpha > 0 and beta > 0");
    if (rkd.distance_weight < 0.0 || rkd.angle_weight < 0.0 || rkd.huber_delta <= 0.0)
        throw ConfigError("rkd weights must be >= 0 and huber_delta > 0");
}

bool LossConfig::uses_labels() const {
    switch (kind) {
        case LossKind::Contrastive:
        case LossKind::ContrastivePlus:
        case LossKind::Triplet:
        case LossKind::MultiSimilarity:
            return true;
        default:
            return false;
    }
}

double published_learning_rate(LossKind kind, SimilarityMode mode) {
    switch (kind) {
        case LossKind::Contrastive:
        case LossKind::ContrastivePlus:
            return mode == SimilarityMode::Symmetric ? 1e-5 : 1e-3;
        case LossKind::Triplet:
        case LossKind::MultiSimilarity:
            return 1e-8;
        case LossKind::Regression:
            return 1e-3;
        case LossKind::RKD:
            return 1e-2;
        case LossKind::DarkRank:
            return 1e-6;
    }
    throw ConfigError("unknown loss kind");
}

namespace {

void accumulate(std::unordered_map<int, Vec>& grads, int id, const Vec& g, double scale) {
    auto [it, inserted] = grads.try_emplace(id, Vec(g.size(), 0.0));
    Vec& acc = it->second;
    for (size_t i = 0; i < g.size(); ++i) acc[i] += scale * g[i];
}

void ensure_entry(std::unordered_map<int, Vec>& grads, int id, size_t dim) {
    grads.try_emplace(id, Vec(dim, 0.0));
}

double huber(double e, double delta) {
    const double a = std::abs(e);
    return a <= delta ? 0.5 * e * e : delta * (a - 0.5 * delta);
}

double huber_grad(double e, double delta) {
    const double a = std::abs(e);
    return a <= delta ? e : (e > 0.0 ? delta : -delta);
}

constexpr double kTinyDistance = 1e-12;

}  // namespace

LossTerm loss_contrastive(int anchor_id, const Vec& anchor_student,
                          const std::optional<Vec>& anchor_teacher,
                          const std::vector<Participant>& positives,
                          const std::vector<Participant>& negatives, const LossConfig& cfg) {
    cfg.validate();
    const bool sym = cfg.mode == SimilarityMode::Symmetric;
    const bool self = cfg.include_self_positive;
    const bool has_pos = (cfg.use_positives && !positives.empty()) || self;
    const bool has_neg = cfg.use_negatives && !negatives.empty();
    if (!has_pos && !has_neg)
        throw ConfigError("contrastive: no positives (including self) and no negatives");
    if (self && !anchor_teacher)
        throw ConfigError("contrastive: self-positive requires the teacher embedding of the anchor");

    LossTerm term;
    ensure_entry(term.grads, anchor_id, anchor_student.size());

    if (self) {
        const auto cg = cosine_with_grad(anchor_student, *anchor_teacher);
        term.value -= cg.value;
        accumulate(term.grads, anchor_id, cg.du, -1.0);
    }
    if (cfg.use_positives) {
        for (const auto& p : positives) {
            const auto cg = cosine_with_grad(anchor_student, p.embedding);
            term.value -= cg.value;
            accumulate(term.grads, anchor_id, cg.du, -1.0);
            if (sym) accumulate(term.grads, p.id, cg.dv, -1.0);
        }
    }
    if (cfg.use_negatives) {
        for (const auto& n : negatives) {
            const auto cg = cosine_with_grad(anchor_student, n.embedding);
            const double h = cg.value - cfg.margin;
            if (sym) ensure_entry(term.grads, n.id, n.embedding.size());
            if (h > 0.0) {  // subgradient at the kink taken as 0
                term.value += h;
                accumulate(term.grads, anchor_id, cg.du, 1.0);
                if (sym) accumulate(term.grads, n.id, cg.dv, 1.0);
            }
        }
    }
    return term;
}

LossTerm loss_triplet(int anchor_id, const Vec& anchor_student,
                      const std::vector<Participant>& positives,
                      const std::vector<Participant>& negatives, const LossConfig& cfg) {
    cfg.validate();
    if (positives.empty() || negatives.empty())
        throw ConfigError("triplet: positives and negatives must both be nonempty");
    const bool sym = cfg.mode == SimilarityMode::Symmetric;

    LossTerm term;
    ensure_entry(term.grads, anchor_id, anchor_student.size());
    for (const auto& p : positives) {
        const auto cp = cosine_with_grad(anchor_student, p.embedding);
        if (sym) ensure_entry(term.grads, p.id, p.embedding.size());
        for (const auto& n : negatives) {
            const auto cn = cosine_with_grad(anchor_student, n.embedding);
            if (sym) ensure_entry(term.grads, n.id, n.embedding.size());
            const double h = cn.value - cp.value + cfg.margin;
            if (h > 0.0) {
                term.value += h;
                accumulate(term.grads, anchor_id, cn.du, 1.0);
                accumulate(term.grads, anchor_id, cp.du, -1.0);
                if (sym) {
                    accumulate(term.grads, n.id, cn.dv, 1.0);
                    accumulate(term.grads, p.id, cp.dv, -1.0);
                }
            }
        }
    }
    return term;
}

LossTerm loss_multi_similarity(int anchor_id, const Vec& anchor_student,
                               const std::vector<Participant>& positives,
                               const std::vector<Participant>& negatives, const LossConfig& cfg) {
    cfg.validate();
    const bool sym = cfg.mode == SimilarityMode::Symmetric;

    LossTerm term;
    ensure_entry(term.grads, anchor_id, anchor_student.size());

    std::vector<CosineGrad> pos_cg, neg_cg;
    double pos_sum = 0.0, neg_sum = 0.0;
    for (const auto& p : positives) {
        pos_cg.push_back(cosine_with_grad(anchor_student, p.embedding));
        pos_sum += std::exp(-cfg.alpha * (pos_cg.back().value - cfg.margin));
        if (sym) ensure_entry(term.grads, p.id, p.embedding.size());
    }
    for (const auto& n : negatives) {
        neg_cg.push_back(cosine_with_grad(anchor_student, n.embedding));
        neg_sum += std::exp(cfg.beta * (neg_cg.back().value - cfg.margin));
        if (sym) ensure_entry(term.grads, n.id, n.embedding.size());
    }
    term.value = std::log1p(pos_sum) / cfg.alpha + std::log1p(neg_sum) / cfg.beta;

    for (size_t i = 0; i < pos_cg.size(); ++i) {
        const double w = -std::exp(-cfg.alpha * (pos_cg[i].value - cfg.margin)) / (1.0 + pos_sum);
        accumulate(term.grads, anchor_id, pos_cg[i].du, w);
        if (sym) accumulate(term.grads, positives[i].id, pos_cg[i].dv, w);
    }
    for (size_t i = 0; i < neg_cg.size(); ++i) {
        const double w = std::exp(cfg.beta * (neg_cg[i].value - cfg.margin)) / (1.0 + neg_sum);
        accumulate(term.grads, anchor_id, neg_cg[i].du, w);
        if (sym) accumulate(term.grads, negatives[i].id, neg_cg[i].dv, w);
    }
    return term;
}

LossTerm loss_regression(int anchor_id, const Vec& anchor_student, const Vec& anchor_teacher) {
    const auto cg = cosine_with_grad(anchor_student, anchor_teacher);
    LossTerm term;
    term.value = -cg.value;
    ensure_entry(term.grads, anchor_id, anchor_student.size());
    accumulate(term.grads, anchor_id, cg.du, -1.0);
    return term;
}

LossTerm loss_rkd(int anchor_id, const Vec& anchor_student, const Vec& anchor_teacher,
                  const std::vector<Participant>& unlabeled_student,
                  const std::vector<Vec>& unlabeled_teacher, const LossConfig& cfg) {
    cfg.validate();
    if (cfg.rkd.identity_regression)
        return loss_regression(anchor_id, anchor_student, anchor_teacher);

    const size_t k = unlabeled_student.size();
    if (unlabeled_teacher.size() != k)
        throw ConfigError("rkd: student and teacher U lists must have equal length");
    if (cfg.rkd.distance_weight > 0.0 && k < 1)
        throw ConfigError("rkd: distance term requires |U| >= 1");
    if (cfg.rkd.angle_weight > 0.0 && k < 2)
        throw ConfigError("rkd: angle term requires |U| >= 2");

    LossTerm term;
    const size_t d = anchor_student.size();
    ensure_entry(term.grads, anchor_id, d);
    for (const auto& u : unlabeled_student) ensure_entry(term.grads, u.id, d);

    std::vector<Vec> sdiff(k), tdiff(k);
    std::vector<double> sd(k), td(k);
    for (size_t i = 0; i < k; ++i) {
        sdiff[i].resize(d);
        tdiff[i].resize(anchor_teacher.size());
        for (size_t j = 0; j < d; ++j) sdiff[i][j] = anchor_student[j] - unlabeled_student[i].embedding[j];
        for (size_t j = 0; j < anchor_teacher.size(); ++j) tdiff[i][j] = anchor_teacher[j] - unlabeled_teacher[i][j];
        sd[i] = norm(sdiff[i]);
        td[i] = norm(tdiff[i]);
    }

    if (cfg.rkd.distance_weight > 0.0) {
        const double kk = static_cast<double>(k);
        double smu = 0.0, tmu = 0.0;
        for (size_t i = 0; i < k; ++i) {
            smu += sd[i] / kk;
            tmu += td[i] / kk;
        }
        const bool normalize = cfg.rkd.normalize_distances && smu > kTinyDistance && tmu > kTinyDistance;
        std::vector<double> e(k), hg(k);
        double hg_d_sum = 0.0;
        for (size_t i = 0; i < k; ++i) {
            const double ps = normalize ? sd[i] / smu : sd[i];
            const double pt = normalize ? td[i] / tmu : td[i];
            e[i] = ps - pt;
            term.value += cfg.rkd.distance_weight * huber(e[i], cfg.rkd.huber_delta);
            hg[i] = huber_grad(e[i], cfg.rkd.huber_delta);
            hg_d_sum += hg[i] * sd[i];
        }
        for (size_t i = 0; i < k; ++i) {
            // d loss / d sd[i]; the batch-mean normalizer depends on every distance
            const double g = normalize ? (hg[i] / smu - hg_d_sum / (kk * smu * smu)) : hg[i];
            if (sd[i] <= kTinyDistance) continue;
            const double scale = cfg.rkd.distance_weight * g / sd[i];
            accumulate(term.grads, anchor_id, sdiff[i], scale);
            accumulate(term.grads, unlabeled_student[i].id, sdiff[i], -scale);
        }
    }

    if (cfg.rkd.angle_weight > 0.0) {
        for (size_t i = 0; i < k; ++i) {
            for (size_t j = i + 1; j < k; ++j) {
                if (sd[i] <= kTinyDistance || sd[j] <= kTinyDistance || td[i] <= kTinyDistance ||
                    td[j] <= kTinyDistance)
                    continue;  // angle undefined at coincident points
                const auto scg = cosine_with_grad(sdiff[i], sdiff[j]);
                const double t_angle = cosine_similarity(tdiff[i], tdiff[j]);
                const double e = scg.value - t_angle;
                term.value += cfg.rkd.angle_weight * huber(e, cfg.rkd.huber_delta);
                const double w = cfg.rkd.angle_weight * huber_grad(e, cfg.rkd.huber_delta);
                accumulate(term.grads, anchor_id, scg.du, w);
                accumulate(term.grads, anchor_id, scg.dv, w);
                accumulate(term.grads, unlabeled_student[i].id, scg.du, -w);
                accumulate(term.grads, unlabeled_student[j].id, scg.dv, -w);
            }
        }
    }
    return term;
}

LossTerm loss_darkrank(int anchor_id, const Vec& anchor_student,
                       const std::vector<Participant>& unlabeled_student,
                       const std::vector<double>& teacher_similarities, const LossConfig& cfg) {
    cfg.validate();
    const size_t k = unlabeled_student.size();
    if (k == 0) throw ConfigError("darkrank: U must be nonempty");
    if (teacher_similarities.size() != k)
        throw ConfigError("darkrank: teacher similarity list must match U");

    LossTerm term;
    ensure_entry(term.grads, anchor_id, anchor_student.size());

    std::vector<CosineGrad> cg(k);
    for (size_t i = 0; i < k; ++i) {
        cg[i] = cosine_with_grad(anchor_student, unlabeled_student[i].embedding);
        ensure_entry(term.grads, unlabeled_student[i].id, unlabeled_student[i].embedding.size());
    }

    // loss = sum_x ( logsumexp_{y in V(x)} s_y - s_x ),
    // V(x) = { y : S(a,y) <= S(a,x) }, which always contains x itself.
    std::vector<double> coeff(k, -1.0);
    for (size_t x = 0; x < k; ++x) {
        double mx = -std::numeric_limits<double>::infinity();
        for (size_t y = 0; y < k; ++y)
            if (teacher_similarities[y] <= teacher_similarities[x]) mx = std::max(mx, cg[y].value);
        double z = 0.0;
        for (size_t y = 0; y < k; ++y)
            if (teacher_similarities[y] <= teacher_similarities[x]) z += std::exp(cg[y].value - mx);
        term.value += mx + std::log(z) - cg[x].value;
        for (size_t y = 0; y < k; ++y)
            if (teacher_similarities[y] <= teacher_similarities[x])
                coeff[y] += std::exp(cg[y].value - mx) / z;
    }
    for (size_t i = 0; i < k; ++i) {
        accumulate(term.grads, anchor_id, cg[i].du, coeff[i]);
        accumulate(term.grads, unlabeled_student[i].id, cg[i].dv, coeff[i]);
    }
    return term;
}

LossTerm evaluate_tuple(const Tuple& tuple, const EmbeddingSources& src, const LossConfig& cfg) {
    cfg.validate();
    const Vec anchor_student = src.student(tuple.anchor);

    auto resolve = [&](const std::vector<int>& ids) {
        std::vector<Participant> out;
        out.reserve(ids.size());
        for (int id : ids) {
            if (cfg.mode == SimilarityMode::Symmetric)
                out.push_back({id, src.student(id)});
            else
                out.push_back({id, src.teacher(id)});
        }
        return out;
    };

    switch (cfg.kind) {
        case LossKind::Regression:
            return loss_regression(tuple.anchor, anchor_student, src.teacher(tuple.anchor));
        case LossKind::Contrastive:
        case LossKind::ContrastivePlus: {
            std::optional<Vec> anchor_teacher;
            if (cfg.include_self_positive) anchor_teacher = src.teacher(tuple.anchor);
            return loss_contrastive(tuple.anchor, anchor_student, anchor_teacher,
                                    resolve(tuple.positives), resolve(tuple.negatives), cfg);
        }
        case LossKind::Triplet:
            return loss_triplet(tuple.anchor, anchor_student, resolve(tuple.positives),
                                resolve(tuple.negatives), cfg);
        case LossKind::MultiSimilarity:
            return loss_multi_similarity(tuple.anchor, anchor_student, resolve(tuple.positives),
                                         resolve(tuple.negatives), cfg);
        case LossKind::RKD: {
            std::vector<Participant> us;
            std::vector<Vec> ut;
            for (int id : tuple.unlabeled) {
                us.push_back({id, src.student(id)});
                ut.push_back(src.teacher(id));
            }
            return loss_rkd(tuple.anchor, anchor_student, src.teacher(tuple.anchor), us, ut, cfg);
        }
        case LossKind::DarkRank: {
            std::vector<Participant> us;
            std::vector<double> sims;
            const Vec& ga = src.teacher(tuple.anchor);
            for (int id : tuple.unlabeled) {
                us.push_back({id, src.student(id)});
                sims.push_back(cosine_similarity(ga, src.teacher(id)));
            }
            return loss_darkrank(tuple.anchor, anchor_student, us, sims, cfg);
        }
    }
    throw ConfigError("unknown loss kind");
}

}  // namespace asymkd
