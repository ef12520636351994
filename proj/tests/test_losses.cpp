#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "asymkd/losses.hpp"
#include "asymkd/models.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace asymkd;
using testsupport::random_vec;

namespace {

LossConfig sym_defaults(LossKind kind) {
    return LossConfig::defaults(kind, SimilarityMode::Symmetric);
}

}  // namespace

TEST_CASE("contrastive values on known instances") {
    const Vec a{1, 0};
    auto cfg = sym_defaults(LossKind::Contrastive);  // m = 0.7

    // P = {[1,0]}, N = {[0,1]}: -1 + [0 - 0.7]+ = -1.
    auto t = loss_contrastive(0, a, std::nullopt, {{1, Vec{1, 0}}}, {{2, Vec{0, 1}}}, cfg);
    CHECK(t.value == doctest::Approx(-1.0).epsilon(1e-12));

    // P = {}, N = {[1,0]}: [1 - 0.7]+ = 0.3.
    t = loss_contrastive(0, a, std::nullopt, {}, {{2, Vec{1, 0}}}, cfg);
    CHECK(t.value == doctest::Approx(0.3).epsilon(1e-12));

    // Hinge inactive everywhere: zero value and exactly zero gradients.
    t = loss_contrastive(0, a, std::nullopt, {}, {{2, Vec{0, 1}}, {3, Vec{-1, 0}}}, cfg);
    CHECK(t.value == 0.0);
    for (const auto& [id, g] : t.grads)
        for (double x : g) CHECK(x == 0.0);
}

TEST_CASE("contrastive is additive across positives and negatives") {
    std::mt19937_64 rng(31);
    const auto cfg = sym_defaults(LossKind::Contrastive);
    const Vec a = random_vec(rng, 6);
    const Participant p1{1, random_vec(rng, 6)}, p2{2, random_vec(rng, 6)};
    const Participant n1{3, random_vec(rng, 6)}, n2{4, random_vec(rng, 6)};
    const double whole = loss_contrastive(0, a, std::nullopt, {p1, p2}, {n1, n2}, cfg).value;
    const double parts = loss_contrastive(0, a, std::nullopt, {p1}, {n1}, cfg).value +
                         loss_contrastive(0, a, std::nullopt, {p2}, {n2}, cfg).value;
    CHECK(whole == doctest::Approx(parts).epsilon(1e-12));
}

TEST_CASE("triplet values on known instances") {
    auto cfg = sym_defaults(LossKind::Triplet);  // m = 0.1
    const Vec a{1, 0};
    auto t = loss_triplet(0, a, {{1, Vec{1, 0}}}, {{2, Vec{0, 1}}}, cfg);
    CHECK(t.value == doctest::Approx(0.0).epsilon(1e-12));

    t = loss_triplet(0, a, {{1, Vec{0, 1}}}, {{2, Vec{1, 0}}}, cfg);
    CHECK(t.value == doctest::Approx(1.1).epsilon(1e-12));

    CHECK_THROWS_AS(loss_triplet(0, a, {}, {{2, Vec{1, 0}}}, cfg), ConfigError);
    CHECK_THROWS_AS(loss_triplet(0, a, {{1, Vec{0, 1}}}, {}, cfg), ConfigError);
}

TEST_CASE("triplet sums over the full P x N grid") {
    std::mt19937_64 rng(32);
    const auto cfg = sym_defaults(LossKind::Triplet);
    const Vec a = random_vec(rng, 5);
    std::vector<Participant> P, N;
    for (int i = 0; i < 2; ++i) P.push_back({1 + i, random_vec(rng, 5)});
    for (int i = 0; i < 5; ++i) N.push_back({10 + i, random_vec(rng, 5)});
    double brute = 0.0;
    for (const auto& p : P)
        for (const auto& n : N) {
            const double h = cosine_similarity(a, n.embedding) -
                             cosine_similarity(a, p.embedding) + cfg.margin;
            if (h > 0.0) brute += h;
        }
    CHECK(loss_triplet(0, a, P, N, cfg).value == doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("triplet is invariant under positive rescaling of one embedding") {
    std::mt19937_64 rng(33);
    const auto cfg = sym_defaults(LossKind::Triplet);
    const Vec a = random_vec(rng, 5);
    std::vector<Participant> P{{1, random_vec(rng, 5)}};
    std::vector<Participant> N{{2, random_vec(rng, 5)}, {3, random_vec(rng, 5)}};
    const double base = loss_triplet(0, a, P, N, cfg).value;
    for (double& x : N[0].embedding) x *= 37.5;
    CHECK(loss_triplet(0, a, P, N, cfg).value == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("multi-similarity values on known instances") {
    auto cfg = sym_defaults(LossKind::MultiSimilarity);  // m = 0.6, alpha = beta = 1
    const Vec a{1, 0};
    const double expected = std::log1p(std::exp(-0.4)) + std::log1p(std::exp(-0.6));
    auto t = loss_multi_similarity(0, a, {{1, Vec{1, 0}}}, {{2, Vec{0, 1}}}, cfg);
    CHECK(t.value == doctest::Approx(expected).epsilon(1e-12));

    CHECK(loss_multi_similarity(0, a, {}, {}, cfg).value == doctest::Approx(0.0).epsilon(1e-12));

    const double one_pos = loss_multi_similarity(0, a, {{1, Vec{1, 1}}}, {}, cfg).value;
    const double two_pos =
        loss_multi_similarity(0, a, {{1, Vec{1, 1}}, {2, Vec{1, 1}}}, {}, cfg).value;
    CHECK(two_pos > one_pos);

    auto bad = cfg;
    bad.alpha = 0.0;
    CHECK_THROWS_AS(loss_multi_similarity(0, a, {}, {}, bad), ConfigError);
}

TEST_CASE("regression values at the extremes") {
    const Vec g{0.6, 0.8};
    CHECK(loss_regression(0, g, g).value == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(loss_regression(0, Vec{0.8, -0.6}, g).value == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(loss_regression(0, Vec{-0.6, -0.8}, g).value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rkd vanishes when the student equals the teacher") {
    std::mt19937_64 rng(34);
    auto cfg = sym_defaults(LossKind::RKD);
    const Vec a = random_vec(rng, 6);
    std::vector<Participant> us;
    std::vector<Vec> ut;
    for (int i = 0; i < 4; ++i) {
        const Vec v = random_vec(rng, 6);
        us.push_back({1 + i, v});
        ut.push_back(v);
    }
    const auto t = loss_rkd(0, a, a, us, ut, cfg);
    CHECK(t.value == doctest::Approx(0.0).epsilon(1e-12));
    for (const auto& [id, g] : t.grads)
        for (double x : g) CHECK(std::abs(x) < 1e-12);
}

TEST_CASE("rkd is blind to a global rotation of the student space") {
    // 2-D rotation by a fixed angle; distances and angles are preserved, and
    // with distance normalization on the distance term is zero as well.
    std::mt19937_64 rng(35);
    auto cfg = sym_defaults(LossKind::RKD);
    const double th = 0.73;
    auto rotate = [&](const Vec& v) {
        return Vec{std::cos(th) * v[0] - std::sin(th) * v[1],
                   std::sin(th) * v[0] + std::cos(th) * v[1]};
    };
    const Vec a = random_vec(rng, 2);
    std::vector<Participant> us;
    std::vector<Vec> ut;
    for (int i = 0; i < 4; ++i) {
        const Vec v = random_vec(rng, 2);
        us.push_back({1 + i, rotate(v)});
        ut.push_back(v);
    }
    const auto t = loss_rkd(0, rotate(a), a, us, ut, cfg);
    CHECK(t.value == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("rkd arity requirements") {
    auto cfg = sym_defaults(LossKind::RKD);
    const Vec a{1.0, 0.0};
    CHECK_THROWS_AS(loss_rkd(0, a, a, {}, {}, cfg), ConfigError);
    CHECK_THROWS_AS(loss_rkd(0, a, a, {{1, Vec{0.0, 1.0}}}, {Vec{0.0, 1.0}}, cfg), ConfigError);
}

TEST_CASE("darkrank values and nonnegativity") {
    auto cfg = sym_defaults(LossKind::DarkRank);
    const Vec a{1, 0};

    // Singleton list: V(x) = {x}, loss identically zero.
    CHECK(loss_darkrank(0, a, {{1, Vec{0.4, 0.3}}}, {0.2}, cfg).value ==
          doctest::Approx(0.0).epsilon(1e-12));

    // Equal teacher similarities: each V contains both elements.
    const Vec x1{1, 1}, x2{0, 1};
    const double s1 = cosine_similarity(a, x1), s2 = cosine_similarity(a, x2);
    const double lse = std::log(std::exp(s1) + std::exp(s2));
    const double expected = -(s1 - lse) - (s2 - lse);
    CHECK(loss_darkrank(0, a, {{1, x1}, {2, x2}}, {0.5, 0.5}, cfg).value ==
          doctest::Approx(expected).epsilon(1e-12));

    // Consistent, widely separated ranking: near zero and decreasing in the gap.
    auto ranked_value = [&](double gap) {
        // Student similarities roughly s, s-gap, s-2*gap matching teacher order.
        std::vector<Participant> us{{1, Vec{1.0, 0.0}},
                                    {2, Vec{std::cos(gap), std::sin(gap)}},
                                    {3, Vec{std::cos(2 * gap), std::sin(2 * gap)}}};
        return loss_darkrank(0, a, us, {0.9, 0.5, 0.1}, cfg).value;
    };
    CHECK(ranked_value(1.4) < ranked_value(0.7));
    CHECK(ranked_value(1.4) > 0.0);

    // Total value >= 0 on random instances because x is in V(a, x).
    std::mt19937_64 rng(36);
    std::uniform_real_distribution<double> sim(-1.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const Vec anchor = random_vec(rng, 4);
        std::vector<Participant> us;
        std::vector<double> ts;
        for (int i = 0; i < 5; ++i) {
            us.push_back({1 + i, random_vec(rng, 4)});
            ts.push_back(sim(rng));
        }
        CHECK(loss_darkrank(0, anchor, us, ts, cfg).value >= -1e-12);
    }

    CHECK_THROWS_AS(loss_darkrank(0, a, {}, {}, cfg), ConfigError);
}

TEST_CASE("equivalence: self-only asymmetric contrastive is regression") {
    std::mt19937_64 rng(37);
    LossConfig cfg = LossConfig::defaults(LossKind::Contrastive, SimilarityMode::Asymmetric);
    cfg.include_self_positive = true;
    cfg.use_positives = false;
    cfg.use_negatives = false;
    for (int trial = 0; trial < 100; ++trial) {
        const Vec f = random_vec(rng, 8);
        const Vec g = random_vec(rng, 8);
        const auto c = loss_contrastive(0, f, g, {}, {}, cfg);
        const auto r = loss_regression(0, f, g);
        CHECK(std::abs(c.value - r.value) <= 1e-12);
        const auto& cg = c.grads.at(0);
        const auto& rg = r.grads.at(0);
        for (size_t i = 0; i < cg.size(); ++i) CHECK(std::abs(cg[i] - rg[i]) <= 1e-12);
    }
}

TEST_CASE("equivalence: identity-measurement rkd is regression") {
    std::mt19937_64 rng(38);
    auto cfg = sym_defaults(LossKind::RKD);
    cfg.rkd.identity_regression = true;
    for (int trial = 0; trial < 100; ++trial) {
        const Vec f = random_vec(rng, 8);
        const Vec g = random_vec(rng, 8);
        const auto rk = loss_rkd(0, f, g, {}, {}, cfg);
        const auto r = loss_regression(0, f, g);
        CHECK(std::abs(rk.value - r.value) <= 1e-12);
    }
}

TEST_CASE("equivalence: symmetric equals asymmetric similarity when the student is the teacher") {
    const StudentModel student(make_default_arch(6, 4), 41);
    std::mt19937_64 rng(42);
    std::unordered_map<int, Vec> inputs;
    std::map<int, Vec> table;
    for (int i = 0; i < 12; ++i) {
        inputs[i] = random_vec(rng, 6);
        table[i] = student.forward(inputs[i]);
    }
    const TeacherModel teacher(std::move(table));
    const EmbeddingSources src{
        [&](int id) { return student.forward(inputs.at(id)); },
        [&](int id) -> const Vec& { return teacher.embed(id); },
    };
    Tuple tuple;
    tuple.anchor = 0;
    tuple.positives = {1, 2};
    tuple.negatives = {3, 4, 5, 6, 7};
    for (LossKind kind : {LossKind::Contrastive, LossKind::Triplet, LossKind::MultiSimilarity}) {
        const double sym =
            evaluate_tuple(tuple, src, LossConfig::defaults(kind, SimilarityMode::Symmetric)).value;
        const double asym =
            evaluate_tuple(tuple, src, LossConfig::defaults(kind, SimilarityMode::Asymmetric)).value;
        CHECK(std::abs(sym - asym) <= 1e-12);
    }
}

TEST_CASE("analytic gradients match finite differences for every loss") {
    std::mt19937_64 rng(43);
    for (LossKind kind :
         {LossKind::Contrastive, LossKind::ContrastivePlus, LossKind::Triplet,
          LossKind::MultiSimilarity, LossKind::Regression, LossKind::RKD, LossKind::DarkRank}) {
        const double tol =
            (kind == LossKind::MultiSimilarity || kind == LossKind::Regression) ? 1e-6 : 1e-5;
        for (int trial = 0; trial < 25; ++trial) {
            auto inst = testsupport::random_instance(kind, rng);
            CHECK(testsupport::grad_check(inst) <= tol);
        }
    }
}

TEST_CASE("batch loss is the sum of per-anchor terms") {
    const StudentModel student(make_default_arch(5, 4), 44);
    std::mt19937_64 rng(45);
    std::unordered_map<int, Vec> inputs;
    std::map<int, Vec> table;
    for (int i = 0; i < 10; ++i) {
        inputs[i] = random_vec(rng, 5);
        table[i] = random_vec(rng, 4);
        double n = norm(table[i]);
        for (double& x : table[i]) x /= n;
    }
    const TeacherModel teacher(std::move(table));
    const EmbeddingSources src{
        [&](int id) { return student.forward(inputs.at(id)); },
        [&](int id) -> const Vec& { return teacher.embed(id); },
    };
    const auto cfg = sym_defaults(LossKind::Contrastive);
    std::vector<Tuple> batch;
    for (int a = 0; a < 3; ++a) {
        Tuple t;
        t.anchor = a;
        t.positives = {(a + 3) % 10};
        t.negatives = {(a + 4) % 10, (a + 5) % 10};
        batch.push_back(t);
    }
    double sum = 0.0, left_to_right = 0.0;
    for (const auto& t : batch) sum += evaluate_tuple(t, src, cfg).value;
    for (const auto& t : batch) left_to_right += evaluate_tuple(t, src, cfg).value;
    CHECK(std::abs(sum - left_to_right) <= 1e-12);
    CHECK(std::isfinite(sum));
}

TEST_CASE("config validation and published defaults") {
    LossConfig bad = LossConfig::defaults(LossKind::Contrastive, SimilarityMode::Symmetric);
    bad.include_self_positive = true;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    LossConfig reg = LossConfig::defaults(LossKind::Regression, SimilarityMode::Symmetric);
    CHECK(reg.mode == SimilarityMode::Asymmetric);

    const auto plus = LossConfig::defaults(LossKind::ContrastivePlus, SimilarityMode::Symmetric);
    CHECK(plus.mode == SimilarityMode::Asymmetric);
    CHECK(plus.include_self_positive);
    CHECK(plus.use_positives);
    CHECK(plus.use_negatives);

    CHECK(LossConfig::defaults(LossKind::Contrastive, SimilarityMode::Symmetric).margin == 0.7);
    CHECK(LossConfig::defaults(LossKind::Triplet, SimilarityMode::Symmetric).margin == 0.1);
    const auto ms = LossConfig::defaults(LossKind::MultiSimilarity, SimilarityMode::Symmetric);
    CHECK(ms.margin == 0.6);
    CHECK(ms.alpha == 1.0);
    CHECK(ms.beta == 1.0);
    const auto rkd = LossConfig::defaults(LossKind::RKD, SimilarityMode::Symmetric);
    CHECK(rkd.rkd.angle_weight == 2.0);
    CHECK(rkd.rkd.distance_weight == 1.0);

    CHECK(published_learning_rate(LossKind::Contrastive, SimilarityMode::Symmetric) == 1e-5);
    CHECK(published_learning_rate(LossKind::Contrastive, SimilarityMode::Asymmetric) == 1e-3);
    CHECK(published_learning_rate(LossKind::Triplet, SimilarityMode::Asymmetric) == 1e-8);
    CHECK(published_learning_rate(LossKind::MultiSimilarity, SimilarityMode::Asymmetric) == 1e-8);
    CHECK(published_learning_rate(LossKind::Regression, SimilarityMode::Asymmetric) == 1e-3);
    CHECK(published_learning_rate(LossKind::RKD, SimilarityMode::Asymmetric) == 1e-2);
    CHECK(published_learning_rate(LossKind::DarkRank, SimilarityMode::Asymmetric) == 1e-6);
}
