#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "surrocal/losses.h"

using namespace surrocal;

namespace {

// Loss values recomputed from first principles, independent of Task::loss.
double ndcg_oracle(const std::vector<int>& sigma, const std::vector<int>& rel) {
    const int m = static_cast<int>(sigma.size());
    auto gain = [](int r) { return std::pow(2.0, r) - 1.0; };
    auto disc = [](int slot) { return 1.0 / std::log2(slot + 2.0); };
    std::vector<int> sorted = rel;
    std::sort(sorted.rbegin(), sorted.rend());
    double ideal = 0.0, dcg = 0.0;
    for (int j = 0; j < m; ++j) {
        ideal += gain(sorted[j]) * disc(j);
        dcg += gain(rel[j]) * disc(sigma[j]);
    }
    return ideal == 0.0 ? 1.0 : 1.0 - dcg / ideal;
}

Vec random_distribution(std::mt19937_64& g, std::size_t n) {
    std::exponential_distribution<double> e(1.0);
    Vec q(static_cast<Eigen::Index>(n));
    for (auto& x : q) x = e(g);
    return q / q.sum();
}

}  // namespace

TEST_CASE("output spaces follow the canonical order") {
    const auto ml = make_space(SpaceKind::Multilabel, 2);
    REQUIRE(ml.size() == 4);
    CHECK(ml.elements[0] == std::vector<int>{1, 1});
    CHECK(ml.elements[1] == std::vector<int>{1, -1});
    CHECK(ml.elements[3] == std::vector<int>{-1, -1});
    CHECK(ml.label(1) == "(1,-1)");

    const auto perm = make_space(SpaceKind::Permutation, 4);
    CHECK(perm.size() == 24);
    for (std::size_t i = 1; i < perm.size(); ++i) CHECK(perm.elements[i - 1] < perm.elements[i]);
    CHECK(perm.index_of({0, 1, 2, 3}) == 0);
    CHECK(perm.index_of({3, 2, 1, 0}) == 23);

    const auto rel = make_space(SpaceKind::Relevance, 3, 3);
    CHECK(rel.size() == 27);
    const auto bin = make_space(SpaceKind::Binary, 1);
    CHECK(bin.elements[0] == std::vector<int>{1});
    CHECK(bin.elements[1] == std::vector<int>{-1});
}

TEST_CASE("loss tables match first-principles formulas") {
    SUBCASE("ordinal is absolute difference") {
        const Task t = build_task("ordinal", {{"k", 5}});
        for (std::size_t z = 0; z < 5; ++z)
            for (std::size_t y = 0; y < 5; ++y) CHECK(t.loss(z, y) == std::abs(double(z) - double(y)));
    }
    SUBCASE("cost-sensitive binary") {
        const Task t = build_task("binary", {{"cost", 0.6}});
        CHECK(t.loss(0, 0) == 0.0);
        CHECK(t.loss(0, 1) == doctest::Approx(0.6));
        CHECK(t.loss(1, 0) == doctest::Approx(1.4));
    }
    SUBCASE("ndcg") {
        const Task t = build_task("ndcg", {{"m", 3}, {"levels", 3}});
        for (std::size_t z = 0; z < t.Z.size(); ++z)
            for (std::size_t y = 0; y < t.Y.size(); ++y)
                CHECK(t.loss(z, y) == doctest::Approx(ndcg_oracle(t.Z.elements[z], t.Y.elements[y])).epsilon(1e-14));
    }
    SUBCASE("matching is the normalized number of misplaced items") {
        const Task t = build_task("matching", {{"m", 3}});
        CHECK(t.loss(t.Z.index_of({0, 1, 2}), t.Y.index_of({1, 0, 2})) == doctest::Approx(2.0 / 3.0));
    }
}

TEST_CASE("decomposition is exact on every task at desk size") {
    const std::vector<std::pair<std::string, json>> tasks = {
        {"multiclass", {{"k", 10}}},
        {"binary", {{"cost", 0.3}}},
        {"multilabel", {{"k", 8}}},
        {"ordinal", {{"k", 10}}},
        {"ordinal", {{"k", 10}, {"embedding", "simplex"}}},
        {"ndcg", {{"m", 4}, {"levels", 3}}},
        {"matching", {{"m", 4}}}};
    for (const auto& [kind, params] : tasks) {
        const Task t = build_task(kind, params);
        CAPTURE(t.name);
        CHECK(decomposition_residual(t) <= 1e-12);
        // Independent recomputation of the residual.
        double worst = 0.0;
        for (std::size_t z = 0; z < t.Z.size(); ++z)
            for (std::size_t y = 0; y < t.Y.size(); ++y)
                worst = std::max(worst, std::abs(t.psi[z].dot(t.phi[y]) + t.c - t.loss(z, y)));
        CHECK(worst <= 1e-12);
    }
}

TEST_CASE("all-zero relevance embeds to the origin") {
    const Task t = build_task("ndcg", {{"m", 3}, {"levels", 2}});
    CHECK(t.phi[t.Y.index_of({0, 0, 0})].norm() == 0.0);
}

TEST_CASE("property: expected loss through moments equals direct expectation") {
    std::mt19937_64 g(123);
    for (const char* kind : {"multilabel", "ordinal", "ndcg", "matching"}) {
        const Task t = build_task(kind, std::string(kind) == "ndcg" ? json{{"m", 3}, {"levels", 2}}
                                                                    : json{{std::string(kind) == "matching" ? "m" : "k", 3}});
        for (int trial = 0; trial < 50; ++trial) {
            const Vec q = random_distribution(g, t.Y.size());
            const Vec u = moment(t, q);
            for (std::size_t z = 0; z < t.Z.size(); ++z) {
                double direct = 0.0;
                for (std::size_t y = 0; y < t.Y.size(); ++y) direct += q(static_cast<Eigen::Index>(y)) * t.loss(z, y);
                CHECK(bayes_risk(t, z, q) == doctest::Approx(direct).epsilon(1e-12));
                CHECK(bayes_risk_at(t, z, u) == doctest::Approx(direct).epsilon(1e-12));
            }
            const std::size_t zs = oracle_prediction(t, u);
            CHECK(excess_bayes_risk(t, zs, q) <= 1e-12);
            for (std::size_t z = 0; z < t.Z.size(); ++z) CHECK(excess_bayes_risk(t, z, q) >= -1e-12);
        }
    }
}

TEST_CASE("oracle breaks ties toward the first output") {
    const Task t = build_task("multiclass", {{"k", 4}});
    Vec u(4);
    u << 0.2, 0.3, 0.3, 0.2;
    CHECK(oracle_prediction(t, u) == 1);
}

TEST_CASE("task parameters are validated") {
    CHECK_THROWS_AS(build_task("multiclass", {{"k", 1}}), std::invalid_argument);
    CHECK_THROWS_AS(build_task("multiclass", {{"q", 3}}), std::invalid_argument);
    CHECK_THROWS_AS(build_task("unknown", json::object()), std::invalid_argument);
    CHECK_THROWS_AS(build_task("binary", {{"cost", 2.5}}), std::invalid_argument);
    CHECK_THROWS_AS(build_task("ndcg", {{"m", 3}, {"levels", 2}, {"gain", {1.0, 0.5}}}), std::invalid_argument);
}

TEST_CASE("task json round trip") {
    const Task t = build_task("ordinal", {{"k", 5}, {"embedding", "simplex"}});
    const Task u = task_from_json(task_to_json(t));
    CHECK(u.name == t.name);
    CHECK(u.ordinal == OrdinalEmbedding::Simplex);
    CHECK(task_to_json(u) == task_to_json(t));
}
