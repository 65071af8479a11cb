#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "surrocal/calibration.h"
#include "surrocal/learning.h"

using namespace surrocal;

TEST_CASE("seed splitting is deterministic and separates streams") {
    CHECK(split_seed(7, 1) == split_seed(7, 1));
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 0; s < 100; ++s) seen.insert(split_seed(42, s));
    CHECK(seen.size() == 100);
    CHECK(split_seed(1, 2) != split_seed(2, 1));
}

TEST_CASE("kernels") {
    KernelSpec g;
    g.bandwidth = 2.0;
    Vec a(2), b(2);
    a << 0.0, 0.0;
    b << 1.0, 1.0;
    CHECK(g(a, b) == doctest::Approx(std::exp(-2.0 / 8.0)));
    CHECK(g(a, a) == 1.0);
    const KernelSpec lin = linear_kernel(3);
    CHECK(lin.kappa == doctest::Approx(std::sqrt(3.0)));
    std::vector<Vec> xs;
    Rng r(3);
    for (int i = 0; i < 30; ++i) xs.push_back(Vec::Random(2));
    const Mat K = gram_matrix(g, xs);
    CHECK((K - K.transpose()).norm() == 0.0);
    CHECK(Eigen::SelfAdjointEigenSolver<Mat>(K).eigenvalues().minCoeff() > -1e-10);
}

TEST_CASE("synthetic conditionals are distributions and sampling is reproducible") {
    for (const char* fam : {"smooth_logit", "mixture", "hard_margin"}) {
        const SyntheticTask syn =
            make_synthetic(build_task("multiclass", {{"k", 4}}), family_from_name(fam), 2, 11, 0.4);
        Rng r(5);
        for (int i = 0; i < 100; ++i) {
            const Vec q = syn.conditional(syn.sample_x(r));
            CHECK(is_distribution(q));
            if (std::string(fam) == "hard_margin") CHECK(bayes_margin(syn.task, q) >= 0.4 - 1e-9);
        }
        const auto a = syn.sample(50, 3), b = syn.sample(50, 3);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].y == b[i].y);
            CHECK(a[i].x == b[i].x);
        }
    }
    CHECK_THROWS_AS(family_from_name("nope"), std::invalid_argument);
}

TEST_CASE("kernel ridge regression against a direct solve") {
    const Task t = build_task("multiclass", {{"k", 3}});
    const SyntheticTask syn = make_synthetic(t, SyntheticFamily::SmoothLogit, 2, 4);
    const auto data = syn.sample(60, 1);
    const double lambda = 1e-2;
    const KrrModel m = krr_train(data, syn.kernel, lambda);
    std::vector<Vec> xs;
    for (const auto& s : data) xs.push_back(s.x);
    Mat A = gram_matrix(syn.kernel, xs) + 60.0 * lambda * Mat::Identity(60, 60);
    Rng r(9);
    for (int i = 0; i < 20; ++i) {
        const Vec x = syn.sample_x(r);
        Vec kx(60);
        for (int j = 0; j < 60; ++j) kx(j) = syn.kernel(xs[j], x);
        const Vec ref = A.fullPivLu().solve(kx);
        CHECK((m.alpha(x) - ref).lpNorm<Eigen::Infinity>() <= 1e-9 * (1.0 + ref.lpNorm<Eigen::Infinity>()));
    }
    CHECK_THROWS_AS(krr_train(data, syn.kernel, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(krr_train({}, syn.kernel, 1.0), std::invalid_argument);
}

TEST_CASE("both prediction paths agree on every task") {
    const std::vector<std::pair<std::string, json>> tasks = {
        {"multiclass", {{"k", 5}}}, {"binary", {{"cost", 0.7}}}, {"multilabel", {{"k", 3}}},
        {"ordinal", {{"k", 5}}},    {"ndcg", {{"m", 3}, {"levels", 2}}}, {"matching", {{"m", 3}}}};
    for (const auto& [kind, params] : tasks) {
        const Task t = build_task(kind, params);
        const SyntheticTask syn = make_synthetic(t, SyntheticFamily::SmoothLogit, 2, 6);
        const KrrModel m = krr_train(syn.sample(80, 1), syn.kernel, 1e-3);
        Rng r(2);
        for (int i = 0; i < 100; ++i) {
            const KrrPrediction p = krr_predict(t, m, syn.sample_x(r));
            CAPTURE(t.name);
            CHECK(p.agree);
            CHECK(p.max_score_gap <= 1e-10);
        }
    }
}

TEST_CASE("asgd keeps its bookkeeping exact and stays in the ball") {
    const Task t = build_task("multiclass", {{"k", 3}});
    const Surrogate s = make_surrogate("crf", t);
    const SyntheticTask syn = make_synthetic(t, SyntheticFamily::SmoothLogit, 2, 2);
    const auto data = syn.sample(300, 1);
    AsgdOptions opt;
    opt.radius = 2.0;
    const AsgdResult r = asgd_train(s, data, syn.kernel, opt);
    CHECK(r.average.rkhs_norm_sq == doctest::Approx(r.average.recompute_norm_sq()).epsilon(1e-9));
    CHECK(std::sqrt(r.average.rkhs_norm_sq) <= 2.0 + 1e-9);
    CHECK(r.cap_violations == 0);
    CHECK(r.max_gradient_norm <= r.gradient_cap);
    const double beta = s.potential.beta, kappa = syn.kernel.kappa, C2 = r.C * r.C;
    CHECK(r.step == doctest::Approx(2.0 / (beta * kappa * kappa * C2 * std::sqrt(300.0))));
    CHECK_FALSE(r.trace.empty());
    // Reruns are bit-identical.
    const AsgdResult again = asgd_train(s, data, syn.kernel, opt);
    CHECK(again.average.coeffs == r.average.coeffs);
    // Non-canonical surrogates are refused.
    CHECK_THROWS(asgd_train(make_surrogate("ova:exponential", t), data, syn.kernel, opt));
}

TEST_CASE("risk evaluation of the Bayes score is zero and worker independent") {
    const Task t = build_task("multiclass", {{"k", 3}});
    const Surrogate s = make_surrogate("crf", t);
    const SyntheticTask syn = make_synthetic(t, SyntheticFamily::SmoothLogit, 2, 3);
    Rng r(1);
    std::vector<Vec> xs;
    for (int i = 0; i < 200; ++i) xs.push_back(syn.sample_x(r));
    auto bayes = [&](const Vec& x) { return optimal_score(s, syn.conditional(x)); };
    const RiskEstimate e1 = evaluate_risks(s, bayes, syn, xs, 1);
    const RiskEstimate e3 = evaluate_risks(s, bayes, syn, xs, 3);
    CHECK(e1.true_excess == 0.0);
    CHECK(e1.surrogate_excess <= 1e-10);
    CHECK(e1.surrogate_excess == e3.surrogate_excess);
    auto zero = [&](const Vec&) { return Vec::Zero(3).eval(); };
    const RiskEstimate z1 = evaluate_risks(s, zero, syn, xs, 1);
    const RiskEstimate z3 = evaluate_risks(s, zero, syn, xs, 3);
    CHECK(z1.true_excess == z3.true_excess);
    CHECK(z1.surrogate_excess_se == z3.surrogate_excess_se);
}

TEST_CASE("hard-margin certificate implies Bayes-optimal predictions (property)") {
    const Task t = build_task("multiclass", {{"k", 3}});
    const Surrogate s = make_surrogate("crf", t);
    const SyntheticTask syn = make_synthetic(t, SyntheticFamily::HardMargin, 2, 4, 0.4);
    const double threshold = best_known_zeta(s)(0.4);
    Rng r(8);
    std::vector<Vec> scores, qs;
    for (int i = 0; i < 300; ++i) {
        const Vec q = syn.conditional(syn.sample_x(r));
        Vec v = optimal_score(s, q);
        for (auto& c : v) c += 0.05 * r.normal();
        scores.push_back(v);
        qs.push_back(q);
    }
    const MarginCertificate c = hard_margin_certificate(s, scores, qs, threshold);
    if (c.certified) CHECK(c.predictions_match);
    // Pointwise: each certified point is predicted optimally.
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (excess_surrogate_risk(s, scores[i], qs[i]) < threshold)
            CHECK(hard_margin_certificate(s, {scores[i]}, {qs[i]}, threshold).predictions_match);
}

TEST_CASE("dataset CSV round trip keeps structured labels") {
    for (const char* kind : {"multilabel", "matching"}) {
        const Task t = build_task(kind, {{std::string(kind) == "matching" ? "m" : "k", 3}});
        const SyntheticTask syn = make_synthetic(t, SyntheticFamily::SmoothLogit, 2, 1);
        const auto data = syn.sample(20, 1);
        std::stringstream io;
        write_dataset_csv(io, t, data);
        const auto back = read_dataset_csv(io, t);
        REQUIRE(back.size() == data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            CHECK(back[i].y == data[i].y);
            CHECK(back[i].x == data[i].x);
        }
    }
}
