#include <cmath>
#include <random>

#include "doctest.h"
#include "surrocal/surrogates.h"
#include "verify.h"

using namespace surrocal;
using namespace surrocal::app;

namespace {

// Golden-section minimizer of the conditional margin risk, the reference for
// the link function.
double argmin_margin_risk(const MarginFns& m, double q, double lo, double hi) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    auto f = [&](double v) { return q * m.Phi(v) + (1.0 - q) * m.Phi(-v); };
    double a = lo, b = hi;
    for (int i = 0; i < 200; ++i) {
        const double c = b - r * (b - a), d = a + r * (b - a);
        if (f(c) < f(d))
            b = d;
        else
            a = c;
    }
    return 0.5 * (a + b);
}

double naive_log_partition(const std::vector<Vec>& phi, const Vec& v) {
    double s = 0.0;
    for (const auto& p : phi) s += std::exp(p.dot(v));
    return std::log(s);
}

}  // namespace

TEST_CASE("margin functions match their textbook forms") {
    const auto lg = margin_functions(MarginKind::Logistic);
    const auto ex = margin_functions(MarginKind::Exponential);
    const auto sq = margin_functions(MarginKind::Square);
    const auto sh = margin_functions(MarginKind::SquaredHinge);
    for (double u : {-2.0, -0.3, 0.0, 0.7, 3.0}) {
        CHECK(lg.Phi(u) == doctest::Approx(std::log1p(std::exp(-u))));
        CHECK(ex.Phi(u) == doctest::Approx(std::exp(-u)));
        CHECK(sq.Phi(u) == doctest::Approx((1.0 - u) * (1.0 - u)));
        CHECK(sh.Phi(u) == doctest::Approx(u < 1.0 ? (1.0 - u) * (1.0 - u) : 0.0));
    }
    CHECK(lg.calibrated);
    CHECK_FALSE(sh.calibrated);
    CHECK_FALSE(margin_functions(MarginKind::ModifiedHuber).calibrated);
}

TEST_CASE("link functions minimize the conditional risk") {
    for (MarginKind k : {MarginKind::Logistic, MarginKind::Exponential, MarginKind::Square}) {
        const auto m = margin_functions(k);
        CAPTURE(margin_name(k));
        for (double q : {0.1, 0.35, 0.5, 0.8, 0.95})
            CHECK(m.link(q) == doctest::Approx(argmin_margin_risk(m, q, -20.0, 20.0)).epsilon(1e-6));
    }
}

TEST_CASE("binary potentials match the known closed forms") {
    const auto lg = margin_functions(MarginKind::Logistic);
    const auto ex = margin_functions(MarginKind::Exponential);
    const auto sq = margin_functions(MarginKind::Square);
    for (double q : {0.1, 0.5, 0.9}) {
        // Negative entropy in nats, -2 sqrt(q(1-q)), -4q(1-q).
        CHECK(lg.h(q) == doctest::Approx(q * std::log(q) + (1 - q) * std::log(1 - q)));
        CHECK(ex.h(q) - ex.h(0.5) == doctest::Approx(1.0 - 2.0 * std::sqrt(q * (1 - q))));
        CHECK(sq.h(q) - sq.h(0.5) == doctest::Approx(1.0 - 4.0 * q * (1 - q)));
    }
}

TEST_CASE("log partition and marginals") {
    const Task t = build_task("multilabel", {{"k", 3}});
    std::mt19937_64 g(1);
    std::normal_distribution<double> n(0.0, 3.0);
    for (int i = 0; i < 50; ++i) {
        Vec v(3);
        for (auto& x : v) x = n(g);
        CHECK(log_partition(t.phi, v) == doctest::Approx(naive_log_partition(t.phi, v)).epsilon(1e-12));
        // Marginals are the gradient of the log partition.
        const Vec mu = marginals(t.phi, v);
        for (int j = 0; j < 3; ++j) {
            Vec a = v, b = v;
            a(j) += 1e-6;
            b(j) -= 1e-6;
            CHECK(mu(j) == doctest::Approx((log_partition(t.phi, a) - log_partition(t.phi, b)) / 2e-6).epsilon(1e-6));
        }
    }
    // Large scores do not overflow.
    CHECK(std::isfinite(log_partition(t.phi, Vec::Constant(3, 800.0))));
}

TEST_CASE("excess surrogate risk equals the Bregman form (property)") {
    for (const auto& s : spec_catalog()) {
        if (!s.phi_calibrated) continue;
        CAPTURE(s.name);
        CAPTURE(s.task.name);
        const auto qs = random_distributions(s.stat.size(), 20, 3);
        const auto vs = random_scores(s, 20, 4);
        for (std::size_t i = 0; i < vs.size(); ++i) {
            const double closed = excess_surrogate_risk(s, vs[i], qs[i]);
            const double numeric = numeric_excess_surrogate_risk(s, vs[i], qs[i]);
            CHECK(closed >= -1e-12);
            CHECK(closed == doctest::Approx(numeric).epsilon(1e-5).scale(1.0));
        }
    }
}

TEST_CASE("gradients, conjugates and duality on the whole catalog") {
    for (const auto& s : spec_catalog()) {
        CAPTURE(s.name);
        CAPTURE(s.task.name);
        CHECK(gradient_check(s, 200, 9) <= 1e-6);
        if (s.potential.legendre) {
            CHECK(conjugate_inverse_check(s, 200, 9) <= 1e-8);
            CHECK(bregman_duality_check(s, 200, 9) <= 1e-8);
        }
        if (s.phi_calibrated) CHECK(strong_convexity_violation(s, 200, 9) <= 1e-12);
    }
}

TEST_CASE("misdeclared modulus is caught") {
    Surrogate s = make_surrogate("logistic", build_task("binary", json::object()));
    CHECK(strong_convexity_violation(s, 500, 2) <= 1e-12);
    s.potential.beta /= 10.0;
    CHECK(strong_convexity_violation(s, 500, 2) > 0.0);
}

TEST_CASE("phi-calibration check and its witnesses") {
    const Task bin = build_task("binary", json::object());
    for (const char* name : {"logistic", "exponential", "square"}) {
        CAPTURE(name);
        CHECK(check_phi_calibration(make_surrogate(name, bin), 200, 1e-8, 5).pass);
    }
    for (const char* name : {"quadratic", "crf"}) {
        CAPTURE(name);
        CHECK(check_phi_calibration(make_surrogate(name, build_task("multiclass", {{"k", 3}})), 200, 1e-8, 5).pass);
    }
    for (const char* name : {"squared_hinge", "modified_huber"}) {
        CAPTURE(name);
        const Surrogate s = make_surrogate(name, bin);
        const CalibrationCheck c = check_phi_calibration(s, 200, 1e-8, 5);
        CHECK_FALSE(c.pass);
        // The witness score has no preimage: it lies outside t(M) = [-1, 1].
        REQUIRE(c.witness_v.size() == 1);
        CHECK(std::abs(c.witness_v(0)) > 1.0);
        CHECK(std::abs(c.witness_excess - c.witness_bregman) > 1e-8);
    }
}

TEST_CASE("recovered potential is the declared one up to an affine term") {
    const Surrogate s = make_surrogate("crf", build_task("ordinal", {{"k", 3}}));
    const auto qs = random_distributions(3, 30, 8);
    const RecoveredPotential r = recover_potential(s, Vec::Zero(s.dim_v), qs);
    CHECK(r.affine_residual <= 1e-8);
}

TEST_CASE("surrogate catalog resolves names and rejects unknown ones") {
    const Task ord = build_task("ordinal", {{"k", 4}});
    CHECK(make_surrogate("at:logistic", ord).dim_v == 3);
    CHECK(make_surrogate("cl", ord).dim_v == 3);
    CHECK_THROWS_AS(make_surrogate("hinge", ord), std::invalid_argument);
    CHECK_THROWS_AS(make_surrogate("cl", build_task("multiclass", {{"k", 3}})), std::invalid_argument);
    CHECK_THROWS_AS(make_surrogate("ova:nope", build_task("multiclass", {{"k", 3}})), std::invalid_argument);
}

TEST_CASE("Fisher consistency on every spec") {
    for (const auto& s : spec_catalog()) {
        if (!s.phi_calibrated) continue;
        CAPTURE(s.name);
        CHECK(fisher_check(s, 200, 4) == 0.0);
    }
}
