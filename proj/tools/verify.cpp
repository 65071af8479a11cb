#include "verify.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "config.h"
#include "surrocal/decoding.h"
#include "surrocal/geometry.h"

namespace surrocal::app {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double tagged_norm(const Vec& x, NormTag tag) { return tag == NormTag::L1 ? x.lpNorm<1>() : x.norm(); }

Task task(const std::string& kind, const json& params) { return build_task(kind, params); }

void add(VerifyReport& r, const std::string& module, const std::string& name, bool pass, double residual,
         const std::string& detail = "") {
    r.results.push_back({module, name, pass, residual, detail});
}

std::size_t decode_scores(const Surrogate& s, const Vec& v) {
    return oracle_prediction(s.task, s.to_task(s.link.inverse(v)));
}

}  // namespace

std::vector<Task> desk_tasks() {
    return {task("multiclass", {{"k", 10}}), task("binary", {{"cost", 0.7}}), task("multilabel", {{"k", 8}}),
            task("ordinal", {{"k", 10}}),    task("ordinal", {{"k", 10}, {"embedding", "simplex"}}),
            task("ndcg", {{"m", 4}, {"levels", 3}}), task("matching", {{"m", 4}})};
}

std::vector<Surrogate> spec_catalog() {
    std::vector<Surrogate> out;
    const Task binary = task("binary", json::object());
    for (const char* m : {"logistic", "exponential", "square", "squared_hinge", "modified_huber"})
        out.push_back(make_surrogate(m, binary));
    out.push_back(make_surrogate("logistic", task("binary", {{"cost", 0.6}})));
    const Task mc = task("multiclass", {{"k", 4}});
    for (const char* m : {"ova:logistic", "ova:exponential", "ova:square", "quadratic", "crf"})
        out.push_back(make_surrogate(m, mc));
    const Task ml = task("multilabel", {{"k", 3}});
    for (const char* m : {"indep:logistic", "indep:exponential", "indep:square", "quadratic", "crf"})
        out.push_back(make_surrogate(m, ml));
    const Task ord = task("ordinal", {{"k", 4}});
    for (const char* m : {"at:logistic", "at:exponential", "at:square", "cl", "quadratic", "crf"})
        out.push_back(make_surrogate(m, ord));
    const Task ords = task("ordinal", {{"k", 4}, {"embedding", "simplex"}});
    for (const char* m : {"cl", "quadratic", "crf"}) out.push_back(make_surrogate(m, ords));
    const Task nd = task("ndcg", {{"m", 3}, {"levels", 2}});
    for (const char* m : {"quadratic", "crf"}) out.push_back(make_surrogate(m, nd));
    const Task mt = task("matching", {{"m", 3}});
    for (const char* m : {"quadratic", "crf"}) out.push_back(make_surrogate(m, mt));
    return out;
}

std::vector<Vec> random_distributions(std::size_t labels, int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Vec> out;
    for (int i = 0; i < n; ++i) {
        Vec q(static_cast<Eigen::Index>(labels));
        for (auto& x : q) x = -std::log(1.0 - rng.uniform());
        q /= q.sum();
        out.push_back((1.0 - 1e-3) * q + Vec::Constant(q.size(), 1e-3 / static_cast<double>(labels)));
    }
    return out;
}

std::vector<Vec> interior_moments(const Surrogate& s, int n, std::uint64_t seed) {
    std::vector<Vec> out;
    for (const auto& q : random_distributions(s.stat.size(), n, seed)) out.push_back(surrogate_moment(s, q));
    return out;
}

std::vector<Vec> random_scores(const Surrogate& s, int n, std::uint64_t seed) {
    Rng rng(split_seed(seed, 7));
    const auto mus = interior_moments(s, n, seed);
    std::vector<Vec> out;
    for (const auto& mu : mus) {
        Vec v = s.link.forward(mu);
        for (auto& x : v) x += 0.5 * rng.normal();
        if (!s.in_V(v)) std::sort(v.data(), v.data() + v.size());
        if (s.in_V(v)) out.push_back(v);
    }
    return out;
}

double gradient_check(const Surrogate& s, int samples, std::uint64_t seed) {
    Rng rng(split_seed(seed, 11));
    double worst = 0.0;
    for (const auto& v : random_scores(s, samples, seed)) {
        const std::size_t y = rng.index(s.stat.size());
        const Vec g = s.grad(v, y);
        Vec fd(v.size());
        bool ok = true;
        for (Eigen::Index j = 0; j < v.size(); ++j) {
            // The stencil stays 1e4 steps inside V, so truncation error is
            // small next to the curvature scale set by the boundary.
            double h = 1e-5 * std::max(1.0, std::abs(v(j)));
            auto inside = [&](double r) {
                Vec a = v, b = v;
                a(j) += r;
                b(j) -= r;
                return s.in_V(a) && s.in_V(b);
            };
            while (h > 1e-13 && !inside(1e4 * h)) h *= 0.5;
            if (!inside(1e4 * h)) {
                ok = false;
                break;
            }
            Vec a = v, b = v;
            a(j) += h;
            b(j) -= h;
            fd(j) = (s.eval(a, y) - s.eval(b, y)) / (2.0 * h);
        }
        if (!ok) continue;
        worst = std::max(worst, (g - fd).lpNorm<Eigen::Infinity>() / std::max(1.0, g.lpNorm<Eigen::Infinity>()));
    }
    return worst;
}

double conjugate_inverse_check(const Surrogate& s, int samples, std::uint64_t seed) {
    double worst = 0.0;
    for (const auto& u : interior_moments(s, samples, seed))
        worst = std::max(worst, (s.potential.grad_h_star(s.potential.grad_h(u)) - u).lpNorm<Eigen::Infinity>());
    return worst;
}

double bregman_duality_check(const Surrogate& s, int samples, std::uint64_t seed) {
    const auto us = interior_moments(s, samples + 1, seed);
    const Potential& p = s.potential;
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < us.size(); ++i) {
        const Vec& u = us[i];
        const Vec& u2 = us[i + 1];
        const Vec w = p.grad_h(u), w2 = p.grad_h(u2);
        const double primal = bregman(p, u, u2);
        const double dual = p.h_star(w2) - p.h_star(w) - (w2 - w).dot(p.grad_h_star(w));
        worst = std::max(worst, std::abs(primal - dual));
    }
    return worst;
}

double strong_convexity_violation(const Surrogate& s, int samples, std::uint64_t seed) {
    const auto us = interior_moments(s, samples + 1, seed);
    const Potential& p = s.potential;
    double worst = -kInf;
    for (std::size_t i = 0; i + 1 < us.size(); ++i) {
        const double n = tagged_norm(us[i] - us[i + 1], p.norm);
        worst = std::max(worst, n * n / (2.0 * p.beta) - bregman(p, us[i], us[i + 1]));
    }
    return worst;
}

double fisher_check(const Surrogate& s, int samples, std::uint64_t seed) {
    double worst = 0.0;
    for (const auto& q : random_distributions(s.stat.size(), samples, seed)) {
        const Vec v = s.link.forward(surrogate_moment(s, q));
        worst = std::max(worst, excess_bayes_risk(s.task, decode_scores(s, v), q));
    }
    return worst;
}

InequalityCheck calibration_inequality_check(const Surrogate& s, const std::function<double(double)>& zeta,
                                             int samples, std::uint64_t seed, double tol) {
    InequalityCheck r;
    r.worst = -kInf;
    const auto vs = random_scores(s, samples, seed);
    const auto qs = random_distributions(s.stat.size(), samples, split_seed(seed, 3));
    for (std::size_t i = 0; i < vs.size(); ++i) {
        const double ds = excess_surrogate_risk(s, vs[i], qs[i]);
        const double dl = excess_bayes_risk(s.task, decode_scores(s, vs[i]), qs[i]);
        const double gap = zeta(dl) - ds;
        r.worst = std::max(r.worst, gap);
        r.violations += gap > tol;
        ++r.samples;
    }
    return r;
}

bool VerifyReport::all_pass() const {
    return std::all_of(results.begin(), results.end(), [](const InvariantResult& r) { return r.pass; });
}

json VerifyReport::to_json() const {
    json j;
    j["suite"] = suite;
    j["seed"] = seed;
    j["all_pass"] = all_pass();
    json rows = json::array();
    for (const auto& r : results) {
        json row = {{"module", r.module}, {"name", r.name}, {"pass", r.pass}};
        row["residual"] = std::isfinite(r.residual) ? json(r.residual) : json(r.residual > 0 ? "inf" : "-inf");
        if (!r.detail.empty()) row["detail"] = r.detail;
        rows.push_back(row);
    }
    j["results"] = rows;
    return j;
}

VerifyReport run_verify(const std::string& suite, std::uint64_t seed, int workers) {
    if (suite != "fast" && suite != "full") throw std::invalid_argument("suite must be 'fast' or 'full'");
    const bool full = suite == "full";
    const int n = full ? 1000 : 100;
    VerifyReport rep;
    rep.suite = suite;
    rep.seed = seed;
    std::uint64_t stream = 0;
    auto next = [&]() { return split_seed(seed, ++stream); };

    // losses
    for (const auto& t : desk_tasks()) {
        const double r = decomposition_residual(t);
        add(rep, "losses", "decomposition:" + t.name, r <= 1e-12, r);
    }

    // decoding
    for (const auto& t : desk_tasks()) {
        Rng rng(next());
        std::size_t mismatches = 0;
        for (int i = 0; i < n; ++i) {
            Vec u(t.dim);
            // Half of the draws are rounded to force ties.
            for (auto& x : u) x = i % 2 ? rng.normal() : std::round(2.0 * rng.normal()) / 2.0;
            mismatches += decode_fast(t, u) != oracle_prediction(t, u);
        }
        add(rep, "decoding", "fast_decoder_matches_oracle:" + t.name, mismatches == 0, static_cast<double>(mismatches));
    }
    {
        Rng rng(next());
        std::size_t mismatches = 0;
        for (int i = 0; i < n; ++i) {
            const int m = 2 + static_cast<int>(rng.index(4));
            Mat c(m, m);
            for (auto& x : c.reshaped()) x = i % 2 ? rng.normal() : std::round(3.0 * rng.uniform());
            mismatches += linear_assignment(c) != assignment_by_enumeration(c);
        }
        add(rep, "decoding", "assignment_matches_enumeration", mismatches == 0, static_cast<double>(mismatches));
    }

    // geometry
    {
        const bool mc_flat = !polytope_of(task("multiclass", {{"k", 4}})).full_dimensional();
        const bool ml_full = polytope_of(task("multilabel", {{"k", 3}})).full_dimensional();
        add(rep, "geometry", "polytope_dimension", mc_flat && ml_full, 0.0);
        const Task t = task("ordinal", {{"k", 4}});
        std::size_t bad = 0;
        Rng rng(next());
        for (const auto& q : random_distributions(t.Y.size(), n, next())) {
            const std::size_t z = rng.index(t.Z.size());
            const double eps = 0.5 * rng.uniform();
            const Vec u = moment(t, q);
            bad += in_calibration_set(t, u, z, eps) != (excess_bayes_risk(t, z, q) <= eps + 1e-12);
        }
        add(rep, "geometry", "calibration_set_membership", bad == 0, static_cast<double>(bad));
    }

    // surrogates
    for (const auto& s : spec_catalog()) {
        const std::string tag = s.name + "@" + s.task.name;
        const double g = gradient_check(s, n, next());
        add(rep, "surrogates", "gradient:" + tag, g <= 1e-6, g);
        const double sc = strong_convexity_violation(s, n, next());
        add(rep, "surrogates", "strong_convexity:" + tag, sc <= 1e-12, sc);
        if (s.potential.legendre) {
            const double ci = conjugate_inverse_check(s, n, next());
            add(rep, "surrogates", "conjugate_inverse:" + tag, ci <= 1e-8, ci);
            const double bd = bregman_duality_check(s, n, next());
            add(rep, "surrogates", "bregman_duality:" + tag, bd <= 1e-8, bd);
        }
        const CalibrationCheck cc = check_phi_calibration(s, full ? 200 : 40, 1e-6, next());
        const bool expect = s.phi_calibrated;
        add(rep, "surrogates", std::string(expect ? "phi_calibrated:" : "non_calibration_witness:") + tag,
            cc.pass == expect, cc.max_residual);
    }
    {
        Surrogate tampered = make_surrogate("logistic", task("binary", json::object()));
        tampered.potential.beta /= 10.0;
        const double sc = strong_convexity_violation(tampered, n, next());
        add(rep, "surrogates", "fault_injection_detected:beta_div_10", sc > 1e-12, sc);
    }

    // calibration
    for (const auto& s : spec_catalog()) {
        const std::string tag = s.name + "@" + s.task.name;
        const double f = fisher_check(s, n, next());
        add(rep, "calibration", "fisher_consistency:" + tag, f == 0.0, f);
        if (!s.phi_calibrated) continue;
        const InequalityCheck ic = calibration_inequality_check(s, best_known_zeta(s), full ? 10000 : n, next());
        add(rep, "calibration", "calibration_inequality:" + tag, ic.violations == 0, ic.worst);
    }
    {
        const Surrogate s = make_surrogate("logistic", task("binary", json::object()));
        std::vector<double> eps = {0.1, 0.5, 0.9};
        if (full)
            eps = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
        GridSpec g;
        g.workers = workers;
        const BruteForceReport b = calib_brute_force_curve(s, eps, g);
        double worst = 0.0;
        for (const auto& p : b.points) worst = std::max(worst, std::abs(p.value - *calib_exact(s, p.epsilon)));
        add(rep, "calibration", "binary_exact_vs_brute_force", worst <= 2e-3, worst);
        const double ln = std::abs(low_noise_transform([](double e) { return e * e / 8.0; }, {1.0, 1.0, {}}, 0.3) -
                                   std::pow(0.3, 1.5) / 32.0);
        add(rep, "calibration", "low_noise_transform_p1", ln <= 1e-12, ln);
    }

    // learning
    {
        const Task t = task("multiclass", {{"k", 3}});
        const SyntheticTask syn = make_synthetic(t, SyntheticFamily::SmoothLogit, 2, next());
        const auto data = syn.sample(full ? 400 : 100, 1);
        const KrrModel m = krr_train(data, syn.kernel, 1e-3);
        Rng rng(next());
        std::size_t disagree = 0;
        double gap = 0.0;
        for (int i = 0; i < n; ++i) {
            const KrrPrediction p = krr_predict(t, m, syn.sample_x(rng));
            disagree += !p.agree;
            gap = std::max(gap, p.max_score_gap);
        }
        add(rep, "learning", "krr_path_agreement", disagree == 0 && gap <= 1e-10, gap);

        const Surrogate crf = make_surrogate("crf", t);
        AsgdOptions opt;
        opt.radius = 0.5;
        const AsgdResult r = asgd_train(crf, syn.sample(200, 2), syn.kernel, opt);
        const double norm_gap = std::abs(r.average.rkhs_norm_sq - r.average.recompute_norm_sq());
        add(rep, "learning", "asgd_norm_bookkeeping", norm_gap <= 1e-8, norm_gap);
        add(rep, "learning", "asgd_gradient_cap", r.cap_violations == 0, r.max_gradient_norm - r.gradient_cap);
        add(rep, "learning", "asgd_average_in_ball", r.average.rkhs_norm_sq <= 0.25 * (1.0 + 1e-9),
            std::sqrt(r.average.rkhs_norm_sq));
    }

    // cli
    {
        ExperimentConfig c;
        c.task_kind = "ordinal";
        c.task_params = {{"k", 5}};
        c.surrogate = "at:logistic";
        c.calib.epsilons = {0.1, 0.2};
        c.train.radius = 2.0;
        const json once = config_to_json(c);
        const json twice = config_to_json(config_from_json(once));
        add(rep, "cli", "config_round_trip", once == twice, 0.0);
    }
    return rep;
}

}  // namespace surrocal::app
