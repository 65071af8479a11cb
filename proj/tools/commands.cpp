#include "commands.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "surrocal/csv.h"
#include "surrocal/decoding.h"

namespace surrocal::app {

namespace {

double max_task_excess(const Task& t) {
    double e = 0.0;
    for (std::size_t y = 0; y < t.Y.size(); ++y) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t z = 0; z < t.Z.size(); ++z) {
            lo = std::min(lo, t.loss(z, y));
            hi = std::max(hi, t.loss(z, y));
        }
        e = std::max(e, hi - lo);
    }
    return e;
}

std::string catalog_text() {
    std::string s;
    for (const auto& n : surrogate_catalog()) s += (s.empty() ? "" : ", ") + n;
    return s;
}

json finite_or_string(double x) { return std::isfinite(x) ? json(x) : json(format_double(x)); }

CalibrationCurve curve(CurveMethod m, const std::string& variant, const Surrogate& s, const std::vector<double>& eps) {
    CalibrationCurve c;
    c.method = m;
    c.variant = variant;
    c.task = s.task.name;
    c.surrogate = s.name;
    c.epsilons = eps;
    c.values.assign(eps.size(), 0.0);
    return c;
}

std::vector<CalibrationCurve> bound_curves(const Surrogate& s, const std::vector<double>& eps) {
    std::vector<CalibrationCurve> out;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const auto bounds = applicable_lower_bounds(s, eps[i]);
        if (out.empty())
            for (const auto& b : bounds) out.push_back(curve(CurveMethod::LowerBound, b.name, s, eps));
        for (std::size_t k = 0; k < bounds.size() && k < out.size(); ++k) out[k].values[i] = bounds[k].value;
    }
    return out;
}

}  // namespace

std::vector<double> default_epsilons(const Task& task) {
    const double top = max_task_excess(task);
    std::vector<double> eps;
    for (int i = 1; i <= 19; ++i)
        if (0.05 * i <= top + 1e-12) eps.push_back(0.05 * i);
    return eps;
}

Surrogate surrogate_or_usage_error(const std::string& name, const Task& task) {
    try {
        return make_surrogate(name, task);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string(e.what()) + "; available surrogates: " + catalog_text());
    }
}

void write_text(const std::string& dir, const std::string& file, const std::string& content) {
    std::filesystem::create_directories(dir);
    std::ofstream out(std::filesystem::path(dir) / file, std::ios::binary);
    if (!out) throw std::invalid_argument("cannot write '" + file + "' in '" + dir + "'");
    out << content;
}

json list_catalog() {
    json j;
    j["tasks"] = task_kinds();
    j["surrogates"] = surrogate_catalog();
    j["margins"] = {"logistic", "exponential", "square", "squared_hinge", "modified_huber"};
    j["synthetic_families"] = {"smooth_logit", "hard_margin", "mixture"};
    return j;
}

json run_calib(const ExperimentConfig& cfg, const RunContext& ctx) {
    const Task task = build_task(cfg.task_kind, cfg.task_params);
    const Surrogate s = surrogate_or_usage_error(cfg.surrogate, task);
    const std::vector<double> eps = cfg.calib.epsilons.empty() ? default_epsilons(task) : cfg.calib.epsilons;
    if (eps.empty()) throw std::invalid_argument("calib: no epsilons");
    for (std::size_t i = 0; i < eps.size(); ++i)
        if (!(eps[i] > 0.0) || (i && eps[i] <= eps[i - 1]))
            throw std::invalid_argument("calib: epsilons must be positive and increasing");
    auto wants = [&](const char* m) {
        return std::find(cfg.calib.methods.begin(), cfg.calib.methods.end(), m) != cfg.calib.methods.end();
    };

    json summary;
    summary["task"] = task_to_json(task);
    summary["surrogate"] = s.name;
    summary["epsilons"] = eps;
    std::vector<CalibrationCurve> curves;
    json notes = json::array();

    std::optional<CalibrationCurve> exact;
    if (wants("exact")) {
        CalibrationCurve c = curve(CurveMethod::Exact, "", s, eps);
        bool all = true;
        for (std::size_t i = 0; i < eps.size(); ++i) {
            const auto v = calib_exact(s, eps[i]);
            all = all && v.has_value();
            c.values[i] = v.value_or(std::numeric_limits<double>::quiet_NaN());
        }
        if (all) {
            exact = c;
            curves.push_back(c);
        } else {
            notes.push_back("exact: no closed form for every requested epsilon");
        }
    }
    std::vector<CalibrationCurve> bounds;
    if (wants("lower_bound")) {
        bounds = bound_curves(s, eps);
        if (bounds.empty()) notes.push_back("lower_bound: surrogate is not phi-calibrated");
        curves.insert(curves.end(), bounds.begin(), bounds.end());
    }
    std::optional<CalibrationCurve> brute;
    if (wants("brute_force") || wants("envelope")) {
        GridSpec g = cfg.calib.grid;
        g.workers = ctx.workers;
        const BruteForceReport rep = calib_brute_force_curve(s, eps, g);
        CalibrationCurve c = curve(CurveMethod::BruteForce, "", s, eps);
        for (std::size_t i = 0; i < eps.size(); ++i) c.values[i] = rep.points[i].value;
        brute = c;
        if (wants("brute_force")) curves.push_back(c);
        summary["brute_force"] = {{"distributions", rep.distributions},
                                  {"moments", rep.moments},
                                  {"scores", rep.scores},
                                  {"q_step", rep.q_step},
                                  {"max_polish_gain", rep.max_polish_gain}};
    }
    if (wants("envelope")) {
        const CalibrationCurve& base = exact ? *exact : *brute;
        CalibrationCurve env = convex_envelope(base, true);
        env.variant = exact ? "exact" : "brute_force";
        curves.push_back(env);
    }
    if (wants("low_noise")) {
        const auto zeta = best_known_zeta(s);
        CalibrationCurve c = curve(CurveMethod::LowNoise, "p=" + format_double(cfg.calib.noise.p), s, eps);
        for (std::size_t i = 0; i < eps.size(); ++i) c.values[i] = low_noise_transform(zeta, cfg.calib.noise, eps[i]);
        curves.push_back(c);
    }

    json agreement;
    if (exact && brute) {
        double worst = 0.0;
        for (std::size_t i = 0; i < eps.size(); ++i) worst = std::max(worst, std::abs(exact->values[i] - brute->values[i]));
        agreement["max_abs_exact_minus_brute"] = worst;
    }
    if (brute && !bounds.empty()) {
        double worst = -std::numeric_limits<double>::infinity();
        for (const auto& b : bounds)
            for (std::size_t i = 0; i < eps.size(); ++i)
                if (std::isfinite(brute->values[i])) worst = std::max(worst, b.values[i] - brute->values[i]);
        agreement["max_lower_bound_minus_brute"] = finite_or_string(worst);
    }
    if (brute) agreement["small_eps_slope"] = quadratic_upper_check(*brute).slope;
    summary["agreement"] = agreement;

    if (!cfg.calib.compare_surrogate.empty()) {
        const Surrogate other = surrogate_or_usage_error(cfg.calib.compare_surrogate, task);
        const auto other_bounds = bound_curves(other, eps);
        curves.insert(curves.end(), other_bounds.begin(), other_bounds.end());
        // Compare the tightest bound of each surrogate pointwise.
        auto best = [&](const std::vector<CalibrationCurve>& cs, std::size_t i) {
            double b = 0.0;
            for (const auto& c : cs) b = std::max(b, c.values[i]);
            return b;
        };
        const auto mine = bounds.empty() ? bound_curves(s, eps) : bounds;
        bool dominates = !mine.empty() && !other_bounds.empty();
        json pts = json::array();
        for (std::size_t i = 0; i < eps.size(); ++i) {
            const double a = best(mine, i), b = best(other_bounds, i);
            dominates = dominates && a >= b;
            pts.push_back({{"epsilon", eps[i]}, {s.name, a}, {other.name, b}});
        }
        summary["comparison"] = {{"surrogate", other.name}, {"first_dominates", dominates}, {"points", pts}};
    }
    summary["notes"] = notes;

    std::ostringstream csv;
    write_curves_csv(csv, curves);
    write_text(ctx.out_dir, "curves.csv", csv.str());
    write_text(ctx.out_dir, "calib_summary.json", summary.dump(2) + "\n");
    return summary;
}

double default_radius(const Surrogate& s, const SyntheticTask& syn, const KernelSpec& kernel, std::uint64_t seed) {
    const bool same_kernel = kernel.kind == syn.kernel.kind && kernel.bandwidth == syn.kernel.bandwidth;
    if (s.name == "crf" && same_kernel && syn.family == SyntheticFamily::SmoothLogit)
        return 1.5 * std::sqrt(syn.g_star.rkhs_norm_sq);
    // Ridge fit of x -> t(mu(q(x))) on a pilot sample.
    Rng rng(split_seed(seed, 77));
    std::vector<Vec> xs;
    Mat targets(256, s.dim_v);
    for (int i = 0; i < 256; ++i) {
        xs.push_back(syn.sample_x(rng));
        targets.row(i) = optimal_score(s, syn.conditional(xs.back())).transpose();
    }
    Mat K = gram_matrix(kernel, xs);
    Mat A = K;
    A.diagonal().array() += 256.0 * 1e-3;
    const Mat coef = A.llt().solve(targets);
    return 1.5 * std::sqrt(std::max(0.0, (coef.transpose() * K * coef).trace()));
}

json run_train(const ExperimentConfig& cfg, const RunContext& ctx) {
    const Task task = build_task(cfg.task_kind, cfg.task_params);
    const TrainConfig& tc = cfg.train;
    if (tc.n.empty()) throw std::invalid_argument("train: n list is empty");
    for (long long n : tc.n)
        if (n < 1) throw std::invalid_argument("train: n must be at least 1");
    const bool krr = tc.method == "krr";
    const Surrogate s = surrogate_or_usage_error(krr ? "quadratic" : cfg.surrogate, task);
    if (!krr && !s.canonical)
        throw std::invalid_argument("train: asgd needs a Legendre-type surrogate (quadratic, crf, logistic, ova:logistic)");

    const SyntheticTask syn = make_synthetic(task, family_from_name(tc.family), tc.d, ctx.seed, tc.margin);
    KernelSpec kernel = tc.kernel == "linear" ? linear_kernel(tc.d) : syn.kernel;
    if (tc.bandwidth && tc.kernel == "gaussian") kernel.bandwidth = *tc.bandwidth;

    Rng eval_rng(split_seed(ctx.seed, 100));
    std::vector<Vec> eval_x;
    for (int i = 0; i < tc.eval_points; ++i) eval_x.push_back(syn.sample_x(eval_rng));

    json summary;
    summary["task"] = task_to_json(task);
    summary["surrogate"] = s.name;
    summary["method"] = tc.method;
    summary["family"] = family_name(syn.family);
    summary["kernel"] = {{"kind", tc.kernel}, {"bandwidth", kernel.bandwidth}, {"kappa", kernel.kappa}};
    json rows = json::array();
    bool pass = true;

    if (krr) {
        for (long long n : tc.n) {
            double true_ex = 0.0, sur_ex = 0.0, gap = 0.0;
            std::size_t disagree = 0;
            for (int seed = 0; seed < tc.seeds; ++seed) {
                const auto data = syn.sample(static_cast<std::size_t>(n), 1000003ULL * (seed + 1) + n);
                const KrrModel m = krr_train(data, kernel, tc.lambda);
                double te = 0.0;
                for (const auto& x : eval_x) {
                    const KrrPrediction p = krr_predict(task, m, x);
                    disagree += !p.agree;
                    gap = std::max(gap, p.max_score_gap);
                    te += excess_bayes_risk(task, p.z_enumeration, syn.conditional(x));
                }
                true_ex += te / eval_x.size();
                auto score = [&](const Vec& x) {
                    const Vec a = m.alpha(x);
                    Vec u = Vec::Zero(task.dim);
                    for (std::size_t i = 0; i < m.ys.size(); ++i) u += a(static_cast<Eigen::Index>(i)) * task.phi[m.ys[i]];
                    return u;
                };
                sur_ex += evaluate_risks(s, score, syn, eval_x, ctx.workers).surrogate_excess;
            }
            const bool agree = disagree == 0 && gap <= 1e-10;
            pass = pass && agree;
            rows.push_back({{"n", n},
                            {"seeds", tc.seeds},
                            {"surrogate_excess", sur_ex / tc.seeds},
                            {"true_excess", true_ex / tc.seeds},
                            {"path_disagreements", disagree},
                            {"max_score_gap", gap},
                            {"paths_agree", agree}});
        }
    } else {
        const double D = tc.radius ? *tc.radius : default_radius(s, syn, kernel, ctx.seed);
        summary["radius"] = D;
        const auto zeta = best_known_zeta(s);
        const double eps_max = max_task_excess(task);
        double prev = std::numeric_limits<double>::infinity();
        for (long long n : tc.n) {
            std::vector<double> sur, tru;
            std::size_t cap = 0;
            double max_grad = 0.0, grad_cap = 0.0;
            for (int seed = 0; seed < tc.seeds; ++seed) {
                const auto data = syn.sample(static_cast<std::size_t>(n), 1000003ULL * (seed + 1) + n);
                AsgdOptions opt;
                opt.radius = D;
                const AsgdResult r = asgd_train(s, data, kernel, opt);
                if (seed == 0) {
                    std::ostringstream t;
                    write_trace_csv(t, r.trace);
                    write_text(ctx.out_dir, "trace_n" + std::to_string(n) + ".csv", t.str());
                }
                const RiskEstimate e =
                    evaluate_risks(s, [&](const Vec& x) { return r.average(x); }, syn, eval_x, ctx.workers);
                sur.push_back(e.surrogate_excess);
                tru.push_back(e.true_excess);
                cap += r.cap_violations;
                max_grad = std::max(max_grad, r.max_gradient_norm);
                grad_cap = r.gradient_cap;
            }
            auto mean = [](const std::vector<double>& x) {
                double m = 0.0;
                for (double v : x) m += v;
                return m / static_cast<double>(x.size());
            };
            const double ms = mean(sur), mt = mean(tru);
            const double bound = asgd_bound(s, kernel, D, static_cast<std::size_t>(n));
            const InvertedBound inv = risk_bound_invert(zeta, eps_max, ms);
            const bool ok = mt <= bound && mt <= prev + 1e-12 && cap == 0;
            pass = pass && ok;
            prev = mt;
            rows.push_back({{"n", n},
                            {"seeds", tc.seeds},
                            {"surrogate_excess", ms},
                            {"true_excess", mt},
                            {"excess_bound", bound},
                            {"risk_bound_inverted", inv.epsilon},
                            {"risk_bound_saturated", inv.saturated},
                            {"gradient_cap", grad_cap},
                            {"max_gradient_norm", max_grad},
                            {"cap_violations", cap}});
        }
    }
    summary["results"] = rows;
    summary["pass"] = pass;
    write_text(ctx.out_dir, "risks.json", summary.dump(2) + "\n");
    return summary;
}

}  // namespace surrocal::app
