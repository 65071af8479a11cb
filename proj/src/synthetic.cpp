#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "surrocal/learning.h"

namespace surrocal {

namespace {

constexpr int kCenters = 8;
constexpr double kWeightScale = 1.5;
constexpr std::size_t kPilot = 256;

FunctionEstimate random_expansion(const KernelSpec& k, int d, int out_dim, Rng& rng, double scale) {
    FunctionEstimate f;
    f.kernel = k;
    for (int c = 0; c < kCenters; ++c) {
        Vec x(d);
        for (int j = 0; j < d; ++j) x(j) = -1.0 + 2.0 * rng.uniform();
        f.anchors.push_back(x);
    }
    f.coeffs.resize(kCenters, out_dim);
    for (int c = 0; c < kCenters; ++c)
        for (int j = 0; j < out_dim; ++j) f.coeffs(c, j) = scale * rng.normal();
    f.rkhs_norm_sq = f.recompute_norm_sq();
    return f;
}

// q(y) proportional to exp <phi(y), theta>.
Vec exp_family(const Task& task, const Vec& theta) {
    Vec s(static_cast<Eigen::Index>(task.Y.size()));
    for (std::size_t y = 0; y < task.Y.size(); ++y) s(static_cast<Eigen::Index>(y)) = task.phi[y].dot(theta);
    s = (s.array() - s.maxCoeff()).exp();
    return s / s.sum();
}

}  // namespace

SyntheticFamily family_from_name(const std::string& name) {
    if (name == "smooth_logit") return SyntheticFamily::SmoothLogit;
    if (name == "hard_margin") return SyntheticFamily::HardMargin;
    if (name == "mixture") return SyntheticFamily::Mixture;
    throw std::invalid_argument("unknown synthetic family '" + name + "' (smooth_logit, hard_margin, mixture)");
}

std::string family_name(SyntheticFamily f) {
    switch (f) {
        case SyntheticFamily::SmoothLogit: return "smooth_logit";
        case SyntheticFamily::HardMargin: return "hard_margin";
        case SyntheticFamily::Mixture: return "mixture";
    }
    return "";
}

double bayes_margin(const Task& task, const Vec& q) {
    const Vec u = moment(task, q);
    double best = std::numeric_limits<double>::infinity(), second = best;
    for (const auto& p : task.psi) {
        const double r = p.dot(u);
        if (r < best) {
            second = best;
            best = r;
        } else if (r < second) {
            second = r;
        }
    }
    return second - best;
}

Vec SyntheticTask::sample_x(Rng& rng) const {
    Vec x(d);
    for (int j = 0; j < d; ++j) x(j) = -1.0 + 2.0 * rng.uniform();
    return x;
}

Vec SyntheticTask::conditional(const Vec& x) const {
    Vec q = exp_family(task, g_star(x));
    if (family == SyntheticFamily::Mixture) {
        const double w = 1.0 / (1.0 + std::exp(-mix_gate(x)(0)));
        q = w * q + (1.0 - w) * exp_family(task, g_alt(x));
    }
    if (family != SyntheticFamily::HardMargin || bayes_margin(task, q) >= margin) return q;
    // Mix toward the reachable anchor whose output is cheapest under q until the margin holds.
    std::size_t target = task.Z.size();
    double cheapest = std::numeric_limits<double>::infinity();
    for (std::size_t z = 0; z < task.Z.size(); ++z) {
        if (anchor_outputs[z].size() == 0) continue;
        const double e = excess_bayes_risk(task, z, q);
        if (e < cheapest) {
            cheapest = e;
            target = z;
        }
    }
    const Vec& p = anchor_outputs[target];
    auto ok = [&](double lam) {
        const Vec m = (1.0 - lam) * q + lam * p;
        return oracle_prediction(task, moment(task, m)) == target && bayes_margin(task, m) >= margin;
    };
    double lo = 0.0, hi = 1.0;
    for (int g = 1; g <= 64; ++g) {
        if (ok(g / 64.0)) {
            hi = g / 64.0;
            break;
        }
        lo = g / 64.0;
    }
    for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        (ok(mid) ? hi : lo) = mid;
    }
    return (1.0 - hi) * q + hi * p;
}

std::vector<Sample> SyntheticTask::sample(std::size_t n, std::uint64_t stream) const {
    Rng rng(split_seed(seed, stream));
    std::vector<Sample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Sample s;
        s.x = sample_x(rng);
        s.y = rng.categorical(conditional(s.x));
        out.push_back(std::move(s));
    }
    return out;
}

SyntheticTask make_synthetic(const Task& task, SyntheticFamily family, int d, std::uint64_t seed, double margin) {
    if (d < 1) throw std::invalid_argument("synthetic: input dimension must be positive");
    SyntheticTask t;
    t.task = task;
    t.family = family;
    t.d = d;
    t.seed = seed;
    t.margin = family == SyntheticFamily::HardMargin ? margin : 0.0;

    Rng pilot(split_seed(seed, 1));
    std::vector<Vec> xs;
    for (std::size_t i = 0; i < kPilot; ++i) xs.push_back(t.sample_x(pilot));
    t.kernel = median_heuristic_kernel(xs);

    Rng rng(split_seed(seed, 2));
    t.g_star = random_expansion(t.kernel, d, task.dim, rng, kWeightScale);
    if (family == SyntheticFamily::Mixture) {
        t.g_alt = random_expansion(t.kernel, d, task.dim, rng, kWeightScale);
        t.mix_gate = random_expansion(t.kernel, d, 1, rng, 2.0 * kWeightScale);
    }
    if (family == SyntheticFamily::HardMargin) {
        if (!(margin > 0.0)) throw std::invalid_argument("synthetic: hard margin must be positive");
        t.anchor_outputs.assign(task.Z.size(), Vec());
        bool any = false;
        for (std::size_t y = 0; y < task.Y.size(); ++y) {
            Vec e = Vec::Zero(static_cast<Eigen::Index>(task.Y.size()));
            e(static_cast<Eigen::Index>(y)) = 1.0;
            const std::size_t z = oracle_prediction(task, moment(task, e));
            const double gam = bayes_margin(task, e);
            if (gam >= margin && (t.anchor_outputs[z].size() == 0 || gam > bayes_margin(task, t.anchor_outputs[z]))) {
                t.anchor_outputs[z] = e;
                any = true;
            }
        }
        if (!any) throw std::invalid_argument("synthetic: no label distribution reaches the requested margin");
    }
    return t;
}

}  // namespace surrocal
