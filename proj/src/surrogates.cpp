#include "surrocal/surrogates.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace surrocal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kProbClamp = 1e-12;
constexpr double kNewtonRidge = 1e-10;
constexpr double kNewtonTol = 1e-10;
constexpr int kNewtonMaxIter = 200;
constexpr double kArmijo = 1e-4;

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double logit(double q) {
    q = std::clamp(q, kProbClamp, 1.0 - kProbClamp);
    return std::log(q) - std::log1p(-q);
}

Mat stack_columns(const std::vector<Vec>& cols) {
    Mat m(cols.front().size(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = cols[i];
    return m;
}

bool affinely_independent(const std::vector<Vec>& pts) {
    if (pts.size() == 1) return true;
    Mat d(pts.front().size(), static_cast<Eigen::Index>(pts.size() - 1));
    for (std::size_t i = 1; i < pts.size(); ++i) d.col(static_cast<Eigen::Index>(i - 1)) = pts[i] - pts[0];
    if (d.rows() < d.cols()) return false;
    Eigen::JacobiSVD<Mat> svd(d);
    const auto& s = svd.singularValues();
    return s(s.size() - 1) > 1e-9 * s(0);
}

// Newton solve of grad h*(theta) = u for the log-partition of `phi`.
Vec moment_match(const std::vector<Vec>& phi, const Vec& u, double* residual) {
    const Eigen::Index d = u.size();
    Vec theta = Vec::Zero(d);
    auto objective = [&](const Vec& th) { return log_partition(phi, th) - u.dot(th); };
    double f = objective(theta);
    Vec g = marginals(phi, theta) - u;
    for (int it = 0; it < kNewtonMaxIter && g.norm() > kNewtonTol; ++it) {
        Mat H = marginal_covariance(phi, theta);
        H.diagonal().array() += kNewtonRidge;
        const Vec step = H.ldlt().solve(g);
        double t = 1.0;
        bool moved = false;
        for (int bt = 0; bt < 60; ++bt) {
            const Vec cand = theta - t * step;
            const double fc = objective(cand);
            const Vec gc = marginals(phi, cand) - u;
            if (fc <= f - kArmijo * t * g.dot(step) || gc.norm() < g.norm()) {
                theta = cand;
                f = fc;
                g = gc;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (!moved) break;
    }
    if (residual) *residual = g.norm();
    return theta;
}

Vec isotonic_increasing(const Vec& x) {
    // Pool-adjacent-violators with unit weights.
    std::vector<double> level;
    std::vector<int> count;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        level.push_back(x(i));
        count.push_back(1);
        while (level.size() > 1 && level[level.size() - 2] > level.back()) {
            const double merged = (level[level.size() - 2] * count[count.size() - 2] + level.back() * count.back()) /
                                  (count[count.size() - 2] + count.back());
            const int c = count[count.size() - 2] + count.back();
            level.pop_back();
            count.pop_back();
            level.back() = merged;
            count.back() = c;
        }
    }
    Vec out(x.size());
    Eigen::Index pos = 0;
    for (std::size_t b = 0; b < level.size(); ++b)
        for (int j = 0; j < count[b]; ++j) out(pos++) = level[b];
    return out;
}

// Difference sigma(a) - sigma(b) without cancellation for a > b.
double sigmoid_gap(double a, double b) { return -std::expm1(b - a) * sigmoid(a) * sigmoid(-b); }

Potential negentropy_simplex(int k) {
    Potential p;
    p.name = "negentropy";
    p.dim = k;
    p.h = [](const Vec& u) {
        if ((u.array() < 0.0).any()) return kInf;
        double s = 0.0;
        for (Eigen::Index i = 0; i < u.size(); ++i) s += xlogx(u(i));
        return s;
    };
    p.grad_h = [](const Vec& u) { return Vec(u.array().log() + 1.0); };
    p.h_star = [](const Vec& w) {
        const double m = w.maxCoeff();
        return m + std::log((w.array() - m).exp().sum());
    };
    p.grad_h_star = [](const Vec& w) {
        const Vec e = (w.array() - w.maxCoeff()).exp();
        return Vec(e / e.sum());
    };
    p.interior = [](const Vec& u) { return (u.array() > 0.0).all() && std::abs(u.sum() - 1.0) < 1e-9; };
    p.domain = {DomainKind::Simplex, 0.0, 1.0};
    p.beta = 1.0;
    p.norm = NormTag::L1;
    p.legendre = true;
    return p;
}

std::vector<Vec> scalar_stats(std::initializer_list<double> vals) {
    std::vector<Vec> out;
    for (double v : vals) out.push_back(Vec::Constant(1, v));
    return out;
}

// Sum of binary margin losses over coordinates. The sign of coordinate j
// for label y is stat[y](j) when pm, 2*stat[y](j)-1 otherwise.
Surrogate separable_margin(MarginKind kind, const Task& task, std::vector<Vec> stat, bool pm, Mat J, Vec b,
                           std::string name) {
    const MarginFns m = margin_functions(kind);
    const int d = static_cast<int>(stat.front().size());
    Surrogate s;
    s.name = std::move(name);
    s.dim_v = d;
    s.task = task;
    s.margin = kind;
    s.separable_pm = pm ? 1 : 0;
    s.J = std::move(J);
    s.b = std::move(b);

    std::vector<Vec> signs;
    for (const auto& st : stat) signs.push_back(pm ? st : Vec(2.0 * st.array() - 1.0));
    s.stat = std::move(stat);

    s.eval = [m, signs](const Vec& v, std::size_t y) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < v.size(); ++j) acc += m.Phi(signs[y](j) * v(j));
        return acc;
    };
    s.grad = [m, signs](const Vec& v, std::size_t y) {
        Vec g(v.size());
        for (Eigen::Index j = 0; j < v.size(); ++j) g(j) = signs[y](j) * m.dPhi(signs[y](j) * v(j));
        return g;
    };
    s.in_V = [](const Vec& v) { return v.allFinite(); };

    const double scale = pm ? 0.5 : 1.0;
    auto to_q = [pm](double u) { return pm ? 0.5 * (u + 1.0) : u; };
    Potential& p = s.potential;
    p.name = "separable_" + margin_name(kind);
    p.dim = d;
    p.h = [m, to_q](const Vec& u) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < u.size(); ++j) acc += m.h(to_q(u(j)));
        return acc;
    };
    p.grad_h = [m, to_q, scale](const Vec& u) {
        Vec g(u.size());
        for (Eigen::Index j = 0; j < u.size(); ++j) g(j) = scale * m.dh(to_q(u(j)));
        return g;
    };
    p.h_star = [m, pm](const Vec& w) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < w.size(); ++j) acc += pm ? m.h_star(2.0 * w(j)) - w(j) : m.h_star(w(j));
        return acc;
    };
    p.grad_h_star = [m, pm](const Vec& w) {
        Vec g(w.size());
        for (Eigen::Index j = 0; j < w.size(); ++j) g(j) = pm ? 2.0 * m.dh_star(2.0 * w(j)) - 1.0 : m.dh_star(w(j));
        return g;
    };
    const bool full = m.full_line;
    p.interior = [to_q, full](const Vec& u) {
        if (full) return u.allFinite();
        for (Eigen::Index j = 0; j < u.size(); ++j) {
            const double q = to_q(u(j));
            if (!(q > 0.0 && q < 1.0)) return false;
        }
        return true;
    };
    if (full)
        p.domain = {DomainKind::FullSpace, 0.0, 0.0};
    else
        p.domain = {DomainKind::Box, pm ? -1.0 : 0.0, 1.0};
    p.beta = m.beta / (scale * scale);
    p.norm = NormTag::L2;
    p.legendre = m.legendre;

    s.link.forward = [m, to_q](const Vec& u) {
        Vec v(u.size());
        for (Eigen::Index j = 0; j < u.size(); ++j) v(j) = m.link(to_q(u(j)));
        return v;
    };
    s.link.inverse = [m, pm](const Vec& v) {
        Vec u(v.size());
        for (Eigen::Index j = 0; j < v.size(); ++j) {
            const double q = m.link_inv(v(j));
            u(j) = pm ? 2.0 * q - 1.0 : q;
        }
        return u;
    };
    s.link.image = m.full_line || kind == MarginKind::Logistic || kind == MarginKind::Exponential ? "R^d" : "[-1,1]^d";
    s.phi_calibrated = m.calibrated;
    s.canonical = kind == MarginKind::Logistic && !pm;
    return s;
}

}  // namespace

std::string Domain::describe() const {
    switch (kind) {
        case DomainKind::FullSpace: return "full space";
        case DomainKind::Box: return "box [" + std::to_string(lo) + "," + std::to_string(hi) + "]";
        case DomainKind::Simplex: return "simplex";
        case DomainKind::MarginalPolytope: return "marginal polytope";
    }
    return "";
}

double bregman(const Potential& pot, const Vec& u1, const Vec& u) {
    if (pot.legendre && !pot.interior(u))
        throw std::domain_error("bregman: second argument must lie in the interior of the domain");
    return pot.h(u1) - pot.h(u) - (u1 - u).dot(pot.grad_h(u));
}

double log_partition(const std::vector<Vec>& phi, const Vec& v) {
    double m = -kInf;
    std::vector<double> s(phi.size());
    for (std::size_t y = 0; y < phi.size(); ++y) {
        s[y] = phi[y].dot(v);
        m = std::max(m, s[y]);
    }
    double acc = 0.0;
    for (double x : s) acc += std::exp(x - m);
    return m + std::log(acc);
}

Vec marginals(const std::vector<Vec>& phi, const Vec& v) {
    double m = -kInf;
    std::vector<double> s(phi.size());
    for (std::size_t y = 0; y < phi.size(); ++y) {
        s[y] = phi[y].dot(v);
        m = std::max(m, s[y]);
    }
    double z = 0.0;
    for (double& x : s) z += (x = std::exp(x - m));
    Vec mu = Vec::Zero(v.size());
    for (std::size_t y = 0; y < phi.size(); ++y) mu.noalias() += (s[y] / z) * phi[y];
    return mu;
}

Mat marginal_covariance(const std::vector<Vec>& phi, const Vec& v) {
    double m = -kInf;
    std::vector<double> s(phi.size());
    for (std::size_t y = 0; y < phi.size(); ++y) {
        s[y] = phi[y].dot(v);
        m = std::max(m, s[y]);
    }
    double z = 0.0;
    for (double& x : s) z += (x = std::exp(x - m));
    Vec mu = Vec::Zero(v.size());
    Mat second = Mat::Zero(v.size(), v.size());
    for (std::size_t y = 0; y < phi.size(); ++y) {
        const double p = s[y] / z;
        mu.noalias() += p * phi[y];
        second.noalias() += p * phi[y] * phi[y].transpose();
    }
    return second - mu * mu.transpose();
}

Surrogate make_quadratic(const Task& task) {
    Surrogate s;
    s.name = "quadratic";
    s.dim_v = task.dim;
    s.task = task;
    s.stat = task.phi;
    s.J = Mat::Identity(task.dim, task.dim);
    s.b = Vec::Zero(task.dim);
    const auto phi = task.phi;
    s.eval = [phi](const Vec& v, std::size_t y) { return 0.5 * (v - phi[y]).squaredNorm(); };
    s.grad = [phi](const Vec& v, std::size_t y) { return Vec(v - phi[y]); };
    s.in_V = [](const Vec& v) { return v.allFinite(); };
    Potential& p = s.potential;
    p.name = "half_squared_norm";
    p.dim = task.dim;
    p.h = [](const Vec& u) { return 0.5 * u.squaredNorm(); };
    p.grad_h = [](const Vec& u) { return u; };
    p.h_star = [](const Vec& w) { return 0.5 * w.squaredNorm(); };
    p.grad_h_star = [](const Vec& w) { return w; };
    p.interior = [](const Vec& u) { return u.allFinite(); };
    p.domain = {DomainKind::FullSpace, 0.0, 0.0};
    p.beta = 1.0;
    p.norm = NormTag::L2;
    p.legendre = true;
    s.link.forward = [](const Vec& u) { return u; };
    s.link.inverse = [](const Vec& v) { return v; };
    s.link.image = "R^d";
    s.phi_calibrated = true;
    s.canonical = true;
    return s;
}

Surrogate make_crf(const Task& task) {
    Surrogate s;
    s.name = "crf";
    s.dim_v = task.dim;
    s.task = task;
    s.stat = task.phi;
    s.J = Mat::Identity(task.dim, task.dim);
    s.b = Vec::Zero(task.dim);
    const auto phi = task.phi;
    s.eval = [phi](const Vec& v, std::size_t y) { return log_partition(phi, v) - v.dot(phi[y]); };
    s.grad = [phi](const Vec& v, std::size_t y) { return Vec(marginals(phi, v) - phi[y]); };
    s.in_V = [](const Vec& v) { return v.allFinite(); };

    Potential& p = s.potential;
    p.name = "crf_negentropy";
    p.dim = task.dim;
    const bool simplex_like = affinely_independent(phi);
    Mat A;
    if (simplex_like) {
        A.resize(task.dim + 1, static_cast<Eigen::Index>(phi.size()));
        A.topRows(task.dim) = stack_columns(phi);
        A.row(task.dim).setOnes();
    }
    auto barycentric = [A](const Vec& u) {
        Vec rhs(u.size() + 1);
        rhs << u, 1.0;
        return Vec(A.colPivHouseholderQr().solve(rhs));
    };
    p.h = [phi, simplex_like, barycentric](const Vec& u) {
        if (simplex_like) {
            const Vec q = barycentric(u);
            double acc = 0.0;
            for (Eigen::Index i = 0; i < q.size(); ++i) {
                if (q(i) < -1e-9) return kInf;
                acc += xlogx(std::max(q(i), 0.0));
            }
            return acc;
        }
        double res = 0.0;
        const Vec theta = moment_match(phi, u, &res);
        if (res > 1e-6) return kInf;
        return u.dot(theta) - log_partition(phi, theta);
    };
    p.grad_h = [phi](const Vec& u) {
        double res = 0.0;
        Vec theta = moment_match(phi, u, &res);
        if (res > 1e-6) throw std::domain_error("crf: moment vector outside the relative interior");
        return theta;
    };
    p.h_star = [phi](const Vec& w) { return log_partition(phi, w); };
    p.grad_h_star = [phi](const Vec& w) { return marginals(phi, w); };
    p.interior = [phi](const Vec& u) {
        double res = 0.0;
        moment_match(phi, u, &res);
        return res <= 1e-8;
    };
    p.domain = {DomainKind::MarginalPolytope, 0.0, 0.0};
    double beta = 0.0;
    for (const auto& f : phi) beta = std::max(beta, f.squaredNorm());
    p.beta = beta;
    p.norm = NormTag::L2;
    p.legendre = true;

    s.link.forward = p.grad_h;
    s.link.inverse = p.grad_h_star;
    s.link.image = "R^d";
    s.phi_calibrated = true;
    s.canonical = true;
    return s;
}

Surrogate make_margin(MarginKind kind, const Task& task) {
    if (task.kind != TaskKind::CostSensitive) throw std::invalid_argument("margin losses need the binary task");
    Mat J(2, 1);
    J << 1.0, -1.0;
    Vec b(2);
    b << 0.0, 1.0;
    return separable_margin(kind, task, scalar_stats({1.0, 0.0}), false, J, b, margin_name(kind));
}

Surrogate make_one_vs_all(MarginKind kind, const Task& task) {
    if (task.kind != TaskKind::ZeroOne) throw std::invalid_argument("one-vs-all needs the multiclass task");
    const int k = task.dim;
    return separable_margin(kind, task, task.phi, false, Mat::Identity(k, k), Vec::Zero(k), "ova:" + margin_name(kind));
}

Surrogate make_independent_classifiers(MarginKind kind, const Task& task) {
    if (task.kind != TaskKind::Hamming) throw std::invalid_argument("independent classifiers need the multilabel task");
    const int k = task.dim;
    return separable_margin(kind, task, task.phi, true, Mat::Identity(k, k), Vec::Zero(k), "indep:" + margin_name(kind));
}

Surrogate make_at(MarginKind kind, const Task& task) {
    if (task.kind != TaskKind::Ordinal || task.ordinal != OrdinalEmbedding::Cumulative)
        throw std::invalid_argument("all-thresholds needs the ordinal task with cumulative embedding");
    const int d = task.dim;
    return separable_margin(kind, task, task.phi, true, Mat::Identity(d, d), Vec::Zero(d), "at:" + margin_name(kind));
}

Surrogate make_cl(const Task& task) {
    if (task.kind != TaskKind::Ordinal) throw std::invalid_argument("cumulative link needs an ordinal task");
    const int k = static_cast<int>(task.Y.size());
    Surrogate s;
    s.name = "cl";
    s.dim_v = k - 1;
    s.task = task;
    for (int y = 0; y < k; ++y) {
        Vec e = Vec::Zero(k);
        e(y) = 1.0;
        s.stat.push_back(e);
    }
    s.J = stack_columns(task.phi);
    s.b = Vec::Zero(task.dim);

    auto increasing = [](const Vec& v) {
        if (!v.allFinite()) return false;
        for (Eigen::Index j = 1; j < v.size(); ++j)
            if (!(v(j) > v(j - 1))) return false;
        return true;
    };
    s.in_V = increasing;
    s.eval = [k, increasing](const Vec& v, std::size_t yi) {
        if (!increasing(v)) return kInf;
        const int y = static_cast<int>(yi);
        if (y == 0) return -std::log(sigmoid(v(0)));
        if (y == k - 1) return -std::log(sigmoid(-v(k - 2)));
        return -std::log(sigmoid_gap(v(y), v(y - 1)));
    };
    s.grad = [k](const Vec& v, std::size_t yi) {
        const int y = static_cast<int>(yi);
        Vec g = Vec::Zero(k - 1);
        if (y == 0) {
            g(0) = -sigmoid(-v(0));
        } else if (y == k - 1) {
            g(k - 2) = sigmoid(v(k - 2));
        } else {
            const double gap = sigmoid_gap(v(y), v(y - 1));
            const double fa = sigmoid(v(y)), fb = sigmoid(v(y - 1));
            g(y) = -fa * (1.0 - fa) / gap;
            g(y - 1) = fb * (1.0 - fb) / gap;
        }
        return g;
    };
    s.potential = negentropy_simplex(k);
    s.link.forward = [k](const Vec& q) {
        Vec v(k - 1);
        double cum = 0.0;
        for (int j = 0; j < k - 1; ++j) {
            cum += q(j);
            v(j) = logit(cum);
        }
        return v;
    };
    s.link.inverse = [k](const Vec& v) {
        Vec f(k - 1);
        for (int j = 0; j < k - 1; ++j) f(j) = sigmoid(v(j));
        bool monotone = true;
        for (int j = 1; j < k - 1; ++j) monotone = monotone && f(j) >= f(j - 1);
        if (!monotone) f = isotonic_increasing(f);
        Vec q(k);
        q(0) = f(0);
        for (int j = 1; j < k - 1; ++j) q(j) = monotone ? sigmoid_gap(v(j), v(j - 1)) : f(j) - f(j - 1);
        q(k - 1) = sigmoid(-v(k - 2));
        if (!monotone) q(k - 1) = 1.0 - f(k - 2);
        return q;
    };
    s.link.image = "increasing vectors of R^(k-1)";
    s.phi_calibrated = true;
    s.canonical = false;
    return s;
}

std::vector<std::string> surrogate_catalog() {
    return {"quadratic",      "crf",           "logistic",    "exponential",   "square",
            "squared_hinge",  "modified_huber", "ova:<margin>", "indep:<margin>", "at:<margin>",
            "cl"};
}

Surrogate make_surrogate(const std::string& name, const Task& task) {
    if (name == "quadratic") return make_quadratic(task);
    if (name == "crf") return make_crf(task);
    if (name == "cl") return make_cl(task);
    const auto colon = name.find(':');
    if (colon != std::string::npos) {
        const std::string family = name.substr(0, colon);
        const MarginKind m = margin_from_name(name.substr(colon + 1));
        if (family == "ova") return make_one_vs_all(m, task);
        if (family == "indep") return make_independent_classifiers(m, task);
        if (family == "at") return make_at(m, task);
        throw std::invalid_argument("unknown surrogate family '" + family + "'");
    }
    return make_margin(margin_from_name(name), task);
}

Vec surrogate_moment(const Surrogate& s, const Vec& q) {
    Vec mu = Vec::Zero(s.stat.front().size());
    for (std::size_t y = 0; y < s.stat.size(); ++y)
        if (q(y) != 0.0) mu.noalias() += q(y) * s.stat[y];
    return mu;
}

double surrogate_risk(const Surrogate& s, const Vec& v, const Vec& q) {
    double acc = 0.0;
    for (std::size_t y = 0; y < s.stat.size(); ++y)
        if (q(y) != 0.0) acc += q(y) * s.eval(v, y);
    return acc;
}

namespace {

Vec risk_gradient(const Surrogate& s, const Vec& v, const Vec& q) {
    Vec g = Vec::Zero(v.size());
    for (std::size_t y = 0; y < s.stat.size(); ++y)
        if (q(y) != 0.0) g.noalias() += q(y) * s.grad(v, y);
    return g;
}

}  // namespace

MinimizeResult minimize_surrogate_risk(const Surrogate& s, const Vec& q, const Vec& start, double tol, int max_iter) {
    MinimizeResult r;
    r.v = start;
    r.value = surrogate_risk(s, r.v, q);
    if (!std::isfinite(r.value)) throw std::domain_error("minimize_surrogate_risk: start point outside V");
    Vec g = risk_gradient(s, r.v, q);
    double step = 1.0;
    Vec prev_v, prev_g;
    for (r.iterations = 0; r.iterations < max_iter; ++r.iterations) {
        const double gn2 = g.squaredNorm();
        if (std::sqrt(gn2) <= tol) break;
        if (prev_v.size()) {
            // Barzilai-Borwein trial step, then Armijo backtracking.
            const Vec ds = r.v - prev_v, dg = g - prev_g;
            const double sy = ds.dot(dg);
            if (sy > 0.0) step = ds.squaredNorm() / sy;
        }
        double t = step;
        bool accepted = false;
        for (int bt = 0; bt < 80; ++bt) {
            const Vec cand = r.v - t * g;
            const double fc = surrogate_risk(s, cand, q);
            if (std::isfinite(fc) && fc <= r.value - kArmijo * t * gn2) {
                prev_v = r.v;
                prev_g = g;
                r.v = cand;
                r.value = fc;
                g = risk_gradient(s, r.v, q);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;
        step = t;
    }
    r.grad_norm = g.norm();
    return r;
}

double bregman_excess(const Surrogate& s, const Vec& v, const Vec& q) {
    const Vec mu = surrogate_moment(s, q);
    if (s.canonical) {
        // Fenchel-Young form of D_h(mu, grad h*(v)).
        return std::max(0.0, s.potential.h(mu) + s.potential.h_star(v) - mu.dot(v));
    }
    return std::max(0.0, bregman(s.potential, mu, s.link.inverse(v)));
}

double numeric_excess_surrogate_risk(const Surrogate& s, const Vec& v, const Vec& q) {
    const double here = surrogate_risk(s, v, q);
    if (!std::isfinite(here)) return kInf;
    double best = minimize_surrogate_risk(s, q, v).value;
    Vec guess = s.link.forward(surrogate_moment(s, q));
    if (s.in_V(guess)) best = std::min(best, minimize_surrogate_risk(s, q, guess).value);
    return std::max(0.0, here - best);
}

double excess_surrogate_risk(const Surrogate& s, const Vec& v, const Vec& q) {
    if (!s.in_V(v)) return kInf;
    if (s.phi_calibrated) return bregman_excess(s, v, q);
    if (s.margin && s.dim_v == 1) return margin_functions(*s.margin).excess(v(0), q(0));
    return numeric_excess_surrogate_risk(s, v, q);
}

RecoveredPotential recover_potential(const Surrogate& s, const Vec& v0, const std::vector<Vec>& qs) {
    if (!s.in_V(v0)) throw std::invalid_argument("recover_potential: v0 outside V");
    const Vec u0 = s.link.inverse(v0);
    if (!s.potential.interior(u0)) throw std::invalid_argument("recover_potential: v0 outside t(M)");
    RecoveredPotential r;
    const int d = static_cast<int>(s.stat.front().size());
    Mat design(static_cast<Eigen::Index>(qs.size()), d + 1);
    Vec target(static_cast<Eigen::Index>(qs.size()));
    for (std::size_t i = 0; i < qs.size(); ++i) {
        const Vec mu = surrogate_moment(s, qs[i]);
        const double val = numeric_excess_surrogate_risk(s, v0, qs[i]);
        r.moments.push_back(mu);
        r.values.push_back(val);
        design(static_cast<Eigen::Index>(i), 0) = 1.0;
        design.row(static_cast<Eigen::Index>(i)).tail(d) = mu.transpose();
        target(static_cast<Eigen::Index>(i)) = s.potential.h(mu) - val;
    }
    const Vec coef = design.colPivHouseholderQr().solve(target);
    r.affine_residual = (design * coef - target).cwiseAbs().maxCoeff();
    return r;
}

CalibrationCheck check_phi_calibration(const Surrogate& s, int n_samples, double tol, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t ny = s.stat.size();
    auto draw_q = [&]() {
        Vec q(static_cast<Eigen::Index>(ny));
        for (std::size_t y = 0; y < ny; ++y) q(static_cast<Eigen::Index>(y)) = -std::log(1.0 - unit(rng));
        return Vec(q / q.sum());
    };
    CalibrationCheck out;
    out.max_residual = 0.0;
    for (int i = 0; i < n_samples; ++i) {
        const Vec q = draw_q();
        Vec v(s.dim_v);
        if (i % 2 == 0) {
            v = s.link.forward(surrogate_moment(s, draw_q()));
            for (Eigen::Index j = 0; j < v.size(); ++j) v(j) += 0.5 * normal(rng);
        } else {
            for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = -4.0 + 8.0 * unit(rng);
        }
        if (!s.in_V(v)) std::sort(v.data(), v.data() + v.size());
        if (!s.in_V(v)) continue;
        const double numeric = numeric_excess_surrogate_risk(s, v, q);
        const double bd = bregman_excess(s, v, q);
        const double res = std::abs(numeric - bd);
        if (res > out.max_residual || out.witness_v.size() == 0) {
            out.max_residual = std::max(out.max_residual, res);
            out.witness_v = v;
            out.witness_q = q;
            out.witness_excess = numeric;
            out.witness_bregman = bd;
        }
    }
    out.pass = out.max_residual <= tol;
    return out;
}

std::size_t crf_map(const Task& task, const Vec& v) {
    std::size_t arg = 0;
    double best = task.phi[0].dot(v);
    for (std::size_t y = 1; y < task.phi.size(); ++y) {
        const double s = task.phi[y].dot(v);
        if (s > best) {
            best = s;
            arg = y;
        }
    }
    return arg;
}

}  // namespace surrocal
