#include "surrocal/learning.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "surrocal/csv.h"
#include "surrocal/decoding.h"

namespace surrocal {

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over (seed, stream).
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::size_t Rng::categorical(const Vec& p) {
    const double u = uniform();
    double cum = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        cum += p(i);
        if (u < cum) return static_cast<std::size_t>(i);
    }
    // Round-off leaves u >= cum; return the last label with positive mass.
    for (Eigen::Index i = p.size() - 1; i > 0; --i)
        if (p(i) > 0.0) return static_cast<std::size_t>(i);
    return 0;
}

double KernelSpec::operator()(const Vec& a, const Vec& b) const {
    if (kind == KernelKind::Linear) return a.dot(b);
    return std::exp(-(a - b).squaredNorm() / (2.0 * bandwidth * bandwidth));
}

KernelSpec median_heuristic_kernel(const std::vector<Vec>& points) {
    std::vector<double> d;
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j) d.push_back((points[i] - points[j]).norm());
    KernelSpec k;
    if (!d.empty()) {
        std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
        k.bandwidth = d[d.size() / 2];
    }
    if (!(k.bandwidth > 0.0)) k.bandwidth = 1.0;
    return k;
}

KernelSpec linear_kernel(int d) {
    KernelSpec k;
    k.kind = KernelKind::Linear;
    k.kappa = std::sqrt(static_cast<double>(d));
    return k;
}

Mat gram_matrix(const KernelSpec& k, const std::vector<Vec>& xs) {
    const auto n = static_cast<Eigen::Index>(xs.size());
    Mat K(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) K(i, j) = K(j, i) = k(xs[i], xs[j]);
    return K;
}

Vec FunctionEstimate::operator()(const Vec& x) const {
    Vec g = Vec::Zero(coeffs.cols());
    for (std::size_t i = 0; i < anchors.size(); ++i)
        g.noalias() += kernel(anchors[i], x) * coeffs.row(static_cast<Eigen::Index>(i)).transpose();
    return g;
}

double FunctionEstimate::recompute_norm_sq() const {
    if (anchors.empty()) return 0.0;
    const Mat K = gram_matrix(kernel, anchors);
    return (coeffs.transpose() * K * coeffs).trace();
}

double asgd_phi_spread(const Surrogate& s) {
    const Vec center = s.potential.grad_h_star(Vec::Zero(s.dim_v));
    double c = 0.0;
    for (const auto& f : s.stat) c = std::max(c, (f - center).norm());
    return c;
}

double asgd_bound(const Surrogate& s, const KernelSpec& kernel, double radius, std::size_t n) {
    double c_psi = 0.0;
    for (const auto& p : s.task.psi) c_psi = std::max(c_psi, (s.J.transpose() * p).norm());
    const double beta = s.potential.beta, kappa = kernel.kappa;
    const double C = std::sqrt(1.0 + asgd_phi_spread(s) / (kappa * beta * radius));
    return 4.0 * kappa * c_psi * beta * radius * C / std::pow(static_cast<double>(n), 0.25);
}

AsgdResult asgd_train(const Surrogate& s, const std::vector<Sample>& data, const KernelSpec& kernel,
                      const AsgdOptions& opt) {
    if (!s.canonical) throw std::invalid_argument("asgd: surrogate '" + s.name + "' is not of Legendre type");
    if (s.potential.norm != NormTag::L2) throw std::invalid_argument("asgd: needs an L2 strong-convexity modulus");
    const std::size_t n = opt.n ? opt.n : data.size();
    if (n == 0) throw std::invalid_argument("asgd: n must be at least 1");
    if (n > data.size()) throw std::invalid_argument("asgd: fewer samples than iterations");
    if (!(opt.radius > 0.0)) throw std::invalid_argument("asgd: radius D must be positive");

    const double beta = s.potential.beta, kappa = kernel.kappa, D = opt.radius;
    const double spread = asgd_phi_spread(s);
    AsgdResult r;
    r.C = std::sqrt(1.0 + spread / (kappa * beta * D));
    r.step = 2.0 / (beta * kappa * kappa * r.C * r.C * std::sqrt(static_cast<double>(n)));
    r.gradient_cap = kappa * (kappa * beta * D + spread);

    const int dv = s.dim_v;
    const auto rows = static_cast<Eigen::Index>(n);
    Mat G = Mat::Zero(rows, dv);    // current iterate g_i
    Mat S = Mat::Zero(rows, dv);    // sum of iterates
    std::vector<Vec> anchors;
    anchors.reserve(n);
    Vec kv(rows);
    double g_norm_sq = 0.0, s_norm_sq = 0.0, cross = 0.0;  // ||g||^2, ||S||^2, <S, g>
    double loss_sum = 0.0;
    const std::size_t every = opt.trace_every ? opt.trace_every : std::max<std::size_t>(1, n / 100);

    for (std::size_t i = 0; i < n; ++i) {
        const Vec& x = data[i].x;
        const auto m = static_cast<Eigen::Index>(i);
        for (Eigen::Index l = 0; l < m; ++l) kv(l) = kernel(anchors[static_cast<std::size_t>(l)], x);
        const Vec v = G.topRows(m).transpose() * kv.head(m);
        const Vec sv = S.topRows(m).transpose() * kv.head(m);
        const Vec grad = s.grad(v, data[i].y);
        if (!grad.allFinite())
            throw std::runtime_error("asgd: non-finite gradient at iteration " + std::to_string(i + 1));
        const double kxx = kernel(x, x);
        const double gnorm = grad.norm() * std::sqrt(kxx);
        r.max_gradient_norm = std::max(r.max_gradient_norm, gnorm);
        if (gnorm > r.gradient_cap * (1.0 + 1e-9)) ++r.cap_violations;
        loss_sum += s.eval(v, data[i].y);

        const Vec a = -r.step * grad;
        anchors.push_back(x);
        G.row(m) = a.transpose();
        const double new_norm_sq = g_norm_sq + 2.0 * a.dot(v) + a.squaredNorm() * kxx;
        // <S_{i-1}, g'> where g' = g_{i-1} + a k(x,.) and cross = <S_{i-1}, g_{i-1}>.
        const double s_dot = cross + a.dot(sv);
        const double norm = std::sqrt(std::max(0.0, new_norm_sq));
        const double c = norm > D ? D / norm : 1.0;
        if (c < 1.0) G.topRows(m + 1) *= c;
        g_norm_sq = c * c * std::max(0.0, new_norm_sq);
        S.topRows(m + 1) += G.topRows(m + 1);
        s_norm_sq += 2.0 * c * s_dot + g_norm_sq;
        cross = c * s_dot + g_norm_sq;

        if (opt.record_trace && ((i + 1) % every == 0 || i + 1 == n))
            r.trace.push_back({i + 1, loss_sum / static_cast<double>(i + 1), std::sqrt(g_norm_sq)});
    }
    r.average.anchors = std::move(anchors);
    r.average.coeffs = S / static_cast<double>(n);
    r.average.kernel = kernel;
    r.average.rkhs_norm_sq = std::max(0.0, s_norm_sq) / (static_cast<double>(n) * static_cast<double>(n));
    return r;
}

Vec KrrModel::alpha(const Vec& x) const {
    Vec kx(static_cast<Eigen::Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) kx(static_cast<Eigen::Index>(i)) = kernel(xs[i], x);
    return factor.solve(kx);
}

KrrModel krr_train(const std::vector<Sample>& data, const KernelSpec& kernel, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("krr: lambda must be positive");
    if (data.empty()) throw std::invalid_argument("krr: needs at least one sample");
    KrrModel m;
    m.kernel = kernel;
    m.lambda = lambda;
    for (const auto& s : data) {
        m.xs.push_back(s.x);
        m.ys.push_back(s.y);
    }
    const double n = static_cast<double>(data.size());
    Mat K = gram_matrix(kernel, m.xs);
    K.diagonal().array() += n * lambda;
    m.factor.compute(K);
    if (m.factor.info() != Eigen::Success) throw std::runtime_error("krr: system is singular");
    const Vec ev = Eigen::SelfAdjointEigenSolver<Mat>(K, Eigen::EigenvaluesOnly).eigenvalues();
    m.condition_estimate = ev(0) > 0.0 ? ev(ev.size() - 1) / ev(0) : std::numeric_limits<double>::infinity();
    if (m.condition_estimate > 1e12)
        m.warnings.push_back("krr: condition estimate " + format_double(m.condition_estimate) + " exceeds 1e12");
    return m;
}

KrrPrediction krr_predict(const Task& task, const KrrModel& model, const Vec& x) {
    const Vec a = model.alpha(x);
    const std::size_t nz = task.Z.size();
    KrrPrediction p;
    p.scores_enumeration = Vec::Zero(static_cast<Eigen::Index>(nz));
    Vec u = Vec::Zero(task.dim);
    for (std::size_t i = 0; i < model.ys.size(); ++i) {
        const double ai = a(static_cast<Eigen::Index>(i));
        u.noalias() += ai * task.phi[model.ys[i]];
        for (std::size_t z = 0; z < nz; ++z) p.scores_enumeration(static_cast<Eigen::Index>(z)) += ai * task.loss(z, model.ys[i]);
    }
    p.scores_decoder.resize(static_cast<Eigen::Index>(nz));
    for (std::size_t z = 0; z < nz; ++z) p.scores_decoder(static_cast<Eigen::Index>(z)) = task.psi[z].dot(u) + task.c * a.sum();
    Eigen::Index arg = 0;
    for (Eigen::Index z = 1; z < p.scores_enumeration.size(); ++z)
        if (p.scores_enumeration(z) < p.scores_enumeration(arg)) arg = z;
    p.z_enumeration = static_cast<std::size_t>(arg);
    p.z_decoder = decode_fast(task, u);
    p.max_score_gap = (p.scores_enumeration - p.scores_decoder).cwiseAbs().maxCoeff();
    const double tie = std::abs(p.scores_enumeration(static_cast<Eigen::Index>(p.z_decoder)) -
                                p.scores_enumeration(static_cast<Eigen::Index>(p.z_enumeration)));
    p.agree = p.z_enumeration == p.z_decoder || tie <= 1e-10;
    return p;
}

Vec optimal_score(const Surrogate& s, const Vec& q) {
    const Vec mu = surrogate_moment(s, q);
    if (!s.potential.interior(mu)) throw std::domain_error("optimal_score: moment on the boundary of the domain");
    return s.link.forward(mu);
}

RiskEstimate evaluate_risks(const Surrogate& s, const std::function<Vec(const Vec&)>& score, const SyntheticTask& data,
                            const std::vector<Vec>& eval_inputs, int workers) {
    const std::size_t n = eval_inputs.size();
    if (n == 0) throw std::invalid_argument("evaluate_risks: empty evaluation set");
    std::vector<double> ds(n), dl(n);
    auto work = [&](std::size_t w, std::size_t stride) {
        for (std::size_t i = w; i < n; i += stride) {
            const Vec q = data.conditional(eval_inputs[i]);
            const Vec v = score(eval_inputs[i]);
            ds[i] = excess_surrogate_risk(s, v, q);
            const std::size_t z = oracle_prediction(s.task, s.to_task(s.link.inverse(v)));
            dl[i] = excess_bayes_risk(s.task, z, q);
        }
    };
    const std::size_t nw = static_cast<std::size_t>(std::max(1, workers));
    if (nw == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < nw; ++w) pool.emplace_back(work, w, nw);
        for (auto& t : pool) t.join();
    }
    // Serial reduction in index order keeps the result independent of `workers`.
    auto mean_se = [n](const std::vector<double>& x, double& mean, double& se) {
        double m = 0.0;
        for (double v : x) m += v;
        m /= static_cast<double>(n);
        double var = 0.0;
        for (double v : x) var += (v - m) * (v - m);
        mean = m;
        se = n > 1 ? std::sqrt(var / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    };
    RiskEstimate r;
    r.points = n;
    mean_se(ds, r.surrogate_excess, r.surrogate_excess_se);
    mean_se(dl, r.true_excess, r.true_excess_se);
    return r;
}

namespace {

// Labels such as (1,-1) are written with spaces so they stay one CSV field.
std::string label_field(const Task& task, std::size_t y) {
    std::string s = task.Y.label(y);
    std::replace(s.begin(), s.end(), ',', ' ');
    return s;
}

}  // namespace

void write_dataset_csv(std::ostream& out, const Task& task, const std::vector<Sample>& data) {
    if (data.empty()) return;
    const auto d = data.front().x.size();
    for (Eigen::Index j = 0; j < d; ++j) out << 'x' << (j + 1) << ',';
    out << "y\n";
    for (const auto& s : data) {
        for (Eigen::Index j = 0; j < d; ++j) out << format_double(s.x(j)) << ',';
        out << label_field(task, s.y) << '\n';
    }
}

std::vector<Sample> read_dataset_csv(std::istream& in, const Task& task) {
    std::string line;
    if (!std::getline(in, line)) return {};
    const std::size_t cols = split_csv_line(line).size();
    if (cols < 2) throw std::invalid_argument("dataset: need at least one input column and y");
    std::vector<Sample> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != cols) throw std::invalid_argument("dataset: ragged row");
        Sample s;
        s.x.resize(static_cast<Eigen::Index>(cols - 1));
        for (std::size_t j = 0; j + 1 < cols; ++j) s.x(static_cast<Eigen::Index>(j)) = parse_double(f[j]);
        bool found = false;
        for (std::size_t y = 0; y < task.Y.size() && !found; ++y)
            if (label_field(task, y) == f.back()) {
                s.y = y;
                found = true;
            }
        if (!found) throw std::invalid_argument("dataset: unknown label '" + f.back() + "'");
        out.push_back(std::move(s));
    }
    return out;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
    out << "iteration,surrogate_risk_estimate,rkhs_norm\n";
    for (const auto& r : trace)
        out << r.iteration << ',' << format_double(r.surrogate_risk_estimate) << ',' << format_double(r.rkhs_norm) << '\n';
}

}  // namespace surrocal
