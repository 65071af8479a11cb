#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "surrocal/calibration.h"

namespace surrocal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFeasTol = 1e-12;
constexpr double kMaxCompositions = 3e6;
constexpr double kMaxPairs = 6e8;
constexpr std::size_t kMaxBoxScores = 50000;
constexpr double kMaxScoreStep = 8.0;  // polish step cap, in score units
constexpr double kBoundaryNudge = 1e-9;

double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

int default_resolution(std::size_t ny) {
    if (ny == 2) return 2000;
    if (ny <= 4) return 60;
    if (ny <= 8) return 20;
    return 8;
}

// Candidate ordering: value, then moment index, then score index.
struct Best {
    double value = kInf;
    std::size_t i = 0, j = 0;
    bool operator<(const Best& o) const { return std::tie(value, i, j) < std::tie(o.value, o.i, o.j); }
};

Vec project_simplex(const Vec& x) {
    std::vector<double> s(x.data(), x.data() + x.size());
    std::sort(s.begin(), s.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        cum += s[k];
        const double t = (cum - 1.0) / static_cast<double>(k + 1);
        if (s[k] - t > 0.0) theta = t;
    }
    return (x.array() - theta).max(0.0).matrix();
}

// Excess surrogate risk through the split A(mu) + B(v) - <mu, G(v)>, or the
// separable margin formula when the surrogate is not calibrated.
class PairModel {
public:
    explicit PairModel(const Surrogate& s) : s_(s) {
        if (!s.phi_calibrated && !s.margin)
            throw std::invalid_argument("brute force: non-calibrated surrogate without a closed-form excess");
        if (s.margin) m_ = margin_functions(*s.margin);
    }

    bool split() const { return s_.phi_calibrated; }

    double A(const Vec& mu) const { return s_.potential.h(mu); }

    // Returns false when v has no usable preimage.
    bool score_terms(const Vec& v, double& B, Vec& G) const {
        if (!s_.in_V(v)) return false;
        if (s_.canonical) {
            B = s_.potential.h_star(v);
            G = v;
            return std::isfinite(B);
        }
        const Vec u = s_.link.inverse(v);
        if (!u.allFinite() || !s_.potential.interior(u)) return false;
        G = s_.potential.grad_h(u);
        B = u.dot(G) - s_.potential.h(u);
        return std::isfinite(B) && G.allFinite();
    }

    double separable(const Vec& mu, const Vec& v) const {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < v.size(); ++j) {
            const double q = s_.separable_pm ? 0.5 * (mu(j) + 1.0) : mu(j);
            acc += m_.excess(v(j), q);
        }
        return acc;
    }

    double excess(const Vec& mu, const Vec& v) const {
        if (!split()) return s_.in_V(v) ? separable(mu, v) : kInf;
        double B = 0.0;
        Vec G;
        if (!score_terms(v, B, G)) return kInf;
        return std::max(0.0, A(mu) + B - mu.dot(G));
    }

    std::size_t decode(const Vec& v) const { return oracle_prediction(s_.task, s_.to_task(s_.link.inverse(v))); }

    // Outputs tied with the decoded one. A score on a tie is the limit of
    // scores decoding to any tied output, and delta_s is continuous in v.
    std::vector<std::size_t> decode_set(const Vec& v) const {
        const Vec u = s_.to_task(s_.link.inverse(v));
        const std::size_t nz = s_.task.Z.size();
        Vec r(static_cast<Eigen::Index>(nz));
        for (std::size_t z = 0; z < nz; ++z) r(static_cast<Eigen::Index>(z)) = s_.task.psi[z].dot(u);
        const double tol = 1e-9 * (1.0 + u.cwiseAbs().sum());
        std::vector<std::size_t> out;
        for (std::size_t z = 0; z < nz; ++z)
            if (r(static_cast<Eigen::Index>(z)) <= r.minCoeff() + tol) out.push_back(z);
        return out;
    }

    double worst_excess(const Vec& v, const Vec& q) const {
        double e = 0.0;
        for (std::size_t z : decode_set(v)) e = std::max(e, excess_bayes_risk(s_.task, z, q));
        return e;
    }

private:
    const Surrogate& s_;
    MarginFns m_;
};

struct QGrid {
    std::vector<Vec> q;   // representative distribution per distinct moment
    std::vector<Vec> mu;  // surrogate moments
    std::size_t distributions = 0;
    int resolution = 0;
};

QGrid build_q_grid(const Surrogate& s, int requested) {
    const std::size_t ny = s.stat.size();
    int n = requested > 0 ? requested : default_resolution(ny);
    while (n > 1 && binomial(n + static_cast<int>(ny) - 1, static_cast<int>(ny) - 1) > kMaxCompositions) --n;
    QGrid g;
    g.resolution = n;
    std::map<std::vector<long long>, std::size_t> seen;
    std::vector<int> counts(ny, 0);
    // Lexicographic enumeration of compositions of n into ny parts.
    std::function<void(std::size_t, int)> rec = [&](std::size_t pos, int left) {
        if (pos + 1 == ny) {
            counts[pos] = left;
            ++g.distributions;
            Vec q(static_cast<Eigen::Index>(ny));
            for (std::size_t y = 0; y < ny; ++y) q(static_cast<Eigen::Index>(y)) = static_cast<double>(counts[y]) / n;
            const Vec mu = surrogate_moment(s, q);
            std::vector<long long> key(static_cast<std::size_t>(mu.size()));
            for (Eigen::Index j = 0; j < mu.size(); ++j) key[static_cast<std::size_t>(j)] = std::llround(mu(j) * n * 1e6);
            if (seen.emplace(std::move(key), g.q.size()).second) {
                g.q.push_back(q);
                g.mu.push_back(mu);
            }
            return;
        }
        for (int c = left; c >= 0; --c) {
            counts[pos] = c;
            rec(pos + 1, left - c);
        }
    };
    rec(0, n);
    return g;
}

struct ScoreGrid {
    std::vector<Vec> v;
    std::vector<double> B;
    std::vector<Vec> G;
    std::vector<std::vector<std::size_t>> z;  // tied decoded outputs
    double spacing = 0.1;
};

ScoreGrid build_score_grid(const Surrogate& s, const PairModel& model, const QGrid& qg, const GridSpec& spec) {
    std::vector<Vec> raw;
    for (const auto& mu : qg.mu) {
        if (!s.potential.interior(mu)) continue;
        const Vec v = s.link.forward(mu);
        if (v.allFinite() && s.in_V(v)) raw.push_back(v);
    }
    const int d = s.dim_v;
    Vec lo = Vec::Constant(d, -1.0), hi = Vec::Constant(d, 1.0);
    if (!raw.empty()) {
        lo = raw.front();
        hi = raw.front();
        for (const auto& v : raw) {
            lo = lo.cwiseMin(v);
            hi = hi.cwiseMax(v);
        }
    }
    const Vec center = 0.5 * (lo + hi);
    const Vec half = (0.5 * spec.box_inflation * (hi - lo)).cwiseMax(1.0);
    int per_dim = spec.box_points;
    if (per_dim <= 0) {
        static const int table[] = {0, 2001, 61, 21, 11};
        per_dim = d <= 4 ? table[d] : 7;
        while (per_dim > 2 && std::pow(per_dim, d) > static_cast<double>(kMaxBoxScores)) per_dim -= 2;
    }
    ScoreGrid sg;
    sg.spacing = 2.0 * half.maxCoeff() / std::max(1, per_dim - 1);
    if (per_dim >= 2 && std::pow(per_dim, d) <= 4.0 * kMaxBoxScores) {
        std::vector<int> idx(static_cast<std::size_t>(d), 0);
        while (true) {
            Vec v(d);
            for (int j = 0; j < d; ++j)
                v(j) = center(j) - half(j) + 2.0 * half(j) * idx[static_cast<std::size_t>(j)] / (per_dim - 1);
            if (s.in_V(v)) raw.push_back(v);
            int j = 0;
            while (j < d && ++idx[static_cast<std::size_t>(j)] == per_dim) idx[static_cast<std::size_t>(j++)] = 0;
            if (j == d) break;
        }
    }
    // Boundary moments pulled 1e-9 toward the uniform distribution; their link
    // images reach the large scores that infima on the boundary of M need.
    // They are added after the box so they do not stretch it.
    const Vec uniform = Vec::Constant(static_cast<Eigen::Index>(s.stat.size()), 1.0 / static_cast<double>(s.stat.size()));
    for (std::size_t i = 0; i < qg.mu.size(); ++i) {
        if (s.potential.interior(qg.mu[i])) continue;
        const Vec mu = surrogate_moment(s, (1.0 - kBoundaryNudge) * qg.q[i] + kBoundaryNudge * uniform);
        if (!s.potential.interior(mu)) continue;
        const Vec v = s.link.forward(mu);
        if (v.allFinite() && s.in_V(v)) raw.push_back(v);
    }
    for (const auto& v : raw) {
        double B = 0.0;
        Vec G;
        if (model.split() && !model.score_terms(v, B, G)) continue;
        sg.v.push_back(v);
        sg.B.push_back(B);
        sg.G.push_back(G);
        sg.z.push_back(model.decode_set(v));
    }
    return sg;
}

struct ScanResult {
    // best[b][g]: best pair of decode set g whose excess reaches epsilons[b] but not epsilons[b+1].
    std::vector<std::vector<Best>> best;
};

}  // namespace

BruteForceReport calib_brute_force_curve(const Surrogate& s, const std::vector<double>& epsilons, const GridSpec& spec) {
    if (epsilons.empty()) return {};
    for (std::size_t k = 0; k < epsilons.size(); ++k)
        if (!(epsilons[k] > 0.0) || (k > 0 && epsilons[k] <= epsilons[k - 1]))
            throw std::invalid_argument("brute force: epsilons must be positive and increasing");
    const PairModel model(s);
    const Task& task = s.task;
    const std::size_t nz = task.Z.size();
    const std::size_t ne = epsilons.size();

    QGrid qg = build_q_grid(s, spec.simplex_resolution);
    ScoreGrid sg = build_score_grid(s, model, qg, spec);

    BruteForceReport rep;
    rep.distributions = qg.distributions;
    rep.moments = qg.mu.size();
    rep.scores = sg.v.size();
    rep.q_step = 1.0 / qg.resolution;

    // Keep the pair count bounded by thinning moments with a fixed stride.
    std::size_t stride = 1;
    while (static_cast<double>(qg.mu.size() / stride) * static_cast<double>(sg.v.size()) > kMaxPairs) ++stride;
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < qg.mu.size(); i += stride) rows.push_back(i);

    std::vector<double> A(qg.mu.size(), 0.0);
    std::vector<Vec> excess_z(qg.mu.size());
    for (std::size_t i : rows) {
        A[i] = model.split() ? model.A(qg.mu[i]) : 0.0;
        const Vec u = s.to_task(qg.mu[i]);
        Vec risk(static_cast<Eigen::Index>(nz));
        for (std::size_t z = 0; z < nz; ++z) risk(static_cast<Eigen::Index>(z)) = task.psi[z].dot(u);
        excess_z[i] = risk.array() - risk.minCoeff();
    }

    // Scores grouped by their tied decode set. A pair is feasible when some
    // tied output reaches epsilon, and each set seeds its own polish start so
    // optima on lower-dimensional cell boundaries are not shadowed.
    std::map<std::vector<std::size_t>, std::size_t> set_id;
    std::vector<std::vector<std::size_t>> sets, group;
    for (std::size_t j = 0; j < sg.v.size(); ++j) {
        const auto [it, fresh] = set_id.emplace(sg.z[j], sets.size());
        if (fresh) {
            sets.push_back(sg.z[j]);
            group.emplace_back();
        }
        group[it->second].push_back(j);
    }
    const std::size_t ng = sets.size();
    std::vector<Mat> Gz(ng);
    std::vector<Vec> Bz(ng);
    if (model.split()) {
        const int dm = static_cast<int>(s.stat.front().size());
        for (std::size_t z = 0; z < ng; ++z) {
            Gz[z].resize(dm, static_cast<Eigen::Index>(group[z].size()));
            Bz[z].resize(static_cast<Eigen::Index>(group[z].size()));
            for (std::size_t c = 0; c < group[z].size(); ++c) {
                Gz[z].col(static_cast<Eigen::Index>(c)) = sg.G[group[z][c]];
                Bz[z](static_cast<Eigen::Index>(c)) = sg.B[group[z][c]];
            }
        }
    }

    const std::size_t workers = static_cast<std::size_t>(std::max(1, spec.workers));
    std::vector<ScanResult> partial(workers);
    auto scan = [&](std::size_t w) {
        auto& best = partial[w].best;
        best.assign(ne, std::vector<Best>(ng));
        for (std::size_t r = w; r < rows.size(); r += workers) {
            const std::size_t i = rows[r];
            if (model.split() && !std::isfinite(A[i])) continue;
            for (std::size_t z = 0; z < ng; ++z) {
                double ex = 0.0;
                for (std::size_t t : sets[z]) ex = std::max(ex, excess_z[i](static_cast<Eigen::Index>(t)));
                ex += kFeasTol;
                const std::size_t b = static_cast<std::size_t>(std::upper_bound(epsilons.begin(), epsilons.end(), ex) -
                                                               epsilons.begin());
                if (b == 0) continue;
                Best cand;
                if (model.split()) {
                    const Vec vals = Bz[z] - Gz[z].transpose() * qg.mu[i];
                    Eigen::Index arg = 0;
                    const double m = vals.minCoeff(&arg);
                    cand = {std::max(0.0, A[i] + m), i, group[z][static_cast<std::size_t>(arg)]};
                } else {
                    for (std::size_t j : group[z]) {
                        const Best c{model.separable(qg.mu[i], sg.v[j]), i, j};
                        if (c < cand) cand = c;
                    }
                }
                if (cand < best[b - 1][z]) best[b - 1][z] = cand;
            }
        }
    };
    if (workers == 1) {
        scan(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(scan, w);
        for (auto& t : pool) t.join();
    }

    // Merge workers, then suffix minimum over buckets per decode set.
    std::vector<std::vector<Best>> cell(ne, std::vector<Best>(ng));
    for (const auto& p : partial)
        for (std::size_t b = 0; b < ne; ++b)
            for (std::size_t z = 0; z < ng; ++z) cell[b][z] = std::min(cell[b][z], p.best[b][z]);
    for (std::size_t b = ne - 1; b-- > 0;)
        for (std::size_t z = 0; z < ng; ++z) cell[b][z] = std::min(cell[b][z], cell[b + 1][z]);

    rep.points.resize(ne);
    auto polish_one = [&](std::size_t k) {
        BruteForcePoint& pt = rep.points[k];
        pt.epsilon = epsilons[k];
        std::vector<Best> cands;
        for (const auto& c : cell[k])
            if (std::isfinite(c.value)) cands.push_back(c);
        std::sort(cands.begin(), cands.end());
        if (cands.empty()) {
            pt.value = pt.grid_value = kInf;
            return;
        }
        pt.feasible = true;
        pt.grid_value = pt.value = cands.front().value;
        pt.q = qg.q[cands.front().i];
        pt.v = sg.v[cands.front().j];
        if (!spec.polish) return;
        const std::size_t n_c = std::min<std::size_t>(cands.size(), static_cast<std::size_t>(std::max(1, spec.polish_candidates)));
        const int budget = spec.polish_evaluations / static_cast<int>(n_c);
        for (std::size_t c = 0; c < n_c; ++c) {
            std::mt19937_64 rng(0x9e3779b97f4a7c15ULL ^ (k * 1315423911ULL + c * 2654435761ULL));
            std::normal_distribution<double> normal(0.0, 1.0);
            Vec q = qg.q[cands[c].i], v = sg.v[cands[c].j];
            double f = model.excess(surrogate_moment(s, q), v);
            double sq = rep.q_step, sv = sg.spacing;
            int fails = 0;
            // Moves cycle through: q, v, both (isotropic), one v coordinate, and
            // mass moved between two labels. Axis moves keep feasibility near
            // optima that sit on the boundary of M or at infinite scores.
            const Eigen::Index nq = q.size(), nv = v.size();
            for (int it = 0; it < budget; ++it) {
                const int move = it % 5;
                const bool moves_q = move == 0 || move == 2 || move == 4;
                const bool moves_v = move == 1 || move == 2 || move == 3;
                Vec q2 = q, v2 = v;
                if (move == 0 || move == 2) {
                    for (Eigen::Index y = 0; y < nq; ++y) q2(y) += sq * normal(rng);
                    q2 = project_simplex(q2);
                } else if (move == 4 && nq > 1) {
                    const Eigen::Index a = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(nq));
                    Eigen::Index b = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(nq - 1));
                    if (b >= a) ++b;
                    const double t = std::clamp(sq * normal(rng), -q2(a), q2(b));
                    q2(a) += t;
                    q2(b) -= t;
                }
                if (move == 1 || move == 2) {
                    for (Eigen::Index j = 0; j < nv; ++j) v2(j) += sv * normal(rng);
                } else if (move == 3) {
                    v2(static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(nv))) += sv * normal(rng);
                }
                bool better = false;
                if (s.in_V(v2) && v2.allFinite()) {
                    if (model.worst_excess(v2, q2) + kFeasTol >= epsilons[k]) {
                        const double f2 = model.excess(surrogate_moment(s, q2), v2);
                        if (f2 < f) {
                            f = f2;
                            q = q2;
                            v = v2;
                            better = true;
                        }
                    }
                }
                if (better) {
                    fails = 0;
                    if (moves_q) sq = std::min(2.0 * sq, 0.25);
                    if (moves_v) sv = std::min(2.0 * sv, kMaxScoreStep);
                } else if (++fails >= 50) {
                    fails = 0;
                    sq = std::max(0.5 * sq, 1e-12);
                    sv = std::max(0.5 * sv, 1e-12);
                }
            }
            if (f < pt.value) {
                pt.value = f;
                pt.q = q;
                pt.v = v;
            }
        }
    };
    if (workers == 1) {
        for (std::size_t k = 0; k < ne; ++k) polish_one(k);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t k = w; k < ne; k += workers) polish_one(k);
            });
        for (auto& t : pool) t.join();
    }
    for (const auto& p : rep.points)
        if (p.feasible) rep.max_polish_gain = std::max(rep.max_polish_gain, p.grid_value - p.value);
    return rep;
}

double calib_brute_force(const Surrogate& s, double eps, const GridSpec& grid) {
    return calib_brute_force_curve(s, {eps}, grid).points.front().value;
}

}  // namespace surrocal
