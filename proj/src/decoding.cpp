#include "surrocal/decoding.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace surrocal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Shortest augmenting path Hungarian method with row/column potentials.
std::vector<int> hungarian(const Mat& a) {
    const int n = static_cast<int>(a.rows());
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), kInf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = kInf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(n);
    for (int j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

double assignment_cost(const Mat& a, const std::vector<int>& sigma) {
    double s = 0.0;
    for (std::size_t i = 0; i < sigma.size(); ++i) s += a(static_cast<Eigen::Index>(i), sigma[i]);
    return s;
}

double optimal_cost(const Mat& a) {
    if (a.rows() == 0) return 0.0;
    return assignment_cost(a, hungarian(a));
}

Mat drop(const Mat& a, int row, int col) {
    const int n = static_cast<int>(a.rows());
    Mat out(n - 1, n - 1);
    for (int i = 0, r = 0; i < n; ++i) {
        if (i == row) continue;
        for (int j = 0, c = 0; j < n; ++j) {
            if (j == col) continue;
            out(r, c++) = a(i, j);
        }
        ++r;
    }
    return out;
}

}  // namespace

std::vector<int> linear_assignment(const Mat& cost) {
    if (cost.rows() != cost.cols()) throw std::invalid_argument("linear_assignment: cost matrix must be square");
    if (!cost.allFinite()) throw std::invalid_argument("linear_assignment: entries must be finite");
    const int n = static_cast<int>(cost.rows());
    if (n == 0) return {};
    const double scale = 1.0 + cost.cwiseAbs().maxCoeff() * n;
    const double tol = 1e-12 * scale;
    // Fix rows in order, each to the smallest column that keeps the optimum.
    std::vector<int> result(n, -1);
    std::vector<int> free_cols(n);
    std::iota(free_cols.begin(), free_cols.end(), 0);
    Mat rest = cost;
    double target = optimal_cost(rest);
    for (int i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < free_cols.size(); ++c) {
            const int col = static_cast<int>(c);
            const Mat sub = drop(rest, 0, col);
            const double sub_opt = optimal_cost(sub);
            if (rest(0, col) + sub_opt <= target + tol) {
                result[i] = free_cols[c];
                free_cols.erase(free_cols.begin() + static_cast<std::ptrdiff_t>(c));
                rest = sub;
                target = sub_opt;
                break;
            }
        }
    }
    return result;
}

std::vector<int> assignment_by_enumeration(const Mat& cost) {
    if (cost.rows() != cost.cols()) throw std::invalid_argument("assignment_by_enumeration: matrix must be square");
    const int n = static_cast<int>(cost.rows());
    std::vector<int> sigma(n), best;
    std::iota(sigma.begin(), sigma.end(), 0);
    double best_cost = kInf;
    do {
        const double c = assignment_cost(cost, sigma);
        if (c < best_cost) {
            best_cost = c;
            best = sigma;
        }
    } while (std::next_permutation(sigma.begin(), sigma.end()));
    return best;
}

std::size_t decode_generic(const Surrogate& s, const Vec& v) {
    if (!s.in_V(v)) throw std::invalid_argument("decode: score vector outside V");
    const Vec u = s.link.inverse(v);
    if (!s.phi_calibrated && (s.link.forward(u) - v).cwiseAbs().maxCoeff() > 1e-9)
        throw std::invalid_argument("decode: score vector outside the link image");
    return oracle_prediction(s.task, s.to_task(u));
}

std::size_t decode_fast(const Task& task, const Vec& u) {
    switch (task.kind) {
        case TaskKind::ZeroOne: {
            Eigen::Index arg = 0;
            for (Eigen::Index i = 1; i < u.size(); ++i)
                if (u(i) > u(arg)) arg = i;
            return static_cast<std::size_t>(arg);
        }
        case TaskKind::CostSensitive:
            return task.cost * u(1) <= (2.0 - task.cost) * u(0) ? 0 : 1;
        case TaskKind::Hamming: {
            std::vector<int> z(static_cast<std::size_t>(u.size()));
            for (Eigen::Index j = 0; j < u.size(); ++j) z[static_cast<std::size_t>(j)] = u(j) >= 0.0 ? 1 : -1;
            return task.Z.index_of(z);
        }
        case TaskKind::Ordinal: {
            const int k = static_cast<int>(task.Z.size());
            if (task.ordinal == OrdinalEmbedding::Cumulative) {
                bool monotone = true;
                for (Eigen::Index j = 1; j < u.size(); ++j) monotone = monotone && u(j) <= u(j - 1);
                if (monotone) {
                    int z = 1;
                    for (Eigen::Index j = 0; j < u.size(); ++j) z += u(j) > 0.0;
                    return static_cast<std::size_t>(z - 1);
                }
                // score(z) = sum_{j<z} u_j - sum_{j>=z} u_j; keep the first maximum.
                double score = -u.sum(), best = score;
                int arg = 0;
                for (int z = 1; z < k; ++z) {
                    score += 2.0 * u(z - 1);
                    if (score > best) {
                        best = score;
                        arg = z;
                    }
                }
                return static_cast<std::size_t>(arg);
            }
            // Simplex embedding: weighted median, loss(z+1) - loss(z) = 2 F_z - total.
            const double total = u.sum();
            double risk = 0.0;
            for (int y = 0; y < k; ++y) risk += y * u(y);
            double best = risk, cum = 0.0;
            int arg = 0;
            for (int z = 1; z < k; ++z) {
                cum += u(z - 1);
                risk += 2.0 * cum - total;
                if (risk < best) {
                    best = risk;
                    arg = z;
                }
            }
            return static_cast<std::size_t>(arg);
        }
        case TaskKind::Ndcg: {
            const int m = static_cast<int>(u.size());
            std::vector<int> order(m);
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return u(a) > u(b); });
            std::vector<int> sigma(m);
            for (int slot = 0; slot < m; ++slot) sigma[order[slot]] = slot;
            return task.Z.index_of(sigma);
        }
        case TaskKind::Matching: {
            const int m = task.Z.k;
            Mat cost(m, m);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) cost(i, j) = -u(i * m + j);
            return task.Z.index_of(linear_assignment(cost));
        }
    }
    return 0;
}

}  // namespace surrocal
