#include "surrocal/geometry.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace surrocal {

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kSetSlack = 1e-12;

class Tableau {
public:
    Tableau(const Vec& c, const Mat& A_ub, const Vec& b_ub, const Mat& A_eq, const Vec& b_eq)
        : n_(static_cast<int>(c.size())),
          mu_(static_cast<int>(A_ub.rows())),
          me_(static_cast<int>(A_eq.rows())),
          cols_(n_ + mu_ + me_),
          t_(Mat::Zero(mu_ + me_, cols_ + 1)),
          basis_(mu_ + me_),
          c_(c) {
        for (int i = 0; i < mu_; ++i) {
            t_.row(i).head(n_) = A_ub.row(i);
            t_(i, n_ + i) = 1.0;
            t_(i, cols_) = b_ub(i);
            basis_[i] = n_ + i;
        }
        for (int j = 0; j < me_; ++j) {
            t_.row(mu_ + j).head(n_) = A_eq.row(j);
            t_(mu_ + j, n_ + mu_ + j) = 1.0;
            t_(mu_ + j, cols_) = b_eq(j);
            basis_[mu_ + j] = n_ + mu_ + j;
        }
    }

    LpResult solve() {
        LpResult r;
        if (me_ > 0) {
            Vec obj = Vec::Zero(cols_ + 1);
            for (int j = 0; j < me_; ++j) obj(n_ + mu_ + j) = 1.0;
            for (int j = 0; j < me_; ++j) obj -= t_.row(mu_ + j).transpose();
            run(obj, cols_);
            if (obj(cols_) < -1e-9) return r;
            drive_out_artificials();
        }
        r.feasible = true;
        Vec obj = Vec::Zero(cols_ + 1);
        obj.head(n_) = -c_;
        for (int i = 0; i < rows(); ++i)
            if (obj(basis_[i]) != 0.0) obj -= obj(basis_[i]) * t_.row(i).transpose();
        r.bounded = run(obj, n_ + mu_);
        r.value = obj(cols_);
        r.x = Vec::Zero(n_);
        for (int i = 0; i < rows(); ++i)
            if (basis_[i] < n_) r.x(basis_[i]) = t_(i, cols_);
        return r;
    }

private:
    int rows() const { return mu_ + me_; }

    void pivot(int row, int col, Vec& obj) {
        t_.row(row) /= t_(row, col);
        for (int i = 0; i < rows(); ++i)
            if (i != row && t_(i, col) != 0.0) t_.row(i) -= t_(i, col) * t_.row(row);
        if (obj(col) != 0.0) obj -= obj(col) * t_.row(row).transpose();
        basis_[row] = col;
    }

    // Returns false when the objective is unbounded.
    bool run(Vec& obj, int allowed_cols) {
        for (int iter = 0; iter < 100000; ++iter) {
            int enter = -1;
            for (int j = 0; j < allowed_cols; ++j)
                if (obj(j) < -kPivotTol) {
                    enter = j;
                    break;
                }
            if (enter < 0) return true;
            int leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (int i = 0; i < rows(); ++i) {
                if (t_(i, enter) > kPivotTol) {
                    const double ratio = t_(i, cols_) / t_(i, enter);
                    if (ratio < best - 1e-15 || (std::abs(ratio - best) <= 1e-15 && basis_[i] < basis_[leave])) {
                        best = ratio;
                        leave = i;
                    }
                }
            }
            if (leave < 0) return false;
            pivot(leave, enter, obj);
        }
        throw std::runtime_error("lp_maximize: iteration limit");
    }

    void drive_out_artificials() {
        Vec dummy = Vec::Zero(cols_ + 1);
        for (int i = 0; i < rows(); ++i) {
            if (basis_[i] < n_ + mu_) continue;
            for (int j = 0; j < n_ + mu_; ++j)
                if (std::abs(t_(i, j)) > kPivotTol) {
                    pivot(i, j, dummy);
                    break;
                }
        }
    }

    int n_, mu_, me_, cols_;
    Mat t_;
    std::vector<int> basis_;
    Vec c_;
};

Mat phi_matrix(const Task& task) {
    Mat p(task.dim, static_cast<Eigen::Index>(task.Y.size()));
    for (std::size_t y = 0; y < task.Y.size(); ++y) p.col(static_cast<Eigen::Index>(y)) = task.phi[y];
    return p;
}

// Rows <psi(z) - psi(w), Phi q> for every w != z.
Mat cell_rows(const Task& task, const Mat& phi, std::size_t z) {
    Mat rows(static_cast<Eigen::Index>(task.Z.size() - 1), phi.cols());
    Eigen::Index r = 0;
    for (std::size_t w = 0; w < task.Z.size(); ++w) {
        if (w == z) continue;
        rows.row(r++) = (task.psi[z] - task.psi[w]).transpose() * phi;
    }
    return rows;
}

}  // namespace

LpResult lp_maximize(const Vec& c, const Mat& A_ub, const Vec& b_ub, const Mat& A_eq, const Vec& b_eq) {
    if ((b_ub.array() < 0.0).any() || (b_eq.array() < 0.0).any())
        throw std::invalid_argument("lp_maximize: right-hand sides must be nonnegative");
    Tableau t(c, A_ub, b_ub, A_eq, b_eq);
    return t.solve();
}

int affine_rank(const std::vector<Vec>& points, double rel_tol) {
    if (points.size() < 2) return 0;
    Mat d(points.front().size(), static_cast<Eigen::Index>(points.size() - 1));
    for (std::size_t i = 1; i < points.size(); ++i) d.col(static_cast<Eigen::Index>(i - 1)) = points[i] - points[0];
    Eigen::JacobiSVD<Mat> svd(d);
    const Vec& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) return 0;
    int r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) r += s(i) > rel_tol * s(0);
    return r;
}

MarginalPolytope polytope_of(const Task& task) {
    MarginalPolytope p;
    for (const auto& f : task.phi) {
        bool seen = false;
        for (const auto& v : p.vertices) seen = seen || (v - f).cwiseAbs().maxCoeff() == 0.0;
        if (!seen) p.vertices.push_back(f);
    }
    p.dim_ambient = task.dim;
    p.dim_affine = affine_rank(p.vertices);
    return p;
}

bool in_calibration_set(const Task& task, const Vec& u, std::size_t z, double eps) {
    if (eps < 0.0) throw std::invalid_argument("in_calibration_set: eps must be nonnegative");
    const double own = task.psi.at(z).dot(u);
    for (std::size_t w = 0; w < task.Z.size(); ++w)
        if (own - task.psi[w].dot(u) > eps + kSetSlack) return false;
    return true;
}

double cell_gap(const Task& task, std::size_t z, std::size_t z2) {
    const Mat phi = phi_matrix(task);
    const Vec a = task.psi.at(z) - task.psi.at(z2);
    const double norm = a.norm();
    if (norm == 0.0) return 0.0;
    const Mat A_ub = cell_rows(task, phi, z);
    const Vec b_ub = Vec::Constant(A_ub.rows(), kSetSlack);
    const Mat A_eq = Mat::Ones(1, phi.cols());
    const Vec b_eq = Vec::Ones(1);
    const LpResult r = lp_maximize(phi.transpose() * a, A_ub, b_ub, A_eq, b_eq);
    if (!r.feasible) return std::numeric_limits<double>::infinity();
    // Inside H_0(z) the value <a,u> is nonpositive; its largest value is the gap.
    return std::max(0.0, -r.value) / norm;
}

double calibration_set_distance(const Task& task, std::size_t z, double eps, std::vector<std::string>* warnings) {
    if (eps < 0.0) throw std::invalid_argument("calibration_set_distance: eps must be nonnegative");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t w = 0; w < task.Z.size(); ++w) {
        if (w == z) continue;
        const double norm = (task.psi[z] - task.psi[w]).norm();
        if (norm == 0.0) {
            if (warnings)
                warnings->push_back("outputs " + task.Z.label(z) + " and " + task.Z.label(w) +
                                    " share psi; pair skipped");
            continue;
        }
        best = std::min(best, eps / norm + cell_gap(task, z, w));
    }
    return best;
}

bool cells_adjacent(const Task& task, std::size_t z, std::size_t z2) {
    if (z == z2) throw std::invalid_argument("cells_adjacent: outputs must differ");
    const Mat phi = phi_matrix(task);
    const Mat r1 = cell_rows(task, phi, z);
    const Mat r2 = cell_rows(task, phi, z2);
    Mat A_ub(r1.rows() + r2.rows(), phi.cols());
    A_ub << r1, r2;
    const Vec b_ub = Vec::Constant(A_ub.rows(), kSetSlack);
    const LpResult r = lp_maximize(Vec::Zero(phi.cols()), A_ub, b_ub, Mat::Ones(1, phi.cols()), Vec::Ones(1));
    return r.feasible;
}

std::vector<std::pair<std::size_t, std::size_t>> adjacent_pairs(const Task& task) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t z = 0; z < task.Z.size(); ++z)
        for (std::size_t w = z + 1; w < task.Z.size(); ++w)
            if (cells_adjacent(task, z, w)) out.emplace_back(z, w);
    return out;
}

}  // namespace surrocal
