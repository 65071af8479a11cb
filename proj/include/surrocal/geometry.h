#pragma once

#include <string>
#include <utility>
#include <vector>

#include "surrocal/losses.h"

namespace surrocal {

struct MarginalPolytope {
    std::vector<Vec> vertices;  // distinct phi(y), first occurrence order
    int dim_ambient = 0;
    int dim_affine = 0;

    bool full_dimensional() const { return dim_affine == dim_ambient; }
};

// Numerical rank of {p - p0}, singular values below rel_tol * s_max dropped.
int affine_rank(const std::vector<Vec>& points, double rel_tol = 1e-9);

MarginalPolytope polytope_of(const Task& task);

// u in H_eps(z): <psi(z) - psi(z'), u> <= eps for every z' (1e-12 slack).
bool in_calibration_set(const Task& task, const Vec& u, std::size_t z, double eps);

// Distance from the moment-space cell M n H_0(z) to the tie hyperplane of z
// and z2. Zero exactly when the two cells touch inside M.
double cell_gap(const Task& task, std::size_t z, std::size_t z2);

// min over z2 != z of eps / ||psi(z) - psi(z2)|| + cell_gap(z, z2).
// Pairs with psi(z) == psi(z2) are skipped and reported in `warnings`.
double calibration_set_distance(const Task& task, std::size_t z, double eps,
                                std::vector<std::string>* warnings = nullptr);

// M n H_0(z) n H_0(z2) is nonempty.
bool cells_adjacent(const Task& task, std::size_t z, std::size_t z2);
std::vector<std::pair<std::size_t, std::size_t>> adjacent_pairs(const Task& task);

struct LpResult {
    bool feasible = false;
    bool bounded = true;
    double value = 0.0;
    Vec x;
};

// maximize c.x  s.t.  A_ub x <= b_ub, A_eq x = b_eq, x >= 0, with b_ub, b_eq >= 0.
// Dense two-phase simplex with Bland's rule.
LpResult lp_maximize(const Vec& c, const Mat& A_ub, const Vec& b_ub, const Mat& A_eq, const Vec& b_eq);

}  // namespace surrocal
