#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "surrocal/losses.h"

namespace surrocal {

enum class NormTag { L1, L2 };
enum class DomainKind { FullSpace, Box, Simplex, MarginalPolytope };

struct Domain {
    DomainKind kind = DomainKind::FullSpace;
    double lo = 0.0;  // box bounds, per coordinate
    double hi = 0.0;
    std::string describe() const;
};

struct Potential {
    std::string name;
    int dim = 0;
    std::function<double(const Vec&)> h;
    std::function<Vec(const Vec&)> grad_h;
    std::function<double(const Vec&)> h_star;
    std::function<Vec(const Vec&)> grad_h_star;
    std::function<bool(const Vec&)> interior;
    Domain domain;
    double beta = 1.0;  // h is (1/beta)-strongly convex in `norm`
    NormTag norm = NormTag::L2;
    bool legendre = false;
};

// D_h(u1, u) = h(u1) - h(u) - <u1 - u, grad h(u)>.
// Throws std::domain_error when u is off the interior of a Legendre potential.
double bregman(const Potential& pot, const Vec& u1, const Vec& u);

struct Link {
    std::function<Vec(const Vec&)> forward;
    std::function<Vec(const Vec&)> inverse;
    std::string image;
};

enum class MarginKind { Logistic, Exponential, Square, SquaredHinge, ModifiedHuber, Hinge };

MarginKind margin_from_name(const std::string& name);
std::string margin_name(MarginKind kind);

// Scalar pieces of a binary margin loss S(v,y) = Phi(y v).
// The potential hbar lives on q = P(y = +1).
struct MarginFns {
    MarginKind kind = MarginKind::Logistic;
    double beta = 0.25;  // L2 modulus of hbar
    bool calibrated = true;
    bool legendre = true;
    bool full_line = false;  // hbar extends to all of R

    double Phi(double u) const;
    double dPhi(double u) const;
    double h(double q) const;
    double dh(double q) const;
    double h_star(double w) const;
    double dh_star(double w) const;
    double link(double q) const;
    double link_inv(double v) const;
    // Excess conditional surrogate risk of score v at q.
    double excess(double v, double q) const;
};

MarginFns margin_functions(MarginKind kind);

struct Surrogate {
    std::string name;
    int dim_v = 0;
    Task task;

    std::function<double(const Vec&, std::size_t)> eval;
    std::function<Vec(const Vec&, std::size_t)> grad;
    std::function<bool(const Vec&)> in_V;

    // The potential is defined on moments of `stat`; the task moment is
    // J * u + b for a surrogate moment u.
    std::vector<Vec> stat;
    Mat J;
    Vec b;

    Potential potential;
    Link link;
    bool phi_calibrated = true;
    bool canonical = false;  // grad S(v,y) = grad h*(v) - stat(y)
    std::optional<MarginKind> margin;
    int separable_pm = 0;  // 1: coordinates coded in [-1,1]; 0: in [0,1]

    Vec to_task(const Vec& u) const { return J * u + b; }
};

Surrogate make_quadratic(const Task& task);
Surrogate make_crf(const Task& task);
Surrogate make_margin(MarginKind kind, const Task& binary_task);
Surrogate make_one_vs_all(MarginKind kind, const Task& multiclass_task);
Surrogate make_independent_classifiers(MarginKind kind, const Task& multilabel_task);
Surrogate make_at(MarginKind kind, const Task& ordinal_task);
Surrogate make_cl(const Task& ordinal_task);

// Catalog: "quadratic", "crf", "logistic", "exponential", "square",
// "squared_hinge", "modified_huber", "ova:<margin>", "indep:<margin>",
// "at:<margin>", "cl".
Surrogate make_surrogate(const std::string& name, const Task& task);
std::vector<std::string> surrogate_catalog();

Vec surrogate_moment(const Surrogate& s, const Vec& q);
double surrogate_risk(const Surrogate& s, const Vec& v, const Vec& q);

struct MinimizeResult {
    Vec v;
    double value = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
};

// Backtracking gradient descent on v -> s(v,q) (Armijo 1e-4).
MinimizeResult minimize_surrogate_risk(const Surrogate& s, const Vec& q, const Vec& start,
                                       double tol = 1e-10, int max_iter = 100000);

// delta_s(v,q): closed form D_h(mu(q), t^-1(v)) when calibrated, numeric otherwise.
double excess_surrogate_risk(const Surrogate& s, const Vec& v, const Vec& q);
double numeric_excess_surrogate_risk(const Surrogate& s, const Vec& v, const Vec& q);
// D_h(mu(q), t^-1(v)) regardless of calibration status.
double bregman_excess(const Surrogate& s, const Vec& v, const Vec& q);

struct RecoveredPotential {
    std::vector<Vec> moments;
    std::vector<double> values;  // h up to an affine term
    double affine_residual = 0.0;
};

RecoveredPotential recover_potential(const Surrogate& s, const Vec& v0, const std::vector<Vec>& qs);

struct CalibrationCheck {
    bool pass = false;
    double max_residual = 0.0;
    Vec witness_v;
    Vec witness_q;
    double witness_excess = 0.0;
    double witness_bregman = 0.0;
};

CalibrationCheck check_phi_calibration(const Surrogate& s, int n_samples, double tol, std::uint64_t seed);

std::size_t crf_map(const Task& task, const Vec& v);

// Stable log-sum-exp of <v, phi(y)> and the matching softmax marginals.
double log_partition(const std::vector<Vec>& phi, const Vec& v);
Vec marginals(const std::vector<Vec>& phi, const Vec& v);
Mat marginal_covariance(const std::vector<Vec>& phi, const Vec& v);

}  // namespace surrocal
