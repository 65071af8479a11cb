#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "surrocal/calibration.h"
#include "surrocal/learning.h"

namespace surrocal::app {

// Task/surrogate pairs exercised by the invariant suites, desk sized.
std::vector<Surrogate> spec_catalog();
// The six tasks at the largest desk sizes the decomposition check covers.
std::vector<Task> desk_tasks();

// Interior moment samples u = mu(q) with q drawn from a Dirichlet(1) mixed
// 1e-3 toward uniform.
std::vector<Vec> interior_moments(const Surrogate& s, int n, std::uint64_t seed);
std::vector<Vec> random_distributions(std::size_t labels, int n, std::uint64_t seed);
// Scores in V: link images of random moments plus Gaussian noise.
std::vector<Vec> random_scores(const Surrogate& s, int n, std::uint64_t seed);

// Largest |grad - central difference|_inf / max(1, |grad|_inf).
double gradient_check(const Surrogate& s, int samples, std::uint64_t seed);
// Largest |grad h*(grad h(u)) - u|_inf (Legendre potentials).
double conjugate_inverse_check(const Surrogate& s, int samples, std::uint64_t seed);
// Largest |D_h(u,u') - D_h*(grad h(u'), grad h(u))|.
double bregman_duality_check(const Surrogate& s, int samples, std::uint64_t seed);
// Largest ||u-u'||^2/(2 beta) - D_h(u,u') over sample pairs; <= 0 when the
// declared modulus holds.
double strong_convexity_violation(const Surrogate& s, int samples, std::uint64_t seed);
// Largest delta_l(d(t(mu(q))), q).
double fisher_check(const Surrogate& s, int samples, std::uint64_t seed);

struct InequalityCheck {
    std::size_t samples = 0;
    std::size_t violations = 0;
    double worst = 0.0;  // largest zeta(delta_l) - delta_s
};

InequalityCheck calibration_inequality_check(const Surrogate& s, const std::function<double(double)>& zeta,
                                             int samples, std::uint64_t seed, double tol = 1e-9);

struct InvariantResult {
    std::string module;
    std::string name;
    bool pass = false;
    double residual = 0.0;
    std::string detail;
};

struct VerifyReport {
    std::string suite;
    std::uint64_t seed = 0;
    std::vector<InvariantResult> results;
    bool all_pass() const;
    json to_json() const;
};

// suite: "fast" or "full".
VerifyReport run_verify(const std::string& suite, std::uint64_t seed, int workers);

}  // namespace surrocal::app
