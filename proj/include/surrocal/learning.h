#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "surrocal/surrogates.h"

namespace surrocal {

// Counter-style seed splitting: every stochastic step draws its own stream
// from a parent seed and a stream label, so results never depend on call order.
std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream);

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(eng_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng_); }
    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(eng_); }
    std::size_t categorical(const Vec& p);

private:
    std::mt19937_64 eng_;
};

enum class KernelKind { Gaussian, Linear };

struct KernelSpec {
    KernelKind kind = KernelKind::Gaussian;
    double bandwidth = 1.0;
    double kappa = 1.0;  // sup_x sqrt(k(x,x)) on the input domain

    double operator()(const Vec& a, const Vec& b) const;
};

// Gaussian kernel with bandwidth = median pairwise distance of the points.
KernelSpec median_heuristic_kernel(const std::vector<Vec>& points);
// Linear kernel on the box [-1,1]^d, kappa = sqrt(d).
KernelSpec linear_kernel(int d);

Mat gram_matrix(const KernelSpec& k, const std::vector<Vec>& xs);

// g(x) = sum_i coeffs.row(i) * k(anchors[i], x).
struct FunctionEstimate {
    std::vector<Vec> anchors;
    Mat coeffs;  // n_anchors x dim_v
    KernelSpec kernel;
    double rkhs_norm_sq = 0.0;

    Vec operator()(const Vec& x) const;
    double recompute_norm_sq() const;
};

struct Sample {
    Vec x;
    std::size_t y = 0;
};

enum class SyntheticFamily { SmoothLogit, HardMargin, Mixture };

struct SyntheticTask {
    Task task;
    SyntheticFamily family = SyntheticFamily::SmoothLogit;
    double margin = 0.0;  // delta for HardMargin
    int d = 2;
    std::uint64_t seed = 0;
    KernelSpec kernel;    // the kernel g_star is expanded in
    FunctionEstimate g_star;  // natural parameter of the smooth component
    std::vector<Vec> anchor_outputs;  // per output z, a high-margin distribution (HardMargin)
    FunctionEstimate g_alt;           // second component (Mixture)
    FunctionEstimate mix_gate;        // scalar gate (Mixture)

    Vec sample_x(Rng& rng) const;
    Vec conditional(const Vec& x) const;
    std::vector<Sample> sample(std::size_t n, std::uint64_t stream) const;
};

SyntheticFamily family_from_name(const std::string& name);
std::string family_name(SyntheticFamily f);

// Bayes margin gamma(q): gap between the best and second best expected loss.
double bayes_margin(const Task& task, const Vec& q);

SyntheticTask make_synthetic(const Task& task, SyntheticFamily family, int d, std::uint64_t seed, double margin = 0.4);

struct AsgdOptions {
    double radius = 1.0;  // D
    std::size_t n = 0;
    bool record_trace = true;
    std::size_t trace_every = 0;  // 0: about 100 rows
};

struct TraceRow {
    std::size_t iteration = 0;
    double surrogate_risk_estimate = 0.0;  // running mean of S(g_{i-1}(x_i), y_i)
    double rkhs_norm = 0.0;
};

struct AsgdResult {
    FunctionEstimate average;
    double step = 0.0;
    double C = 0.0;
    double gradient_cap = 0.0;          // M
    double max_gradient_norm = 0.0;     // over iterations, in the RKHS norm
    std::size_t cap_violations = 0;
    std::vector<TraceRow> trace;
};

// Projected averaged SGD with constant step 2 / (beta kappa^2 C^2 sqrt(n)).
// Needs a canonical surrogate; throws on a non-finite gradient.
AsgdResult asgd_train(const Surrogate& s, const std::vector<Sample>& data, const KernelSpec& kernel,
                      const AsgdOptions& opt);

// c_phi,h = sup_y ||stat(y) - grad h*(0)||_2.
double asgd_phi_spread(const Surrogate& s);
// 4 kappa c_psi beta D C / n^(1/4).
double asgd_bound(const Surrogate& s, const KernelSpec& kernel, double radius, std::size_t n);

struct KrrModel {
    std::vector<Vec> xs;
    std::vector<std::size_t> ys;
    KernelSpec kernel;
    double lambda = 0.0;
    Eigen::LLT<Mat> factor;
    double condition_estimate = 0.0;
    std::vector<std::string> warnings;

    Vec alpha(const Vec& x) const;
};

KrrModel krr_train(const std::vector<Sample>& data, const KernelSpec& kernel, double lambda);

struct KrrPrediction {
    std::size_t z_enumeration = 0;
    std::size_t z_decoder = 0;
    Vec scores_enumeration;  // sum_i alpha_i L(z, y_i)
    Vec scores_decoder;      // <psi(z), sum_i alpha_i phi(y_i)> + c sum_i alpha_i
    double max_score_gap = 0.0;
    bool agree = false;      // same output, or both outputs tie within 1e-10
};

KrrPrediction krr_predict(const Task& task, const KrrModel& model, const Vec& x);

struct RiskEstimate {
    double surrogate_excess = 0.0;
    double surrogate_excess_se = 0.0;
    double true_excess = 0.0;
    double true_excess_se = 0.0;
    std::size_t points = 0;
};

// Exact conditional excess risks averaged over the evaluation inputs.
RiskEstimate evaluate_risks(const Surrogate& s, const std::function<Vec(const Vec&)>& score,
                            const SyntheticTask& data, const std::vector<Vec>& eval_inputs, int workers = 1);

// Moment-space Bayes-optimal score t(mu(q(x))), when it exists.
Vec optimal_score(const Surrogate& s, const Vec& q);

void write_dataset_csv(std::ostream& out, const Task& task, const std::vector<Sample>& data);
std::vector<Sample> read_dataset_csv(std::istream& in, const Task& task);
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);

}  // namespace surrocal
