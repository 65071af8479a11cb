#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "surrocal/surrogates.h"

namespace surrocal {

enum class CurveMethod { BruteForce, Exact, LowerBound, UpperCheck, Envelope, LowNoise };

std::string method_name(CurveMethod m);

// Sampled calibration function. Epsilons are sorted and positive.
struct CalibrationCurve {
    std::vector<double> epsilons;
    std::vector<double> values;
    CurveMethod method = CurveMethod::BruteForce;
    std::string variant;  // e.g. the lower bound's name; appended to the method column
    std::string task;
    std::string surrogate;
};

void write_curves_csv(std::ostream& out, const std::vector<CalibrationCurve>& curves);

struct NoiseModel {
    double p = 0.0;
    double gamma_p = 1.0;
    std::optional<double> hard_margin_delta;
};

// ---------------------------------------------------------------------------
// Brute force.
//
// Grid over distributions q (all compositions of N over Y, deduplicated by
// moment) times a grid over scores v (link images of the q-grid plus a box
// around them inflated by `box_inflation`). For every epsilon the smallest
// delta_s(v,q) over pairs with delta_l(d(v),q) >= eps is kept, then refined
// by a seeded local search that never leaves the feasible set.
// ---------------------------------------------------------------------------

struct GridSpec {
    int simplex_resolution = 0;  // 0: 2000 for |Y|=2, 60 for |Y|<=4, 20 for |Y|<=8, 8 beyond
    int box_points = 0;          // per dimension; 0: automatic
    double box_inflation = 3.0;
    bool polish = true;
    int polish_evaluations = 20000;
    int polish_candidates = 6;
    int workers = 1;
};

struct BruteForcePoint {
    double epsilon = 0.0;
    double value = 0.0;       // +inf when no grid pair is feasible
    double grid_value = 0.0;  // before local refinement
    bool feasible = false;
    Vec q;
    Vec v;
};

struct BruteForceReport {
    std::vector<BruteForcePoint> points;
    std::size_t distributions = 0;
    std::size_t moments = 0;
    std::size_t scores = 0;
    double q_step = 0.0;
    double max_polish_gain = 0.0;  // largest grid_value - value, the grid error actually observed
};

BruteForceReport calib_brute_force_curve(const Surrogate& s, const std::vector<double>& epsilons,
                                         const GridSpec& grid = {});
double calib_brute_force(const Surrogate& s, double eps, const GridSpec& grid = {});

// ---------------------------------------------------------------------------
// Closed forms. Margin potentials live on q = P(y = +1).
// ---------------------------------------------------------------------------

// min over alpha in {-eps, +eps} of D_hbar((c + alpha)/2, c/2).
double calib_exact_binary(const MarginFns& m, double eps, double cost = 1.0);
// 2 * zeta_bar(eps); needs hbar'' nondecreasing (logistic, exponential, square).
double calib_exact_ova(const MarginFns& m, double eps);
double calib_exact_hamming(const MarginFns& m, double eps, int k);

struct QuadraticExact {
    double value = 0.0;
    double small_eps_value = 0.0;  // eps^2 / (2 max over adjacent pairs ||dpsi||^2)
    double threshold = 0.0;        // min_{z != z'} ||L_z - L_z'||_inf
    bool valid = false;            // eps <= threshold
};

// Throws std::domain_error when the marginal polytope is not full-dimensional.
QuadraticExact calib_exact_quadratic(const Task& task, double eps);

enum class LowerBoundVariant { Generic, L2Improved, Crf };

// eps^2 / (8 c_psi^2 beta), eps^2 / (2 beta max ||dpsi||^2), eps^2 / (8 c_psi^2 c_phi^2).
// psi is read in the surrogate's own moment coordinates (J^T psi); norms follow
// the potential's tag (dual norm for c_psi).
double calib_lower_bound(const Surrogate& s, double eps, LowerBoundVariant variant);
double lower_bound_generic(double c_psi, double beta, double eps);
double lower_bound_at(const MarginFns& m, double eps, int k);
double lower_bound_cl(double eps, int k);
double lower_bound_multinomial(double eps);
// Row-wise softmax on permutation matrices: c_psi = 1/m in the sup norm.
double lower_bound_matching_rows(double eps, int m, double beta);

struct NamedBound {
    std::string name;
    double value = 0.0;
};

// Every lower bound that applies to the surrogate (empty when it is not
// phi-calibrated): generic, l2_pairwise, crf, multinomial, all_thresholds,
// cumulative_link.
std::vector<NamedBound> applicable_lower_bounds(const Surrogate& s, double eps);

// Closed form when one is known: binary margins, one-vs-all, independent
// classifiers, and quadratic on full-dimensional polytopes below the threshold.
std::optional<double> calib_exact(const Surrogate& s, double eps);

// Pointwise largest of the exact value (when known) and the lower bounds,
// with per-surrogate precomputation done once.
std::function<double(double)> best_known_zeta(const Surrogate& s);

// Greatest convex minorant of the sampled points, evaluated at the same epsilons.
CalibrationCurve convex_envelope(const CalibrationCurve& curve, bool anchor_origin = false);

// Piecewise-linear interpolation of a curve, zero below its first point when anchored.
double curve_value(const CalibrationCurve& curve, double eps, bool anchor_origin = true);

// zeta^(p)(eps) = (gamma eps^p)^(1/(p+1)) * zeta((eps/gamma)^(1/(p+1)) / 2); p = 0 returns zeta(eps).
double low_noise_transform(const std::function<double(double)>& zeta, const NoiseModel& noise, double eps);

struct MarginCertificate {
    bool certified = false;          // every delta_s below zeta(delta)
    bool predictions_match = false;  // decoded outputs are Bayes optimal
    double max_excess = 0.0;
    double threshold = 0.0;
};

MarginCertificate hard_margin_certificate(const Surrogate& s, const std::vector<Vec>& scores,
                                          const std::vector<Vec>& conditionals, double zeta_at_delta);

struct InvertedBound {
    double epsilon = 0.0;
    bool saturated = false;
};

// sup{eps : zeta(eps) <= excess} by bisection on the convexified curve.
InvertedBound risk_bound_invert(const CalibrationCurve& curve, double surrogate_excess);
InvertedBound risk_bound_invert(const std::function<double(double)>& zeta, double eps_max, double surrogate_excess);

struct SlopeCheck {
    double slope = 0.0;
    bool pass = false;
};

// Log-log slope over the first decade of epsilon; passes when slope >= 1.85.
SlopeCheck quadratic_upper_check(const CalibrationCurve& curve);

// Largest eps (bisection over (0, eps_max]) where `agree(eps)` holds, assuming
// agreement on an initial interval.
double estimate_epsilon0(const std::function<bool(double)>& agree, double eps_max, int iterations = 20);

}  // namespace surrocal
