#include "surrocal/calibration.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "surrocal/csv.h"
#include "surrocal/decoding.h"
#include "surrocal/geometry.h"

namespace surrocal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dual_norm(const Vec& x, NormTag norm) {
    return norm == NormTag::L1 ? x.cwiseAbs().maxCoeff() : x.norm();
}

std::vector<Vec> psi_in_stat_coordinates(const Surrogate& s) {
    std::vector<Vec> out;
    for (const auto& p : s.task.psi) out.push_back(s.J.transpose() * p);
    return out;
}

}  // namespace

std::string method_name(CurveMethod m) {
    switch (m) {
        case CurveMethod::BruteForce: return "brute_force";
        case CurveMethod::Exact: return "exact";
        case CurveMethod::LowerBound: return "lower_bound";
        case CurveMethod::UpperCheck: return "upper_check";
        case CurveMethod::Envelope: return "envelope";
        case CurveMethod::LowNoise: return "low_noise";
    }
    return "";
}

void write_curves_csv(std::ostream& out, const std::vector<CalibrationCurve>& curves) {
    out << "epsilon,value,method,task,surrogate\n";
    for (const auto& c : curves)
        for (std::size_t i = 0; i < c.epsilons.size(); ++i)
            out << format_double(c.epsilons[i]) << ',' << format_double(c.values[i]) << ',' << method_name(c.method)
                << (c.variant.empty() ? "" : ":" + c.variant) << ',' << c.task << ',' << c.surrogate << '\n';
}

double calib_exact_binary(const MarginFns& m, double eps, double cost) {
    if (eps < 0.0) throw std::invalid_argument("calib_exact_binary: eps must be nonnegative");
    if (!(cost > 0.0 && cost <= 1.0)) throw std::invalid_argument("calib_exact_binary: cost must lie in (0,1]");
    if (eps > std::min(cost, 2.0 - cost) + 1e-15)
        throw std::invalid_argument("calib_exact_binary: eps exceeds min(c, 2-c)");
    if (eps == 0.0) return 0.0;
    const double center = cost / 2.0;
    const double h0 = m.h(center), g0 = m.dh(center);
    double best = kInf;
    for (double alpha : {-eps, eps}) {
        const double a = (cost + alpha) / 2.0;
        best = std::min(best, m.h(a) - h0 - (a - center) * g0);
    }
    return best;
}

double calib_exact_ova(const MarginFns& m, double eps) {
    if (m.kind != MarginKind::Logistic && m.kind != MarginKind::Exponential && m.kind != MarginKind::Square)
        throw std::invalid_argument("calib_exact_ova: needs a margin with nondecreasing hbar''");
    return 2.0 * calib_exact_binary(m, eps);
}

double calib_exact_hamming(const MarginFns& m, double eps, int k) {
    if (k < 1) throw std::invalid_argument("calib_exact_hamming: k must be positive");
    return k * calib_exact_binary(m, eps);
}

QuadraticExact calib_exact_quadratic(const Task& task, double eps) {
    const MarginalPolytope poly = polytope_of(task);
    if (!poly.full_dimensional())
        throw std::domain_error("exact quadratic calibration needs a full-dimensional marginal polytope (dim " +
                                std::to_string(poly.dim_affine) + " < " + std::to_string(poly.dim_ambient) + ")");
    QuadraticExact r;
    r.threshold = kInf;
    for (std::size_t z = 0; z < task.Z.size(); ++z)
        for (std::size_t w = z + 1; w < task.Z.size(); ++w) {
            double gap = 0.0;
            for (std::size_t y = 0; y < task.Y.size(); ++y)
                gap = std::max(gap, std::abs(task.loss(z, y) - task.loss(w, y)));
            r.threshold = std::min(r.threshold, gap);
        }
    r.valid = eps <= r.threshold;
    if (eps == 0.0) return r;
    double dist = kInf;
    for (std::size_t z = 0; z < task.Z.size(); ++z) dist = std::min(dist, calibration_set_distance(task, z, eps));
    r.value = 0.5 * dist * dist;
    double widest = 0.0;
    for (const auto& [z, w] : adjacent_pairs(task)) widest = std::max(widest, (task.psi[z] - task.psi[w]).squaredNorm());
    r.small_eps_value = widest > 0.0 ? eps * eps / (2.0 * widest) : kInf;
    return r;
}

double lower_bound_generic(double c_psi, double beta, double eps) { return eps * eps / (8.0 * c_psi * c_psi * beta); }

double calib_lower_bound(const Surrogate& s, double eps, LowerBoundVariant variant) {
    const std::vector<Vec> psi = psi_in_stat_coordinates(s);
    const Potential& pot = s.potential;
    switch (variant) {
        case LowerBoundVariant::Generic: {
            double c = 0.0;
            for (const auto& p : psi) c = std::max(c, dual_norm(p, pot.norm));
            return lower_bound_generic(c, pot.beta, eps);
        }
        case LowerBoundVariant::L2Improved: {
            // An L1 modulus is also an L2 modulus since ||x||_2 <= ||x||_1.
            double widest = 0.0;
            for (std::size_t z = 0; z < psi.size(); ++z)
                for (std::size_t w = z + 1; w < psi.size(); ++w) widest = std::max(widest, (psi[z] - psi[w]).squaredNorm());
            return eps * eps / (2.0 * pot.beta * widest);
        }
        case LowerBoundVariant::Crf: {
            double cpsi = 0.0, cphi = 0.0;
            for (const auto& p : psi) cpsi = std::max(cpsi, p.norm());
            for (const auto& f : s.stat) cphi = std::max(cphi, f.norm());
            return eps * eps / (8.0 * cpsi * cpsi * cphi * cphi);
        }
    }
    return 0.0;
}

double lower_bound_at(const MarginFns& m, double eps, int k) {
    if (k < 2) throw std::invalid_argument("lower_bound_at: k must be at least 2");
    return (k - 1) * calib_exact_binary(m, eps / (k - 1));
}

double lower_bound_cl(double eps, int k) {
    if (k < 2) throw std::invalid_argument("lower_bound_cl: k must be at least 2");
    return eps * eps / (8.0 * (k - 1) * (k - 1));
}

double lower_bound_multinomial(double eps) { return eps * eps / 8.0; }

double lower_bound_matching_rows(double eps, int m, double beta) {
    return lower_bound_generic(1.0 / m, beta, eps);
}

std::vector<NamedBound> applicable_lower_bounds(const Surrogate& s, double eps) {
    std::vector<NamedBound> out;
    if (!s.phi_calibrated) return out;
    out.push_back({"generic", calib_lower_bound(s, eps, LowerBoundVariant::Generic)});
    out.push_back({"l2_pairwise", calib_lower_bound(s, eps, LowerBoundVariant::L2Improved)});
    const Task& t = s.task;
    if (s.name == "crf") {
        out.push_back({"crf", calib_lower_bound(s, eps, LowerBoundVariant::Crf)});
        if (t.kind == TaskKind::ZeroOne) out.push_back({"multinomial", lower_bound_multinomial(eps)});
    }
    if (s.margin && t.kind == TaskKind::Ordinal) {
        const MarginFns m = margin_functions(*s.margin);
        const int k = static_cast<int>(t.Z.size());
        const bool convex_zeta = m.kind == MarginKind::Logistic || m.kind == MarginKind::Exponential ||
                                 m.kind == MarginKind::Square;
        if (convex_zeta && eps <= k - 1) out.push_back({"all_thresholds", lower_bound_at(m, eps, k)});
    }
    if (s.name == "cl") out.push_back({"cumulative_link", lower_bound_cl(eps, static_cast<int>(t.Z.size()))});
    return out;
}

std::optional<double> calib_exact(const Surrogate& s, double eps) {
    if (eps < 0.0) throw std::invalid_argument("calib_exact: eps must be nonnegative");
    const Task& t = s.task;
    if (s.margin) {
        const MarginFns m = margin_functions(*s.margin);
        if (!m.calibrated) return std::nullopt;
        const bool convex_zeta = m.kind == MarginKind::Logistic || m.kind == MarginKind::Exponential ||
                                 m.kind == MarginKind::Square;
        switch (t.kind) {
            case TaskKind::CostSensitive:
                if (eps > std::min(t.cost, 2.0 - t.cost)) return std::nullopt;
                return calib_exact_binary(m, eps, t.cost);
            case TaskKind::ZeroOne:
                if (!convex_zeta || eps > 1.0) return std::nullopt;
                return calib_exact_ova(m, eps);
            case TaskKind::Hamming:
                if (!convex_zeta || eps > 1.0) return std::nullopt;
                return calib_exact_hamming(m, eps, t.dim);
            default:
                return std::nullopt;
        }
    }
    if (s.name == "quadratic") {
        try {
            const QuadraticExact q = calib_exact_quadratic(t, eps);
            if (q.valid) return q.value;
        } catch (const std::domain_error&) {
        }
    }
    return std::nullopt;
}

std::function<double(double)> best_known_zeta(const Surrogate& s) {
    // Quadratic: the small-eps closed form, with adjacency solved once.
    double quad_widest = 0.0, quad_threshold = -1.0;
    if (s.name == "quadratic" && polytope_of(s.task).full_dimensional()) {
        const QuadraticExact q = calib_exact_quadratic(s.task, 0.0);
        quad_threshold = q.threshold;
        for (const auto& [z, w] : adjacent_pairs(s.task))
            quad_widest = std::max(quad_widest, (s.task.psi[z] - s.task.psi[w]).squaredNorm());
    }
    return [s, quad_widest, quad_threshold](double eps) {
        double best = 0.0;
        for (const auto& b : applicable_lower_bounds(s, eps)) best = std::max(best, b.value);
        if (s.margin) {
            if (const auto e = calib_exact(s, eps)) best = std::max(best, *e);
        } else if (quad_widest > 0.0 && eps <= quad_threshold) {
            best = std::max(best, eps * eps / (2.0 * quad_widest));
        }
        return best;
    };
}

CalibrationCurve convex_envelope(const CalibrationCurve& curve, bool anchor_origin) {
    std::vector<std::pair<double, double>> pts;
    if (anchor_origin) pts.emplace_back(0.0, 0.0);
    for (std::size_t i = 0; i < curve.epsilons.size(); ++i)
        if (std::isfinite(curve.values[i])) pts.emplace_back(curve.epsilons[i], curve.values[i]);
    std::vector<std::pair<double, double>> hull;
    for (const auto& p : pts) {
        while (hull.size() >= 2) {
            const auto& a = hull[hull.size() - 2];
            const auto& b = hull.back();
            // Drop b when it lies on or above the chord a -> p.
            const double cross = (b.first - a.first) * (p.second - a.second) - (b.second - a.second) * (p.first - a.first);
            if (cross <= 0.0)
                hull.pop_back();
            else
                break;
        }
        hull.push_back(p);
    }
    CalibrationCurve out = curve;
    out.method = CurveMethod::Envelope;
    for (std::size_t i = 0; i < out.epsilons.size(); ++i) {
        if (!std::isfinite(curve.values[i])) continue;
        const double e = out.epsilons[i];
        std::size_t seg = 0;
        while (seg + 1 < hull.size() && hull[seg + 1].first < e) ++seg;
        if (seg + 1 >= hull.size() || hull[seg].first >= e) {
            out.values[i] = seg < hull.size() && hull[seg].first == e ? hull[seg].second : curve.values[i];
            if (seg + 1 < hull.size() && hull[seg + 1].first == e) out.values[i] = hull[seg + 1].second;
            continue;
        }
        const auto& a = hull[seg];
        const auto& b = hull[seg + 1];
        out.values[i] = std::min(curve.values[i], a.second + (b.second - a.second) * (e - a.first) / (b.first - a.first));
    }
    return out;
}

double curve_value(const CalibrationCurve& curve, double eps, bool anchor_origin) {
    const auto& x = curve.epsilons;
    const auto& y = curve.values;
    if (x.empty()) throw std::invalid_argument("curve_value: empty curve");
    if (eps <= x.front()) {
        if (!anchor_origin) return y.front();
        return eps <= 0.0 ? 0.0 : y.front() * eps / x.front();
    }
    if (eps >= x.back()) return y.back();
    const auto it = std::upper_bound(x.begin(), x.end(), eps);
    const std::size_t i = static_cast<std::size_t>(it - x.begin());
    const double t = (eps - x[i - 1]) / (x[i] - x[i - 1]);
    return y[i - 1] + t * (y[i] - y[i - 1]);
}

double low_noise_transform(const std::function<double(double)>& zeta, const NoiseModel& noise, double eps) {
    if (noise.p < 0.0 || !(noise.gamma_p > 0.0)) throw std::invalid_argument("low_noise_transform: need p >= 0, gamma > 0");
    if (noise.p == 0.0) return zeta(eps);
    if (eps <= 0.0) return 0.0;
    const double e = 1.0 / (noise.p + 1.0);
    return std::pow(noise.gamma_p * std::pow(eps, noise.p), e) * zeta(std::pow(eps / noise.gamma_p, e) / 2.0);
}

MarginCertificate hard_margin_certificate(const Surrogate& s, const std::vector<Vec>& scores,
                                          const std::vector<Vec>& conditionals, double zeta_at_delta) {
    if (scores.size() != conditionals.size()) throw std::invalid_argument("hard_margin_certificate: size mismatch");
    MarginCertificate c;
    c.threshold = zeta_at_delta;
    c.predictions_match = true;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        c.max_excess = std::max(c.max_excess, excess_surrogate_risk(s, scores[i], conditionals[i]));
        const std::size_t z = decode_generic(s, scores[i]);
        c.predictions_match = c.predictions_match && excess_bayes_risk(s.task, z, conditionals[i]) <= 1e-12;
    }
    c.certified = c.max_excess < zeta_at_delta;
    return c;
}

InvertedBound risk_bound_invert(const std::function<double(double)>& zeta, double eps_max, double excess) {
    InvertedBound r;
    if (excess <= 0.0) return r;
    if (zeta(eps_max) <= excess) {
        r.epsilon = eps_max;
        r.saturated = true;
        return r;
    }
    double lo = 0.0, hi = eps_max;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * eps_max; ++it) {
        const double mid = 0.5 * (lo + hi);
        (zeta(mid) <= excess ? lo : hi) = mid;
    }
    r.epsilon = lo;
    return r;
}

InvertedBound risk_bound_invert(const CalibrationCurve& curve, double excess) {
    const CalibrationCurve env = convex_envelope(curve, true);
    return risk_bound_invert([&](double e) { return curve_value(env, e, true); }, curve.epsilons.back(), excess);
}

SlopeCheck quadratic_upper_check(const CalibrationCurve& curve) {
    std::vector<double> lx, ly;
    double first = 0.0;
    for (std::size_t i = 0; i < curve.epsilons.size(); ++i) {
        const double e = curve.epsilons[i], v = curve.values[i];
        if (!(e > 0.0) || !(v > 0.0) || !std::isfinite(v)) continue;
        if (lx.empty()) first = e;
        if (e > 10.0 * first * (1.0 + 1e-12)) break;
        lx.push_back(std::log(e));
        ly.push_back(std::log(v));
    }
    SlopeCheck r;
    if (lx.size() < 2) return r;
    const double n = static_cast<double>(lx.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i] / n;
        my += ly[i] / n;
    }
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    r.slope = sxy / sxx;
    r.pass = r.slope >= 2.0 - 0.15;
    return r;
}

double estimate_epsilon0(const std::function<bool(double)>& agree, double eps_max, int iterations) {
    if (agree(eps_max)) return eps_max;
    double lo = 0.0, hi = eps_max;
    for (int it = 0; it < iterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        (agree(mid) ? lo : hi) = mid;
    }
    return lo;
}

}  // namespace surrocal
