#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "surrocal/surrogates.h"

namespace surrocal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kProbClamp = 1e-12;

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}
double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }
double clamp_prob(double q) { return std::clamp(q, kProbClamp, 1.0 - kProbClamp); }
double logit(double q) {
    q = clamp_prob(q);
    return std::log(q) - std::log1p(-q);
}
bool in_unit(double q) { return q >= 0.0 && q <= 1.0; }

}  // namespace

MarginKind margin_from_name(const std::string& name) {
    if (name == "logistic") return MarginKind::Logistic;
    if (name == "exponential") return MarginKind::Exponential;
    if (name == "square") return MarginKind::Square;
    if (name == "squared_hinge") return MarginKind::SquaredHinge;
    if (name == "modified_huber") return MarginKind::ModifiedHuber;
    if (name == "hinge") return MarginKind::Hinge;
    throw std::invalid_argument("unknown margin loss '" + name + "'");
}

std::string margin_name(MarginKind kind) {
    switch (kind) {
        case MarginKind::Logistic: return "logistic";
        case MarginKind::Exponential: return "exponential";
        case MarginKind::Square: return "square";
        case MarginKind::SquaredHinge: return "squared_hinge";
        case MarginKind::ModifiedHuber: return "modified_huber";
        case MarginKind::Hinge: return "hinge";
    }
    return "";
}

MarginFns margin_functions(MarginKind kind) {
    MarginFns m;
    m.kind = kind;
    switch (kind) {
        case MarginKind::Logistic:
        case MarginKind::Exponential:
            m.beta = 0.25;
            break;
        case MarginKind::Square:
            m.beta = 0.125;
            m.full_line = true;
            break;
        case MarginKind::SquaredHinge:
        case MarginKind::ModifiedHuber:
            m.beta = 0.125;
            m.calibrated = false;
            m.legendre = false;
            break;
        case MarginKind::Hinge:
            throw std::invalid_argument("hinge: link not injective");
    }
    return m;
}

double MarginFns::Phi(double u) const {
    switch (kind) {
        case MarginKind::Logistic: return softplus(-u);
        case MarginKind::Exponential: return std::exp(-u);
        case MarginKind::Square: return (1.0 - u) * (1.0 - u);
        case MarginKind::SquaredHinge: {
            const double r = std::max(1.0 - u, 0.0);
            return r * r;
        }
        case MarginKind::ModifiedHuber:
            if (u >= 1.0) return 0.0;
            if (u <= -1.0) return -4.0 * u;
            return (1.0 - u) * (1.0 - u);
        case MarginKind::Hinge: return std::max(1.0 - u, 0.0);
    }
    return 0.0;
}

double MarginFns::dPhi(double u) const {
    switch (kind) {
        case MarginKind::Logistic: return -sigmoid(-u);
        case MarginKind::Exponential: return -std::exp(-u);
        case MarginKind::Square: return -2.0 * (1.0 - u);
        case MarginKind::SquaredHinge: return -2.0 * std::max(1.0 - u, 0.0);
        case MarginKind::ModifiedHuber:
            if (u >= 1.0) return 0.0;
            if (u <= -1.0) return -4.0;
            return -2.0 * (1.0 - u);
        case MarginKind::Hinge: return u < 1.0 ? -1.0 : 0.0;
    }
    return 0.0;
}

double MarginFns::h(double q) const {
    switch (kind) {
        case MarginKind::Logistic:
            return in_unit(q) ? xlogx(q) + xlogx(1.0 - q) : kInf;
        case MarginKind::Exponential:
            return in_unit(q) ? -2.0 * std::sqrt(q * (1.0 - q)) : kInf;
        case MarginKind::Square:
            return -4.0 * q * (1.0 - q);
        default:
            return in_unit(q) ? -4.0 * q * (1.0 - q) : kInf;
    }
}

double MarginFns::dh(double q) const {
    switch (kind) {
        case MarginKind::Logistic:
            return logit(q);
        case MarginKind::Exponential: {
            const double c = clamp_prob(q);
            return (2.0 * c - 1.0) / std::sqrt(c * (1.0 - c));
        }
        default:
            return 8.0 * q - 4.0;
    }
}

double MarginFns::h_star(double w) const {
    switch (kind) {
        case MarginKind::Logistic: return softplus(w);
        case MarginKind::Exponential: return 0.5 * (w + std::sqrt(w * w + 4.0));
        case MarginKind::Square: return (w + 4.0) * (w + 4.0) / 16.0;
        default: {
            const double q = std::clamp((w + 4.0) / 8.0, 0.0, 1.0);
            return q * w - h(q);
        }
    }
}

double MarginFns::dh_star(double w) const {
    switch (kind) {
        case MarginKind::Logistic: return sigmoid(w);
        case MarginKind::Exponential: return 0.5 * (1.0 + w / std::sqrt(w * w + 4.0));
        case MarginKind::Square: return (w + 4.0) / 8.0;
        default: return std::clamp((w + 4.0) / 8.0, 0.0, 1.0);
    }
}

double MarginFns::link(double q) const {
    switch (kind) {
        case MarginKind::Logistic: return logit(q);
        case MarginKind::Exponential: return 0.5 * logit(q);
        default: return 2.0 * q - 1.0;
    }
}

double MarginFns::link_inv(double v) const {
    switch (kind) {
        case MarginKind::Logistic: return sigmoid(v);
        case MarginKind::Exponential: return sigmoid(2.0 * v);
        case MarginKind::Square: return 0.5 * (v + 1.0);
        default: return std::clamp(0.5 * (v + 1.0), 0.0, 1.0);
    }
}

double MarginFns::excess(double v, double q) const {
    switch (kind) {
        case MarginKind::Logistic: {
            // cross-entropy minus entropy, in nats
            const double s = q * softplus(-v) + (1.0 - q) * softplus(v);
            return std::max(0.0, s + xlogx(q) + xlogx(1.0 - q));
        }
        case MarginKind::Exponential: {
            const double s = q * std::exp(-v) + (1.0 - q) * std::exp(v);
            return std::max(0.0, s - 2.0 * std::sqrt(q * (1.0 - q)));
        }
        case MarginKind::Square: {
            const double d = v - (2.0 * q - 1.0);
            return d * d;
        }
        case MarginKind::SquaredHinge: {
            const double d = 2.0 * q - 1.0 - v;
            const double hi = std::max(v - 1.0, 0.0);
            const double lo = std::min(0.0, v + 1.0);
            return d * d - q * hi * hi - (1.0 - q) * lo * lo;
        }
        case MarginKind::ModifiedHuber: {
            const double t = std::clamp(v, -1.0, 1.0);
            const double d = 2.0 * q - 1.0 - t;
            return d * d + 2.0 * std::abs(d) * std::abs(v - t);
        }
        case MarginKind::Hinge:
            break;
    }
    throw std::invalid_argument("hinge: link not injective");
}

}  // namespace surrocal
