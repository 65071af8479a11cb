#include "surrocal/losses.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace surrocal {

namespace {

constexpr int kMaxLabels = 12;
constexpr int kMaxBits = 12;
constexpr int kMaxPermutation = 6;
constexpr int kMaxRelevanceItems = 5;
constexpr int kMaxRelevanceLevels = 4;

int require_int(const json& params, const char* key, int fallback, bool required) {
    if (!params.contains(key)) {
        if (required) throw std::invalid_argument(std::string("missing parameter '") + key + "'");
        return fallback;
    }
    if (!params.at(key).is_number_integer())
        throw std::invalid_argument(std::string("parameter '") + key + "' must be an integer");
    return params.at(key).get<int>();
}

void reject_unknown(const json& params, std::initializer_list<const char*> allowed) {
    for (auto it = params.begin(); it != params.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) throw std::invalid_argument("unknown task parameter '" + it.key() + "'");
    }
}

Vec basis(int dim, int i) {
    Vec e = Vec::Zero(dim);
    e(i) = 1.0;
    return e;
}

Vec permutation_matrix(const std::vector<int>& sigma) {
    const int m = static_cast<int>(sigma.size());
    Vec x = Vec::Zero(m * m);
    for (int j = 0; j < m; ++j) x(j * m + sigma[j]) = 1.0;
    return x;
}

double ndcg_normalizer(const Task& t, const std::vector<int>& r) {
    std::vector<double> g(r.size());
    for (std::size_t j = 0; j < r.size(); ++j) g[j] = t.gain[r[j]];
    std::sort(g.begin(), g.end(), std::greater<>());
    double n = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) n += g[j] * t.discount[j];
    return n;
}

}  // namespace

OutputSpace make_space(SpaceKind kind, int k, int levels) {
    OutputSpace s;
    s.kind = kind;
    s.k = k;
    s.levels = levels;
    switch (kind) {
        case SpaceKind::Multiclass:
        case SpaceKind::Ordinal:
            for (int i = 1; i <= k; ++i) s.elements.push_back({i});
            break;
        case SpaceKind::Binary:
            s.k = 1;
            s.elements = {{1}, {-1}};
            break;
        case SpaceKind::Multilabel: {
            const std::size_t n = std::size_t{1} << k;
            for (std::size_t i = 0; i < n; ++i) {
                std::vector<int> e(k);
                for (int j = 0; j < k; ++j) e[j] = ((i >> (k - 1 - j)) & 1u) ? -1 : 1;
                s.elements.push_back(std::move(e));
            }
            break;
        }
        case SpaceKind::Relevance: {
            std::vector<int> e(k, 0);
            while (true) {
                s.elements.push_back(e);
                int j = k - 1;
                while (j >= 0 && e[j] == levels - 1) e[j--] = 0;
                if (j < 0) break;
                ++e[j];
            }
            break;
        }
        case SpaceKind::Permutation: {
            std::vector<int> e(k);
            std::iota(e.begin(), e.end(), 0);
            do s.elements.push_back(e);
            while (std::next_permutation(e.begin(), e.end()));
            break;
        }
    }
    return s;
}

std::size_t OutputSpace::index_of(const std::vector<int>& e) const {
    switch (kind) {
        case SpaceKind::Multiclass:
        case SpaceKind::Ordinal:
            return static_cast<std::size_t>(e.at(0) - 1);
        case SpaceKind::Binary:
            return e.at(0) == 1 ? 0 : 1;
        case SpaceKind::Multilabel: {
            std::size_t i = 0;
            for (int v : e) i = (i << 1) | (v == 1 ? 0u : 1u);
            return i;
        }
        case SpaceKind::Relevance: {
            std::size_t i = 0;
            for (int v : e) i = i * static_cast<std::size_t>(levels) + static_cast<std::size_t>(v);
            return i;
        }
        case SpaceKind::Permutation: {
            // Lehmer code gives the lexicographic rank.
            std::size_t rank = 0;
            const std::size_t m = e.size();
            for (std::size_t j = 0; j < m; ++j) {
                std::size_t smaller = 0;
                for (std::size_t l = j + 1; l < m; ++l) smaller += e[l] < e[j];
                std::size_t f = 1;
                for (std::size_t l = 2; l < m - j; ++l) f *= l;
                rank += smaller * f;
            }
            return rank;
        }
    }
    return 0;
}

std::string OutputSpace::label(std::size_t i) const {
    const auto& e = elements.at(i);
    if (e.size() == 1 && kind != SpaceKind::Multilabel && kind != SpaceKind::Relevance &&
        kind != SpaceKind::Permutation)
        return std::to_string(e[0]);
    std::string s = "(";
    for (std::size_t j = 0; j < e.size(); ++j) {
        if (j) s += ",";
        s += std::to_string(kind == SpaceKind::Permutation ? e[j] + 1 : e[j]);
    }
    return s + ")";
}

double Task::loss(std::size_t zi, std::size_t yi) const {
    const auto& z = Z.elements.at(zi);
    const auto& y = Y.elements.at(yi);
    switch (kind) {
        case TaskKind::ZeroOne:
            return z[0] == y[0] ? 0.0 : 1.0;
        case TaskKind::CostSensitive:
            if (z[0] == y[0]) return 0.0;
            return z[0] == 1 ? cost : 2.0 - cost;
        case TaskKind::Hamming: {
            int miss = 0;
            for (std::size_t j = 0; j < z.size(); ++j) miss += z[j] != y[j];
            return static_cast<double>(miss) / static_cast<double>(z.size());
        }
        case TaskKind::Ordinal:
            return std::abs(z[0] - y[0]);
        case TaskKind::Ndcg: {
            const double n = ndcg_normalizer(*this, y);
            if (n == 0.0) return 1.0;
            double dcg = 0.0;
            for (std::size_t j = 0; j < y.size(); ++j) dcg += gain[y[j]] * discount[z[j]];
            return 1.0 - dcg / n;
        }
        case TaskKind::Matching: {
            int miss = 0;
            for (std::size_t j = 0; j < z.size(); ++j) miss += z[j] != y[j];
            return static_cast<double>(miss) / static_cast<double>(z.size());
        }
    }
    return 0.0;
}

std::vector<std::string> task_kinds() {
    return {"binary", "multiclass", "multilabel", "ordinal", "ndcg", "matching"};
}

Task build_task(const std::string& kind, const json& params_in) {
    const json params = params_in.is_null() ? json::object() : params_in;
    if (!params.is_object()) throw std::invalid_argument("task parameters must be an object");
    Task t;
    t.kind_name = kind;
    t.params = params;

    if (kind == "multiclass") {
        reject_unknown(params, {"k"});
        const int k = require_int(params, "k", 0, true);
        if (k < 2 || k > kMaxLabels) throw std::invalid_argument("multiclass requires 2 <= k <= 12");
        t.kind = TaskKind::ZeroOne;
        t.name = "multiclass_k" + std::to_string(k);
        t.Z = t.Y = make_space(SpaceKind::Multiclass, k);
        t.dim = k;
        t.c = 1.0;
        for (int i = 0; i < k; ++i) {
            t.psi.push_back(-basis(k, i));
            t.phi.push_back(basis(k, i));
        }
    } else if (kind == "binary") {
        reject_unknown(params, {"cost"});
        double cost = 1.0;
        if (params.contains("cost")) {
            if (!params.at("cost").is_number()) throw std::invalid_argument("parameter 'cost' must be a number");
            cost = params.at("cost").get<double>();
        }
        if (!(cost > 0.0 && cost <= 1.0)) throw std::invalid_argument("binary requires cost in (0,1]");
        t.kind = TaskKind::CostSensitive;
        t.cost = cost;
        t.name = cost == 1.0 ? "binary" : "binary_cost";
        t.Z = t.Y = make_space(SpaceKind::Binary, 1);
        t.dim = 2;
        t.c = 0.0;
        t.psi = {Vec(Eigen::Vector2d(0.0, cost)), Vec(Eigen::Vector2d(2.0 - cost, 0.0))};
        t.phi = {basis(2, 0), basis(2, 1)};
    } else if (kind == "multilabel") {
        reject_unknown(params, {"k"});
        const int k = require_int(params, "k", 0, true);
        if (k < 1 || k > kMaxBits) throw std::invalid_argument("multilabel requires 1 <= k <= 12");
        t.kind = TaskKind::Hamming;
        t.name = "multilabel_k" + std::to_string(k);
        t.Z = t.Y = make_space(SpaceKind::Multilabel, k);
        t.dim = k;
        t.c = 0.5;
        for (const auto& e : t.Y.elements) {
            Vec y(k);
            for (int j = 0; j < k; ++j) y(j) = e[j];
            t.phi.push_back(y);
            t.psi.push_back(-y / (2.0 * k));
        }
    } else if (kind == "ordinal") {
        reject_unknown(params, {"k", "embedding"});
        const int k = require_int(params, "k", 0, true);
        if (k < 2 || k > kMaxLabels) throw std::invalid_argument("ordinal requires 2 <= k <= 12");
        std::string emb = params.value("embedding", std::string("cumulative"));
        t.kind = TaskKind::Ordinal;
        t.Z = t.Y = make_space(SpaceKind::Ordinal, k);
        if (emb == "cumulative") {
            t.ordinal = OrdinalEmbedding::Cumulative;
            t.name = "ordinal_k" + std::to_string(k);
            t.dim = k - 1;
            t.c = (k - 1) / 2.0;
            for (int y = 1; y <= k; ++y) {
                Vec p(k - 1);
                for (int j = 1; j < k; ++j) p(j - 1) = y > j ? 1.0 : -1.0;
                t.phi.push_back(p);
                t.psi.push_back(-p / 2.0);
            }
        } else if (emb == "simplex") {
            t.ordinal = OrdinalEmbedding::Simplex;
            t.name = "ordinal_simplex_k" + std::to_string(k);
            t.dim = k;
            t.c = 0.0;
            for (int z = 1; z <= k; ++z) {
                Vec row(k);
                for (int y = 1; y <= k; ++y) row(y - 1) = std::abs(z - y);
                t.psi.push_back(row);
                t.phi.push_back(basis(k, z - 1));
            }
        } else {
            throw std::invalid_argument("ordinal embedding must be 'cumulative' or 'simplex'");
        }
    } else if (kind == "ndcg") {
        reject_unknown(params, {"m", "levels", "gain", "discount"});
        const int m = require_int(params, "m", 0, true);
        const int levels = require_int(params, "levels", 2, false);
        if (m < 2 || m > kMaxRelevanceItems) throw std::invalid_argument("ndcg requires 2 <= m <= 5");
        if (levels < 2 || levels > kMaxRelevanceLevels) throw std::invalid_argument("ndcg requires 2 <= levels <= 4");
        t.kind = TaskKind::Ndcg;
        t.name = "ndcg_m" + std::to_string(m) + "_r" + std::to_string(levels);
        t.Z = make_space(SpaceKind::Permutation, m);
        t.Y = make_space(SpaceKind::Relevance, m, levels);
        t.dim = m;
        t.c = 1.0;
        if (params.contains("gain")) {
            t.gain = params.at("gain").get<std::vector<double>>();
            if (static_cast<int>(t.gain.size()) != levels) throw std::invalid_argument("gain needs one entry per level");
            for (int r = 1; r < levels; ++r)
                if (!(t.gain[r] > t.gain[r - 1])) throw std::invalid_argument("gain must be increasing");
            if (t.gain[0] < 0.0) throw std::invalid_argument("gain must be nonnegative");
        } else {
            for (int r = 0; r < levels; ++r) t.gain.push_back(std::pow(2.0, r) - 1.0);
        }
        if (params.contains("discount")) {
            t.discount = params.at("discount").get<std::vector<double>>();
            if (static_cast<int>(t.discount.size()) != m) throw std::invalid_argument("discount needs one entry per slot");
            for (int j = 1; j < m; ++j)
                if (!(t.discount[j] < t.discount[j - 1])) throw std::invalid_argument("discount must be decreasing");
            if (t.discount[m - 1] <= 0.0) throw std::invalid_argument("discount must be positive");
        } else {
            for (int j = 0; j < m; ++j) t.discount.push_back(1.0 / std::log2(j + 2.0));
        }
        for (const auto& sigma : t.Z.elements) {
            Vec p(m);
            for (int j = 0; j < m; ++j) p(j) = -t.discount[sigma[j]];
            t.psi.push_back(p);
        }
        for (const auto& r : t.Y.elements) {
            const double n = ndcg_normalizer(t, r);
            Vec p = Vec::Zero(m);
            // All-irrelevant lists get phi = 0, so the loss is the constant 1.
            if (n > 0.0)
                for (int j = 0; j < m; ++j) p(j) = t.gain[r[j]] / n;
            t.phi.push_back(p);
        }
    } else if (kind == "matching") {
        reject_unknown(params, {"m"});
        const int m = require_int(params, "m", 0, true);
        if (m < 2 || m > kMaxPermutation) throw std::invalid_argument("matching requires 2 <= m <= 6");
        t.kind = TaskKind::Matching;
        t.name = "matching_m" + std::to_string(m);
        t.Z = t.Y = make_space(SpaceKind::Permutation, m);
        t.dim = m * m;
        t.c = 1.0;
        for (const auto& sigma : t.Y.elements) {
            Vec x = permutation_matrix(sigma);
            t.phi.push_back(x);
            t.psi.push_back(-x / static_cast<double>(m));
        }
    } else {
        throw std::invalid_argument("unsupported task kind '" + kind + "'");
    }
    return t;
}

Task task_from_json(const json& j) {
    if (!j.is_object() || !j.contains("kind")) throw std::invalid_argument("task needs a 'kind'");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (it.key() != "kind" && it.key() != "params" && it.key() != "name")
            throw std::invalid_argument("unknown task key '" + it.key() + "'");
    Task t = build_task(j.at("kind").get<std::string>(), j.value("params", json::object()));
    if (j.contains("name")) t.name = j.at("name").get<std::string>();
    return t;
}

json task_to_json(const Task& task) {
    return json{{"kind", task.kind_name}, {"params", task.params}, {"name", task.name}};
}

double decomposition_residual(const Task& task) {
    double worst = 0.0;
    for (std::size_t z = 0; z < task.Z.size(); ++z)
        for (std::size_t y = 0; y < task.Y.size(); ++y) {
            const double r = task.psi[z].dot(task.phi[y]) + task.c - task.loss(z, y);
            worst = std::max(worst, std::abs(r));
        }
    return worst;
}

bool is_distribution(const Vec& q, double tol) {
    if ((q.array() < -tol).any()) return false;
    return std::abs(q.sum() - 1.0) <= tol;
}

Vec moment(const Task& task, const Vec& q) {
    if (static_cast<std::size_t>(q.size()) != task.Y.size())
        throw std::invalid_argument("distribution size does not match the label space");
    Vec mu = Vec::Zero(task.dim);
    for (std::size_t y = 0; y < task.Y.size(); ++y)
        if (q(y) != 0.0) mu.noalias() += q(y) * task.phi[y];
    return mu;
}

double bayes_risk_at(const Task& task, std::size_t z, const Vec& u) {
    return task.psi.at(z).dot(u) + task.c;
}

double excess_bayes_risk_at(const Task& task, std::size_t z, const Vec& u) {
    const double own = task.psi.at(z).dot(u);
    double best = own;
    for (const auto& p : task.psi) best = std::min(best, p.dot(u));
    return own - best;
}

double bayes_risk(const Task& task, std::size_t z, const Vec& q) {
    return bayes_risk_at(task, z, moment(task, q));
}

double excess_bayes_risk(const Task& task, std::size_t z, const Vec& q) {
    return excess_bayes_risk_at(task, z, moment(task, q));
}

std::size_t oracle_prediction(const Task& task, const Vec& u) {
    std::size_t arg = 0;
    double best = task.psi[0].dot(u);
    // Ties within rounding keep the first output in canonical order.
    const double tol = 1e-12 * (1.0 + u.cwiseAbs().sum());
    for (std::size_t z = 1; z < task.psi.size(); ++z) {
        const double s = task.psi[z].dot(u);
        if (s < best - tol) {
            best = s;
            arg = z;
        }
    }
    return arg;
}

}  // namespace surrocal
