#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace surrocal {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using json = nlohmann::json;

enum class SpaceKind { Multiclass, Binary, Multilabel, Ordinal, Relevance, Permutation };

// Finite output set enumerated once in canonical order.
//   Multiclass / Ordinal : {1}, ..., {k}
//   Binary               : {+1}, {-1}
//   Multilabel           : {+1,-1}^k, lexicographic with +1 before -1
//   Relevance            : {0..levels-1}^k, lexicographic increasing
//   Permutation          : sigma[j] = slot of item j (0-based), lexicographic
struct OutputSpace {
    SpaceKind kind = SpaceKind::Multiclass;
    int k = 0;
    int levels = 0;
    std::vector<std::vector<int>> elements;

    std::size_t size() const { return elements.size(); }
    std::size_t index_of(const std::vector<int>& element) const;
    std::string label(std::size_t i) const;
};

OutputSpace make_space(SpaceKind kind, int k, int levels = 0);

enum class TaskKind { ZeroOne, CostSensitive, Hamming, Ordinal, Ndcg, Matching };
enum class OrdinalEmbedding { Cumulative, Simplex };

// A discrete loss together with its affine decomposition
// L(z,y) = <psi(z), phi(y)> + c.
struct Task {
    TaskKind kind = TaskKind::ZeroOne;
    std::string name;
    std::string kind_name;
    json params;
    OutputSpace Z;
    OutputSpace Y;
    std::vector<Vec> psi;
    std::vector<Vec> phi;
    double c = 0.0;
    int dim = 0;

    double cost = 1.0;
    OrdinalEmbedding ordinal = OrdinalEmbedding::Cumulative;
    std::vector<double> gain;      // indexed by relevance level
    std::vector<double> discount;  // indexed by slot

    // Evaluated from the loss definition, never from psi/phi.
    double loss(std::size_t z, std::size_t y) const;
};

// kind: "multiclass", "binary", "multilabel", "ordinal", "ndcg", "matching".
Task build_task(const std::string& kind, const json& params = json::object());
Task task_from_json(const json& j);
json task_to_json(const Task& task);
std::vector<std::string> task_kinds();

double decomposition_residual(const Task& task);

Vec moment(const Task& task, const Vec& q);

double bayes_risk(const Task& task, std::size_t z, const Vec& q);
double excess_bayes_risk(const Task& task, std::size_t z, const Vec& q);

// Same quantities expressed through a moment vector u = mu(q).
double bayes_risk_at(const Task& task, std::size_t z, const Vec& u);
double excess_bayes_risk_at(const Task& task, std::size_t z, const Vec& u);

// argmin_z <psi(z), u>; first minimizer in canonical order, ties within 1e-12 (1 + |u|_1).
std::size_t oracle_prediction(const Task& task, const Vec& u);

bool is_distribution(const Vec& q, double tol = 1e-12);

}  // namespace surrocal
