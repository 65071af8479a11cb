#pragma once

#include <optional>
#include <string>
#include <vector>

#include "surrocal/calibration.h"
#include "surrocal/learning.h"

namespace surrocal::app {

struct CalibConfig {
    std::vector<double> epsilons;  // empty: 0.05, 0.10, ..., 0.95 clipped to the task range
    std::vector<std::string> methods = {"exact", "lower_bound", "brute_force", "envelope"};
    GridSpec grid;
    NoiseModel noise;
    std::string compare_surrogate;  // optional second surrogate for bound comparisons
};

struct TrainConfig {
    std::string method = "asgd";  // asgd | krr
    std::vector<long long> n = {100, 1000};
    int seeds = 5;
    std::string kernel = "gaussian";  // gaussian | linear
    std::optional<double> bandwidth;  // default: median heuristic
    double lambda = 1e-3;
    std::optional<double> radius;     // D; default 1.5 ||g*||
    std::string family = "smooth_logit";
    double margin = 0.4;
    int d = 2;
    int eval_points = 2000;
};

struct ExperimentConfig {
    std::string task_kind = "multiclass";
    json task_params = json::object();
    std::string surrogate = "crf";
    CalibConfig calib;
    TrainConfig train;
    std::string out;
};

// Throws std::invalid_argument on unknown keys or ill-typed values.
ExperimentConfig config_from_json(const json& j);
json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::string& path);

}  // namespace surrocal::app
