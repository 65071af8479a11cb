#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "config.h"

namespace surrocal::app {

enum ExitCode { kOk = 0, kUsage = 1, kVerifyFailed = 2, kNumerical = 3 };

struct RunContext {
    std::string out_dir;
    std::uint64_t seed = 0;
    int workers = 1;
};

// Each returns a JSON summary and writes its files under ctx.out_dir.
json run_calib(const ExperimentConfig& cfg, const RunContext& ctx);
json run_train(const ExperimentConfig& cfg, const RunContext& ctx);
json list_catalog();

// Epsilons used when the config leaves them empty: 0.05, ..., 0.95 up to the
// largest excess the task can produce.
std::vector<double> default_epsilons(const Task& task);

// Surrogate by name, or std::invalid_argument listing the catalog.
Surrogate surrogate_or_usage_error(const std::string& name, const Task& task);

// 1.5 ||g*||, from the synthetic expansion when the surrogate is the CRF on the
// same kernel, otherwise from kernel ridge regression on a pilot sample.
double default_radius(const Surrogate& s, const SyntheticTask& syn, const KernelSpec& kernel, std::uint64_t seed);

void write_text(const std::string& dir, const std::string& file, const std::string& content);

}  // namespace surrocal::app
