#include <cstdlib>
#include <iostream>
#include <stdexcept>

#include "CLI11.hpp"
#include "commands.h"
#include "verify.h"

using namespace surrocal;
using namespace surrocal::app;

namespace {

int workers_from_env() {
    const char* env = std::getenv("SURROCAL_WORKERS");
    if (!env || !*env) return 1;
    try {
        const int w = std::stoi(env);
        if (w < 1) throw std::invalid_argument("");
        return w;
    } catch (const std::exception&) {
        throw std::invalid_argument(std::string("SURROCAL_WORKERS must be a positive integer, got '") + env + "'");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"surrocal: calibration functions and learning for structured surrogate losses"};
    app.require_subcommand(1);
    std::string config_path, out_dir, suite = "fast";
    std::uint64_t seed = 0;
    int workers = 0;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* opt = sub->add_option("--config", config_path, "JSON experiment config");
        if (needs_config) opt->required();
        sub->add_option("--out", out_dir, "output directory (overrides config 'out')");
        sub->add_option("--seed", seed, "seed for every random stream");
        sub->add_option("--workers", workers, "worker threads (default: SURROCAL_WORKERS or 1)")
            ->check(CLI::PositiveNumber);
    };
    auto* calib = app.add_subcommand("calib", "compute calibration curves");
    add_common(calib, true);
    auto* train = app.add_subcommand("train", "run a training experiment");
    add_common(train, true);
    auto* verify = app.add_subcommand("verify", "run the invariant suites");
    add_common(verify, false);
    verify->add_option("--suite", suite, "fast or full")->check(CLI::IsMember({"fast", "full"}));
    app.add_subcommand("tasks", "list tasks, surrogates and synthetic families");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        RunContext ctx;
        ctx.seed = seed;
        ctx.workers = workers > 0 ? workers : workers_from_env();
        if (app.got_subcommand("tasks")) {
            std::cout << list_catalog().dump(2) << "\n";
            return kOk;
        }
        if (app.got_subcommand("verify")) {
            const VerifyReport rep = run_verify(suite, seed, ctx.workers);
            const std::string text = rep.to_json().dump(2) + "\n";
            if (out_dir.empty())
                std::cout << text;
            else
                write_text(out_dir, "verify_report.json", text);
            return rep.all_pass() ? kOk : kVerifyFailed;
        }
        const ExperimentConfig cfg = load_config(config_path);
        ctx.out_dir = !out_dir.empty() ? out_dir : (!cfg.out.empty() ? cfg.out : std::string("out"));
        const json summary = app.got_subcommand("calib") ? run_calib(cfg, ctx) : run_train(cfg, ctx);
        std::cout << summary.dump(2) << "\n";
        return kOk;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    }
}
