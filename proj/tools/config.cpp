#include "config.h"

#include <fstream>
#include <initializer_list>
#include <stdexcept>

namespace surrocal::app {

namespace {

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) throw std::invalid_argument("unknown config key '" + where + "." + it.key() + "'");
    }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument("config key '" + where + "." + key + "' has the wrong type");
    }
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
    reject_unknown(j, "config", {"task", "surrogate", "calib", "train", "out"});
    ExperimentConfig c;
    if (j.contains("task")) {
        const json& t = j.at("task");
        reject_unknown(t, "task", {"kind", "params"});
        read(t, "kind", c.task_kind, "task");
        if (t.contains("params")) {
            if (!t.at("params").is_object()) throw std::invalid_argument("task.params must be an object");
            c.task_params = t.at("params");
        }
    }
    read(j, "surrogate", c.surrogate, "config");
    read(j, "out", c.out, "config");
    if (j.contains("calib")) {
        const json& k = j.at("calib");
        reject_unknown(k, "calib", {"epsilons", "methods", "grid", "noise", "compare_surrogate"});
        read(k, "epsilons", c.calib.epsilons, "calib");
        read(k, "methods", c.calib.methods, "calib");
        read(k, "compare_surrogate", c.calib.compare_surrogate, "calib");
        for (const auto& m : c.calib.methods)
            if (m != "exact" && m != "lower_bound" && m != "brute_force" && m != "envelope" && m != "low_noise")
                throw std::invalid_argument("unknown calib method '" + m +
                                            "' (exact, lower_bound, brute_force, envelope, low_noise)");
        if (k.contains("grid")) {
            const json& g = k.at("grid");
            reject_unknown(g, "calib.grid",
                           {"simplex_resolution", "box_points", "box_inflation", "polish", "polish_evaluations",
                            "polish_candidates"});
            read(g, "simplex_resolution", c.calib.grid.simplex_resolution, "calib.grid");
            read(g, "box_points", c.calib.grid.box_points, "calib.grid");
            read(g, "box_inflation", c.calib.grid.box_inflation, "calib.grid");
            read(g, "polish", c.calib.grid.polish, "calib.grid");
            read(g, "polish_evaluations", c.calib.grid.polish_evaluations, "calib.grid");
            read(g, "polish_candidates", c.calib.grid.polish_candidates, "calib.grid");
        }
        if (k.contains("noise")) {
            const json& n = k.at("noise");
            reject_unknown(n, "calib.noise", {"p", "gamma", "hard_margin_delta"});
            read(n, "p", c.calib.noise.p, "calib.noise");
            read(n, "gamma", c.calib.noise.gamma_p, "calib.noise");
            if (n.contains("hard_margin_delta")) {
                double d = 0.0;
                read(n, "hard_margin_delta", d, "calib.noise");
                c.calib.noise.hard_margin_delta = d;
            }
        }
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        reject_unknown(t, "train",
                       {"method", "n", "seeds", "kernel", "bandwidth", "lambda", "radius", "family", "margin", "d",
                        "eval_points"});
        read(t, "method", c.train.method, "train");
        read(t, "n", c.train.n, "train");
        read(t, "seeds", c.train.seeds, "train");
        read(t, "kernel", c.train.kernel, "train");
        read(t, "lambda", c.train.lambda, "train");
        read(t, "family", c.train.family, "train");
        read(t, "margin", c.train.margin, "train");
        read(t, "d", c.train.d, "train");
        read(t, "eval_points", c.train.eval_points, "train");
        if (t.contains("bandwidth")) {
            double b = 0.0;
            read(t, "bandwidth", b, "train");
            c.train.bandwidth = b;
        }
        if (t.contains("radius")) {
            double r = 0.0;
            read(t, "radius", r, "train");
            c.train.radius = r;
        }
        if (c.train.method != "asgd" && c.train.method != "krr")
            throw std::invalid_argument("train.method must be 'asgd' or 'krr'");
        if (c.train.kernel != "gaussian" && c.train.kernel != "linear")
            throw std::invalid_argument("train.kernel must be 'gaussian' or 'linear'");
        if (c.train.seeds < 1) throw std::invalid_argument("train.seeds must be at least 1");
        for (long long n : c.train.n)
            if (n < 1) throw std::invalid_argument("train.n entries must be at least 1");
    }
    return c;
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["task"] = {{"kind", c.task_kind}, {"params", c.task_params}};
    j["surrogate"] = c.surrogate;
    json calib;
    calib["epsilons"] = c.calib.epsilons;
    calib["methods"] = c.calib.methods;
    calib["compare_surrogate"] = c.calib.compare_surrogate;
    calib["grid"] = {{"simplex_resolution", c.calib.grid.simplex_resolution},
                     {"box_points", c.calib.grid.box_points},
                     {"box_inflation", c.calib.grid.box_inflation},
                     {"polish", c.calib.grid.polish},
                     {"polish_evaluations", c.calib.grid.polish_evaluations},
                     {"polish_candidates", c.calib.grid.polish_candidates}};
    json noise = {{"p", c.calib.noise.p}, {"gamma", c.calib.noise.gamma_p}};
    if (c.calib.noise.hard_margin_delta) noise["hard_margin_delta"] = *c.calib.noise.hard_margin_delta;
    calib["noise"] = noise;
    j["calib"] = calib;
    json train = {{"method", c.train.method}, {"n", c.train.n},         {"seeds", c.train.seeds},
                  {"kernel", c.train.kernel}, {"lambda", c.train.lambda}, {"family", c.train.family},
                  {"margin", c.train.margin}, {"d", c.train.d},          {"eval_points", c.train.eval_points}};
    if (c.train.bandwidth) train["bandwidth"] = *c.train.bandwidth;
    if (c.train.radius) train["radius"] = *c.train.radius;
    j["train"] = train;
    j["out"] = c.out;
    return j;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::invalid_argument("config '" + path + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

}  // namespace surrocal::app
