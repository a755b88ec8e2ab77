#ifndef FSE_CONFIG_HPP
#define FSE_CONFIG_HPP

/**
 * @file config.hpp
 * @brief Run configuration for the command-line tool (JSON with nested sections).
 *
 * Every field has a default, unknown keys are rejected, and `to_json` emits the
 * fully resolved configuration that is stored next to each run's outputs.
 * The schema is documented in the README.
 */

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fse/continuation.hpp"
#include "fse/errors.hpp"
#include "fse/harmonics.hpp"
#include "fse/model.hpp"
#include "fse/shooting.hpp"

namespace fse {

struct SeedConfig {
    std::string kind = "zero";          // zero | linear | snapshot | coefficients | neimark_sacker
    std::string file;                   // snapshot path (snapshot, neimark_sacker)
    std::vector<double> coefficients;   // explicit Z(0) (coefficients)
    double ns_amplitude = 1e-3;         // relative perturbation for neimark_sacker
    double noise = 0.0;                 // Gaussian noise added to the seed, scaled by max(1, ‖Z(0)‖)
};

struct RunConfig {
    ModelSpec model{"duffing", {}, {}};
    int d = 1;
    int e = 1;
    double omega1 = 1.0;
    std::vector<double> ratios;         // ρ_2..ρ_d
    HarmonicList harmonics;             // K_2..K_d
    std::vector<int> samples;           // S_2..S_d, empty for defaults
    int steps = 512;                    // S1
    int deficit_case = 0;               // 0 selects 1 when e >= 1 and 3 when e = 0
    NewtonOptions newton;
    SeedConfig seed;
    ContinuationConfig continuation;
    bool continuation_given = false;
    bool stability_enabled = false;
    int n_ly = 500;
    bool stability_history = true;
    std::string output = "fse_out";
    int workers = 1;
    unsigned long long random_seed = 1;
    std::vector<int> bench_workers{1, 2, 4, 8};
    int bench_repeats = 3;

    int resolved_case() const { return deficit_case != 0 ? deficit_case : (e >= 1 ? 1 : 3); }

    FrequencyVector frequencies() const {
        Vector omega(d);
        omega(0) = omega1;
        for (int j = 2; j <= d; ++j) omega(j - 1) = ratios[static_cast<std::size_t>(j - 2)] * omega1;
        return FrequencyVector(omega, e);
    }

    HarmonicScheme scheme() const { return HarmonicScheme::build(harmonics, samples); }

    ShootingOptions shooting_options() const {
        ShootingOptions o;
        o.newmark.steps = steps;
        o.workers = workers;
        return o;
    }

    SecondOrderModel build_model() const { return make_model(model); }

    /// Model at a continuation parameter value (for model-parameter branches).
    ModelFactory factory() const {
        if (continuation.parameter == "omega1") return {};
        ModelSpec spec = model;
        const std::string name = continuation.parameter;
        return [spec, name](double p) {
            ModelSpec s = spec;
            s.params[name] = p;
            return make_model(s);
        };
    }
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <class T>
void read_if(const nlohmann::json& j, const char* key, T& target) {
    if (j.contains(key)) target = j.at(key).get<T>();
}

} // namespace detail

/**
 * Validates dimensions and the deficit-case rules before any computation.
 * Also builds the model and scheme once so that their own checks (Nyquist,
 * parameter ranges) surface as configuration errors.
 */
inline void validate(const RunConfig& c) {
    if (c.d < 1) throw ConfigError("d must be at least 1");
    if (c.e < 0 || c.e > c.d) throw ConfigError("e must satisfy 0 <= e <= d");
    if (!(c.omega1 > 0.0)) throw ConfigError("omega1 must be positive");
    if (static_cast<int>(c.ratios.size()) != c.d - 1)
        throw ConfigError("need d-1 = " + std::to_string(c.d - 1) + " frequency ratios");
    for (double r : c.ratios)
        if (!(r > 0.0)) throw ConfigError("frequency ratios must be positive");
    if (static_cast<int>(c.harmonics.size()) != c.d - 1)
        throw ConfigError("need d-1 = " + std::to_string(c.d - 1) + " harmonic lists");
    if (!c.samples.empty() && static_cast<int>(c.samples.size()) != c.d - 1)
        throw ConfigError("samples must be empty or have d-1 entries");
    if (c.steps < 2) throw ConfigError("steps (S1) must be at least 2");
    if (c.workers < 1) throw ConfigError("workers must be at least 1");
    if (c.n_ly < 10) throw ConfigError("n_ly must be at least 10");
    if (c.deficit_case < 0 || c.deficit_case > 3) throw ConfigError("case must be 1, 2 or 3");
    for (const auto& f : c.model.forcing)
        if (f.index < 1 || f.index > c.e)
            throw ConfigError("forcing frequency index " + std::to_string(f.index) + " must lie in 1..e");
    const auto model = c.build_model();
    (void)c.scheme();
    const auto omega = c.frequencies();
    (void)deficit_setup(c.resolved_case(), omega);
    if (c.continuation_given) {
        ContinuationConfig cc = c.continuation;
        cc.deficit_case = c.resolved_case();
        validate_continuation(cc, omega);
        if (cc.parameter != "omega1") (void)c.factory()(cc.p_start);
        if (cc.amplitude_dof < 0 || cc.amplitude_dof >= model.n) throw ConfigError("amplitude_dof out of range");
    }
    static const std::set<std::string> seeds{"zero", "linear", "snapshot", "coefficients", "neimark_sacker"};
    if (!seeds.count(c.seed.kind)) throw ConfigError("unknown seed kind '" + c.seed.kind + "'");
    if ((c.seed.kind == "snapshot" || c.seed.kind == "neimark_sacker") && c.seed.file.empty())
        throw ConfigError("seed kind '" + c.seed.kind + "' needs a file");
    for (int w : c.bench_workers)
        if (w < 1) throw ConfigError("bench worker counts must be positive");
}

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
        detail::check_keys(j, {"model", "torus", "solve", "seed", "continuation", "stability", "output", "workers",
                               "random_seed", "bench"},
                           "config");
        if (j.contains("model")) {
            const auto& m = j.at("model");
            detail::check_keys(m, {"name", "params", "forcing"}, "model");
            detail::read_if(m, "name", c.model.name);
            if (m.contains("params")) c.model.params = m.at("params").get<ParamMap>();
            if (m.contains("forcing")) {
                c.model.forcing.clear();
                for (const auto& f : m.at("forcing")) {
                    detail::check_keys(f, {"amplitude", "index", "dof"}, "forcing entry");
                    ForcingSpec fs;
                    detail::read_if(f, "amplitude", fs.amplitude);
                    detail::read_if(f, "index", fs.index);
                    detail::read_if(f, "dof", fs.dof);
                    c.model.forcing.push_back(fs);
                }
            }
        }
        if (j.contains("torus")) {
            const auto& t = j.at("torus");
            detail::check_keys(t, {"d", "e", "omega1", "ratios", "harmonics", "samples", "steps", "case"}, "torus");
            detail::read_if(t, "d", c.d);
            detail::read_if(t, "e", c.e);
            detail::read_if(t, "omega1", c.omega1);
            detail::read_if(t, "ratios", c.ratios);
            detail::read_if(t, "harmonics", c.harmonics);
            detail::read_if(t, "samples", c.samples);
            detail::read_if(t, "steps", c.steps);
            detail::read_if(t, "case", c.deficit_case);
        }
        if (j.contains("solve")) {
            const auto& s = j.at("solve");
            detail::check_keys(s, {"epsilon", "max_iterations", "max_halvings", "rank_tolerance"}, "solve");
            detail::read_if(s, "epsilon", c.newton.epsilon);
            detail::read_if(s, "max_iterations", c.newton.max_iterations);
            detail::read_if(s, "max_halvings", c.newton.max_halvings);
            detail::read_if(s, "rank_tolerance", c.newton.rank_tolerance);
        }
        if (j.contains("seed")) {
            const auto& s = j.at("seed");
            detail::check_keys(s, {"kind", "file", "coefficients", "ns_amplitude", "noise"}, "seed");
            detail::read_if(s, "kind", c.seed.kind);
            detail::read_if(s, "file", c.seed.file);
            detail::read_if(s, "coefficients", c.seed.coefficients);
            detail::read_if(s, "ns_amplitude", c.seed.ns_amplitude);
            detail::read_if(s, "noise", c.seed.noise);
        }
        if (j.contains("continuation")) {
            const auto& s = j.at("continuation");
            c.continuation_given = true;
            detail::check_keys(s,
                               {"parameter", "start", "end", "s0", "s_min", "s_max", "max_arc", "grow", "shrink",
                                "max_retries", "max_points", "max_corrector_iterations", "epsilon",
                                "parameter_fd_step", "amplitude_dof", "amplitude_subsamples"},
                               "continuation");
            auto& cc = c.continuation;
            detail::read_if(s, "parameter", cc.parameter);
            detail::read_if(s, "start", cc.p_start);
            detail::read_if(s, "end", cc.p_end);
            detail::read_if(s, "s0", cc.step.s0);
            detail::read_if(s, "s_min", cc.step.s_min);
            detail::read_if(s, "s_max", cc.step.s_max);
            detail::read_if(s, "max_arc", cc.step.max_arc);
            detail::read_if(s, "grow", cc.step.grow);
            detail::read_if(s, "shrink", cc.step.shrink);
            detail::read_if(s, "max_retries", cc.step.max_retries);
            detail::read_if(s, "max_points", cc.step.max_points);
            detail::read_if(s, "max_corrector_iterations", cc.step.max_corrector_iterations);
            detail::read_if(s, "epsilon", cc.step.epsilon);
            detail::read_if(s, "parameter_fd_step", cc.parameter_fd_step);
            detail::read_if(s, "amplitude_dof", cc.amplitude_dof);
            detail::read_if(s, "amplitude_subsamples", cc.amplitude_subsamples);
        }
        if (j.contains("stability")) {
            const auto& s = j.at("stability");
            detail::check_keys(s, {"enabled", "n_ly", "history"}, "stability");
            detail::read_if(s, "enabled", c.stability_enabled);
            detail::read_if(s, "n_ly", c.n_ly);
            detail::read_if(s, "history", c.stability_history);
        }
        if (j.contains("bench")) {
            const auto& s = j.at("bench");
            detail::check_keys(s, {"workers", "repeats"}, "bench");
            detail::read_if(s, "workers", c.bench_workers);
            detail::read_if(s, "repeats", c.bench_repeats);
        }
        detail::read_if(j, "output", c.output);
        detail::read_if(j, "workers", c.workers);
        detail::read_if(j, "random_seed", c.random_seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    c.continuation.deficit_case = c.resolved_case();
    c.continuation.stability = c.stability_enabled;
    c.continuation.n_ly = c.n_ly;
    return c;
}

/// Fully resolved configuration, including every default.
inline nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json j;
    auto forcing = nlohmann::json::array();
    for (const auto& f : c.model.forcing) forcing.push_back({{"amplitude", f.amplitude}, {"index", f.index}, {"dof", f.dof}});
    j["model"] = {{"name", c.model.name}, {"params", c.model.params}, {"forcing", forcing}};
    const HarmonicScheme scheme = c.scheme();
    j["torus"] = {{"d", c.d},           {"e", c.e},           {"omega1", c.omega1},
                  {"ratios", c.ratios}, {"harmonics", c.harmonics}, {"samples", scheme.s_list},
                  {"steps", c.steps},   {"case", c.resolved_case()}};
    j["solve"] = {{"epsilon", c.newton.epsilon},
                  {"max_iterations", c.newton.max_iterations},
                  {"max_halvings", c.newton.max_halvings},
                  {"rank_tolerance", c.newton.rank_tolerance}};
    j["seed"] = {{"kind", c.seed.kind},
                 {"file", c.seed.file},
                 {"coefficients", c.seed.coefficients},
                 {"ns_amplitude", c.seed.ns_amplitude},
                 {"noise", c.seed.noise}};
    if (c.continuation_given) {
        const auto& cc = c.continuation;
        j["continuation"] = {{"parameter", cc.parameter},
                             {"start", cc.p_start},
                             {"end", cc.p_end},
                             {"s0", cc.step.s0},
                             {"s_min", cc.step.s_min},
                             {"s_max", cc.step.s_max},
                             {"max_arc", cc.step.max_arc},
                             {"grow", cc.step.grow},
                             {"shrink", cc.step.shrink},
                             {"max_retries", cc.step.max_retries},
                             {"max_points", cc.step.max_points},
                             {"max_corrector_iterations", cc.step.max_corrector_iterations},
                             {"epsilon", cc.step.epsilon},
                             {"parameter_fd_step", cc.parameter_fd_step},
                             {"amplitude_dof", cc.amplitude_dof},
                             {"amplitude_subsamples", cc.amplitude_subsamples}};
    }
    j["stability"] = {{"enabled", c.stability_enabled}, {"n_ly", c.n_ly}, {"history", c.stability_history}};
    j["bench"] = {{"workers", c.bench_workers}, {"repeats", c.bench_repeats}};
    j["output"] = c.output;
    j["workers"] = c.workers;
    j["random_seed"] = c.random_seed;
    return j;
}

} // namespace fse

#endif
