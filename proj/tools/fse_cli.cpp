// Command-line front end: solve, continue, stability, check, bench.
//
// Exit codes: 0 success, 1 configuration error, 2 numerical failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fse/fse.hpp"

namespace fs = std::filesystem;
using namespace fse;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

RunConfig load_config(const std::string& path, const std::string& output, int workers) {
    RunConfig cfg = path.empty() ? RunConfig{} : config_from_json(read_json(path));
    if (!output.empty()) cfg.output = output;
    if (workers > 0) cfg.workers = workers;
    validate(cfg);
    return cfg;
}

fs::path prepare_output(const RunConfig& cfg) {
    fs::path dir(cfg.output);
    fs::create_directories(dir);
    write_json(dir / "resolved_config.json", config_to_json(cfg));
    return dir;
}

void check_snapshot_scheme(const Snapshot& s, const RunConfig& cfg, const SecondOrderModel& model) {
    if (s.n != model.n) throw ConfigError("snapshot has n = " + std::to_string(s.n) + ", model has n = " + std::to_string(model.n));
    if (s.harmonics != cfg.harmonics) throw ConfigError("snapshot harmonics differ from the configured harmonics");
}

TorusCoefficients build_seed(const RunConfig& cfg, const SecondOrderModel& model, const HarmonicScheme& scheme) {
    const FrequencyVector omega = cfg.frequencies();
    TorusCoefficients seed{Vector::Zero(2 * model.n * scheme.u_tilde), omega};
    const auto& sc = cfg.seed;
    if (sc.kind == "linear") {
        SecondOrderModel lin = model;
        lin.nonlinear_force = nullptr;
        seed = linear_quasiperiodic_response(lin, omega, scheme);
    } else if (sc.kind == "snapshot") {
        const Snapshot s = read_snapshot(sc.file);
        check_snapshot_scheme(s, cfg, model);
        seed = s.coeffs;
    } else if (sc.kind == "coefficients") {
        if (static_cast<Eigen::Index>(sc.coefficients.size()) != seed.z0.size())
            throw ConfigError("seed coefficients must have length 2n*U~ = " + std::to_string(seed.z0.size()));
        seed.z0 = Eigen::Map<const Vector>(sc.coefficients.data(), seed.z0.size());
    } else if (sc.kind == "neimark_sacker") {
        const Snapshot s = read_snapshot(sc.file);
        if (s.coeffs.omega.d() != 1) throw ConfigError("neimark_sacker seed needs a periodic (d = 1) snapshot");
        const auto periodic_scheme = HarmonicScheme::build({});
        ShootingOptions o = cfg.shooting_options();
        o.newmark.steps = s.steps;
        const auto ev = evaluate(model, s.coeffs, periodic_scheme, o);
        seed = neimark_sacker_seed(s.coeffs, ev.batch.sensitivity_blocks.front(), scheme, sc.ns_amplitude);
    }
    if (sc.noise > 0.0) {
        std::mt19937_64 rng(cfg.random_seed);
        std::normal_distribution<double> normal(0.0, sc.noise * std::max(1.0, seed.z0.norm()));
        for (Eigen::Index i = 0; i < seed.z0.size(); ++i) seed.z0(i) += normal(rng);
    }
    return seed;
}

void print_report(const StabilityReport& rep) {
    std::cout << "stability: " << rep.flag << " (max exponent " << rep.max_exponent << ", band " << rep.band << ")\n";
    std::cout << "exponents:";
    for (Eigen::Index i = 0; i < rep.exponents.size(); ++i) std::cout << ' ' << rep.exponents(i);
    std::cout << '\n';
}

int cmd_solve(const RunConfig& cfg) {
    const auto dir = prepare_output(cfg);
    const auto model = cfg.build_model();
    const auto scheme = cfg.scheme();
    const auto seed = build_seed(cfg, model, scheme);
    const auto setup = deficit_setup(cfg.resolved_case(), seed.omega);
    ShootingSystem system(model, scheme, cfg.shooting_options(), setup, seed.omega);

    CorrectionResult res;
    try {
        res = newton_correct(system, seed, cfg.newton);
    } catch (const NonConvergence& e) {
        std::cerr << "solve failed: " << e.what() << '\n';
        return kExitNumerical;
    }
    {
        std::ofstream log(dir / "convergence.csv");
        log << "iteration,residual_norm\n";
        for (std::size_t i = 0; i < res.history.size(); ++i) log << i << ',' << format_double(res.history[i]) << '\n';
    }
    Snapshot snap{cfg.harmonics, scheme.s_list, cfg.steps, model.n, res.coeffs, "omega1", res.coeffs.omega[1],
                  res.residual_norm};
    write_snapshot(dir / "snapshot.json", snap);
    std::cout << "converged in " << res.iterations << " iterations, residual " << res.residual_norm << '\n';
    std::cout << "omega:";
    for (int i = 1; i <= res.coeffs.omega.d(); ++i) std::cout << ' ' << std::setprecision(12) << res.coeffs.omega[i];
    std::cout << '\n';
    if (cfg.stability_enabled) {
        auto rep = analyze_stability(res.evaluation, res.coeffs, scheme, cfg.n_ly);
        write_json(dir / "stability.json", stability_to_json(rep));
        print_report(rep);
    }
    std::cout << "wrote " << (dir / "snapshot.json").string() << '\n';
    return 0;
}

int cmd_continue(const RunConfig& cfg) {
    if (!cfg.continuation_given) throw ConfigError("config has no continuation section");
    const auto dir = prepare_output(cfg);
    const auto model = cfg.build_model();
    const auto scheme = cfg.scheme();
    const auto seed = build_seed(cfg, model, scheme);
    const auto branch = run_branch(model, cfg.factory(), seed, scheme, cfg.shooting_options(), cfg.continuation);
    write_branch_csv(dir / "branch.csv", branch, cfg.d);
    write_json(dir / "branch.json", branch_sidecar(branch, scheme, cfg.steps, model.n, cfg.continuation.parameter));
    std::cout << branch.points.size() << " points, termination: " << branch.termination << '\n';
    std::cout << "wrote " << (dir / "branch.csv").string() << '\n';
    if (branch.seed_failed) return kExitNumerical;
    const auto& t = branch.termination;
    if (t.rfind("step failure", 0) == 0 || t.rfind("singular tangent", 0) == 0) return kExitNumerical;
    return 0;
}

int cmd_stability(const RunConfig& cfg, const std::string& snapshot_path) {
    const auto dir = prepare_output(cfg);
    const auto model = cfg.build_model();
    const auto scheme = cfg.scheme();
    const Snapshot snap = read_snapshot(snapshot_path.empty() ? cfg.seed.file : snapshot_path);
    check_snapshot_scheme(snap, cfg, model);
    ShootingOptions o = cfg.shooting_options();
    o.newmark.steps = snap.steps;
    const auto ev = evaluate(model, snap.coeffs, scheme, o);
    auto rep = analyze_stability(ev, snap.coeffs, scheme, cfg.n_ly);
    if (scheme.d > 1)
        rep.interpolation_residual = interpolation_residual(model, snap.coeffs, scheme,
                                                            transition_matrix_field(ev.batch, snap.coeffs.omega, scheme),
                                                            o.newmark);
    write_json(dir / "stability.json", stability_to_json(rep));
    if (cfg.stability_history && rep.history.rows() > 0) write_exponent_history(dir / "exponent_history.csv", rep);
    print_report(rep);
    return 0;
}

int cmd_check(const RunConfig& cfg, const std::string& fault) {
    CheckOptions opts;
    if (fault == "rotation-sign") opts.break_rotation_sign = true;
    else if (!fault.empty()) throw ConfigError("unknown fault '" + fault + "' (known: rotation-sign)");
    opts.workers = std::max(cfg.workers, 4);
    opts.seed = cfg.random_seed;
    const auto items = run_checks(cfg.build_model(), opts);
    bool all = true;
    for (const auto& it : items) {
        std::cout << (it.passed ? "PASS " : "FAIL ") << it.name << "  value=" << it.value << " tol=" << it.tolerance;
        if (!it.detail.empty()) std::cout << "  (" << it.detail << ')';
        std::cout << '\n';
        all = all && it.passed;
    }
    return all ? 0 : kExitNumerical;
}

int cmd_bench(const RunConfig& cfg) {
    const auto dir = prepare_output(cfg);
    const auto model = cfg.build_model();
    const auto scheme = cfg.scheme();
    const auto seed = build_seed(cfg, model, scheme);
    std::ofstream csv(dir / "bench.csv");
    csv << "workers,seconds_per_iteration,speedup,efficiency,identical\n";
    std::cout << "n = " << model.n << ", S~ = " << scheme.s_tilde << ", S1 = " << cfg.steps << '\n';
    std::cout << std::setw(8) << "workers" << std::setw(16) << "time [s]" << std::setw(10) << "speedup" << std::setw(12)
              << "efficiency" << std::setw(11) << "identical" << '\n';
    double base = 0.0;
    ShootingEvaluation reference;
    for (std::size_t k = 0; k < cfg.bench_workers.size(); ++k) {
        ShootingOptions o = cfg.shooting_options();
        o.workers = cfg.bench_workers[k];
        double best = std::numeric_limits<double>::infinity();
        ShootingEvaluation ev;
        for (int r = 0; r < std::max(1, cfg.bench_repeats); ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            ev = evaluate(model, seed, scheme, o);
            best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        }
        if (k == 0) {
            base = best * cfg.bench_workers[0];
            reference = ev;
        }
        const bool identical = (ev.residual.array() == reference.residual.array()).all() &&
                               (ev.jac_z0.array() == reference.jac_z0.array()).all() &&
                               (ev.jac_omega.array() == reference.jac_omega.array()).all();
        const double speedup = base / best;
        const double eff = speedup / o.workers;
        csv << o.workers << ',' << format_double(best) << ',' << format_double(speedup) << ',' << format_double(eff)
            << ',' << (identical ? "true" : "false") << '\n';
        std::cout << std::setw(8) << o.workers << std::setw(16) << best << std::setw(10) << std::setprecision(3)
                  << speedup << std::setw(12) << eff << std::setw(11) << (identical ? "yes" : "NO") << '\n'
                  << std::setprecision(6);
    }
    std::cout << "hardware threads: " << std::thread::hardware_concurrency() << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quasi-periodic torus solver (Fourier-coefficient shooting)"};
    app.require_subcommand(1);
    std::string config_path, output, snapshot, fault;
    int workers = 0;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* opt = sub->add_option("-c,--config", config_path, "JSON run configuration");
        if (config_required) opt->required();
        sub->add_option("-o,--output", output, "output directory (overrides the config)");
        sub->add_option("-w,--workers", workers, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
    };
    auto* solve = app.add_subcommand("solve", "single-point Newton solve at fixed parameter");
    add_common(solve, true);
    auto* cont = app.add_subcommand("continue", "predictor-corrector continuation of a branch");
    add_common(cont, true);
    auto* stab = app.add_subcommand("stability", "Lyapunov exponents of a stored solution");
    add_common(stab, true);
    stab->add_option("-s,--snapshot", snapshot, "snapshot file (defaults to seed.file)");
    auto* check = app.add_subcommand("check", "run the invariant suite");
    add_common(check, false);
    check->add_option("--inject-fault", fault, "deliberately break a component (rotation-sign)");
    auto* bench = app.add_subcommand("bench", "time one residual+Jacobian evaluation per worker count");
    add_common(bench, true);
    std::vector<int> bench_workers;
    bench->add_option("--workers-list", bench_workers, "worker counts to time")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        RunConfig cfg = load_config(config_path, output, workers);
        if (!bench_workers.empty()) {
            cfg.bench_workers = bench_workers;
            validate(cfg);
        }
        if (*solve) return cmd_solve(cfg);
        if (*cont) return cmd_continue(cfg);
        if (*stab) return cmd_stability(cfg, snapshot);
        if (*check) return cmd_check(cfg, fault);
        if (*bench) return cmd_bench(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    }
    return 0;
}
