#ifndef FSE_IO_HPP
#define FSE_IO_HPP

/**
 * @file io.hpp
 * @brief Solution snapshots (JSON), branch tables (CSV) and exponent histories.
 *
 * Snapshots carry the harmonic magnitudes, sample counts and the coefficient
 * ordering tag so that a branch can be restarted from any stored point.
 */

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fse/continuation.hpp"
#include "fse/errors.hpp"
#include "fse/harmonics.hpp"
#include "fse/shooting.hpp"
#include "fse/stability.hpp"

namespace fse {

inline constexpr const char* kSnapshotFormat = "fse-torus-snapshot";
inline constexpr int kSnapshotVersion = 1;

struct Snapshot {
    HarmonicList harmonics;
    std::vector<int> samples;
    int steps = 0;
    Eigen::Index n = 0;
    TorusCoefficients coeffs;
    std::string parameter_name;
    double parameter_value = 0.0;
    double residual_norm = 0.0;
};

inline nlohmann::json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector json_to_vector(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline nlohmann::json snapshot_to_json(const Snapshot& s) {
    nlohmann::json j;
    j["format"] = kSnapshotFormat;
    j["version"] = kSnapshotVersion;
    j["scheme"] = {{"harmonics", s.harmonics}, {"samples", s.samples}, {"ordering", kOrderingTag}};
    j["steps"] = s.steps;
    j["n"] = s.n;
    j["z0"] = vector_to_json(s.coeffs.z0);
    j["omega"] = vector_to_json(s.coeffs.omega.omega());
    j["e"] = s.coeffs.omega.e();
    j["parameter"] = {{"name", s.parameter_name}, {"value", s.parameter_value}};
    j["residual_norm"] = s.residual_norm;
    return j;
}

inline Snapshot snapshot_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != kSnapshotFormat) throw ConfigError("not a torus snapshot file");
        if (j.at("version").get<int>() != kSnapshotVersion)
            throw ConfigError("unsupported snapshot version " + std::to_string(j.at("version").get<int>()));
        const auto& sc = j.at("scheme");
        if (sc.at("ordering").get<std::string>() != kOrderingTag)
            throw ConfigError("snapshot uses coefficient ordering '" + sc.at("ordering").get<std::string>() +
                              "', expected '" + kOrderingTag + "'");
        Snapshot s;
        s.harmonics = sc.at("harmonics").get<HarmonicList>();
        s.samples = sc.at("samples").get<std::vector<int>>();
        s.steps = j.at("steps").get<int>();
        s.n = j.at("n").get<Eigen::Index>();
        s.coeffs = TorusCoefficients{json_to_vector(j.at("z0")),
                                     FrequencyVector(json_to_vector(j.at("omega")), j.at("e").get<int>())};
        s.parameter_name = j.at("parameter").at("name").get<std::string>();
        s.parameter_value = j.at("parameter").at("value").get<double>();
        s.residual_norm = j.at("residual_norm").get<double>();
        if (s.coeffs.z0.size() != 2 * s.n * coefficient_count(s.harmonics))
            throw ConfigError("snapshot coefficient vector does not match its scheme");
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed snapshot: ") + e.what());
    }
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

inline void write_snapshot(const std::filesystem::path& path, const Snapshot& s) { write_json(path, snapshot_to_json(s)); }
inline Snapshot read_snapshot(const std::filesystem::path& path) { return snapshot_from_json(read_json(path)); }

/// Round-trip (17 significant digits) text for a double.
inline std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

/// Columns p, omega_1..omega_d, amplitude, residual_norm, corrector_iterations, stability, lyap_1..lyap_3.
inline void write_branch_csv(const std::filesystem::path& path, const Branch& branch, int d) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << "p";
    for (int i = 1; i <= d; ++i) out << ",omega_" << i;
    out << ",amplitude,residual_norm,corrector_iterations,stability,lyap_1,lyap_2,lyap_3\n";
    for (const auto& pt : branch.points) {
        out << format_double(pt.p);
        for (int i = 1; i <= d; ++i) out << ',' << format_double(pt.coeffs.omega[i]);
        out << ',' << format_double(pt.amplitude) << ',' << format_double(pt.residual_norm) << ',' << pt.iterations
            << ',' << (pt.stability ? pt.stability->flag : std::string("not_computed"));
        for (Eigen::Index h = 0; h < 3; ++h) {
            out << ',';
            if (pt.stability && h < pt.stability->exponents.size()) out << format_double(pt.stability->exponents(h));
        }
        out << '\n';
    }
}

/// Full coefficient snapshots of every branch point, for restarts.
inline nlohmann::json branch_sidecar(const Branch& branch, const HarmonicScheme& scheme, int steps, Eigen::Index n,
                                     const std::string& parameter) {
    nlohmann::json j;
    j["format"] = "fse-branch";
    j["version"] = kSnapshotVersion;
    j["termination"] = branch.termination;
    j["seed_failed"] = branch.seed_failed;
    j["points"] = nlohmann::json::array();
    for (const auto& pt : branch.points) {
        Snapshot s{scheme.k_list, scheme.s_list, steps, n, pt.coeffs, parameter, pt.p, pt.residual_norm};
        auto e = snapshot_to_json(s);
        e["tangent"] = vector_to_json(pt.tangent);
        e["corrector_iterations"] = pt.iterations;
        e["max_constraint"] = pt.max_constraint;
        e["amplitude"] = pt.amplitude;
        if (pt.stability) {
            e["stability"] = {{"flag", pt.stability->flag}, {"exponents", vector_to_json(pt.stability->exponents)}};
        }
        j["points"].push_back(std::move(e));
    }
    return j;
}

inline void write_exponent_history(const std::filesystem::path& path, const StabilityReport& rep) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << "period";
    for (Eigen::Index h = 0; h < rep.history.cols(); ++h) out << ",sigma_" << h + 1;
    out << '\n';
    for (Eigen::Index i = 0; i < rep.history.rows(); ++i) {
        out << i + 1;
        for (Eigen::Index h = 0; h < rep.history.cols(); ++h) out << ',' << format_double(rep.history(i, h));
        out << '\n';
    }
}

inline nlohmann::json stability_to_json(const StabilityReport& rep) {
    nlohmann::json j;
    j["exponents"] = vector_to_json(rep.exponents);
    j["flag"] = rep.flag;
    j["stable"] = rep.stable;
    j["max_exponent"] = rep.max_exponent;
    j["band"] = rep.band;
    j["n_ly"] = rep.n_ly;
    if (!rep.multipliers.empty()) {
        auto arr = nlohmann::json::array();
        for (const auto& mu : rep.multipliers) arr.push_back({mu.real(), mu.imag()});
        j["multipliers"] = arr;
    }
    if (std::isfinite(rep.interpolation_residual)) j["interpolation_residual"] = rep.interpolation_residual;
    return j;
}

} // namespace fse

#endif
