#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "qrelax/units.hpp"

namespace qrelax::config {

// Resolved run settings shared by all subcommands. Defaults reproduce the
// canonical quench scenario: alpha = 2.5 from the ground state with sigma = 1.
// Precedence: built-in defaults < QRELAX_SEED < config file < flags.
struct RunConfig {
    double alpha = 2.5;
    int initial_state = 1; // n
    double sigma = 1.0;
    int truncation = 50; // retained eigenstates N
    int runs = 1000;     // ensemble size M
    std::uint64_t seed = 42;
    std::string out_dir = "qrelax-out";
    int threads = 0; // 0 = auto

    int outcome = 0;               // conditioned terminal state j; 0 = sampled
    std::size_t grid_points = 256; // time points for single-trajectory output
    std::size_t checkpoints = 64;  // ensemble checkpoint count
    double horizon = 0.0;          // end time; 0 = derive 10 tau_R
    std::size_t density_points = 512;
    double dt = 1e-4;        // integrator step
    double lambda = 10.0;    // decay depth for timescale bounds
    double confidence = 0.95;
    double band_tol = 1e-3;  // sustained relaxation band, units of eps
    double adiabatic_rate = 0.01; // expansion speed v
    double adiabatic_horizon = 5.0;
    int adiabatic_modes = 4; // sigma (E_max - H) sqrt(dt) must stay small; raise with finer dt
    int sde_modes = 8; // truncation for the numerical integrator route
    bool posterior_columns = false;
    bool emit_plots = false;

    WellModel well() const {
        WellModel w;
        w.expansion = alpha;
        w.truncation = truncation;
        return w;
    }

    void validate() const {
        auto fail = [](const std::string& field, const std::string& constraint) {
            throw std::invalid_argument("config field '" + field + "': " + constraint);
        };
        if (!(alpha >= 1.0)) fail("alpha", "must be >= 1");
        if (initial_state < 1) fail("initial-state", "must be >= 1");
        if (!(sigma > 0.0)) fail("sigma", "must be > 0");
        if (truncation < 2) fail("truncation", "must be >= 2");
        if (runs < 1) fail("runs", "must be >= 1");
        if (outcome < 0) fail("outcome", "must be >= 0 (0 samples the outcome)");
        if (outcome > truncation) fail("outcome", "must not exceed truncation");
        if (grid_points < 2) fail("grid-points", "must be >= 2");
        if (checkpoints < 2) fail("checkpoints", "must be >= 2");
        if (horizon < 0.0) fail("horizon", "must be >= 0 (0 = automatic)");
        if (density_points < 2) fail("density-points", "must be >= 2");
        if (!(dt > 0.0)) fail("dt", "must be > 0");
        if (!(lambda > 0.0)) fail("lambda", "must be > 0");
        if (!(confidence > 0.0) || !(confidence < 1.0)) fail("confidence", "must lie in (0,1)");
        if (!(band_tol > 0.0)) fail("band-tol", "must be > 0");
        if (adiabatic_rate < 0.0) fail("adiabatic-rate", "must be >= 0");
        if (!(adiabatic_horizon > 0.0)) fail("adiabatic-horizon", "must be > 0");
        if (adiabatic_modes < 2) fail("adiabatic-modes", "must be >= 2");
        if (sde_modes < 2) fail("sde-modes", "must be >= 2");
        if (threads < 0) fail("threads", "must be >= 0");
    }
};

// Applies a JSON config object. Keys mirror the command-line flags
// (kebab-case); unknown keys are rejected so typos surface immediately.
inline void apply_json(RunConfig& cfg, const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("config file: top level must be an object");
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "alpha") cfg.alpha = value.get<double>();
            else if (key == "initial-state") cfg.initial_state = value.get<int>();
            else if (key == "sigma") cfg.sigma = value.get<double>();
            else if (key == "truncation") cfg.truncation = value.get<int>();
            else if (key == "runs") cfg.runs = value.get<int>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "out-dir") cfg.out_dir = value.get<std::string>();
            else if (key == "threads") cfg.threads = value.get<int>();
            else if (key == "outcome") cfg.outcome = value.get<int>();
            else if (key == "grid-points") cfg.grid_points = value.get<std::size_t>();
            else if (key == "checkpoints") cfg.checkpoints = value.get<std::size_t>();
            else if (key == "horizon") cfg.horizon = value.get<double>();
            else if (key == "density-points") cfg.density_points = value.get<std::size_t>();
            else if (key == "dt") cfg.dt = value.get<double>();
            else if (key == "lambda") cfg.lambda = value.get<double>();
            else if (key == "confidence") cfg.confidence = value.get<double>();
            else if (key == "band-tol") cfg.band_tol = value.get<double>();
            else if (key == "adiabatic-rate") cfg.adiabatic_rate = value.get<double>();
            else if (key == "adiabatic-horizon") cfg.adiabatic_horizon = value.get<double>();
            else if (key == "adiabatic-modes") cfg.adiabatic_modes = value.get<int>();
            else if (key == "sde-modes") cfg.sde_modes = value.get<int>();
            else if (key == "posterior-columns") cfg.posterior_columns = value.get<bool>();
            else if (key == "emit-plots") cfg.emit_plots = value.get<bool>();
            else throw std::invalid_argument("config field '" + key + "': unknown field");
        } catch (const nlohmann::json::exception&) {
            throw std::invalid_argument("config field '" + key + "': wrong type");
        }
    }
}

inline void apply_file(RunConfig& cfg, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config file '" + path.string() + "': cannot open");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config file '" + path.string() + "': " + e.what());
    }
    apply_json(cfg, j);
}

// QRELAX_SEED is the lowest-precedence seed source.
inline void apply_environment(RunConfig& cfg) {
    if (const char* env = std::getenv("QRELAX_SEED")) {
        try {
            cfg.seed = std::stoull(env);
        } catch (const std::exception&) {
            throw std::invalid_argument("QRELAX_SEED: not a valid unsigned integer");
        }
    }
}

inline nlohmann::json to_json(const RunConfig& cfg) {
    return nlohmann::json{{"alpha", cfg.alpha},
                          {"initial-state", cfg.initial_state},
                          {"sigma", cfg.sigma},
                          {"truncation", cfg.truncation},
                          {"runs", cfg.runs},
                          {"seed", cfg.seed},
                          {"out-dir", cfg.out_dir},
                          {"threads", cfg.threads},
                          {"outcome", cfg.outcome},
                          {"grid-points", cfg.grid_points},
                          {"checkpoints", cfg.checkpoints},
                          {"horizon", cfg.horizon},
                          {"density-points", cfg.density_points},
                          {"dt", cfg.dt},
                          {"lambda", cfg.lambda},
                          {"confidence", cfg.confidence},
                          {"band-tol", cfg.band_tol},
                          {"adiabatic-rate", cfg.adiabatic_rate},
                          {"adiabatic-horizon", cfg.adiabatic_horizon},
                          {"adiabatic-modes", cfg.adiabatic_modes},
                          {"sde-modes", cfg.sde_modes},
                          {"posterior-columns", cfg.posterior_columns},
                          {"emit-plots", cfg.emit_plots}};
}

} // namespace qrelax::config
