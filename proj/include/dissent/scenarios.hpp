#pragma once

// Named end-to-end runs: fixture parameters, trajectories, sample records,
// reconstructed xi series and a JSON report. Everything is a pure function of
// (name, overrides, seed, trials).

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dissent/gaussian_dynamics.hpp"
#include "dissent/stochastic_record.hpp"

namespace dissent {

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

struct ScenarioBundle {
    std::string name;
    ModelParams params;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, Trajectory>> trajectories;
    std::vector<std::pair<std::string, LightRecord>> records;
    std::vector<Table> tables;
    nlohmann::json report;
};

const std::vector<std::string>& scenario_names();

// Fixture parameters before overrides. Throws UsageError on unknown names.
ModelParams scenario_params(const std::string& name);

// Same parameters with the driving field off: no collective dissipation and
// no drive-induced transitions or losses.
ModelParams drive_off(const ModelParams& p);

// Continues a coupled trajectory from its last point with the drive off.
Trajectory continue_drive_off(const Trajectory& traj, const ModelParams& params, double span,
                              double dt);

struct DarkDecay {
    double efold = -1.0;     // ms until 1 - xi fell by e; -1 if never
    double crossing = -1.0;  // ms until xi >= 1; -1 if never
    double xi_start = 0.0;
};
DarkDecay dark_decay(const Trajectory& dark);

// Relative systematic floor on reconstructed xi, combined in quadrature with
// the Monte Carlo error.
inline constexpr double kSystematicFloor = 0.04;

// Monte Carlo readout of a coupled trajectory every `stride` points.
Table reconstruct_series(const Trajectory& traj, const ModelParams& params, double t_probe,
                         std::size_t stride, std::size_t trials, std::uint64_t seed);

ScenarioBundle run_scenario(const std::string& name, const nlohmann::json& overrides,
                            std::uint64_t seed, std::size_t trials = 2000);

}  // namespace dissent
