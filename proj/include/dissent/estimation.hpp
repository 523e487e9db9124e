#pragma once

// Model fitting against xi(t) and <J_x(t)>/<J_x(0)> series, and the
// projection-noise calibration.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dissent/errors.hpp"
#include "dissent/gaussian_dynamics.hpp"
#include "dissent/multilevel_rates.hpp"

namespace dissent {

struct Observation {
    double t = 0.0;
    double xi = 0.0;
    double xi_err = 1.0;
    double jx_norm = 1.0;
    double jx_err = 0.0;  // 0 drops the point from the J_x residuals
};

// Full forward model: analytic populations, uncorrelated start at 1/P2, noise
// from params. xi is the multilevel value, J_x normalized to t = 0.
Trajectory forward_model(const ModelParams& params, const PopulationState& initial,
                         const std::vector<double>& times);
std::vector<Observation> observations_from(const Trajectory& traj, double xi_err, double jx_err);

struct FitProblem {
    std::vector<Observation> observed;
    std::vector<std::string> free;  // subset of d, Gamma_col, Gamma_tilde, Gamma_L_out, Gamma_pump
    ModelParams fixed;              // start values for free parameters, values for the rest
    PopulationState initial{0.99, 0.01, 0.0, 1.0};
    // With constraints on, Gamma_L_out follows from the polarization slope and
    // d from the variance slope; both are then removed from the free set.
    bool slope_constraints = false;
    double polarization_slope = 0.0;
    double variance_slope = 0.0;
    int max_iterations = 200;
};

struct FitResult {
    ModelParams params;
    std::vector<std::string> names;  // order of the covariance rows
    Eigen::MatrixXd covariance;
    std::vector<double> residuals;   // weighted, xi block then J_x block
    double chi2 = 0.0;
    int iterations = 0;
};

class FitFailure : public NumericalFailure {
public:
    FitFailure(const std::string& what, FitResult best)
        : NumericalFailure(what), best_(std::move(best)) {}
    const FitResult& best() const noexcept { return best_; }

private:
    FitResult best_;
};

class IdentifiabilityError : public NumericalFailure {
public:
    explicit IdentifiabilityError(const std::string& what) : NumericalFailure(what) {}
};

FitResult fit_parameters(const FitProblem& problem);

// Applies the slope identities to p in place (Gamma_L_out, then d).
void apply_slope_constraints(ModelParams& p, const PopulationState& initial, double pol_slope,
                             double var_slope);

struct CalibrationPoint {
    double theta = 0.0;   // Faraday angle, degrees
    double xi0 = 0.0;
    double weight = 1.0;
};

struct PnCalibration {
    double linear = 0.0;
    double quadratic = 0.0;
    double quad_fraction = 0.0;  // quadratic / linear
};

PnCalibration calibrate_pn(const std::vector<CalibrationPoint>& points);

}  // namespace dissent
