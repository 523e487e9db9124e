#pragma once

// First and second moments of the two-ensemble state under the engineered
// nonlocal dissipation plus local noise.
//
// The engineered jumps are A = mu a_I - nu a_II^dag and B = mu a_II - nu a_I^dag
// at rate R = d Gamma P2~ (R = d Gamma without a population path). Moments
// follow from the generic rule for a jump L = c.r with rate g:
//     drift     -2 g Omega Im(c c^dag)
//     diffusion  4 g Omega Re(c c^dag) Omega^T
// which makes V_u, V_v relax at rate R toward (mu - nu)^2.
//
// With populations attached, the covariance is normalized to the two-level
// projection noise N2 P2 so that an uncorrelated ensemble sits at 1/P2.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dissent/grid.hpp"
#include "dissent/multilevel_rates.hpp"
#include "dissent/ode.hpp"
#include "dissent/spin_model.hpp"

namespace dissent {

struct NoiseChannels {
    double dephasing = 0.0;     // Gamma_tilde, 1/ms
    bool dephasing_on = true;
    double pump_refill = 0.0;   // extra relaxation toward the uncorrelated level, 1/ms
    bool pump_refill_on = false;
    // Emitters distinguishable (Larmor mismatch): nonlocal jumps become local.
    bool distinguishable = false;

    static NoiseChannels from_params(const ModelParams& params);
    static NoiseChannels none();
    void validate() const;
};

struct GaussianDerivative {
    Vec4 mean = Vec4::Zero();
    Mat4 cov = Mat4::Zero();
};

// Drift matrix and diffusion of one jump operator L = sum_k c_k r_k at rate g.
void add_jump(const Eigen::Vector4cd& c, double g, Mat4& drift, Mat4& diffusion);

GaussianDerivative moment_derivative(const GaussianState& state, const ModelParams& params,
                                     const NoiseChannels& noise);

// Same, with the collective rate and reference level set by populations and
// their rate of change (fractions per ms).
GaussianDerivative moment_derivative(const GaussianState& state, const ModelParams& params,
                                     const NoiseChannels& noise, const PopulationState& pop,
                                     const Eigen::Vector3d& pop_rate);

// Reported EPR numbers. Without populations this is epr_variance; with them
// each half-variance is weighted into the multilevel formula so that xi is
// (Sigma_J + 14 N43) / (N2 (P2 + 7)).
EprReport report_epr(const GaussianState& state, const std::optional<PopulationState>& pop);
EprReport report_from_nonlocal(double v_u, double v_v, const std::optional<PopulationState>& pop);

struct Trajectory {
    std::vector<double> times;
    std::vector<GaussianState> states;
    std::vector<PopulationState> populations;  // empty when uncoupled
    std::vector<EprReport> xi_series;

    bool coupled() const noexcept { return !populations.empty(); }
    void validate() const;
    double xi_min() const;
};

struct PropagateOptions {
    ode::Options ode;
    // Off only for moment sets that are not bosonic states to begin with
    // (e.g. moments read off a few two-level spins).
    bool check_uncertainty = true;
};

Trajectory propagate_moments(const GaussianState& initial, const ModelParams& params,
                             const NoiseChannels& noise, const std::vector<double>& times,
                             const std::optional<PopulationPath>& populations = std::nullopt,
                             const PropagateOptions& opt = {});
Trajectory propagate_moments(const GaussianState& initial, const ModelParams& params,
                             const NoiseChannels& noise, const TimeGrid& grid,
                             const std::optional<PopulationPath>& populations = std::nullopt,
                             const PropagateOptions& opt = {});

// Appends b to a. b must start where a ends; its first point is dropped.
Trajectory concat(Trajectory a, const Trajectory& b);

// Longest contiguous stretch (ms) with xi < 1, measured between grid points.
double subunity_window(const Trajectory& traj);

// time_ms,var_x_minus,var_p_plus,xi,Jx_norm,N2,P2 ; Jx_norm relative to the first row.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

}  // namespace dissent
