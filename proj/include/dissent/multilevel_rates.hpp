#pragma once

// Three-level population model per ensemble: |4,+-4>, |4,+-3> and the hidden
// level |3,+-3>. Populations are stored as fractions of N. Both ensembles are
// treated as identical, so one PopulationState describes the pair.

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "dissent/grid.hpp"
#include "dissent/spin_model.hpp"

namespace dissent {

struct PopulationState {
    double n44 = 1.0;
    double n43 = 0.0;
    double nh = 0.0;
    double N = 1.0;

    double N2() const noexcept { return N * (n44 + n43); }
    double P2() const noexcept;
    double P2_tilde() const noexcept { return n44 - n43; }  // P2 * N2 / N
    double Jx() const noexcept { return N * (4.0 * n44 + 3.0 * n43); }
    double N43() const noexcept { return N * n43; }

    Eigen::Vector3d vec() const { return {n44, n43, nh}; }
    static PopulationState from_vec(const Eigen::Vector3d& v, double N);

    // Throws InvariantViolation on negative fractions or sum != 1.
    void validate(double tol = 1e-9) const;
};

struct RateSet {
    double g34 = 0.0;    // |4,3> -> |4,4> (cooling)
    double g43 = 0.0;    // |4,4> -> |4,3> (heating)
    double g_out = 0.0;  // two-level subsystem -> hidden level
    double g_in = 0.0;   // hidden level -> each two-level state
    // Optical pumping |4,3> -> |4,4>. Leaves the hidden level alone.
    double g_pump = 0.0;
    // Optional repump out of the hidden level, split by `branching` into |4,4>.
    double g_repump = 0.0;
    double branching = 0.5;

    void validate() const;
};

RateSet transition_rates(const ModelParams& params);

// d/dt (n44, n43, nh) = G (n44, n43, nh).
Eigen::Matrix3d population_generator(const RateSet& rates);

struct PopulationSeries {
    std::vector<double> times;
    std::vector<PopulationState> states;

    // Linear interpolation; throws RangeError outside [times.front(), times.back()].
    PopulationState at(double t) const;
};

PopulationSeries propagate_populations(const PopulationState& initial, const RateSet& rates,
                                       const TimeGrid& grid);
PopulationSeries propagate_populations(const PopulationState& initial, const RateSet& rates,
                                       const std::vector<double>& times);

// Continuous population input for the moment equations. Either exact
// (constant rates, matrix exponential) or interpolated from a series.
class PopulationPath {
public:
    static PopulationPath analytic(const PopulationState& initial, const RateSet& rates,
                                   double t0 = 0.0);
    static PopulationPath interpolated(PopulationSeries series);

    PopulationState at(double t) const;
    // Time derivative of the fractions (n44, n43, nh).
    Eigen::Vector3d rate_of_change(double t) const;

private:
    bool analytic_ = true;
    Eigen::Matrix3d gen_ = Eigen::Matrix3d::Zero();
    Eigen::Vector3d n0_ = Eigen::Vector3d::Zero();
    double N_ = 1.0;
    double t0_ = 0.0;
    PopulationSeries series_;
};

// dP/dt at t = 0 for P(t) = <J_x(t)> / <J_x(0)>.
double polarization_slope(const PopulationState& initial, const RateSet& rates);

// d/dt of (Sigma_J + 14 N43) / (2 |<J_x(0)>|) at t = 0, i.e. of xi(t) P(t), for
// a Gaussian normalized variance v0 at t = 0 (default: uncorrelated, 1/P2).
double variance_slope(const PopulationState& initial, const ModelParams& params,
                      const RateSet& rates, std::optional<double> v0 = std::nullopt);

double transverse_decay(double jy0, const ModelParams& params, const PopulationSeries& pops,
                        double t);

// xi = (Sigma_J + 14 N43) / (N2 (P2 + 7)); sigma_j and the counts in atoms.
double multilevel_entanglement(double sigma_j, const PopulationState& pop);
double multilevel_entanglement(double sigma_j, double N2, double P2, double N43);

// Sigma_J of a Gaussian normalized variance xi_g on top of these populations.
double sigma_j_from_gaussian(double xi_g, const PopulationState& pop);

}  // namespace dissent
