#include "dissent/multilevel_rates.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>

#include "dissent/errors.hpp"

namespace dissent {

double PopulationState::P2() const noexcept {
    const double two = n44 + n43;
    return two > 0.0 ? std::abs(n44 - n43) / two : 0.0;
}

PopulationState PopulationState::from_vec(const Eigen::Vector3d& v, double N) {
    return {v[0], v[1], v[2], N};
}

void PopulationState::validate(double tol) const {
    if (!(N > 0.0)) throw InvariantViolation("population: N must be > 0");
    if (n44 < -tol || n43 < -tol || nh < -tol) {
        throw InvariantViolation("population: negative fraction");
    }
    if (std::abs(n44 + n43 + nh - 1.0) > tol) {
        throw InvariantViolation("population: fractions do not sum to 1");
    }
}

void RateSet::validate() const {
    if (g34 < 0 || g43 < 0 || g_out < 0 || g_in < 0 || g_pump < 0 || g_repump < 0) {
        throw InvariantViolation("transition rates must be >= 0");
    }
    if (branching < 0.0 || branching > 1.0) {
        throw InvariantViolation("repump branching must lie in [0, 1]");
    }
}

RateSet transition_rates(const ModelParams& p) {
    RateSet r;
    r.g34 = p.mu * p.mu * p.Gamma + p.Gamma_col;
    r.g43 = p.nu * p.nu * p.Gamma + p.Gamma_col;
    r.g_out = p.Gamma_L_out + p.Gamma_col;
    r.g_in = p.Gamma_col;
    r.g_pump = p.Gamma_pump;
    r.branching = p.pump_branching;
    return r;
}

Eigen::Matrix3d population_generator(const RateSet& r) {
    const double b = r.branching;
    Eigen::Matrix3d g;
    g << -(r.g43 + r.g_out), r.g34 + r.g_pump, r.g_in + b * r.g_repump,
        r.g43, -(r.g34 + r.g_out + r.g_pump), r.g_in + (1.0 - b) * r.g_repump,
        r.g_out, r.g_out, -(2.0 * r.g_in + r.g_repump);
    return g;
}

PopulationState PopulationSeries::at(double t) const {
    if (times.empty()) throw RangeError("empty population series");
    const double tol = 1e-12 * std::max(1.0, std::abs(times.back()));
    if (t < times.front() - tol || t > times.back() + tol) {
        throw RangeError("time " + std::to_string(t) + " ms outside population series");
    }
    if (times.size() == 1) return states.front();
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t hi = static_cast<std::size_t>(it - times.begin());
    hi = std::clamp<std::size_t>(hi, 1, times.size() - 1);
    const std::size_t lo = hi - 1;
    const double w = std::clamp((t - times[lo]) / (times[hi] - times[lo]), 0.0, 1.0);
    const Eigen::Vector3d v = (1.0 - w) * states[lo].vec() + w * states[hi].vec();
    return PopulationState::from_vec(v, states[lo].N);
}

PopulationSeries propagate_populations(const PopulationState& initial, const RateSet& rates,
                                       const std::vector<double>& times) {
    initial.validate();
    rates.validate();
    const Eigen::Matrix3d g = population_generator(rates);
    PopulationSeries out;
    out.times = times;
    out.states.reserve(times.size());
    const double t0 = times.empty() ? 0.0 : times.front();
    for (double t : times) {
        const Eigen::Matrix3d prop = (g * (t - t0)).exp();
        PopulationState s = PopulationState::from_vec(prop * initial.vec(), initial.N);
        s.validate(1e-9);
        out.states.push_back(s);
    }
    return out;
}

PopulationSeries propagate_populations(const PopulationState& initial, const RateSet& rates,
                                       const TimeGrid& grid) {
    return propagate_populations(initial, rates, grid.points());
}

PopulationPath PopulationPath::analytic(const PopulationState& initial, const RateSet& rates,
                                        double t0) {
    initial.validate();
    rates.validate();
    PopulationPath p;
    p.analytic_ = true;
    p.gen_ = population_generator(rates);
    p.n0_ = initial.vec();
    p.N_ = initial.N;
    p.t0_ = t0;
    return p;
}

PopulationPath PopulationPath::interpolated(PopulationSeries series) {
    if (series.times.empty() || series.times.size() != series.states.size()) {
        throw UsageError("population series is empty or ragged");
    }
    PopulationPath p;
    p.analytic_ = false;
    p.N_ = series.states.front().N;
    p.t0_ = series.times.front();
    p.series_ = std::move(series);
    return p;
}

PopulationState PopulationPath::at(double t) const {
    if (!analytic_) return series_.at(t);
    const Eigen::Vector3d v = (gen_ * (t - t0_)).exp() * n0_;
    return PopulationState::from_vec(v, N_);
}

Eigen::Vector3d PopulationPath::rate_of_change(double t) const {
    if (analytic_) return gen_ * at(t).vec();
    const auto& ts = series_.times;
    if (ts.size() < 2) return Eigen::Vector3d::Zero();
    series_.at(t);  // range check
    auto it = std::upper_bound(ts.begin(), ts.end(), t);
    std::size_t hi = std::clamp<std::size_t>(static_cast<std::size_t>(it - ts.begin()), 1,
                                             ts.size() - 1);
    const std::size_t lo = hi - 1;
    return (series_.states[hi].vec() - series_.states[lo].vec()) / (ts[hi] - ts[lo]);
}

double polarization_slope(const PopulationState& initial, const RateSet& r) {
    const double jx = initial.Jx();
    if (!(jx > 0.0)) throw DegenerateError("polarization slope needs <J_x(0)> > 0");
    const Eigen::Vector3d dn = population_generator(r) * initial.vec();
    return initial.N * (4.0 * dn[0] + 3.0 * dn[1]) / jx;
}

double variance_slope(const PopulationState& pop, const ModelParams& params, const RateSet& r,
                      std::optional<double> v0) {
    const double p2 = pop.P2();
    if (!(p2 > 0.0)) throw DegenerateError("variance slope needs P2(0) > 0");
    const double n2 = pop.n44 + pop.n43;
    const double pt = pop.P2_tilde();
    const double v = v0.value_or(1.0 / p2);
    const double s2 = params.squeeze();

    const Eigen::Vector3d dn = population_generator(r) * pop.vec();
    const double dpt = dn[0] - dn[1];
    const double dn2 = dn[0] + dn[1];
    const double dp2 = (dpt * n2 - pt * dn2) / (n2 * n2);

    const double collective = params.d * params.Gamma * pt;
    const double dv = -collective * (v - s2) - params.Gamma_tilde * (v - 1.0 / p2) - (dp2 / p2) * v;
    const double j0 = 8.0 * pop.n44 + 6.0 * pop.n43;
    return (8.0 * dpt * v + 8.0 * pt * dv + 14.0 * dn[1]) / j0;
}

double transverse_decay(double jy0, const ModelParams& params, const PopulationSeries& pops,
                        double t) {
    const PopulationState s = pops.at(t);
    return std::exp(-0.5 * (params.Gamma_tilde + params.d * params.Gamma * s.P2_tilde()) * t) * jy0;
}

double multilevel_entanglement(double sigma_j, double N2, double P2, double N43) {
    if (!(N2 > 0.0)) throw DegenerateError("multilevel entanglement needs N2 > 0");
    return (sigma_j + 14.0 * N43) / (N2 * (P2 + 7.0));
}

double multilevel_entanglement(double sigma_j, const PopulationState& pop) {
    return multilevel_entanglement(sigma_j, pop.N2(), pop.P2(), pop.N43());
}

double sigma_j_from_gaussian(double xi_g, const PopulationState& pop) {
    return 8.0 * pop.N * pop.P2_tilde() * xi_g;
}

}  // namespace dissent
