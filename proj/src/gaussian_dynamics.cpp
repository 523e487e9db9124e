#include "dissent/gaussian_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "dissent/errors.hpp"
#include "dissent/io.hpp"

namespace dissent {

NoiseChannels NoiseChannels::from_params(const ModelParams& params) {
    NoiseChannels n;
    n.dephasing = params.Gamma_tilde;
    return n;
}

NoiseChannels NoiseChannels::none() {
    NoiseChannels n;
    n.dephasing_on = false;
    return n;
}

void NoiseChannels::validate() const {
    if (dephasing < 0.0 || pump_refill < 0.0) {
        throw InvariantViolation("noise channel rates must be >= 0");
    }
}

void add_jump(const Eigen::Vector4cd& c, double g, Mat4& drift, Mat4& diffusion) {
    if (g == 0.0) return;
    const Eigen::Matrix4cd m = c * c.adjoint();
    const Mat4& om = symplectic_form();
    drift += -2.0 * g * om * m.imag();
    diffusion += 4.0 * g * om * m.real() * om.transpose();
}

namespace {

using C = std::complex<double>;

// Coefficients of a_k and a_k^dag on (X_I, P_I, X_II, P_II); a = (X + iP)/2.
Eigen::Vector4cd lower(int k) {
    Eigen::Vector4cd c = Eigen::Vector4cd::Zero();
    c[2 * k] = 0.5;
    c[2 * k + 1] = C(0.0, 0.5);
    return c;
}

Eigen::Vector4cd raise(int k) {
    Eigen::Vector4cd c = Eigen::Vector4cd::Zero();
    c[2 * k] = 0.5;
    c[2 * k + 1] = C(0.0, -0.5);
    return c;
}

struct Context {
    double collective = 0.0;   // R
    double thermal = 1.0;      // uncorrelated level 1/P2
    double dlnp2 = 0.0;        // d ln P2 / dt
};

GaussianDerivative derivative(const GaussianState& s, const ModelParams& p,
                              const NoiseChannels& noise, const Context& ctx) {
    Mat4 drift = Mat4::Zero();
    Mat4 diff = Mat4::Zero();
    const double mu = p.mu, nu = p.nu, r = ctx.collective;
    if (r > 0.0) {
        if (noise.distinguishable) {
            add_jump(mu * lower(0), r, drift, diff);
            add_jump(nu * raise(1), r, drift, diff);
            add_jump(mu * lower(1), r, drift, diff);
            add_jump(nu * raise(0), r, drift, diff);
        } else {
            add_jump(mu * lower(0) - nu * raise(1), r, drift, diff);
            add_jump(mu * lower(1) - nu * raise(0), r, drift, diff);
        }
    }
    // Thermal channel with occupation level n: D[a] at g(1+n)/2, D[a^dag] at g(n-1)/2.
    auto thermal = [&](double g) {
        if (g <= 0.0) return;
        const double n = ctx.thermal;
        for (int k = 0; k < 2; ++k) {
            add_jump(lower(k), 0.5 * g * (1.0 + n), drift, diff);
            add_jump(raise(k), 0.5 * g * (n - 1.0), drift, diff);
        }
    };
    if (noise.dephasing_on) thermal(noise.dephasing);
    if (noise.pump_refill_on) thermal(noise.pump_refill);

    GaussianDerivative d;
    d.mean = drift * s.mean - 0.5 * ctx.dlnp2 * s.mean;
    d.cov = drift * s.cov + s.cov * drift.transpose() + diff - ctx.dlnp2 * s.cov;
    return d;
}

Context context_for(const ModelParams& p, const PopulationState& pop,
                    const Eigen::Vector3d& rate) {
    const double p2 = pop.P2();
    if (!(p2 > 0.0)) throw DegenerateError("two-level polarization P2 vanished");
    const double n2 = pop.n44 + pop.n43;
    const double pt = pop.P2_tilde();
    const double dpt = rate[0] - rate[1];
    const double dn2 = rate[0] + rate[1];
    const double dp2 = (dpt * n2 - pt * dn2) / (n2 * n2);
    Context c;
    c.collective = p.d * p.Gamma * pt;
    c.thermal = 1.0 / p2;
    c.dlnp2 = dp2 / p2;
    return c;
}

}  // namespace

GaussianDerivative moment_derivative(const GaussianState& state, const ModelParams& params,
                                     const NoiseChannels& noise) {
    Context c;
    c.collective = params.d * params.Gamma;
    return derivative(state, params, noise, c);
}

GaussianDerivative moment_derivative(const GaussianState& state, const ModelParams& params,
                                     const NoiseChannels& noise, const PopulationState& pop,
                                     const Eigen::Vector3d& pop_rate) {
    return derivative(state, params, noise, context_for(params, pop, pop_rate));
}

EprReport report_epr(const GaussianState& state, const std::optional<PopulationState>& pop) {
    const EprReport g = epr_variance(state);  // also checks the covariance
    return report_from_nonlocal(2.0 * g.var_x_minus, 2.0 * g.var_p_plus, pop);
}

EprReport report_from_nonlocal(double v_u, double v_v, const std::optional<PopulationState>& pop) {
    EprReport g = epr_from_nonlocal(v_u, v_v);
    if (!pop) return g;
    const double n2 = pop->n44 + pop->n43;
    if (!(n2 > 0.0)) throw DegenerateError("two-level subsystem is empty");
    const double denom = n2 * (pop->P2() + 7.0);
    const double pt = pop->P2_tilde();
    EprReport r;
    r.var_x_minus = (8.0 * pt * g.var_x_minus + 7.0 * pop->n43) / denom;
    r.var_p_plus = (8.0 * pt * g.var_p_plus + 7.0 * pop->n43) / denom;
    r.xi = r.var_x_minus + r.var_p_plus;
    r.entangled = r.xi < 1.0;
    return r;
}

void Trajectory::validate() const {
    const std::size_t n = times.size();
    if (states.size() != n || xi_series.size() != n || (!populations.empty() && populations.size() != n)) {
        throw InvariantViolation("trajectory series lengths differ");
    }
    for (std::size_t i = 1; i < n; ++i) {
        if (!(times[i] > times[i - 1])) throw InvariantViolation("trajectory times not increasing");
    }
}

double Trajectory::xi_min() const {
    double m = INFINITY;
    for (const auto& r : xi_series) m = std::min(m, r.xi);
    return m;
}

namespace {

Eigen::VectorXd pack(const GaussianState& s) {
    Eigen::VectorXd y(20);
    y.head<4>() = s.mean;
    y.tail<16>() = Eigen::Map<const Eigen::Matrix<double, 16, 1>>(s.cov.data());
    return y;
}

void unpack(const Eigen::VectorXd& y, GaussianState& s) {
    s.mean = y.head<4>();
    s.cov = Eigen::Map<const Mat4>(y.data() + 4);
}

void check_state(const Mat4& cov, double t, bool uncertainty) {
    const Mat4 sym = 0.5 * (cov + cov.transpose());
    if (!is_psd(sym, 1e-9) || (uncertainty && !satisfies_uncertainty(sym, 1e-7))) {
        throw InvariantViolation("covariance left the physical region at t=" + std::to_string(t) +
                                 " ms");
    }
}

std::string dominant_rate(const ModelParams& p, const NoiseChannels& noise,
                          const std::optional<PopulationPath>& pops) {
    struct Named {
        const char* name;
        double value;
    };
    std::vector<Named> rates{{"collective rate d*Gamma", p.d * p.Gamma},
                             {"Gamma_tilde", noise.dephasing_on ? noise.dephasing : 0.0},
                             {"pump_refill", noise.pump_refill_on ? noise.pump_refill : 0.0}};
    if (pops) {
        rates.push_back({"Gamma_pump", p.Gamma_pump});
        rates.push_back({"Gamma_L_out", p.Gamma_L_out});
        rates.push_back({"Gamma_col", p.Gamma_col});
    }
    auto it = std::max_element(rates.begin(), rates.end(),
                               [](const Named& a, const Named& b) { return a.value < b.value; });
    return std::string(it->name) + " = " + fmt_double(it->value) + " /ms";
}

}  // namespace

Trajectory propagate_moments(const GaussianState& initial, const ModelParams& params,
                             const NoiseChannels& noise, const std::vector<double>& times,
                             const std::optional<PopulationPath>& populations,
                             const PropagateOptions& opt) {
    params.validate();
    noise.validate();
    if (times.empty()) throw UsageError("empty time grid");
    if (!is_psd(initial.cov)) throw InvariantViolation("initial covariance is not PSD");

    Trajectory traj;
    traj.times = times;
    GaussianState s = initial;

    auto record = [&](double t, GaussianState st) {
        std::optional<PopulationState> pop;
        if (populations) {
            pop = populations->at(t);
            st.jx_mean = pop->Jx();
            traj.populations.push_back(*pop);
        }
        traj.xi_series.push_back(report_epr(st, pop));
        traj.states.push_back(std::move(st));
    };
    record(times.front(), s);

    auto rhs = [&](double t, const Eigen::VectorXd& y) {
        GaussianState st;
        unpack(y, st);
        GaussianDerivative d = populations
            ? moment_derivative(st, params, noise, populations->at(t), populations->rate_of_change(t))
            : moment_derivative(st, params, noise);
        Eigen::VectorXd out(20);
        out.head<4>() = d.mean;
        out.tail<16>() = Eigen::Map<const Eigen::Matrix<double, 16, 1>>(d.cov.data());
        return out;
    };

    Eigen::VectorXd y = pack(s);
    double h = 0.0;
    try {
        for (std::size_t i = 1; i < times.size(); ++i) {
            if (!(times[i] > times[i - 1])) throw UsageError("time grid must be strictly increasing");
            ode::integrate(rhs, times[i - 1], times[i], y, h, opt.ode,
                           [&](double t, const Eigen::VectorXd& v) {
                               check_state(Eigen::Map<const Mat4>(v.data() + 4), t, opt.check_uncertainty);
                           });
            unpack(y, s);
            s.cov = 0.5 * (s.cov + s.cov.transpose());
            y = pack(s);
            record(times[i], s);
        }
    } catch (const StiffnessError& e) {
        throw StiffnessError(std::string(e.what()) + "; fastest rate is " +
                             dominant_rate(params, noise, populations));
    }
    return traj;
}

Trajectory propagate_moments(const GaussianState& initial, const ModelParams& params,
                             const NoiseChannels& noise, const TimeGrid& grid,
                             const std::optional<PopulationPath>& populations,
                             const PropagateOptions& opt) {
    return propagate_moments(initial, params, noise, grid.points(), populations, opt);
}

Trajectory concat(Trajectory a, const Trajectory& b) {
    if (a.times.empty()) return b;
    if (b.times.empty()) return a;
    if (std::abs(b.times.front() - a.times.back()) > 1e-9 * std::max(1.0, std::abs(a.times.back()))) {
        throw UsageError("trajectories do not join");
    }
    if (a.coupled() != b.coupled()) throw UsageError("cannot join coupled and uncoupled trajectories");
    a.times.insert(a.times.end(), b.times.begin() + 1, b.times.end());
    a.states.insert(a.states.end(), b.states.begin() + 1, b.states.end());
    a.xi_series.insert(a.xi_series.end(), b.xi_series.begin() + 1, b.xi_series.end());
    if (b.coupled()) a.populations.insert(a.populations.end(), b.populations.begin() + 1, b.populations.end());
    return a;
}

double subunity_window(const Trajectory& traj) {
    double best = 0.0;
    std::size_t start = 0;
    bool inside = false;
    const std::size_t n = traj.times.size();
    for (std::size_t i = 0; i <= n; ++i) {
        const bool below = i < n && traj.xi_series[i].xi < 1.0;
        if (below && !inside) {
            inside = true;
            start = i;
        } else if (!below && inside) {
            inside = false;
            best = std::max(best, traj.times[i - 1] - traj.times[start]);
        }
    }
    return best;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    os << "time_ms,var_x_minus,var_p_plus,xi,Jx_norm,N2,P2\n";
    const double jx0 = traj.states.empty() ? 1.0 : traj.states.front().jx_mean;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const auto& r = traj.xi_series[i];
        double n2 = 1.0, p2 = 1.0;
        if (traj.coupled()) {
            n2 = traj.populations[i].N2();
            p2 = traj.populations[i].P2();
        }
        const double jx = jx0 != 0.0 ? traj.states[i].jx_mean / jx0 : 0.0;
        os << fmt_double(traj.times[i]) << ',' << fmt_double(r.var_x_minus) << ','
           << fmt_double(r.var_p_plus) << ',' << fmt_double(r.xi) << ',' << fmt_double(jx) << ','
           << fmt_double(n2) << ',' << fmt_double(p2) << '\n';
    }
}

}  // namespace dissent
