#include "dissent/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dissent {

Trajectory forward_model(const ModelParams& params, const PopulationState& initial,
                         const std::vector<double>& times) {
    const double p2 = initial.P2();
    if (!(p2 > 0.0)) throw DegenerateError("forward model needs P2(0) > 0");
    GaussianState start = GaussianState::from_nonlocal(1.0 / p2, 1.0 / p2, initial.Jx());
    const auto path = PopulationPath::analytic(initial, transition_rates(params), times.front());
    return propagate_moments(start, params, NoiseChannels::from_params(params), times, path);
}

std::vector<Observation> observations_from(const Trajectory& traj, double xi_err, double jx_err) {
    std::vector<Observation> obs;
    const double jx0 = traj.states.front().jx_mean;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        obs.push_back({traj.times[i], traj.xi_series[i].xi, xi_err, traj.states[i].jx_mean / jx0, jx_err});
    }
    return obs;
}

namespace {

double& field(ModelParams& p, const std::string& name) {
    if (name == "d") return p.d;
    if (name == "Gamma_col") return p.Gamma_col;
    if (name == "Gamma_tilde") return p.Gamma_tilde;
    if (name == "Gamma_L_out") return p.Gamma_L_out;
    if (name == "Gamma_pump") return p.Gamma_pump;
    throw UsageError("parameter '" + name + "' cannot be fitted");
}

}  // namespace

void apply_slope_constraints(ModelParams& p, const PopulationState& initial, double pol_slope,
                             double var_slope) {
    // Both slopes are affine in the eliminated parameter.
    auto pol_at = [&](double lout) {
        ModelParams q = p;
        q.Gamma_L_out = lout;
        return polarization_slope(initial, transition_rates(q));
    };
    const double s0 = pol_at(0.0), s1 = pol_at(1.0);
    if (s1 == s0) throw IdentifiabilityError("polarization slope does not depend on Gamma_L_out");
    p.Gamma_L_out = std::max(0.0, (pol_slope - s0) / (s1 - s0));

    auto var_at = [&](double d) {
        ModelParams q = p;
        q.d = d;
        return variance_slope(initial, q, transition_rates(q));
    };
    const double v0 = var_at(0.0), v1 = var_at(1.0);
    if (v1 == v0) throw IdentifiabilityError("variance slope does not depend on d");
    p.d = std::max(0.0, (var_slope - v0) / (v1 - v0));
}

namespace {

struct Evaluator {
    const FitProblem& pb;
    std::vector<std::string> names;
    std::vector<double> times;

    ModelParams params_at(const Eigen::VectorXd& logp) const {
        ModelParams p = pb.fixed;
        for (std::size_t i = 0; i < names.size(); ++i) field(p, names[i]) = std::exp(logp[static_cast<Eigen::Index>(i)]);
        if (pb.slope_constraints) apply_slope_constraints(p, pb.initial, pb.polarization_slope, pb.variance_slope);
        return p;
    }

    Eigen::VectorXd residuals(const ModelParams& p) const {
        const Trajectory tr = forward_model(p, pb.initial, times);
        const double jx0 = tr.states.front().jx_mean;
        std::vector<double> r;
        for (std::size_t i = 0; i < pb.observed.size(); ++i) {
            const auto& o = pb.observed[i];
            r.push_back((tr.xi_series[i].xi - o.xi) / o.xi_err);
        }
        for (std::size_t i = 0; i < pb.observed.size(); ++i) {
            const auto& o = pb.observed[i];
            if (o.jx_err > 0.0) r.push_back((tr.states[i].jx_mean / jx0 - o.jx_norm) / o.jx_err);
        }
        return Eigen::Map<Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
    }

    Eigen::VectorXd residuals(const Eigen::VectorXd& logp) const { return residuals(params_at(logp)); }

    Eigen::MatrixXd jacobian(const Eigen::VectorXd& logp, Eigen::Index m) const {
        Eigen::MatrixXd j(m, logp.size());
        for (Eigen::Index k = 0; k < logp.size(); ++k) {
            const double h = 1e-5;
            Eigen::VectorXd a = logp, b = logp;
            a[k] += h;
            b[k] -= h;
            j.col(k) = (residuals(a) - residuals(b)) / (2.0 * h);
        }
        return j;
    }
};

std::string direction_text(const Eigen::VectorXd& v, const std::vector<std::string>& names) {
    std::ostringstream os;
    os.precision(3);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) os << (v[i] >= 0 ? " + " : " - ");
        else if (v[i] < 0) os << "-";
        os << std::abs(v[i]) << "*ln(" << names[static_cast<std::size_t>(i)] << ")";
    }
    return os.str();
}

}  // namespace

FitResult fit_parameters(const FitProblem& pb) {
    if (pb.observed.empty()) throw UsageError("fit needs observations");
    for (std::size_t i = 1; i < pb.observed.size(); ++i) {
        if (!(pb.observed[i].t > pb.observed[i - 1].t)) throw UsageError("observation times must increase");
    }
    for (const auto& o : pb.observed) {
        if (!(o.xi_err > 0.0)) throw UsageError("xi_err must be > 0");
    }

    Evaluator ev{pb, {}, {}};
    for (const auto& o : pb.observed) ev.times.push_back(o.t);
    for (const auto& n : pb.free) {
        if (std::find(ev.names.begin(), ev.names.end(), n) != ev.names.end()) {
            throw UsageError("parameter '" + n + "' listed twice");
        }
        ModelParams probe;
        field(probe, n);  // name check
        if (pb.slope_constraints && (n == "d" || n == "Gamma_L_out")) continue;
        ev.names.push_back(n);
    }
    if (ev.names.size() > pb.observed.size()) throw UsageError("more free parameters than data points");

    Eigen::VectorXd x(static_cast<Eigen::Index>(ev.names.size()));
    for (std::size_t i = 0; i < ev.names.size(); ++i) {
        ModelParams start = pb.fixed;
        const double v = field(start, ev.names[i]);
        if (!(v > 0.0)) throw UsageError("start value of '" + ev.names[i] + "' must be > 0");
        x[static_cast<Eigen::Index>(i)] = std::log(v);
    }

    auto finish = [&](const Eigen::VectorXd& xs, const Eigen::VectorXd& r, int it, const Eigen::MatrixXd& cov) {
        FitResult res;
        res.params = ev.params_at(xs);
        res.names = ev.names;
        res.covariance = cov;
        res.residuals.assign(r.data(), r.data() + r.size());
        res.chi2 = r.squaredNorm();
        res.iterations = it;
        return res;
    };

    Eigen::VectorXd r = ev.residuals(x);
    if (ev.names.empty()) return finish(x, r, 0, Eigen::MatrixXd(0, 0));

    double chi2 = r.squaredNorm();
    double lambda = 1e-3;
    int it = 0;
    bool converged = false;
    Eigen::MatrixXd jac;
    for (; it < pb.max_iterations; ++it) {
        jac = ev.jacobian(x, r.size());
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd g = jac.transpose() * r;
        bool improved = false;
        double step_norm = 0.0;
        for (int tries = 0; tries < 30; ++tries) {
            Eigen::MatrixXd a = jtj;
            a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
            const Eigen::VectorXd dx = a.ldlt().solve(-g);
            const Eigen::VectorXd xn = x + dx;
            Eigen::VectorXd rn;
            try {
                rn = ev.residuals(xn);
            } catch (const NumericalFailure&) {
                lambda *= 10.0;
                continue;
            } catch (const InvariantViolation&) {
                lambda *= 10.0;
                continue;
            }
            const double chi2n = rn.squaredNorm();
            if (std::isfinite(chi2n) && chi2n <= chi2) {
                step_norm = dx.norm();
                const double drop = chi2 - chi2n;
                x = xn;
                r = rn;
                chi2 = chi2n;
                lambda = std::max(lambda / 10.0, 1e-12);
                improved = true;
                if (drop <= 1e-14 * std::max(chi2, 1e-30) || step_norm < 1e-11) converged = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!improved) {
            // Even tiny steps no longer go downhill: minimum to working precision.
            converged = true;
            break;
        }
        if (converged || chi2 < 1e-24) {
            converged = true;
            break;
        }
    }

    jac = ev.jacobian(x, r.size());
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv[sv.size() - 1] <= 1e-9 * sv[0]) {
        const Eigen::VectorXd dir = svd.matrixV().col(sv.size() - 1);
        throw IdentifiabilityError("information matrix is singular along " + direction_text(dir, ev.names));
    }
    const Eigen::MatrixXd cov_log = (jac.transpose() * jac).inverse();
    const Eigen::VectorXd p = x.array().exp();
    const Eigen::MatrixXd cov = p.asDiagonal() * cov_log * p.asDiagonal();

    FitResult res = finish(x, r, it + 1, cov);
    if (!converged) throw FitFailure("fit did not converge in " + std::to_string(pb.max_iterations) + " iterations", res);
    return res;
}

PnCalibration calibrate_pn(const std::vector<CalibrationPoint>& points) {
    if (points.size() < 3) throw UsageError("PN calibration needs at least 3 points");
    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd a(n, 2);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = points[static_cast<std::size_t>(i)];
        if (!(p.theta > 0.0)) throw UsageError("calibration angle must be > 0");
        if (!(p.weight > 0.0)) throw UsageError("calibration weight must be > 0");
        const double w = std::sqrt(p.weight);
        a(i, 0) = w * p.theta;
        a(i, 1) = w * p.theta * p.theta;
        b[i] = w * p.xi0;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-12);
    if (qr.rank() < 2) throw DegenerateError("calibration design is degenerate (need distinct angles)");
    const Eigen::Vector2d c = qr.solve(b);
    PnCalibration out;
    out.linear = c[0];
    out.quadratic = c[1];
    if (out.linear == 0.0) throw DegenerateError("linear calibration coefficient vanished");
    out.quad_fraction = c[1] / c[0];
    return out;
}

}  // namespace dissent
