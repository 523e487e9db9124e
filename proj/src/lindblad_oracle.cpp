#include "dissent/lindblad_oracle.hpp"

#include <cmath>
#include <vector>

#include "dissent/errors.hpp"

namespace dissent {

namespace {

using C = std::complex<double>;
using Mat = Eigen::MatrixXcd;

// l acting on spin j of `total` spins; spin 0 is the most significant bit.
Mat lowering(int j, int total) {
    const int dim = 1 << total;
    Mat m = Mat::Zero(dim, dim);
    const int bit = 1 << (total - 1 - j);
    for (int s = 0; s < dim; ++s) {
        if (s & bit) m(s & ~bit, s) = 1.0;
    }
    return m;
}

struct Ops {
    std::vector<Mat> jumps;
    std::vector<double> rates;
    std::vector<Mat> local;  // l_j for all spins
    Mat sum_l[2];
};

Ops build(int n, const ModelParams& p, const NoiseChannels& noise) {
    if (noise.distinguishable) throw UsageError("oracle does not model distinguishable emitters");
    const int total = 2 * n;
    const int dim = 1 << total;
    Ops ops;
    ops.sum_l[0] = ops.sum_l[1] = Mat::Zero(dim, dim);
    for (int j = 0; j < total; ++j) {
        ops.local.push_back(lowering(j, total));
        ops.sum_l[j / n] += ops.local.back();
    }
    const double r = p.d * p.Gamma;
    if (r > 0.0) {
        ops.jumps.push_back(p.mu * ops.sum_l[0] - p.nu * ops.sum_l[1].adjoint());
        ops.rates.push_back(r);
        ops.jumps.push_back(p.mu * ops.sum_l[1] - p.nu * ops.sum_l[0].adjoint());
        ops.rates.push_back(r);
    }
    if (noise.dephasing_on && noise.dephasing > 0.0) {
        for (const auto& l : ops.local) {
            ops.jumps.push_back(l);
            ops.rates.push_back(noise.dephasing);
        }
    }
    return ops;
}

Mat lindblad_rhs(const Mat& rho, const Ops& ops) {
    Mat out = Mat::Zero(rho.rows(), rho.cols());
    for (std::size_t k = 0; k < ops.jumps.size(); ++k) {
        const Mat& l = ops.jumps[k];
        const Mat ld = l.adjoint();
        const Mat ldl = ld * l;
        out += ops.rates[k] * (l * rho * ld - 0.5 * (ldl * rho + rho * ldl));
    }
    return out;
}

double rate_scale(const Ops& ops) {
    double s = 0.0;
    for (std::size_t k = 0; k < ops.jumps.size(); ++k) {
        // ||L||_2^2 <= ||L||_1 ||L||_inf
        const Eigen::MatrixXd a = ops.jumps[k].cwiseAbs();
        s += ops.rates[k] * a.colwise().sum().maxCoeff() * a.rowwise().sum().maxCoeff();
    }
    return s;
}

}  // namespace

ExactState ExactState::css(int n) {
    if (n < 1 || n > 3) throw UsageError("exact oracle supports 1 to 3 spins per ensemble");
    ExactState s;
    s.n_per_ensemble = n;
    s.dim = 1 << (2 * n);
    s.rho = Mat::Zero(s.dim, s.dim);
    s.rho(0, 0) = 1.0;
    return s;
}

ExactState ExactState::maximally_mixed(int n) {
    ExactState s = css(n);
    s.rho = Mat::Identity(s.dim, s.dim) / static_cast<double>(s.dim);
    return s;
}

void ExactState::validate(double tol) const {
    if (rho.rows() != dim || rho.cols() != dim) throw InvariantViolation("density matrix has wrong shape");
    if (std::abs(rho.trace() - C(1.0, 0.0)) > tol) throw IntegrationError("trace drifted from 1");
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > tol) {
        throw InvariantViolation("density matrix is not Hermitian");
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(rho, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol) throw InvariantViolation("density matrix is not positive");
}

ExactState exact_lindblad_step(const ExactState& state, const ModelParams& params,
                               const NoiseChannels& noise, double dt) {
    if (dt < 0.0) throw UsageError("dt must be >= 0");
    ExactState out = state;
    if (dt == 0.0) return out;
    const Ops ops = build(state.n_per_ensemble, params, noise);
    if (ops.jumps.empty()) return out;
    const int sub = std::max(1, static_cast<int>(std::ceil(dt * rate_scale(ops) / 0.02)));
    const double h = dt / sub;
    Mat& rho = out.rho;
    for (int i = 0; i < sub; ++i) {
        const Mat k1 = lindblad_rhs(rho, ops);
        const Mat k2 = lindblad_rhs(rho + 0.5 * h * k1, ops);
        const Mat k3 = lindblad_rhs(rho + 0.5 * h * k2, ops);
        const Mat k4 = lindblad_rhs(rho + h * k3, ops);
        rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        rho = 0.5 * (rho + rho.adjoint()).eval();
    }
    if (std::abs(rho.trace() - C(1.0, 0.0)) > 1e-10) {
        throw IntegrationError("exact integration lost trace beyond 1e-10");
    }
    out.validate(1e-10);
    return out;
}

GaussianState exact_moments(const ExactState& state) {
    const int n = state.n_per_ensemble;
    const int total = 2 * n;
    const int dim = state.dim;
    std::vector<Mat> r(4, Mat::Zero(dim, dim));
    const double norm = 1.0 / std::sqrt(static_cast<double>(n));
    for (int j = 0; j < total; ++j) {
        const Mat l = lowering(j, total);
        const int k = j / n;
        r[2 * k] += norm * (l + l.adjoint());
        r[2 * k + 1] += norm * C(0.0, -1.0) * (l - l.adjoint());
    }
    GaussianState g;
    for (int a = 0; a < 4; ++a) g.mean[a] = (state.rho * r[a]).trace().real();
    for (int a = 0; a < 4; ++a) {
        for (int b = a; b < 4; ++b) {
            const double sym = 0.5 * (state.rho * (r[a] * r[b] + r[b] * r[a])).trace().real();
            g.cov(a, b) = g.cov(b, a) = sym - g.mean[a] * g.mean[b];
        }
    }
    g.jx_mean = static_cast<double>(n);
    return g;
}

double oracle_gamma_c(const ModelParams& params, int n) {
    return 0.5 * params.d * params.Gamma * n;
}

double validate_against_oracle(const ModelParams& params, double horizon,
                               const NoiseChannels& noise, const OracleOptions& opt) {
    if (horizon < 0.0) throw UsageError("horizon must be >= 0");
    if (opt.points < 2) throw UsageError("oracle comparison needs at least 2 points");
    ExactState ex = ExactState::css(opt.n_per_ensemble);
    if (opt.prep_time > 0.0) ex = exact_lindblad_step(ex, opt.prep_params, opt.prep_noise, opt.prep_time);
    if (horizon == 0.0) return 0.0;

    ModelParams gp = params;
    gp.d = params.d * opt.n_per_ensemble;
    std::vector<double> times;
    for (int i = 0; i < opt.points; ++i) times.push_back(horizon * i / (opt.points - 1));
    PropagateOptions popt;
    popt.check_uncertainty = false;
    const Trajectory traj = propagate_moments(exact_moments(ex), gp, noise, times, std::nullopt, popt);

    double err = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (i > 0) ex = exact_lindblad_step(ex, params, noise, times[i] - times[i - 1]);
        const double xi_exact = epr_variance(exact_moments(ex)).xi;
        err = std::max(err, std::abs(traj.xi_series[i].xi - xi_exact));
    }
    return err;
}

}  // namespace dissent
