#include "dissent/spin_model.hpp"

#include "dissent/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

namespace dissent {

ModelParams& ModelParams::set_mu_minus_nu(double s) {
    if (!(s > 0.0)) {
        throw InvariantViolation("mu - nu must be positive");
    }
    mu = 0.5 * (s + 1.0 / s);
    nu = 0.5 * (1.0 / s - s);
    return *this;
}

void ModelParams::validate() const {
    auto require = [](bool ok, const char* msg) {
        if (!ok) throw InvariantViolation(msg);
    };
    require(std::isfinite(d) && d >= 0.0, "optical depth d must be >= 0");
    require(Gamma >= 0.0, "Gamma must be >= 0");
    require(Gamma_col >= 0.0, "Gamma_col must be >= 0");
    require(Gamma_tilde >= 0.0, "Gamma_tilde must be >= 0");
    require(Gamma_pump >= 0.0, "Gamma_pump must be >= 0");
    require(Gamma_L_out >= 0.0, "Gamma_L_out must be >= 0");
    require(Phi >= 0.0, "Phi must be >= 0");
    require(gamma_s_scale >= 0.0, "gamma_s_scale must be >= 0");
    require(N > 0.0, "N must be > 0");
    require(eta >= 0.0 && eta <= 1.0, "eta must lie in [0, 1]");
    require(pump_branching >= 0.0 && pump_branching <= 1.0,
            "pump_branching must lie in [0, 1]");
    require(nu >= 0.0 && mu > nu, "coupling amplitudes need mu > nu >= 0");
    require(std::abs(mu * mu - nu * nu - 1.0) < 1e-9, "mu^2 - nu^2 must equal 1");
    require(squeeze() < 1.0, "(mu - nu)^2 must be < 1");
}

namespace {

struct Field {
    const char* name;
    double ModelParams::*member;
};

constexpr std::array<Field, 14> kFields{{
    {"d", &ModelParams::d},
    {"Gamma", &ModelParams::Gamma},
    {"mu", &ModelParams::mu},
    {"nu", &ModelParams::nu},
    {"Gamma_col", &ModelParams::Gamma_col},
    {"Gamma_tilde", &ModelParams::Gamma_tilde},
    {"Gamma_pump", &ModelParams::Gamma_pump},
    {"Gamma_L_out", &ModelParams::Gamma_L_out},
    {"Phi", &ModelParams::Phi},
    {"Omega", &ModelParams::Omega},
    {"N", &ModelParams::N},
    {"eta", &ModelParams::eta},
    {"gamma_s_scale", &ModelParams::gamma_s_scale},
    {"pump_branching", &ModelParams::pump_branching},
}};

}  // namespace

void to_json(nlohmann::json& j, const ModelParams& p) {
    j = nlohmann::json::object();
    for (const auto& f : kFields) j[f.name] = p.*(f.member);
}

void merge_json(const nlohmann::json& j, ModelParams& p) {
    if (!j.is_object()) throw UsageError("model parameters must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const Field* field = nullptr;
        for (const auto& f : kFields) {
            if (it.key() == f.name) field = &f;
        }
        if (field == nullptr) {
            throw UsageError("unknown model parameter '" + it.key() + "'");
        }
        if (!it.value().is_number()) {
            throw UsageError("model parameter '" + it.key() + "' must be a number");
        }
        p.*(field->member) = it.value().get<double>();
    }
}

ModelParams params_from_json(const nlohmann::json& j, const ModelParams& base) {
    ModelParams p = base;
    merge_json(j, p);
    return p;
}

GaussianState GaussianState::css(double jx) {
    GaussianState s;
    s.jx_mean = jx;
    return s;
}

GaussianState GaussianState::from_nonlocal(double v_u, double v_v, double jx) {
    if (!(v_u > 0.0) || !(v_v > 0.0)) {
        throw InvariantViolation("nonlocal variances must be positive");
    }
    // Conjugate partners of X_- and P_+ at the smallest value the uncertainty
    // relation allows, or thermal when the variance is above vacuum.
    const double conj_u = std::max(v_u, 1.0 / v_u);
    const double conj_v = std::max(v_v, 1.0 / v_v);
    GaussianState s;
    s.jx_mean = jx;
    const double vx = 0.5 * (conj_v + v_u);
    const double cx = 0.5 * (conj_v - v_u);
    const double vp = 0.5 * (v_v + conj_u);
    const double cp = 0.5 * (v_v - conj_u);
    s.cov.setZero();
    s.cov(0, 0) = s.cov(2, 2) = vx;
    s.cov(1, 1) = s.cov(3, 3) = vp;
    s.cov(0, 2) = s.cov(2, 0) = cx;
    s.cov(1, 3) = s.cov(3, 1) = cp;
    return s;
}

double GaussianState::v_u() const noexcept {
    return 0.5 * (cov(0, 0) + cov(2, 2) - 2.0 * cov(0, 2));
}

double GaussianState::v_v() const noexcept {
    return 0.5 * (cov(1, 1) + cov(3, 3) + 2.0 * cov(1, 3));
}

Quadratures holstein_primakoff(double jy, double jz, double jx_mag, Ensemble ensemble) {
    if (!(jx_mag > 0.0)) {
        throw DegenerateError("degenerate polarization: |<J_x>| must be > 0");
    }
    const double root = std::sqrt(jx_mag);
    const double sign = ensemble == Ensemble::I ? 1.0 : -1.0;
    return {jy / root, sign * jz / root};
}

const Mat4& symplectic_form() {
    static const Mat4 omega = [] {
        Mat4 m = Mat4::Zero();
        m(0, 1) = 1.0;
        m(1, 0) = -1.0;
        m(2, 3) = 1.0;
        m(3, 2) = -1.0;
        return m;
    }();
    return omega;
}

Eigen::Vector2d symplectic_eigenvalues(const Mat4& cov) {
    // i*Omega*cov has eigenvalues +-nu_k; Omega*cov*Omega*cov has -nu_k^2.
    const Mat4& om = symplectic_form();
    const Mat4 m = -(om * cov * om * cov);
    Eigen::EigenSolver<Mat4> es(m, false);
    std::array<double, 4> ev{};
    for (int k = 0; k < 4; ++k) ev[k] = std::sqrt(std::max(0.0, es.eigenvalues()[k].real()));
    std::sort(ev.begin(), ev.end());
    return {ev[0], ev[2]};
}

bool satisfies_uncertainty(const Mat4& cov, double tol) {
    using C = std::complex<double>;
    Eigen::Matrix4cd h = cov.cast<C>() + C(0.0, 1.0) * symplectic_form().cast<C>();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -tol;
}

bool is_psd(const Mat4& cov, double tol) {
    const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) return false;
    Eigen::SelfAdjointEigenSolver<Mat4> es(cov, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -tol;
}

EprReport epr_from_nonlocal(double v_u, double v_v) {
    EprReport r;
    r.var_x_minus = 0.5 * v_u;
    r.var_p_plus = 0.5 * v_v;
    r.xi = r.var_x_minus + r.var_p_plus;
    r.entangled = r.xi < 1.0;
    return r;
}

EprReport epr_variance(const GaussianState& state) {
    if (!is_psd(state.cov)) {
        throw InvariantViolation("covariance is not symmetric positive semidefinite");
    }
    return epr_from_nonlocal(state.v_u(), state.v_v());
}

double kappa_sq(double gamma_s, double mu_minus_nu, double T) {
    if (mu_minus_nu == 0.0) {
        throw DegenerateError("kappa^2 undefined for mu - nu = 0");
    }
    return -std::expm1(-2.0 * gamma_s * T) / (mu_minus_nu * mu_minus_nu);
}

CouplingConstants coupling_constants(const ModelParams& params, double jx, double T) {
    if (T < 0.0) throw UsageError("interaction time must be >= 0");
    const double s = params.mu_minus_nu();
    if (s == 0.0) throw DegenerateError("coupling constants undefined for mu - nu = 0");
    CouplingConstants c;
    c.gamma_s = params.gamma_s_scale * s * s * std::abs(jx) * params.Phi;
    c.kappa_sq = kappa_sq(c.gamma_s, s, T);
    return c;
}

}  // namespace dissent
