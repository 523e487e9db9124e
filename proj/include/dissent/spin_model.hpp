#pragma once

// Core domain types for two collective spin ensembles in the
// Holstein-Primakoff (bosonic) limit.
//
// Unit conventions used throughout the library
// --------------------------------------------
// * Quadratures X = a + a^dagger, P = -i(a - a^dagger), so [X, P] = 2i and a
//   coherent spin state (CSS) or light vacuum has variance 1 per quadrature.
// * The nonlocal mode variances
//       V_u = var(X_I - X_II) / 2,   V_v = var(P_I + P_II) / 2
//   are 1 for a CSS and (mu - nu)^2 for the engineered dark state. The light
//   input-output relations act on V_u and V_v directly, with vacuum light
//   variance 1.
// * The EPR number is xi = (V_u + V_v) / 2, so xi_CSS = 1 and the dark state
//   reaches xi = (mu - nu)^2. EprReport carries the two contributions
//   V_u / 2 and V_v / 2 (each 1/2 for a CSS), i.e. the half-variances written
//   in units where a CSS quadrature has variance 1/2. Their sum is xi.
// * A noise operator quoted with variance 1/2 in the two-cell convention has
//   variance 1 here. Multiply any half-unit variance by 2 to convert.

#include <Eigen/Dense>

#include <array>
#include <string>

#include <json.hpp>

namespace dissent {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

enum class Ensemble { I, II };

struct ModelParams {
    double d = 0.0;            // optical depth
    double Gamma = 0.0;        // single-atom radiative rate, 1/ms
    double mu = 1.45;          // mu - nu = 0.4 with mu^2 - nu^2 = 1
    double nu = 1.05;
    double Gamma_col = 0.0;    // collisional rate, 1/ms
    double Gamma_tilde = 0.0;  // effective dephasing, 1/ms
    double Gamma_pump = 0.0;   // optical pumping within F=4, 1/ms
    double Gamma_L_out = 0.0;  // drive-induced loss to F=3, 1/ms
    double Phi = 1.0;          // drive photon flux, arbitrary scale
    double Omega = 0.0;        // Larmor angular frequency, rad/ms
    double N = 1.0;            // atoms per ensemble
    double eta = 1.0;          // detection efficiency
    // Calibration constant of gamma_s = gamma_s_scale * (mu-nu)^2 * Jx * Phi.
    double gamma_s_scale = 1.0;
    // Fraction of hidden-level refill that lands in |4,+-4>.
    double pump_branching = 0.5;

    double mu_minus_nu() const noexcept { return mu - nu; }
    double squeeze() const noexcept { return (mu - nu) * (mu - nu); }

    // Sets mu, nu from s = mu - nu under mu^2 - nu^2 = 1.
    ModelParams& set_mu_minus_nu(double s);

    // Throws InvariantViolation describing the first violated constraint.
    void validate() const;
};

void to_json(nlohmann::json& j, const ModelParams& p);
// Overwrites only the keys present; unknown keys throw UsageError.
void merge_json(const nlohmann::json& j, ModelParams& p);
ModelParams params_from_json(const nlohmann::json& j, const ModelParams& base = {});

struct GaussianState {
    Vec4 mean = Vec4::Zero();              // (X_I, P_I, X_II, P_II)
    Mat4 cov = Mat4::Identity();
    double jx_mean = 1.0;                  // |<J_x>| of the polarized ensembles

    static GaussianState css(double jx = 1.0);
    // Both nonlocal variances at v_u, v_v with the local marginals of a
    // two-mode squeezed thermal state.
    static GaussianState from_nonlocal(double v_u, double v_v, double jx = 1.0);

    double v_u() const noexcept;  // var(X_I - X_II) / 2
    double v_v() const noexcept;  // var(P_I + P_II) / 2
};

struct EprReport {
    double var_x_minus = 0.0;
    double var_p_plus = 0.0;
    double xi = 0.0;
    bool entangled = false;
};

struct Quadratures {
    double X = 0.0;
    double P = 0.0;
};

Quadratures holstein_primakoff(double jy, double jz, double jx_mag, Ensemble ensemble);

// Symplectic form for the ordering (X_I, P_I, X_II, P_II).
const Mat4& symplectic_form();

Eigen::Vector2d symplectic_eigenvalues(const Mat4& cov);

// cov + i*Omega >= 0 within tol (equivalent to all symplectic eigenvalues >= 1).
bool satisfies_uncertainty(const Mat4& cov, double tol = 1e-9);

bool is_psd(const Mat4& cov, double tol = 1e-10);

EprReport epr_variance(const GaussianState& state);
EprReport epr_from_nonlocal(double v_u, double v_v);

struct CouplingConstants {
    double gamma_s = 0.0;   // 1/ms
    double kappa_sq = 0.0;
};

CouplingConstants coupling_constants(const ModelParams& params, double jx, double T);
double kappa_sq(double gamma_s, double mu_minus_nu, double T);

}  // namespace dissent
