#pragma once

// Atom-light input-output relations at the variance level.
//
// The cosine light mode reads the nonlocal X_I - X_II combination (V_u), the
// sine mode reads P_I + P_II (V_v). All variances are in the units of
// spin_model.hpp: CSS and light vacuum are 1. A noise operator quoted with
// variance 1/2 in the two-cell convention enters here with variance 1.

#include <cstdint>
#include <cstddef>

#include "dissent/spin_model.hpp"

namespace dissent {

struct VariancePair {
    double x_minus = 1.0;  // V_u (cosine channel)
    double p_plus = 1.0;   // V_v (sine channel)

    double xi() const noexcept { return 0.5 * (x_minus + p_plus); }
};

struct LossParams {
    double gamma_s = 0.0;
    double gamma_extra = 0.0;
    double eta = 1.0;
    double noise_var = 1.0;  // variance of the admixed atomic noise F

    double gamma() const noexcept { return gamma_s + gamma_extra; }
    double epsilon_sq() const noexcept;
    void validate() const;
};

struct IoSnapshot {
    VariancePair atomic_in;
    VariancePair atomic_out;
    VariancePair y_in;
    VariancePair y_out;
    double kappa = 0.0;
};

IoSnapshot apply_io(const VariancePair& atomic_in, double y_in_var, const ModelParams& params,
                    double T, double jx = 1.0);
// Same with gamma_s given directly.
IoSnapshot apply_io_rate(const VariancePair& atomic_in, double y_in_var, double gamma_s,
                         double mu_minus_nu, double T);

IoSnapshot apply_io_lossy(const VariancePair& atomic_in, double y_in_var, const LossParams& loss,
                          double mu_minus_nu, double T);

// kappa^2 = (1 - eps^2)(1 - e^{-2 gamma T}) / (mu - nu)^2.
double lossy_kappa_sq(const LossParams& loss, double mu_minus_nu, double T);

// Light output variance for zero atomic input under losses: the part of
// var(y_out) not proportional to the atomic variance.
double lossy_light_floor(const LossParams& loss, double mu_minus_nu, double T, double y_in_var = 1.0);

// Symplectic map of one atomic mode and one light mode, ordering
// (x_atom, p_atom, x_light, p_light), lossless case.
Mat4 io_symplectic_map(double gamma_s, double mu_minus_nu, double T);
Mat4 apply_io_joint(const Mat4& joint_cov, double gamma_s, double mu_minus_nu, double T);

double apply_detection_loss(double y_var, double eta);

struct Reconstruction {
    double variance = 0.0;
    bool below_floor = false;  // negative estimate, reported as is
};

Reconstruction reconstruct_atomic_variance(double y_out_var, double kappa_sq, double mu_minus_nu,
                                           double sigma_in_sq = 1.0, double eta = 1.0);
// Inverse of apply_detection_loss followed by apply_io_lossy.
Reconstruction reconstruct_atomic_variance_lossy(double y_out_var, const LossParams& loss,
                                                 double mu_minus_nu, double T,
                                                 double sigma_in_sq = 1.0);

// Amplitude-level Monte Carlo of one probe pulse per trial: atomic quadratures
// drawn with variances V_u, V_v, vacuum light, the lossless map, then the beam
// splitter. The sample variances of the detected light are inverted back.
struct ReadoutEstimate {
    VariancePair variance;      // reconstructed V_u, V_v
    VariancePair std_error;
    VariancePair light;         // sample variances of the detected light
    std::size_t trials = 0;
};

ReadoutEstimate monte_carlo_readout(const VariancePair& atomic, double gamma_s, double mu_minus_nu,
                                    double T, double eta, std::size_t trials, std::uint64_t seed);

}  // namespace dissent
