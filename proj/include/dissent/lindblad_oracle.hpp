#pragma once

// Exact density-matrix integration for a few two-level spins per ensemble.
// Used only to certify the moment equations.
//
// Each spin has basis {|0>, |1>} with |0> the polarized state and lowering
// l = |0><1|. Collective jumps are A = mu sum l_I - nu sum l_II^dag and
// B = mu sum l_II - nu sum l_I^dag at rate d Gamma, dephasing is D[l_j] at
// Gamma_tilde. In the bosonic limit this is the moment engine with collective
// rate d Gamma n.

#include <Eigen/Dense>

#include "dissent/gaussian_dynamics.hpp"
#include "dissent/spin_model.hpp"

namespace dissent {

struct ExactState {
    int n_per_ensemble = 1;
    int dim = 4;
    Eigen::MatrixXcd rho;

    // All spins polarized (the CSS / vacuum).
    static ExactState css(int n_per_ensemble);
    static ExactState maximally_mixed(int n_per_ensemble);
    void validate(double tol = 1e-10) const;
};

ExactState exact_lindblad_step(const ExactState& state, const ModelParams& params,
                               const NoiseChannels& noise, double dt);

// Means and symmetrized covariance of X_k = sum (l + l^dag)/sqrt(n),
// P_k = sum -i(l - l^dag)/sqrt(n).
GaussianState exact_moments(const ExactState& state);

struct OracleOptions {
    int n_per_ensemble = 1;
    int points = 41;
    // Optional exact preparation run before the comparison starts.
    double prep_time = 0.0;
    ModelParams prep_params;
    NoiseChannels prep_noise = NoiseChannels::none();
};

// Collective amplitude rate gamma_c = d Gamma n / 2 (variances relax at 2 gamma_c).
double oracle_gamma_c(const ModelParams& params, int n_per_ensemble);

// max |xi_gaussian - xi_exact| over a uniform grid on [0, horizon].
double validate_against_oracle(const ModelParams& params, double horizon,
                               const NoiseChannels& noise = NoiseChannels::none(),
                               const OracleOptions& opt = {});

}  // namespace dissent
