#pragma once

// Discrete-time S2 photocurrent records at baseband (rotating frame), mode
// integrals, and the conditional-variance / feedback-gain machinery.
//
// Per bin k (cos channel driven by the nonlocal mode u, sin channel by v):
//     o_k     = w_k + g sqrt(dt) u_k
//     u_{k+1} = a u_k + sqrt((1 - a^2) / (2 gamma)) (h w_k + f z_k)
// with a = exp(-gamma dt), g = sqrt(2 gamma_s)/(mu - nu), h = -(mu - nu) sqrt(2 gamma_s),
// f = sqrt(2 gamma_extra var(F)). w_k, z_k are independent unit normals; w_k
// is the input vacuum of that bin. Detection mixes in vacuum: sqrt(eta) o_k +
// sqrt(1 - eta) n_k.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "dissent/gaussian_dynamics.hpp"
#include "dissent/light_readout.hpp"

namespace dissent {

struct LightRecord {
    double dt = 0.0;              // ms
    double omega = 0.0;           // demodulation frequency, rad/ms
    std::uint64_t seed = 0;
    double sx_norm = 1.0;
    std::vector<double> s2_cos;   // demodulated quadratures, one value per bin
    std::vector<double> s2_sin;

    std::size_t size() const noexcept { return s2_cos.size(); }
    double duration() const noexcept { return dt * static_cast<double>(size()); }
    void validate() const;
};

// Exact-text CSV: a header block (dt_ms,omega,seed,sx_norm) followed by
// t_ms,s2_cos,s2_sin rows. Lines starting with '#' are ignored on read.
void write_record_csv(std::ostream& os, const LightRecord& rec);
LightRecord read_record_csv(std::istream& is);

enum class Phase { cos, sin };
enum class Direction { falling, rising, flat };

struct ModeFunctional {
    Phase phase = Phase::cos;
    Direction direction = Direction::falling;
    double rate = 0.0;      // >= 0, ms^-1
    double t_start = 0.0;   // ms
    double t_end = 0.0;     // ms

    // Bin weights over the window for a record with step dt.
    std::vector<double> weights(double dt) const;
    std::size_t first_bin(double dt) const;
    // Euclidean norm of the weights, the N of a unit-vacuum-variance mode.
    double norm(double dt) const;
    void validate() const;
};

double integrate_mode(const LightRecord& rec, const ModeFunctional& mode);

struct RecordModel {
    LossParams loss;            // gamma_s, gamma_extra, eta, var(F)
    double mu_minus_nu = 0.4;
    VariancePair initial;       // atomic V_u, V_v at t = 0
    double duration = 1.0;      // ms
    double omega = 0.0;
    double sx_norm = 1.0;
    // Aliasing guard: dt * gamma must not exceed this.
    double max_rate_step = 0.05;
};

LightRecord synthesize_record(const RecordModel& model, double dt, std::uint64_t seed);

// Record model for the final state of a trajectory: gamma_s = d Gamma P2~ / 2,
// gamma_extra = Gamma_tilde / 2, var(F) = 1/P2.
RecordModel record_model_from(const Trajectory& traj, const ModelParams& params, double duration);
LightRecord synthesize_record(const Trajectory& traj, const ModelParams& params, double dt,
                              std::uint64_t seed, double duration);

// Trial i uses master_seed XOR i. Masters that differ only in low bits share
// most of their trial seeds, so callers holding a user seed should pass it
// through derive_master first.
std::uint64_t derive_master(std::uint64_t seed, std::uint64_t stream = 0);

std::vector<LightRecord> synthesize_batch(const RecordModel& model, double dt,
                                          std::uint64_t master_seed, std::size_t trials);

// Mode integrals of `trials` records without keeping the records:
// result(i, m) = integrate_mode(record_i, modes[m]).
Eigen::MatrixXd sample_modes(const RecordModel& model, double dt, std::uint64_t master_seed,
                             std::size_t trials, const std::vector<ModeFunctional>& modes);
Eigen::MatrixXd sample_modes(const std::vector<LightRecord>& records,
                             const std::vector<ModeFunctional>& modes);

double sample_variance(const Eigen::VectorXd& x);
double sample_covariance(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// var(y_read - alpha y_feed) over the batch.
double conditional_variance(const std::vector<LightRecord>& records,
                            const ModeFunctional& readout_mode, const ModeFunctional& feed_mode,
                            double alpha);
double conditional_variance(const Eigen::VectorXd& y_read, const Eigen::VectorXd& y_feed,
                            double alpha);

struct FeedbackConfig {
    double alpha = 0.0;
    double gamma_m = 0.0;
    double T = 0.0;
    double t_probe = 1.0;
    void validate() const;
};

// Readout: falling at rate gamma over [T, T + t_probe]; feed: rising at
// gamma_m over [0, T). The phase is taken from the argument.
ModeFunctional readout_mode(double gamma, double T, double t_probe, Phase phase);
ModeFunctional feed_mode(double gamma_m, double T, Phase phase);

enum class GainSharing { shared, per_channel };

struct GainResult {
    double alpha_star = 0.0;   // shared alpha, or the cos-channel alpha
    double alpha_sin = 0.0;    // equals alpha_star when shared
    double gamma_m_star = 0.0;
    double min_variance = 0.0; // mean of the cos and sin conditional variances
    double var_cos = 0.0;
    double var_sin = 0.0;
    double unconditional = 0.0;  // mean of the unconditional cos and sin variances
};

std::vector<double> gamma_m_grid(double lo, double hi, double step = 0.01);

// Scans gamma_m over the grid with the closed-form alpha at each node. The
// readout mode's window sets T; both quadratures enter.
GainResult optimize_gain(const std::vector<LightRecord>& records, const ModeFunctional& readout,
                         const std::vector<double>& gamma_m_grid,
                         GainSharing sharing = GainSharing::shared);
GainResult optimize_gain(const RecordModel& model, double dt, std::uint64_t master_seed,
                         std::size_t trials, const ModeFunctional& readout,
                         const std::vector<double>& gamma_m_grid,
                         GainSharing sharing = GainSharing::shared);

// Conditional light variances through the same inverse as the unconditional
// reconstruction. xi = (V_u + V_v)/2.
Reconstruction reconstruct_conditional_xi(double cond_var_cos, double cond_var_sin,
                                          double kappa_sq, double mu_minus_nu, double eta);
Reconstruction reconstruct_conditional_xi(double cond_var_cos, double cond_var_sin,
                                          const LossParams& loss, double mu_minus_nu,
                                          double t_probe);

// Carrier-level cross-check: modulate onto cos/sin(omega t) with `sub` samples
// per bin, then demodulate each bin by a 2x2 least-squares projection.
std::vector<double> carrier_modulate(const LightRecord& rec, int sub);
LightRecord carrier_demodulate(const std::vector<double>& signal, const LightRecord& like, int sub);

}  // namespace dissent
