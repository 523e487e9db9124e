#include "dissent/light_readout.hpp"

#include <cmath>
#include <random>

#include "dissent/errors.hpp"

namespace dissent {

double LossParams::epsilon_sq() const noexcept {
    const double g = gamma();
    return g > 0.0 ? gamma_extra / g : 0.0;
}

void LossParams::validate() const {
    if (gamma_s < 0.0 || gamma_extra < 0.0) throw InvariantViolation("loss rates must be >= 0");
    if (eta < 0.0 || eta > 1.0) throw InvariantViolation("eta must lie in [0, 1]");
    if (noise_var < 0.0) throw InvariantViolation("noise variance must be >= 0");
}

namespace {

void require_s(double s) {
    if (s == 0.0) throw DegenerateError("mu - nu must be nonzero");
}

}  // namespace

IoSnapshot apply_io_rate(const VariancePair& in, double y_in_var, double gamma_s, double s,
                         double T) {
    if (T < 0.0) throw UsageError("interaction time must be >= 0");
    require_s(s);
    const double one_minus = -std::expm1(-2.0 * gamma_s * T);
    const double e = 1.0 - one_minus;
    const double k2 = one_minus / (s * s);
    IoSnapshot o;
    o.atomic_in = in;
    o.y_in = {y_in_var, y_in_var};
    o.kappa = std::sqrt(k2);
    const double mix = k2 * s * s * s * s;
    o.atomic_out = {e * in.x_minus + mix * y_in_var, e * in.p_plus + mix * y_in_var};
    o.y_out = {e * y_in_var + k2 * in.x_minus, e * y_in_var + k2 * in.p_plus};
    return o;
}

IoSnapshot apply_io(const VariancePair& in, double y_in_var, const ModelParams& params, double T,
                    double jx) {
    const CouplingConstants c = coupling_constants(params, jx, T);
    return apply_io_rate(in, y_in_var, c.gamma_s, params.mu_minus_nu(), T);
}

double lossy_kappa_sq(const LossParams& loss, double s, double T) {
    require_s(s);
    return (1.0 - loss.epsilon_sq()) * -std::expm1(-2.0 * loss.gamma() * T) / (s * s);
}

double lossy_light_floor(const LossParams& loss, double s, double T, double y_var) {
    require_s(s);
    const double g = loss.gamma();
    const double e2 = loss.epsilon_sq();
    const double one_minus = -std::expm1(-2.0 * g * T);
    const double a = 1.0 - one_minus;
    if (e2 == 0.0) return y_var * a;
    // M = (1 - a) / (2 gamma); aT/M -> 1 as gamma T -> 0.
    const double at_over_m = (g * T > 0.0) ? a * T * 2.0 * g / one_minus : 1.0;
    const double c = 1.0 - e2;
    return y_var * (e2 * e2 + 2.0 * e2 * c * at_over_m + c * c * a) +
           loss.noise_var * e2 * c / (s * s) * ((1.0 + a) - 2.0 * at_over_m);
}

IoSnapshot apply_io_lossy(const VariancePair& in, double y_in_var, const LossParams& loss,
                          double s, double T) {
    loss.validate();
    if (T < 0.0) throw UsageError("interaction time must be >= 0");
    require_s(s);
    const double e2 = loss.epsilon_sq();
    if (e2 == 0.0) return apply_io_rate(in, y_in_var, loss.gamma_s, s, T);
    const double one_minus = -std::expm1(-2.0 * loss.gamma() * T);
    const double a = 1.0 - one_minus;
    const double k2 = lossy_kappa_sq(loss, s, T);
    const double floor = lossy_light_floor(loss, s, T, y_in_var);
    const double add = (1.0 - e2) * one_minus * s * s * y_in_var + e2 * one_minus * loss.noise_var;
    IoSnapshot o;
    o.atomic_in = in;
    o.y_in = {y_in_var, y_in_var};
    o.kappa = std::sqrt(k2);
    o.atomic_out = {a * in.x_minus + add, a * in.p_plus + add};
    o.y_out = {floor + k2 * in.x_minus, floor + k2 * in.p_plus};
    return o;
}

Mat4 io_symplectic_map(double gamma_s, double s, double T) {
    require_s(s);
    const double e = std::exp(-gamma_s * T);
    const double k = std::sqrt(-std::expm1(-2.0 * gamma_s * T)) / s;
    // x block acts on (x_atom, x_light), p block on (p_atom, p_light).
    Mat4 m = Mat4::Zero();
    m(0, 0) = e;
    m(0, 2) = -k * s * s;
    m(2, 0) = k;
    m(2, 2) = e;
    m(1, 1) = e;
    m(1, 3) = -k;
    m(3, 1) = k * s * s;
    m(3, 3) = e;
    return m;
}

Mat4 apply_io_joint(const Mat4& cov, double gamma_s, double s, double T) {
    const Mat4 m = io_symplectic_map(gamma_s, s, T);
    return m * cov * m.transpose();
}

double apply_detection_loss(double y_var, double eta) {
    if (eta < 0.0 || eta > 1.0) throw UsageError("eta must lie in [0, 1]");
    return eta * y_var + (1.0 - eta);
}

namespace {

double undo_detection(double y, double eta, double sigma_in_sq) {
    if (eta < 0.0 || eta > 1.0) throw UsageError("eta must lie in [0, 1]");
    if (eta == 0.0) throw NoInformationError("eta = 0: detected light carries no atomic signal");
    return (y - (1.0 - eta) * sigma_in_sq) / eta;
}

}  // namespace

Reconstruction reconstruct_atomic_variance(double y, double k2, double s, double sigma_in_sq,
                                           double eta) {
    if (!(k2 > 0.0)) throw NoInformationError("kappa^2 = 0: light carries no atomic signal");
    const double y0 = undo_detection(y, eta, sigma_in_sq);
    Reconstruction r;
    r.variance = (y0 - sigma_in_sq * (1.0 - k2 * s * s)) / k2;
    r.below_floor = r.variance < 0.0;
    return r;
}

Reconstruction reconstruct_atomic_variance_lossy(double y, const LossParams& loss, double s,
                                                 double T, double sigma_in_sq) {
    const double k2 = lossy_kappa_sq(loss, s, T);
    if (!(k2 > 0.0)) throw NoInformationError("kappa^2 = 0: light carries no atomic signal");
    const double y0 = undo_detection(y, loss.eta, sigma_in_sq);
    Reconstruction r;
    r.variance = (y0 - lossy_light_floor(loss, s, T, sigma_in_sq)) / k2;
    r.below_floor = r.variance < 0.0;
    return r;
}

ReadoutEstimate monte_carlo_readout(const VariancePair& atomic, double gamma_s, double s, double T,
                                    double eta, std::size_t trials, std::uint64_t seed) {
    if (trials < 2) throw StatisticsError("need at least 2 trials for a variance");
    if (atomic.x_minus < 0.0 || atomic.p_plus < 0.0) throw InvariantViolation("atomic variance must be >= 0");
    if (eta < 0.0 || eta > 1.0) throw UsageError("eta must lie in [0, 1]");
    require_s(s);
    const double k2 = kappa_sq(gamma_s, s, T);
    const double k = std::sqrt(k2);
    const double e = std::exp(-gamma_s * T);
    const double se = std::sqrt(eta), sl = std::sqrt(1.0 - eta);
    const double ax = std::sqrt(atomic.x_minus), ap = std::sqrt(atomic.p_plus);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    // Welford per channel
    double mean[2] = {0.0, 0.0}, m2[2] = {0.0, 0.0};
    for (std::size_t i = 0; i < trials; ++i) {
        const double amp[2] = {ax * normal(rng), ap * normal(rng)};
        for (int c = 0; c < 2; ++c) {
            const double light = k * amp[c] + e * normal(rng);
            const double y = se * light + sl * normal(rng);
            const double delta = y - mean[c];
            mean[c] += delta / static_cast<double>(i + 1);
            m2[c] += delta * (y - mean[c]);
        }
    }
    ReadoutEstimate r;
    r.trials = trials;
    const double n1 = static_cast<double>(trials - 1);
    r.light = {m2[0] / n1, m2[1] / n1};
    r.variance = {reconstruct_atomic_variance(r.light.x_minus, k2, s, 1.0, eta).variance,
                  reconstruct_atomic_variance(r.light.p_plus, k2, s, 1.0, eta).variance};
    // sample variance of a normal: sd = var sqrt(2/(n-1))
    const double f = std::sqrt(2.0 / n1) / (eta * k2);
    r.std_error = {r.light.x_minus * f, r.light.p_plus * f};
    return r;
}

}  // namespace dissent
