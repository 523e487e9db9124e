#include "dissent/beat.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "dissent/errors.hpp"

namespace dissent {

void validate_sublevels(const Sublevels& p, double tol) {
    double sum = 0.0;
    for (double v : p) {
        if (v < -tol || !std::isfinite(v)) throw InvariantViolation("sublevel population must be >= 0");
        sum += v;
    }
    if (std::abs(sum - 1.0) > tol) throw InvariantViolation("sublevel populations must sum to 1");
}

double orientation(const Sublevels& p) {
    validate_sublevels(p);
    double o = 0.0;
    for (int m = -4; m <= 4; ++m) o += m * p[static_cast<std::size_t>(m + 4)];
    return 0.25 * o;
}

namespace {

double weight(int m) { return 20.0 - m * (m - 1); }

std::complex<double> tone(int m, double nu_z_hz, double t_ms) {
    const double phase = -2.0 * std::numbers::pi * (4 - m) * nu_z_hz * 1e-3 * t_ms;
    return {std::cos(phase), std::sin(phase)};
}

}  // namespace

BeatSignal simulate_beat(const BeatModel& model, double dt) {
    validate_sublevels(model.p);
    if (!(dt > 0.0) || dt > 1.0) throw UsageError("beat dt must lie in (0, 1] ms");
    if (!(model.duration > 0.0)) throw UsageError("beat duration must be > 0");
    BeatSignal s;
    const auto n = static_cast<long>(std::floor(model.duration / dt + 1e-9));
    for (long k = 0; k <= n; ++k) {
        const double t = static_cast<double>(k) * dt;
        std::complex<double> v = 0.0;
        for (int m = -3; m <= 4; ++m) {
            const double diff = model.p[static_cast<std::size_t>(m + 4)] - model.p[static_cast<std::size_t>(m + 3)];
            v += weight(m) * diff * tone(m, model.zeeman_split, t);
        }
        s.times.push_back(t);
        s.X.push_back(v.real());
        s.P.push_back(v.imag());
    }
    return s;
}

Sublevels estimate_sublevels(const BeatSignal& sig, const BeatModel& shape) {
    const auto n = static_cast<Eigen::Index>(sig.times.size());
    if (n < 8 || sig.X.size() != sig.times.size() || sig.P.size() != sig.times.size()) {
        throw UsageError("beat signal too short or ragged");
    }
    Eigen::MatrixXcd a(n, 8);
    Eigen::VectorXcd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        for (int m = -3; m <= 4; ++m) a(i, m + 3) = tone(m, shape.zeeman_split, sig.times[k]);
        b[i] = {sig.X[k], sig.P[k]};
    }
    if (b.norm() == 0.0) throw DegenerateError("beat signal is identically zero");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(a);
    if (qr.rank() < 8) throw DegenerateError("beat components are not resolved by this record");
    const Eigen::VectorXcd c = qr.solve(b);

    Sublevels p{};
    double run = 0.0;  // p_-4 = 0
    for (int m = -3; m <= 4; ++m) {
        run += c[m + 3].real() / weight(m);
        p[static_cast<std::size_t>(m + 4)] = run;
    }
    double sum = 0.0;
    for (double v : p) sum += v;
    if (!(std::abs(sum) > 1e-12)) throw DegenerateError("fitted distribution has zero weight");
    for (double& v : p) v /= sum;
    return p;
}

double estimate_orientation(const BeatSignal& sig, const BeatModel& shape) {
    const Sublevels p = estimate_sublevels(sig, shape);
    double o = 0.0;
    for (int m = -4; m <= 4; ++m) o += m * p[static_cast<std::size_t>(m + 4)];
    return 0.25 * o;
}

}  // namespace dissent
