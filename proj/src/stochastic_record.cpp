#include "dissent/stochastic_record.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "dissent/errors.hpp"
#include "dissent/io.hpp"

namespace dissent {

void LightRecord::validate() const {
    if (!(dt > 0.0)) throw InvariantViolation("record dt must be > 0");
    if (s2_cos.size() != s2_sin.size()) throw InvariantViolation("record channels differ in length");
    if (!(sx_norm > 0.0)) throw InvariantViolation("record sx_norm must be > 0");
    for (std::size_t i = 0; i < s2_cos.size(); ++i) {
        if (!std::isfinite(s2_cos[i]) || !std::isfinite(s2_sin[i])) {
            throw InvariantViolation("record holds a non-finite sample");
        }
    }
}

void write_record_csv(std::ostream& os, const LightRecord& rec) {
    os << "dt_ms,omega,seed,sx_norm\n";
    os << fmt_double(rec.dt) << ',' << fmt_double(rec.omega) << ',' << rec.seed << ','
       << fmt_double(rec.sx_norm) << '\n';
    os << "t_ms,s2_cos,s2_sin\n";
    for (std::size_t k = 0; k < rec.size(); ++k) {
        os << fmt_double(static_cast<double>(k) * rec.dt) << ',' << fmt_double(rec.s2_cos[k]) << ','
           << fmt_double(rec.s2_sin[k]) << '\n';
    }
}

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

bool next_line(std::istream& is, std::string& line) {
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        return true;
    }
    return false;
}

}  // namespace

LightRecord read_record_csv(std::istream& is) {
    std::string line;
    if (!next_line(is, line) || line != "dt_ms,omega,seed,sx_norm") {
        throw UsageError("record CSV: missing header 'dt_ms,omega,seed,sx_norm'");
    }
    if (!next_line(is, line)) throw UsageError("record CSV: missing header values");
    auto head = split(line);
    if (head.size() != 4) throw UsageError("record CSV: header needs 4 values");
    LightRecord rec;
    rec.dt = parse_double(head[0]);
    rec.omega = parse_double(head[1]);
    try {
        std::size_t pos = 0;
        rec.seed = std::stoull(head[2], &pos);
        if (pos != head[2].size()) throw std::invalid_argument("seed");
    } catch (const std::exception&) {
        throw UsageError("record CSV: bad seed '" + head[2] + "'");
    }
    rec.sx_norm = parse_double(head[3]);
    if (!next_line(is, line) || line != "t_ms,s2_cos,s2_sin") {
        throw UsageError("record CSV: missing column header 't_ms,s2_cos,s2_sin'");
    }
    while (next_line(is, line)) {
        auto cells = split(line);
        if (cells.size() != 3) throw UsageError("record CSV: row needs 3 values");
        rec.s2_cos.push_back(parse_double(cells[1]));
        rec.s2_sin.push_back(parse_double(cells[2]));
    }
    rec.validate();
    return rec;
}

void ModeFunctional::validate() const {
    if (!(t_end > t_start) || t_start < 0.0) throw UsageError("mode window must be nonempty and start at t >= 0");
    if (rate < 0.0 || !std::isfinite(rate)) throw UsageError("mode rate must be finite and >= 0");
}

std::size_t ModeFunctional::first_bin(double dt) const {
    return static_cast<std::size_t>(std::ceil(t_start / dt - 1e-9));
}

std::vector<double> ModeFunctional::weights(double dt) const {
    validate();
    const std::size_t first = first_bin(dt);
    const auto last = static_cast<std::size_t>(std::floor(t_end / dt + 1e-9));
    if (last <= first) throw UsageError("mode window is shorter than one bin");
    std::vector<double> w(last - first);
    const double span = static_cast<double>(last - first - 1) * dt;
    for (std::size_t k = 0; k < w.size(); ++k) {
        const double tau = static_cast<double>(k) * dt;
        switch (direction) {
            case Direction::falling: w[k] = std::exp(-rate * tau); break;
            case Direction::rising: w[k] = std::exp(rate * (tau - span)); break;
            case Direction::flat: w[k] = 1.0; break;
        }
    }
    return w;
}

double ModeFunctional::norm(double dt) const {
    double s = 0.0;
    for (double v : weights(dt)) s += v * v;
    return std::sqrt(s);
}

namespace {

struct PreparedMode {
    std::size_t first = 0;
    std::vector<double> w;  // already divided by the norm
    Phase phase = Phase::cos;
};

PreparedMode prepare(const ModeFunctional& mode, double dt, std::size_t bins, double sx_norm) {
    PreparedMode p;
    p.first = mode.first_bin(dt);
    p.w = mode.weights(dt);
    p.phase = mode.phase;
    if (p.first + p.w.size() > bins) {
        throw RangeError("mode window [" + fmt_double(mode.t_start) + ", " + fmt_double(mode.t_end) +
                         "] ms exceeds the record span " + fmt_double(dt * static_cast<double>(bins)) + " ms");
    }
    double s = 0.0;
    for (double v : p.w) s += v * v;
    const double scale = 1.0 / (std::sqrt(s) * std::sqrt(sx_norm));
    for (double& v : p.w) v *= scale;
    return p;
}

double apply(const PreparedMode& p, const LightRecord& rec) {
    const auto& x = p.phase == Phase::cos ? rec.s2_cos : rec.s2_sin;
    double y = 0.0;
    for (std::size_t k = 0; k < p.w.size(); ++k) y += p.w[k] * x[p.first + k];
    return y;
}

}  // namespace

double integrate_mode(const LightRecord& rec, const ModeFunctional& mode) {
    rec.validate();
    return apply(prepare(mode, rec.dt, rec.size(), rec.sx_norm), rec);
}

LightRecord synthesize_record(const RecordModel& m, double dt, std::uint64_t seed) {
    m.loss.validate();
    if (!(dt > 0.0)) throw UsageError("record dt must be > 0");
    if (!(m.duration > 0.0)) throw UsageError("record duration must be > 0");
    if (m.mu_minus_nu == 0.0) throw DegenerateError("mu - nu must be nonzero");
    if (m.initial.x_minus < 0.0 || m.initial.p_plus < 0.0) {
        throw InvariantViolation("initial atomic variances must be >= 0");
    }
    const double gamma = m.loss.gamma();
    if (dt * gamma > m.max_rate_step) {
        throw AliasingError("dt = " + fmt_double(dt) + " ms too coarse for gamma = " + fmt_double(gamma) +
                            " /ms (need dt*gamma <= " + fmt_double(m.max_rate_step) + ")");
    }
    const auto bins = static_cast<std::size_t>(std::llround(m.duration / dt));
    if (bins == 0) throw UsageError("record shorter than one bin");

    const double s = m.mu_minus_nu;
    const double g = std::sqrt(2.0 * m.loss.gamma_s) / s;
    const double h = -s * std::sqrt(2.0 * m.loss.gamma_s);
    const double f = std::sqrt(2.0 * m.loss.gamma_extra * m.loss.noise_var);
    const double a = std::exp(-gamma * dt);
    // sqrt((1 - a^2) / (2 gamma)), -> sqrt(dt) as gamma -> 0
    const double drive = gamma > 0.0 ? std::sqrt(-std::expm1(-2.0 * gamma * dt) / (2.0 * gamma)) : std::sqrt(dt);
    const double gs = g * std::sqrt(dt);
    const double se = std::sqrt(m.loss.eta);
    const double sl = std::sqrt(1.0 - m.loss.eta);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    LightRecord rec;
    rec.dt = dt;
    rec.omega = m.omega;
    rec.seed = seed;
    rec.sx_norm = m.sx_norm;
    rec.s2_cos.resize(bins);
    rec.s2_sin.resize(bins);

    double u = std::sqrt(m.initial.x_minus) * normal(rng);
    double v = std::sqrt(m.initial.p_plus) * normal(rng);
    const double root_sx = std::sqrt(m.sx_norm);
    for (std::size_t k = 0; k < bins; ++k) {
        const double wc = normal(rng), zc = normal(rng);
        const double ws = normal(rng), zs = normal(rng);
        const double nc = normal(rng), ns = normal(rng);
        const double oc = wc + gs * u;
        const double os = ws + gs * v;
        rec.s2_cos[k] = root_sx * (se * oc + sl * nc);
        rec.s2_sin[k] = root_sx * (se * os + sl * ns);
        u = a * u + drive * (h * wc + f * zc);
        v = a * v + drive * (h * ws + f * zs);
    }
    return rec;
}

RecordModel record_model_from(const Trajectory& traj, const ModelParams& params, double duration) {
    if (traj.states.empty()) throw UsageError("empty trajectory");
    double pt = 1.0, p2 = 1.0;
    if (traj.coupled()) {
        pt = traj.populations.back().P2_tilde();
        p2 = traj.populations.back().P2();
    }
    if (!(p2 > 0.0)) throw DegenerateError("two-level polarization vanished");
    RecordModel m;
    m.loss.gamma_s = 0.5 * params.d * params.Gamma * pt;
    m.loss.gamma_extra = 0.5 * params.Gamma_tilde;
    m.loss.eta = params.eta;
    m.loss.noise_var = 1.0 / p2;
    m.mu_minus_nu = params.mu_minus_nu();
    m.initial = {traj.states.back().v_u(), traj.states.back().v_v()};
    m.duration = duration;
    m.omega = params.Omega;
    return m;
}

LightRecord synthesize_record(const Trajectory& traj, const ModelParams& params, double dt,
                              std::uint64_t seed, double duration) {
    return synthesize_record(record_model_from(traj, params, duration), dt, seed);
}

std::uint64_t derive_master(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::vector<LightRecord> synthesize_batch(const RecordModel& model, double dt,
                                          std::uint64_t master_seed, std::size_t trials) {
    std::vector<LightRecord> out;
    out.reserve(trials);
    for (std::size_t i = 0; i < trials; ++i) out.push_back(synthesize_record(model, dt, master_seed ^ i));
    return out;
}

Eigen::MatrixXd sample_modes(const RecordModel& model, double dt, std::uint64_t master_seed,
                             std::size_t trials, const std::vector<ModeFunctional>& modes) {
    const auto bins = static_cast<std::size_t>(std::llround(model.duration / dt));
    std::vector<PreparedMode> prepared;
    for (const auto& m : modes) prepared.push_back(prepare(m, dt, bins, model.sx_norm));
    Eigen::MatrixXd y(static_cast<Eigen::Index>(trials), static_cast<Eigen::Index>(modes.size()));
    for (std::size_t i = 0; i < trials; ++i) {
        const LightRecord rec = synthesize_record(model, dt, master_seed ^ i);
        for (std::size_t j = 0; j < prepared.size(); ++j) {
            y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = apply(prepared[j], rec);
        }
    }
    return y;
}

Eigen::MatrixXd sample_modes(const std::vector<LightRecord>& records,
                             const std::vector<ModeFunctional>& modes) {
    Eigen::MatrixXd y(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(modes.size()));
    for (std::size_t i = 0; i < records.size(); ++i) {
        records[i].validate();
        for (std::size_t j = 0; j < modes.size(); ++j) {
            const PreparedMode p = prepare(modes[j], records[i].dt, records[i].size(), records[i].sx_norm);
            y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = apply(p, records[i]);
        }
    }
    return y;
}

double sample_covariance(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (x.size() != y.size()) throw UsageError("sample sizes differ");
    if (x.size() < 2) throw StatisticsError("need at least 2 samples for a variance");
    const double mx = x.mean(), my = y.mean();
    return ((x.array() - mx) * (y.array() - my)).sum() / static_cast<double>(x.size() - 1);
}

double sample_variance(const Eigen::VectorXd& x) { return sample_covariance(x, x); }

double conditional_variance(const Eigen::VectorXd& y_read, const Eigen::VectorXd& y_feed, double alpha) {
    return sample_variance(y_read - alpha * y_feed);
}

double conditional_variance(const std::vector<LightRecord>& records, const ModeFunctional& readout,
                            const ModeFunctional& feed, double alpha) {
    if (records.size() < 2) throw StatisticsError("conditional variance needs at least 2 records");
    const Eigen::MatrixXd y = sample_modes(records, {readout, feed});
    return conditional_variance(y.col(0), y.col(1), alpha);
}

void FeedbackConfig::validate() const {
    if (!(t_probe > 0.0)) throw UsageError("t_probe must be > 0");
    if (T < 0.0) throw UsageError("T must be >= 0");
    if (gamma_m < 0.0) throw UsageError("gamma_m must be >= 0");
}

ModeFunctional readout_mode(double gamma, double T, double t_probe, Phase phase) {
    ModeFunctional m;
    m.phase = phase;
    m.direction = Direction::falling;
    m.rate = gamma;
    m.t_start = T;
    m.t_end = T + t_probe;
    return m;
}

ModeFunctional feed_mode(double gamma_m, double T, Phase phase) {
    ModeFunctional m;
    m.phase = phase;
    m.direction = Direction::rising;
    m.rate = gamma_m;
    m.t_start = 0.0;
    m.t_end = T;
    return m;
}

std::vector<double> gamma_m_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || hi < lo || lo < 0.0) throw UsageError("bad gamma_m grid");
    std::vector<double> g;
    const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    for (long k = 0; k <= n; ++k) g.push_back(lo + static_cast<double>(k) * step);
    return g;
}

namespace {

// Columns: read_cos, read_sin, then (feed_cos, feed_sin) per grid node.
std::vector<ModeFunctional> gain_modes(const ModeFunctional& readout, const std::vector<double>& grid) {
    if (grid.empty()) throw UsageError("gamma_m grid is empty");
    ModeFunctional rc = readout, rs = readout;
    rc.phase = Phase::cos;
    rs.phase = Phase::sin;
    std::vector<ModeFunctional> modes{rc, rs};
    for (double gm : grid) {
        modes.push_back(feed_mode(gm, readout.t_start, Phase::cos));
        modes.push_back(feed_mode(gm, readout.t_start, Phase::sin));
    }
    return modes;
}

GainResult scan(const Eigen::MatrixXd& y, const std::vector<double>& grid, GainSharing sharing) {
    if (y.rows() < 2) throw StatisticsError("gain optimization needs at least 2 records");
    const Eigen::VectorXd rc = y.col(0), rs = y.col(1);
    const double var_rc = sample_variance(rc), var_rs = sample_variance(rs);
    GainResult best;
    best.min_variance = INFINITY;
    best.unconditional = 0.5 * (var_rc + var_rs);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const Eigen::VectorXd fc = y.col(2 + 2 * static_cast<Eigen::Index>(j));
        const Eigen::VectorXd fs = y.col(3 + 2 * static_cast<Eigen::Index>(j));
        const double vfc = sample_variance(fc), vfs = sample_variance(fs);
        const double cc = sample_covariance(rc, fc), cs = sample_covariance(rs, fs);
        double ac = 0.0, as = 0.0;
        if (sharing == GainSharing::shared) {
            if (!(vfc + vfs > 1e-300)) throw NoInformationError("feed mode has zero variance");
            ac = as = (cc + cs) / (vfc + vfs);
        } else {
            if (!(vfc > 1e-300) || !(vfs > 1e-300)) throw NoInformationError("feed mode has zero variance");
            ac = cc / vfc;
            as = cs / vfs;
        }
        const double vc = var_rc - 2.0 * ac * cc + ac * ac * vfc;
        const double vs = var_rs - 2.0 * as * cs + as * as * vfs;
        const double mean = 0.5 * (vc + vs);
        if (mean < best.min_variance) {
            best.min_variance = mean;
            best.alpha_star = ac;
            best.alpha_sin = as;
            best.gamma_m_star = grid[j];
            best.var_cos = vc;
            best.var_sin = vs;
        }
    }
    return best;
}

}  // namespace

GainResult optimize_gain(const std::vector<LightRecord>& records, const ModeFunctional& readout,
                         const std::vector<double>& grid, GainSharing sharing) {
    return scan(sample_modes(records, gain_modes(readout, grid)), grid, sharing);
}

GainResult optimize_gain(const RecordModel& model, double dt, std::uint64_t master_seed,
                         std::size_t trials, const ModeFunctional& readout,
                         const std::vector<double>& grid, GainSharing sharing) {
    return scan(sample_modes(model, dt, master_seed, trials, gain_modes(readout, grid)), grid, sharing);
}

Reconstruction reconstruct_conditional_xi(double vc, double vs, double kappa_sq, double s, double eta) {
    const Reconstruction c = reconstruct_atomic_variance(vc, kappa_sq, s, 1.0, eta);
    const Reconstruction d = reconstruct_atomic_variance(vs, kappa_sq, s, 1.0, eta);
    Reconstruction r;
    r.variance = 0.5 * (c.variance + d.variance);
    r.below_floor = r.variance < 0.0;
    return r;
}

Reconstruction reconstruct_conditional_xi(double vc, double vs, const LossParams& loss, double s,
                                          double t_probe) {
    const Reconstruction c = reconstruct_atomic_variance_lossy(vc, loss, s, t_probe);
    const Reconstruction d = reconstruct_atomic_variance_lossy(vs, loss, s, t_probe);
    Reconstruction r;
    r.variance = 0.5 * (c.variance + d.variance);
    r.below_floor = r.variance < 0.0;
    return r;
}

std::vector<double> carrier_modulate(const LightRecord& rec, int sub) {
    if (sub < 2) throw UsageError("carrier modulation needs >= 2 samples per bin");
    std::vector<double> x;
    x.reserve(rec.size() * static_cast<std::size_t>(sub));
    const double h = rec.dt / sub;
    for (std::size_t k = 0; k < rec.size(); ++k) {
        for (int j = 0; j < sub; ++j) {
            const double t = static_cast<double>(k) * rec.dt + (j + 0.5) * h;
            x.push_back(rec.s2_cos[k] * std::cos(rec.omega * t) + rec.s2_sin[k] * std::sin(rec.omega * t));
        }
    }
    return x;
}

LightRecord carrier_demodulate(const std::vector<double>& x, const LightRecord& like, int sub) {
    if (sub < 2) throw UsageError("carrier demodulation needs >= 2 samples per bin");
    if (x.size() % static_cast<std::size_t>(sub) != 0) throw UsageError("signal length is not a whole number of bins");
    LightRecord out = like;
    const std::size_t bins = x.size() / static_cast<std::size_t>(sub);
    out.s2_cos.assign(bins, 0.0);
    out.s2_sin.assign(bins, 0.0);
    const double h = like.dt / sub;
    for (std::size_t k = 0; k < bins; ++k) {
        Eigen::Matrix2d a = Eigen::Matrix2d::Zero();
        Eigen::Vector2d b = Eigen::Vector2d::Zero();
        for (int j = 0; j < sub; ++j) {
            const double t = static_cast<double>(k) * like.dt + (j + 0.5) * h;
            const Eigen::Vector2d basis(std::cos(like.omega * t), std::sin(like.omega * t));
            a += basis * basis.transpose();
            b += basis * x[k * static_cast<std::size_t>(sub) + static_cast<std::size_t>(j)];
        }
        const Eigen::Vector2d c = a.ldlt().solve(b);
        out.s2_cos[k] = c[0];
        out.s2_sin[k] = c[1];
    }
    return out;
}

}  // namespace dissent
