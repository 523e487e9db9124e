// dissent: command-line front end. Every output file starts with a metadata
// block; csv gets a "# {json}" line, json wraps the payload as {"meta", "data"}.

#include <CLI11.hpp>
#include <json.hpp>

#include <cctype>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dissent/beat.hpp"
#include "dissent/errors.hpp"
#include "dissent/estimation.hpp"
#include "dissent/io.hpp"
#include "dissent/light_readout.hpp"
#include "dissent/scenarios.hpp"
#include "dissent/stochastic_record.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dissent;

namespace {

struct Common {
    std::string params = "{}";
    std::uint64_t seed = 0;
    std::string out = ".";
    std::string grid;
    std::size_t trials = 2000;
    std::string format = "csv";
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--params", c.params, "JSON object or path to a JSON file");
    app->add_option("--seed", c.seed, "master seed");
    app->add_option("--out", c.out, "output directory");
    app->add_option("--grid", c.grid, "t0,t1,dt in ms");
    app->add_option("--trials", c.trials, "Monte Carlo trials")->check(CLI::PositiveNumber);
    app->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
}

json load_params_json(const std::string& arg) {
    std::string text = arg;
    if (!arg.empty() && arg.front() != '{' && fs::exists(arg)) {
        std::ifstream f(arg);
        std::stringstream ss;
        ss << f.rdbuf();
        text = ss.str();
    }
    try {
        json j = json::parse(text);
        if (!j.is_object()) throw UsageError("--params must be a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw UsageError(std::string("cannot parse --params: ") + e.what());
    }
}

std::vector<double> split_doubles(const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) v.push_back(parse_double(item));
    return v;
}

TimeGrid parse_grid(const std::string& s, TimeGrid fallback) {
    if (s.empty()) return fallback;
    const auto v = split_doubles(s);
    if (v.size() != 3) throw UsageError("--grid expects t0,t1,dt");
    return {v[0], v[1], v[2]};
}

// Reads rows of numbers from a csv, skipping '#' lines and a header row.
std::vector<std::vector<double>> read_numeric_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(f, line)) {
        if (line.empty() || line.front() == '#') continue;
        if (first) {
            first = false;
            const char c = line.front();
            if (!(std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.')) continue;
        }
        rows.push_back(split_doubles(line));
    }
    return rows;
}

class Writer {
public:
    Writer(const Common& c, std::string command, json params)
        : dir_(c.out), json_(c.format == "json"), meta_(make_meta(command, params, c.seed)) {
        fs::create_directories(dir_);
    }

    void table(const std::string& stem, const std::vector<std::string>& cols,
               const std::vector<std::vector<double>>& rows) const {
        if (json_) {
            json data = json::array();
            for (const auto& r : rows) {
                json o = json::object();
                for (std::size_t k = 0; k < cols.size() && k < r.size(); ++k) o[cols[k]] = r[k];
                data.push_back(o);
            }
            put_json(stem, data);
            return;
        }
        std::ostringstream os;
        for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << cols[k];
        os << '\n';
        for (const auto& r : rows) {
            for (std::size_t k = 0; k < r.size(); ++k) os << (k ? "," : "") << fmt_double(r[k]);
            os << '\n';
        }
        put_csv(stem, os.str());
    }

    // Preformatted csv body; in json mode it is parsed back into rows.
    void csv_body(const std::string& stem, const std::string& body) const {
        if (!json_) {
            put_csv(stem, body);
            return;
        }
        std::istringstream is(body);
        std::string line;
        std::vector<std::string> cols;
        std::vector<std::vector<double>> rows;
        while (std::getline(is, line)) {
            if (line.empty() || line.front() == '#') continue;
            if (cols.empty()) {
                std::stringstream ss(line);
                std::string c;
                while (std::getline(ss, c, ',')) cols.push_back(c);
                continue;
            }
            rows.push_back(split_doubles(line));
        }
        table(stem, cols, rows);
    }

    void object(const std::string& stem, const json& data) const { put_json(stem, data); }

private:
    void put_csv(const std::string& stem, const std::string& body) const {
        std::ofstream f(dir_ / (stem + ".csv"), std::ios::binary);
        write_meta_comment(f, meta_);
        f << body;
        check(f, stem);
    }
    void put_json(const std::string& stem, const json& data) const {
        std::ofstream f(dir_ / (stem + ".json"), std::ios::binary);
        f << json{{"meta", meta_}, {"data", data}}.dump(2) << '\n';
        check(f, stem);
    }
    static void check(const std::ofstream& f, const std::string& stem) {
        if (!f) throw UsageError("cannot write output " + stem);
    }

    fs::path dir_;
    bool json_;
    json meta_;
};

json params_json(const ModelParams& p) {
    json j;
    to_json(j, p);
    return j;
}

PopulationState start_populations(const std::vector<double>& v) {
    if (v.empty()) return {0.99, 0.01, 0.0, 1.0};
    if (v.size() != 2) throw UsageError("--start expects n44,n43");
    PopulationState s{v[0], v[1], 1.0 - v[0] - v[1], 1.0};
    s.validate();
    return s;
}

int cmd_simulate(const Common& c, const std::string& start, bool uncoupled) {
    const ModelParams p = params_from_json(load_params_json(c.params), scenario_params("fig2a"));
    p.validate();
    const auto times = parse_grid(c.grid, {0.0, 60.0, 0.1}).points();
    Trajectory tr;
    if (uncoupled) {
        tr = propagate_moments(GaussianState::css(), p, NoiseChannels::from_params(p), times);
    } else {
        tr = forward_model(p, start_populations(start.empty() ? std::vector<double>{} : split_doubles(start)), times);
    }
    std::ostringstream os;
    write_trajectory_csv(os, tr);
    Writer w(c, "simulate", params_json(p));
    w.csv_body("trajectory", os.str());
    return 0;
}

int cmd_populations(const Common& c, const std::string& start) {
    const ModelParams p = params_from_json(load_params_json(c.params), scenario_params("fig2a"));
    p.validate();
    const auto series = propagate_populations(
        start_populations(start.empty() ? std::vector<double>{} : split_doubles(start)), transition_rates(p),
        parse_grid(c.grid, {0.0, 60.0, 0.1}));
    std::ostringstream os;
    write_population_csv(os, series);
    Writer w(c, "populations", params_json(p));
    w.csv_body("populations", os.str());
    return 0;
}

int cmd_reconstruct(const Common& c, double y_cos, double y_sin, double T, double atomic, bool mc) {
    const ModelParams p = params_from_json(load_params_json(c.params), scenario_params("fig2a"));
    p.validate();
    const double s = p.mu_minus_nu();
    const double gamma_s = 0.5 * p.d * p.Gamma;
    const double k2 = kappa_sq(gamma_s, s, T);
    Writer w(c, "reconstruct", params_json(p));
    if (mc) {
        const ReadoutEstimate e = monte_carlo_readout({atomic, atomic}, gamma_s, s, T, p.eta, c.trials,
                                                      derive_master(c.seed));
        w.table("reconstruct", {"V_u", "V_u_err", "V_v", "V_v_err", "xi", "kappa_sq"},
                {{e.variance.x_minus, e.std_error.x_minus, e.variance.p_plus, e.std_error.p_plus,
                  e.variance.xi(), k2}});
        return 0;
    }
    const auto u = reconstruct_atomic_variance(y_cos, k2, s, 1.0, p.eta);
    const auto v = reconstruct_atomic_variance(y_sin, k2, s, 1.0, p.eta);
    w.table("reconstruct", {"V_u", "V_v", "xi", "kappa_sq", "below_floor"},
            {{u.variance, v.variance, 0.5 * (u.variance + v.variance), k2,
              (u.below_floor || v.below_floor) ? 1.0 : 0.0}});
    return 0;
}

int cmd_conditional(const Common& c, double T, double t_probe, double initial, double noise_var,
                    const std::string& gm, const std::vector<std::string>& record_files, bool per_channel) {
    const ModelParams p = params_from_json(load_params_json(c.params), scenario_params("fig2d"));
    p.validate();
    LossParams loss;
    loss.gamma_s = 0.5 * p.d * p.Gamma;
    loss.gamma_extra = 0.5 * p.Gamma_tilde;
    loss.eta = p.eta;
    loss.noise_var = noise_var;
    loss.validate();
    const double s = p.mu_minus_nu();
    const auto g = split_doubles(gm);
    if (g.size() != 3) throw UsageError("--gamma-m expects lo,hi,step");
    const auto grid = gamma_m_grid(g[0], g[1], g[2]);
    const ModeFunctional readout = readout_mode(loss.gamma(), T, t_probe, Phase::cos);
    const GainSharing sharing = per_channel ? GainSharing::per_channel : GainSharing::shared;

    GainResult r;
    if (!record_files.empty()) {
        std::vector<LightRecord> recs;
        for (const auto& f : record_files) {
            std::ifstream is(f);
            if (!is) throw UsageError("cannot open " + f);
            recs.push_back(read_record_csv(is));
        }
        r = optimize_gain(recs, readout, grid, sharing);
    } else {
        RecordModel m;
        m.loss = loss;
        m.mu_minus_nu = s;
        m.initial = {initial, initial};
        m.duration = T + t_probe;
        m.omega = p.Omega;
        r = optimize_gain(m, 0.05, derive_master(c.seed), c.trials, readout, grid, sharing);
    }
    const auto cond = reconstruct_conditional_xi(r.var_cos, r.var_sin, loss, s, t_probe);
    const auto unc = reconstruct_conditional_xi(r.unconditional, r.unconditional, loss, s, t_probe);
    Writer w(c, "conditional", params_json(p));
    w.table("conditional",
            {"gamma_m_star", "alpha_star", "alpha_sin", "var_cos", "var_sin", "xi_cond", "xi_uncond"},
            {{r.gamma_m_star, r.alpha_star, r.alpha_sin, r.var_cos, r.var_sin, cond.variance, unc.variance}});
    return 0;
}

int cmd_calibrate(const Common& c, const std::string& points) {
    std::vector<CalibrationPoint> pts;
    for (const auto& r : read_numeric_csv(points)) {
        if (r.size() < 2) throw UsageError("calibration rows need theta,xi0[,weight]");
        pts.push_back({r[0], r[1], r.size() > 2 ? r[2] : 1.0});
    }
    const PnCalibration cal = calibrate_pn(pts);
    Writer w(c, "calibrate", json::object());
    w.table("calibration", {"linear", "quadratic", "quad_fraction"}, {{cal.linear, cal.quadratic, cal.quad_fraction}});
    return 0;
}

int cmd_fit(const Common& c, const std::string& data, const std::vector<std::string>& free,
            const std::string& slopes, const std::string& start) {
    FitProblem pb;
    pb.fixed = params_from_json(load_params_json(c.params), scenario_params("fig2a"));
    pb.free = free;
    pb.initial = start_populations(start.empty() ? std::vector<double>{} : split_doubles(start));
    for (const auto& r : read_numeric_csv(data)) {
        if (r.size() < 3) throw UsageError("fit rows need t,xi,xi_err[,jx,jx_err]");
        pb.observed.push_back({r[0], r[1], r[2], r.size() > 3 ? r[3] : 1.0, r.size() > 4 ? r[4] : 0.0});
    }
    if (!slopes.empty()) {
        const auto v = split_doubles(slopes);
        if (v.size() != 2) throw UsageError("--slopes expects polarization,variance");
        pb.slope_constraints = true;
        pb.polarization_slope = v[0];
        pb.variance_slope = v[1];
    }
    const FitResult r = fit_parameters(pb);
    Writer w(c, "fit", params_json(pb.fixed));
    json cov = json::array();
    for (Eigen::Index i = 0; i < r.covariance.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < r.covariance.cols(); ++j) row.push_back(r.covariance(i, j));
        cov.push_back(row);
    }
    w.object("fit", {{"params", params_json(r.params)},
                     {"names", r.names},
                     {"covariance", cov},
                     {"residuals", r.residuals},
                     {"chi2", r.chi2},
                     {"iterations", r.iterations}});
    return 0;
}

int cmd_orientation(const Common& c, const std::string& pops, const std::string& signal, double split) {
    Writer w(c, "orientation", json::object());
    if (!pops.empty()) {
        const auto v = split_doubles(pops);
        if (v.size() != 9) throw UsageError("--populations expects 9 values for m = -4..4");
        Sublevels p{};
        std::copy(v.begin(), v.end(), p.begin());
        w.table("orientation", {"o"}, {{orientation(p)}});
        return 0;
    }
    if (signal.empty()) throw UsageError("orientation needs --populations or --signal");
    BeatSignal sig;
    for (const auto& r : read_numeric_csv(signal)) {
        if (r.size() < 3) throw UsageError("signal rows need t,X,P");
        sig.times.push_back(r[0]);
        sig.X.push_back(r[1]);
        sig.P.push_back(r[2]);
    }
    BeatModel shape;
    shape.zeeman_split = split;
    const Sublevels p = estimate_sublevels(sig, shape);
    std::vector<double> row(p.begin(), p.end());
    double o = 0.0;
    for (int m = -4; m <= 4; ++m) o += 0.25 * m * p[static_cast<std::size_t>(m + 4)];
    row.push_back(o);
    w.table("orientation", {"p_m4", "p_m3", "p_m2", "p_m1", "p_0", "p_1", "p_2", "p_3", "p_4", "o"}, {row});
    return 0;
}

void write_bundle(const Common& c, const ScenarioBundle& b) {
    Common sub = c;
    sub.out = (fs::path(c.out) / b.name).string();
    Writer w(sub, "scenario " + b.name, params_json(b.params));
    for (const auto& [label, tr] : b.trajectories) {
        std::ostringstream os;
        write_trajectory_csv(os, tr);
        w.csv_body("trajectory_" + label, os.str());
    }
    for (const auto& t : b.tables) w.table(t.name, t.columns, t.rows);
    for (const auto& [label, rec] : b.records) {
        // records keep their own exact csv format
        std::ofstream f(fs::path(sub.out) / ("record_" + label + ".csv"), std::ios::binary);
        write_meta_comment(f, make_meta("scenario " + b.name, params_json(b.params), c.seed));
        write_record_csv(f, rec);
    }
    w.object("report", b.report);
}

int cmd_scenario(const Common& c, const std::string& name) {
    const json overrides = load_params_json(c.params);
    std::vector<std::string> names;
    if (name == "all") {
        names = scenario_names();
    } else {
        names = {name};
    }
    // independent jobs; results written by this thread only
    std::vector<std::future<ScenarioBundle>> jobs;
    for (const auto& n : names) {
        jobs.push_back(std::async(std::launch::async, [&, n] { return run_scenario(n, overrides, c.seed, c.trials); }));
    }
    for (auto& j : jobs) write_bundle(c, j.get());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dissipative entanglement of two spin ensembles: simulation and estimation"};
    app.set_version_flag("--version", std::string(version()));
    app.require_subcommand(1);

    Common c;
    std::string start;
    bool uncoupled = false;
    auto* sim = app.add_subcommand("simulate", "moment trajectory with populations");
    add_common(sim, c);
    sim->add_option("--start", start, "initial n44,n43");
    sim->add_flag("--uncoupled", uncoupled, "CSS start, no population model");

    auto* pop = app.add_subcommand("populations", "three-level population series");
    add_common(pop, c);
    pop->add_option("--start", start, "initial n44,n43");

    double y_cos = 1.0, y_sin = 1.0, T = 1.0, atomic = 1.0;
    bool mc = false;
    auto* rec = app.add_subcommand("reconstruct", "atomic variances from light variances");
    add_common(rec, c);
    rec->add_option("--y-cos", y_cos, "detected cos-channel light variance");
    rec->add_option("--y-sin", y_sin, "detected sin-channel light variance");
    rec->add_option("--T", T, "probe duration, ms");
    rec->add_flag("--monte-carlo", mc, "simulate the readout of --atomic instead");
    rec->add_option("--atomic", atomic, "atomic variance for --monte-carlo");

    double t_probe = 1.0, initial = 1.0, noise_var = 1.3, T_feed = 18.5;
    std::string gm = "0,2,0.01";
    std::vector<std::string> record_files;
    bool per_channel = false;
    auto* cond = app.add_subcommand("conditional", "feedback-gain optimization on light records");
    add_common(cond, c);
    cond->add_option("--T", T_feed, "feed window end, ms");
    cond->add_option("--t-probe", t_probe, "readout duration, ms");
    cond->add_option("--initial", initial, "initial atomic variance of synthesized records");
    cond->add_option("--noise-var", noise_var, "variance of the admixed atomic noise");
    cond->add_option("--gamma-m", gm, "lo,hi,step of the gamma_m grid");
    cond->add_option("--records", record_files, "record csv files instead of synthesis");
    cond->add_flag("--per-channel", per_channel, "separate gains for cos and sin");

    std::string points;
    auto* cal = app.add_subcommand("calibrate", "projection-noise calibration");
    add_common(cal, c);
    cal->add_option("--points", points, "csv of theta,xi0[,weight]")->required();

    std::string data, slopes;
    std::vector<std::string> free{"d", "Gamma_col", "Gamma_tilde"};
    auto* fit = app.add_subcommand("fit", "fit rate and dephasing parameters");
    add_common(fit, c);
    fit->add_option("--data", data, "csv of t,xi,xi_err[,jx,jx_err]")->required();
    fit->add_option("--free", free, "free parameters")->delimiter(',');
    fit->add_option("--slopes", slopes, "polarization,variance slopes at t=0");
    fit->add_option("--start", start, "initial n44,n43");

    std::string pops, signal;
    double split = 20.0;
    auto* ori = app.add_subcommand("orientation", "orientation from populations or a beat signal");
    add_common(ori, c);
    ori->add_option("--populations", pops, "p_-4,...,p_4");
    ori->add_option("--signal", signal, "csv of t,X,P");
    ori->add_option("--zeeman-split", split, "Hz");

    std::string name;
    auto* sc = app.add_subcommand("scenario", "named end-to-end run");
    add_common(sc, c);
    sc->add_option("name", name, "fig2a, fig2b, fig2c, fig2d or all")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::usage);
    }

    try {
        if (*sim) return cmd_simulate(c, start, uncoupled);
        if (*pop) return cmd_populations(c, start);
        if (*rec) return cmd_reconstruct(c, y_cos, y_sin, T, atomic, mc);
        if (*cond) return cmd_conditional(c, T_feed, t_probe, initial, noise_var, gm, record_files, per_channel);
        if (*cal) return cmd_calibrate(c, points);
        if (*fit) return cmd_fit(c, data, free, slopes, start);
        if (*ori) return cmd_orientation(c, pops, signal, split);
        if (*sc) return cmd_scenario(c, name);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.exit_code());
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::usage);
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::usage);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::numerical);
    }
    return static_cast<int>(ExitCode::usage);
}
