// Python bindings. Parameters cross the boundary as dicts (via json text),
// series as lists of floats.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include <sstream>

#include "dissent/beat.hpp"
#include "dissent/errors.hpp"
#include "dissent/estimation.hpp"
#include "dissent/light_readout.hpp"
#include "dissent/scenarios.hpp"
#include "dissent/stochastic_record.hpp"

namespace py = pybind11;
using namespace dissent;
using nlohmann::json;

namespace {

json to_json_obj(const py::object& o) {
    if (o.is_none()) return json::object();
    const auto dumps = py::module_::import("json").attr("dumps");
    return json::parse(dumps(o).cast<std::string>());
}

py::object from_json_obj(const json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

ModelParams params_arg(const py::object& o, const std::string& base) {
    return params_from_json(to_json_obj(o), scenario_params(base));
}

py::dict trajectory_dict(const Trajectory& tr) {
    std::vector<double> vx, vp, xi, jx, n2, p2;
    const double jx0 = tr.states.front().jx_mean;
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        vx.push_back(tr.xi_series[i].var_x_minus);
        vp.push_back(tr.xi_series[i].var_p_plus);
        xi.push_back(tr.xi_series[i].xi);
        jx.push_back(tr.states[i].jx_mean / jx0);
        if (tr.coupled()) {
            n2.push_back(tr.populations[i].N2());
            p2.push_back(tr.populations[i].P2());
        }
    }
    py::dict d;
    d["time_ms"] = tr.times;
    d["var_x_minus"] = vx;
    d["var_p_plus"] = vp;
    d["xi"] = xi;
    d["jx_norm"] = jx;
    if (tr.coupled()) {
        d["N2"] = n2;
        d["P2"] = p2;
    }
    return d;
}

LightRecord record_arg(const py::dict& d) {
    LightRecord r;
    r.dt = d["dt"].cast<double>();
    r.omega = d.contains("omega") ? d["omega"].cast<double>() : 0.0;
    r.s2_cos = d["s2_cos"].cast<std::vector<double>>();
    r.s2_sin = d["s2_sin"].cast<std::vector<double>>();
    r.validate();
    return r;
}

py::dict record_dict(const LightRecord& r) {
    py::dict d;
    d["dt"] = r.dt;
    d["omega"] = r.omega;
    d["seed"] = r.seed;
    d["s2_cos"] = r.s2_cos;
    d["s2_sin"] = r.s2_sin;
    return d;
}

RecordModel record_model(double gamma_s, double gamma_extra, double eta, double noise_var,
                         double mu_minus_nu, double initial, double duration) {
    RecordModel m;
    m.loss = LossParams{gamma_s, gamma_extra, eta, noise_var};
    m.mu_minus_nu = mu_minus_nu;
    m.initial = {initial, initial};
    m.duration = duration;
    return m;
}

py::dict gain_dict(const GainResult& g) {
    py::dict d;
    d["alpha_star"] = g.alpha_star;
    d["alpha_sin"] = g.alpha_sin;
    d["gamma_m_star"] = g.gamma_m_star;
    d["min_variance"] = g.min_variance;
    d["var_cos"] = g.var_cos;
    d["var_sin"] = g.var_sin;
    d["unconditional"] = g.unconditional;
    return d;
}

}  // namespace

PYBIND11_MODULE(_dissent, m) {
    m.doc() = "two-ensemble dissipative entanglement model";
    m.attr("__version__") = version();

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    auto usage = py::register_exception<UsageError>(m, "UsageError", base.ptr());
    py::register_exception<RangeError>(m, "RangeError", usage.ptr());
    py::register_exception<InvariantViolation>(m, "InvariantViolation", base.ptr());
    auto num = py::register_exception<NumericalFailure>(m, "NumericalFailure", base.ptr());
    py::register_exception<DegenerateError>(m, "DegenerateError", num.ptr());
    py::register_exception<NoInformationError>(m, "NoInformationError", num.ptr());
    py::register_exception<StatisticsError>(m, "StatisticsError", num.ptr());
    py::register_exception<AliasingError>(m, "AliasingError", num.ptr());
    py::register_exception<IdentifiabilityError>(m, "IdentifiabilityError", num.ptr());

    m.def("scenario_names", &scenario_names);
    m.def("scenario_params", [](const std::string& name) {
        json j;
        to_json(j, scenario_params(name));
        return from_json_obj(j);
    });

    m.def(
        "simulate",
        [](const py::object& params, double t1, double dt, double n44, double n43, bool uncoupled) {
            const ModelParams p = params_arg(params, "fig2a");
            const auto times = TimeGrid{0.0, t1, dt}.points();
            if (uncoupled) {
                return trajectory_dict(propagate_moments(GaussianState::css(), p, NoiseChannels::from_params(p), times));
            }
            return trajectory_dict(forward_model(p, {n44, n43, 1.0 - n44 - n43, 1.0}, times));
        },
        py::arg("params") = py::none(), py::arg("t1") = 60.0, py::arg("dt") = 0.1, py::arg("n44") = 0.99,
        py::arg("n43") = 0.01, py::arg("uncoupled") = false);

    m.def(
        "populations",
        [](const py::object& params, double t1, double dt, double n44, double n43) {
            const ModelParams p = params_arg(params, "fig2a");
            const auto s = propagate_populations({n44, n43, 1.0 - n44 - n43, 1.0}, transition_rates(p),
                                                 TimeGrid{0.0, t1, dt});
            std::vector<double> a, b, c;
            for (const auto& st : s.states) {
                a.push_back(st.n44);
                b.push_back(st.n43);
                c.push_back(st.nh);
            }
            py::dict d;
            d["time_ms"] = s.times;
            d["n44"] = a;
            d["n43"] = b;
            d["nh"] = c;
            return d;
        },
        py::arg("params") = py::none(), py::arg("t1") = 60.0, py::arg("dt") = 0.1, py::arg("n44") = 0.99,
        py::arg("n43") = 0.01);

    m.def("kappa_sq", &kappa_sq, py::arg("gamma_s"), py::arg("mu_minus_nu"), py::arg("T"));
    m.def("apply_detection_loss", &apply_detection_loss, py::arg("y_var"), py::arg("eta"));
    m.def(
        "apply_io",
        [](double vu, double vv, double gamma_s, double s, double T) {
            const IoSnapshot o = apply_io_rate({vu, vv}, 1.0, gamma_s, s, T);
            py::dict d;
            d["kappa"] = o.kappa;
            d["atomic_out"] = py::make_tuple(o.atomic_out.x_minus, o.atomic_out.p_plus);
            d["y_out"] = py::make_tuple(o.y_out.x_minus, o.y_out.p_plus);
            return d;
        },
        py::arg("v_u"), py::arg("v_v"), py::arg("gamma_s"), py::arg("mu_minus_nu"), py::arg("T"));
    m.def(
        "reconstruct",
        [](double y, double k2, double s, double eta) {
            const Reconstruction r = reconstruct_atomic_variance(y, k2, s, 1.0, eta);
            return py::make_tuple(r.variance, r.below_floor);
        },
        py::arg("y_var"), py::arg("kappa_sq"), py::arg("mu_minus_nu"), py::arg("eta") = 1.0);

    m.def(
        "synthesize_record",
        [](double gamma_s, double gamma_extra, double eta, double noise_var, double s, double initial,
           double duration, double dt, std::uint64_t seed) {
            return record_dict(synthesize_record(record_model(gamma_s, gamma_extra, eta, noise_var, s, initial, duration),
                                                 dt, seed));
        },
        py::arg("gamma_s"), py::arg("gamma_extra") = 0.0, py::arg("eta") = 1.0, py::arg("noise_var") = 1.0,
        py::arg("mu_minus_nu") = 0.4, py::arg("initial") = 1.0, py::arg("duration") = 1.0, py::arg("dt") = 0.05,
        py::arg("seed") = 0);

    m.def(
        "integrate_mode",
        [](const py::dict& rec, const std::string& phase, const std::string& direction, double rate, double t0,
           double t1) {
            ModeFunctional f;
            if (phase != "cos" && phase != "sin") throw UsageError("phase must be cos or sin");
            f.phase = phase == "cos" ? Phase::cos : Phase::sin;
            if (direction == "falling") f.direction = Direction::falling;
            else if (direction == "rising") f.direction = Direction::rising;
            else if (direction == "flat") f.direction = Direction::flat;
            else throw UsageError("direction must be falling, rising or flat");
            f.rate = rate;
            f.t_start = t0;
            f.t_end = t1;
            return integrate_mode(record_arg(rec), f);
        },
        py::arg("record"), py::arg("phase"), py::arg("direction"), py::arg("rate"), py::arg("t_start"),
        py::arg("t_end"));

    m.def(
        "optimize_gain",
        [](double gamma_s, double gamma_extra, double eta, double noise_var, double s, double initial, double T,
           double t_probe, double lo, double hi, double step, std::size_t trials, std::uint64_t seed,
           bool per_channel) {
            const RecordModel model = record_model(gamma_s, gamma_extra, eta, noise_var, s, initial, T + t_probe);
            py::gil_scoped_release nogil;
            return optimize_gain(model, 0.05, derive_master(seed), trials,
                                 readout_mode(gamma_s + gamma_extra, T, t_probe, Phase::cos), gamma_m_grid(lo, hi, step),
                                 per_channel ? GainSharing::per_channel : GainSharing::shared);
        },
        py::arg("gamma_s"), py::arg("gamma_extra") = 0.0, py::arg("eta") = 1.0, py::arg("noise_var") = 1.0,
        py::arg("mu_minus_nu") = 0.4, py::arg("initial") = 1.0, py::arg("T") = 5.0, py::arg("t_probe") = 1.0,
        py::arg("gamma_m_lo") = 0.0, py::arg("gamma_m_hi") = 2.0, py::arg("gamma_m_step") = 0.01,
        py::arg("trials") = 2000, py::arg("seed") = 0, py::arg("per_channel") = false);

    py::class_<GainResult>(m, "GainResult")
        .def_readonly("alpha_star", &GainResult::alpha_star)
        .def_readonly("alpha_sin", &GainResult::alpha_sin)
        .def_readonly("gamma_m_star", &GainResult::gamma_m_star)
        .def_readonly("min_variance", &GainResult::min_variance)
        .def_readonly("var_cos", &GainResult::var_cos)
        .def_readonly("var_sin", &GainResult::var_sin)
        .def_readonly("unconditional", &GainResult::unconditional)
        .def("as_dict", &gain_dict);

    m.def(
        "run_scenario",
        [](const std::string& name, const py::object& overrides, std::uint64_t seed, std::size_t trials) {
            const json ov = to_json_obj(overrides);
            ScenarioBundle b;
            {
                py::gil_scoped_release nogil;
                b = run_scenario(name, ov, seed, trials);
            }
            py::dict d;
            d["report"] = from_json_obj(b.report);
            py::dict tables;
            for (const auto& t : b.tables) {
                py::dict td;
                td["columns"] = t.columns;
                td["rows"] = t.rows;
                tables[py::str(t.name)] = td;
            }
            d["tables"] = tables;
            py::dict trajs;
            for (const auto& [k, tr] : b.trajectories) trajs[py::str(k)] = trajectory_dict(tr);
            d["trajectories"] = trajs;
            return d;
        },
        py::arg("name"), py::arg("overrides") = py::none(), py::arg("seed") = 0, py::arg("trials") = 2000);

    m.def(
        "orientation",
        [](const std::vector<double>& p) {
            if (p.size() != 9) throw UsageError("need 9 sublevel populations");
            Sublevels s{};
            std::copy(p.begin(), p.end(), s.begin());
            return orientation(s);
        },
        py::arg("populations"));

    m.def(
        "calibrate_pn",
        [](const std::vector<double>& theta, const std::vector<double>& xi0) {
            if (theta.size() != xi0.size()) throw UsageError("theta and xi0 differ in length");
            std::vector<CalibrationPoint> pts;
            for (std::size_t i = 0; i < theta.size(); ++i) pts.push_back({theta[i], xi0[i], 1.0});
            const PnCalibration c = calibrate_pn(pts);
            return py::make_tuple(c.linear, c.quadratic);
        },
        py::arg("theta"), py::arg("xi0"));

    m.def(
        "fit",
        [](const std::vector<double>& t, const std::vector<double>& xi, double xi_err,
           const std::vector<std::string>& free, const py::object& start) {
            if (t.size() != xi.size()) throw UsageError("t and xi differ in length");
            FitProblem pb;
            for (std::size_t i = 0; i < t.size(); ++i) pb.observed.push_back({t[i], xi[i], xi_err, 1.0, 0.0});
            pb.free = free;
            pb.fixed = params_arg(start, "fig2a");
            FitResult r;
            {
                py::gil_scoped_release nogil;
                r = fit_parameters(pb);
            }
            json j;
            to_json(j, r.params);
            py::dict d;
            d["params"] = from_json_obj(j);
            d["chi2"] = r.chi2;
            std::vector<double> se;
            for (Eigen::Index i = 0; i < r.covariance.rows(); ++i) se.push_back(std::sqrt(r.covariance(i, i)));
            d["names"] = r.names;
            d["std_error"] = se;
            return d;
        },
        py::arg("t"), py::arg("xi"), py::arg("xi_err"), py::arg("free"), py::arg("start") = py::none());
}
