#include <doctest.h>

#include <cmath>

#include "dissent/beat.hpp"
#include "dissent/errors.hpp"
#include "dissent/estimation.hpp"
#include "dissent/scenarios.hpp"

using namespace dissent;

namespace {

Sublevels two_top(double p4, double p3) {
    Sublevels p{};
    p[8] = p4;
    p[7] = p3;
    return p;
}

std::vector<double> times(double t1, double dt) {
    std::vector<double> t;
    for (double x = 0.0; x <= t1 + 1e-9; x += dt) t.push_back(x);
    return t;
}

}  // namespace

TEST_SUITE("estimation") {

TEST_CASE("orientation") {
    CHECK(orientation(two_top(1.0, 0.0)) == doctest::Approx(1.0));
    CHECK(orientation(two_top(0.992, 0.008)) == doctest::Approx(0.998));
    Sublevels flat;
    flat.fill(1.0 / 9.0);
    CHECK(orientation(flat) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK_THROWS_AS(orientation(two_top(0.5, 0.2)), InvariantViolation);
}

TEST_CASE("beat signal round trip") {
    BeatModel m;
    m.p = two_top(0.92, 0.08);
    const BeatSignal s = simulate_beat(m, 0.05);
    const double o = estimate_orientation(s, m);
    CHECK(o == doctest::Approx(0.98).epsilon(1e-9));
    CHECK(std::abs(o - 0.98) < 0.003);
    const Sublevels back = estimate_sublevels(s, m);
    for (std::size_t i = 0; i < 9; ++i) CHECK(back[i] == doctest::Approx(m.p[i]).epsilon(1e-9));
}

TEST_CASE("beat signal edge cases") {
    BeatModel m;
    m.p = two_top(1.0, 0.0);
    // only the top coherence survives, still a valid fit
    CHECK(estimate_orientation(simulate_beat(m, 0.05), m) == doctest::Approx(1.0));

    BeatSignal zero = simulate_beat(m, 0.05);
    std::fill(zero.X.begin(), zero.X.end(), 0.0);
    std::fill(zero.P.begin(), zero.P.end(), 0.0);
    CHECK_THROWS_AS(estimate_sublevels(zero, m), DegenerateError);
    CHECK_THROWS_AS(simulate_beat(m, 2.0), UsageError);
}

TEST_CASE("projection noise calibration") {
    std::vector<CalibrationPoint> pts;
    for (double th : {1.0, 2.0, 3.0, 4.5}) pts.push_back({th, 0.3 * th + 0.02 * th * th, 1.0});
    PnCalibration c = calibrate_pn(pts);
    CHECK(c.linear == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(c.quadratic == doctest::Approx(0.02).epsilon(1e-10));
    CHECK(c.quad_fraction == doctest::Approx(0.02 / 0.3).epsilon(1e-10));

    for (auto& p : pts) p.xi0 = 0.3 * p.theta;
    c = calibrate_pn(pts);
    CHECK(std::abs(c.quadratic) < 1e-12);

    // a common weight scale does not change the answer
    std::vector<CalibrationPoint> noisy;
    for (double th : {1.0, 2.0, 3.0, 4.5}) noisy.push_back({th, 0.3 * th + 0.01 * std::sin(7.0 * th), 1.0 + th});
    const PnCalibration a = calibrate_pn(noisy);
    for (auto& p : noisy) p.weight *= 17.0;
    const PnCalibration b = calibrate_pn(noisy);
    CHECK(a.linear == doctest::Approx(b.linear).epsilon(1e-12));

    pts.resize(2);
    CHECK_THROWS_AS(calibrate_pn(pts), UsageError);
}

TEST_CASE("fit with nothing free evaluates the model") {
    const ModelParams p = scenario_params("fig2a");
    const Trajectory t = forward_model(p, {0.99, 0.01, 0.0, 1.0}, times(20.0, 2.0));
    FitProblem pb;
    pb.observed = observations_from(t, 0.01, 0.01);
    pb.fixed = p;
    const FitResult r = fit_parameters(pb);
    CHECK(r.iterations == 0);
    CHECK(r.chi2 < 1e-20);
}

TEST_CASE("noise-free data recover the parameters") {
    const ModelParams truth = scenario_params("fig2a");
    const Trajectory t = forward_model(truth, {0.99, 0.01, 0.0, 1.0}, times(30.0, 1.0));
    FitProblem pb;
    pb.observed = observations_from(t, 0.01, 0.005);
    pb.free = {"d", "Gamma_tilde"};
    pb.fixed = truth;
    pb.fixed.d = 45.0;
    pb.fixed.Gamma_tilde = 0.15;
    const FitResult r = fit_parameters(pb);
    CHECK(r.params.d == doctest::Approx(truth.d).epsilon(1e-5));
    CHECK(r.params.Gamma_tilde == doctest::Approx(truth.Gamma_tilde).epsilon(1e-5));
    CHECK(r.covariance.rows() == 2);
}

TEST_CASE("unidentifiable parameters are reported") {
    ModelParams p = scenario_params("fig2a");
    p.Gamma_pump = 0.0;
    p.Gamma_L_out = 0.0;
    p.Gamma_col = 0.0;
    const Trajectory t = forward_model(p, {1.0, 0.0, 0.0, 1.0}, times(10.0, 1.0));
    FitProblem pb;
    // without populations moving and no J_x data, d and Gamma trade off only through d Gamma
    pb.observed = observations_from(t, 0.01, 0.0);
    pb.free = {"d", "Gamma_pump"};
    pb.fixed = p;
    pb.fixed.Gamma_pump = 0.01;
    CHECK_THROWS_AS(fit_parameters(pb), IdentifiabilityError);
}

TEST_CASE("fit input checks") {
    FitProblem pb;
    CHECK_THROWS_AS(fit_parameters(pb), UsageError);
    pb.observed = {{0.0, 1.0, 0.1}, {1.0, 0.9, 0.1}};
    pb.fixed = scenario_params("fig2a");
    pb.free = {"bogus"};
    CHECK_THROWS_AS(fit_parameters(pb), UsageError);
    pb.free = {"d", "d"};
    CHECK_THROWS_AS(fit_parameters(pb), UsageError);
}

TEST_CASE("slope constraints fix Gamma_L_out and d") {
    const ModelParams truth = scenario_params("fig2a");
    const PopulationState init{0.99, 0.01, 0.0, 1.0};
    const double ps = polarization_slope(init, transition_rates(truth));
    const double vs = variance_slope(init, truth, transition_rates(truth));
    ModelParams guess = truth;
    guess.d = 10.0;
    guess.Gamma_L_out = 0.5;
    apply_slope_constraints(guess, init, ps, vs);
    CHECK(guess.Gamma_L_out == doctest::Approx(truth.Gamma_L_out).epsilon(1e-8));
    CHECK(guess.d == doctest::Approx(truth.d).epsilon(1e-8));
}

}
