#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dissent/errors.hpp"
#include "dissent/gaussian_dynamics.hpp"
#include "dissent/lindblad_oracle.hpp"

using namespace dissent;

namespace {

ModelParams drive(double s = 0.4, double d = 55.0) {
    ModelParams p;
    p.set_mu_minus_nu(s);
    p.d = d;
    p.Gamma = 0.002;
    return p;
}

// d/dt of V_u from the derivative of the covariance
double dvu(const GaussianDerivative& g) { return 0.5 * (g.cov(0, 0) + g.cov(2, 2) - 2.0 * g.cov(0, 2)); }
double dvv(const GaussianDerivative& g) { return 0.5 * (g.cov(1, 1) + g.cov(3, 3) + 2.0 * g.cov(1, 3)); }

}  // namespace

TEST_SUITE("gaussian-dynamics") {

TEST_CASE("fixed points of the moment equations") {
    const ModelParams p = drive();
    const auto at_target = moment_derivative(GaussianState::from_nonlocal(0.16, 0.16), p, NoiseChannels::none());
    CHECK(dvu(at_target) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(dvv(at_target) == doctest::Approx(0.0).epsilon(1e-14));

    ModelParams off = p;
    off.d = 0.0;
    NoiseChannels n;
    n.dephasing = 0.193;
    const auto css = moment_derivative(GaussianState::css(), off, n);
    CHECK(css.cov.cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("nonlocal variances relax at the collective rate") {
    const ModelParams p = drive();
    const double R = p.d * p.Gamma;
    const GaussianState g = GaussianState::from_nonlocal(1.3, 0.8);
    const auto d = moment_derivative(g, p, NoiseChannels::none());
    CHECK(dvu(d) == doctest::Approx(-R * (1.3 - 0.16)));
    CHECK(dvv(d) == doctest::Approx(-R * (0.8 - 0.16)));

    // dephasing pulls toward 1 at Gamma_tilde
    ModelParams off = p;
    off.d = 0.0;
    NoiseChannels n;
    n.dephasing = 0.2;
    const auto e = moment_derivative(g, off, n);
    CHECK(dvu(e) == doctest::Approx(-0.2 * (1.3 - 1.0)));
}

TEST_CASE("moment derivative matches a hand-built jump operator") {
    // A = mu a_I - nu a_II^dag with a = (X + iP)/2, through add_jump directly
    const ModelParams p = drive(0.6);
    const double R = p.d * p.Gamma;
    Mat4 drift = Mat4::Zero(), diff = Mat4::Zero();
    const std::complex<double> h(0.5, 0.0), ih(0.0, 0.5);
    Eigen::Vector4cd a, b;
    a << p.mu * h, p.mu * ih, -p.nu * h, p.nu * ih;
    b << -p.nu * h, p.nu * ih, p.mu * h, p.mu * ih;
    add_jump(a, R, drift, diff);
    add_jump(b, R, drift, diff);
    const GaussianState g = GaussianState::from_nonlocal(2.0, 1.5);
    const Mat4 ref = drift * g.cov + g.cov * drift.transpose() + diff;
    const auto d = moment_derivative(g, p, NoiseChannels::none());
    CHECK((d.cov - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("steady state and monotone approach") {
    const ModelParams p = drive();
    const Trajectory tr = propagate_moments(GaussianState::css(), p, NoiseChannels::none(), TimeGrid{0.0, 400.0, 2.0});
    CHECK(tr.xi_series.back().xi == doctest::Approx(0.16).epsilon(1e-6));
    for (std::size_t i = 1; i < tr.states.size(); ++i) {
        CHECK(tr.states[i].v_u() <= tr.states[i - 1].v_u() + 1e-12);
    }
    // from below the target it rises
    const Trajectory up = propagate_moments(GaussianState::from_nonlocal(0.05, 0.05), p, NoiseChannels::none(),
                                            TimeGrid{0.0, 50.0, 1.0});
    for (std::size_t i = 1; i < up.states.size(); ++i) CHECK(up.states[i].v_v() >= up.states[i - 1].v_v() - 1e-12);
}

TEST_CASE("closed-form relaxation") {
    const ModelParams p = drive();
    const double R = p.d * p.Gamma;
    const Trajectory tr = propagate_moments(GaussianState::css(), p, NoiseChannels::none(), TimeGrid{0.0, 20.0, 1.0});
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        const double want = 0.16 + 0.84 * std::exp(-R * tr.times[i]);
        CHECK(tr.xi_series[i].xi == doctest::Approx(want).epsilon(1e-8));
    }
}

TEST_CASE("zero span and grid checks") {
    const Trajectory tr = propagate_moments(GaussianState::css(), drive(), NoiseChannels::none(), TimeGrid{3.0, 3.0, 0.1});
    REQUIRE(tr.times.size() == 1);
    CHECK(tr.xi_series[0].xi == doctest::Approx(1.0));
    CHECK_THROWS_AS(propagate_moments(GaussianState::css(), drive(), NoiseChannels::none(), std::vector<double>{0.0, 1.0, 0.5}),
                    UsageError);
}

TEST_CASE("exchange symmetry of the trajectory") {
    ModelParams p = drive();
    NoiseChannels n;
    n.dephasing = 0.1;
    const GaussianState g = GaussianState::from_nonlocal(2.0, 0.7);
    Eigen::Matrix4d s = Eigen::Matrix4d::Zero();
    s(0, 2) = 1.0;
    s(1, 3) = -1.0;
    s(2, 0) = 1.0;
    s(3, 1) = -1.0;
    GaussianState h = g;
    h.cov = s * g.cov * s.transpose();
    const TimeGrid grid{0.0, 20.0, 1.0};
    const Trajectory a = propagate_moments(g, p, n, grid);
    const Trajectory b = propagate_moments(h, p, n, grid);
    for (std::size_t i = 0; i < a.times.size(); ++i) {
        CHECK(a.xi_series[i].xi == doctest::Approx(b.xi_series[i].xi).epsilon(1e-10));
    }
}

TEST_CASE("distinguishable emitters do not entangle") {
    const ModelParams p = drive();
    NoiseChannels n = NoiseChannels::none();
    n.distinguishable = true;
    const Trajectory tr = propagate_moments(GaussianState::css(), p, n, TimeGrid{0.0, 100.0, 1.0});
    for (const auto& r : tr.xi_series) CHECK(r.xi >= 1.0 - 1e-12);
}

TEST_CASE("population coupling keeps the uncorrelated level") {
    // drive off: an uncorrelated state stays at 1/P2 as P2 changes
    ModelParams p;
    p.set_mu_minus_nu(0.4);
    p.Gamma_col = 0.002;
    p.Gamma_L_out = 0.03;
    const PopulationState init{0.99, 0.01, 0.0, 1.0};
    const auto path = PopulationPath::analytic(init, transition_rates(p));
    const double v0 = 1.0 / init.P2();
    const Trajectory tr = propagate_moments(GaussianState::from_nonlocal(v0, v0, init.Jx()), p,
                                            NoiseChannels::from_params(p), TimeGrid{0.0, 60.0, 1.0}, path);
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        CHECK(tr.states[i].v_u() == doctest::Approx(1.0 / tr.populations[i].P2()).epsilon(1e-8));
        CHECK(tr.xi_series[i].xi >= 1.0);
    }
}

TEST_CASE("multilevel report at full polarization") {
    const PopulationState full{1.0, 0.0, 0.0, 1.0};
    const GaussianState g = GaussianState::from_nonlocal(0.5, 0.7);
    CHECK(report_epr(g, full).xi == doctest::Approx(epr_variance(g).xi));
    const PopulationState mixed{0.9, 0.05, 0.05, 1.0};
    const double xi = report_epr(g, mixed).xi;
    const double sigma = sigma_j_from_gaussian(epr_variance(g).xi, mixed);
    CHECK(xi == doctest::Approx(multilevel_entanglement(sigma, mixed)));
}

TEST_CASE("trajectory csv") {
    const Trajectory tr = propagate_moments(GaussianState::css(), drive(), NoiseChannels::none(), TimeGrid{0.0, 1.0, 0.5});
    std::ostringstream os;
    write_trajectory_csv(os, tr);
    const std::string s = os.str();
    CHECK(s.rfind("time_ms,var_x_minus,var_p_plus,xi,Jx_norm,N2,P2\n", 0) == 0);
    CHECK(std::count(s.begin(), s.end(), '\n') == 4);
}

TEST_CASE("sub-unity window") {
    Trajectory t;
    for (int i = 0; i < 10; ++i) {
        t.times.push_back(i);
        EprReport r;
        r.xi = (i >= 2 && i <= 6) ? 0.9 : 1.1;
        t.xi_series.push_back(r);
        t.states.emplace_back();
    }
    CHECK(subunity_window(t) == doctest::Approx(4.0));
}

TEST_CASE("exact oracle basics") {
    const ModelParams p = drive();
    const ExactState css = ExactState::css(1);
    const ExactState same = exact_lindblad_step(css, p, NoiseChannels::none(), 0.0);
    CHECK((same.rho - css.rho).norm() == 0.0);

    ModelParams flat = p;
    flat.d = 0.0;
    const ExactState mixed = ExactState::maximally_mixed(2);
    const ExactState m2 = exact_lindblad_step(mixed, flat, NoiseChannels::none(), 5.0);
    CHECK((m2.rho - mixed.rho).norm() < 1e-14);

    const ExactState later = exact_lindblad_step(css, p, NoiseChannels::none(), 5.0);
    CHECK_NOTHROW(later.validate(1e-10));
    CHECK(std::abs(later.rho.trace().real() - 1.0) < 1e-10);

    CHECK_THROWS_AS(ExactState::css(4), UsageError);
    NoiseChannels dist = NoiseChannels::none();
    dist.distinguishable = true;
    CHECK_THROWS_AS(exact_lindblad_step(css, p, dist, 1.0), UsageError);
}

TEST_CASE("exact oracle: nonlocal variance falls before saturating") {
    const ModelParams p = drive();
    ExactState s = ExactState::css(1);
    double prev = exact_moments(s).v_u();
    CHECK(prev == doctest::Approx(1.0));
    for (int k = 0; k < 10; ++k) {
        s = exact_lindblad_step(s, p, NoiseChannels::none(), 0.5);
        const double v = exact_moments(s).v_u();
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("oracle agreement") {
    const ModelParams p = drive();
    CHECK(validate_against_oracle(p, 0.0) == 0.0);

    OracleOptions o;
    o.prep_time = 5.0;
    o.prep_params = p;
    ModelParams dark = p;
    dark.d = 0.0;
    NoiseChannels n;
    n.dephasing = 0.193;
    CHECK(validate_against_oracle(dark, 10.0, n, o) < 1e-6);

    // single spins are not bosons; the gap closes as spins are added and as
    // the heating amplitude nu shrinks
    const ModelParams weak = drive(0.8);
    OracleOptions o2;
    o2.n_per_ensemble = 2;
    const double e1 = validate_against_oracle(weak, 0.1 / oracle_gamma_c(weak, 1));
    const double e2 = validate_against_oracle(weak, 0.1 / oracle_gamma_c(weak, 2), NoiseChannels::none(), o2);
    CHECK(e1 < 0.05);
    CHECK(e2 < e1);
    const double strong = validate_against_oracle(p, 0.1 / oracle_gamma_c(p, 1));
    CHECK(strong > e1);
}

TEST_CASE("short-time derivative: spin correction falls as 1/n") {
    // From the CSS the exact slope of xi exceeds the Gaussian one by 2 nu^2 R / n,
    // the local heating a bosonic mode shows and a few spins cannot.
    for (double s : {0.8, 0.4}) {
        const ModelParams p = drive(s);
        for (int n : {1, 2, 3}) {
            const double h = 1e-4;
            const ExactState st = exact_lindblad_step(ExactState::css(n), p, NoiseChannels::none(), h);
            const double exact = (epr_variance(exact_moments(st)).xi - 1.0) / h;
            ModelParams q = p;
            q.Gamma *= n;
            const auto d = moment_derivative(GaussianState::css(), q, NoiseChannels::none());
            const double gauss = 0.5 * (dvu(d) + dvv(d));
            const double R = q.d * q.Gamma;
            CHECK(gauss - exact == doctest::Approx(2.0 * p.nu * p.nu * R / n).epsilon(2e-3));
        }
    }
}

}
