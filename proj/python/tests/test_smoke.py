import math

import pytest

import dissent


def test_names():
    assert "fig2a" in dissent.scenario_names()
    p = dissent.scenario_params("fig2a")
    assert p["d"] == 55.0


def test_uncoupled_steady_state():
    tr = dissent.simulate({"Gamma_tilde": 0.0, "Gamma_col": 0.0, "Gamma_L_out": 0.0},
                          t1=300.0, dt=10.0, uncoupled=True)
    assert abs(tr["xi"][-1] - 0.16) < 1e-4


def test_populations_sum_to_one():
    s = dissent.populations(t1=20.0, dt=1.0)
    for a, b, c in zip(s["n44"], s["n43"], s["nh"]):
        assert abs(a + b + c - 1.0) < 1e-12


def test_io_and_reconstruction():
    k2 = dissent.kappa_sq(0.055, 0.4, 1.0)
    io = dissent.apply_io(0.3, 0.3, 0.055, 0.4, 1.0)
    assert math.isclose(io["kappa"] ** 2, k2)
    y = dissent.apply_detection_loss(io["y_out"][0], 0.84)
    v, below = dissent.reconstruct(y, k2, 0.4, 0.84)
    assert abs(v - 0.3) < 1e-12 and not below
    with pytest.raises(dissent.NoInformationError):
        dissent.reconstruct(1.0, 0.0, 0.4)


def test_record_and_gain_are_deterministic():
    a = dissent.synthesize_record(0.055, 0.215, 0.84, 1.3, duration=2.0, seed=3)
    b = dissent.synthesize_record(0.055, 0.215, 0.84, 1.3, duration=2.0, seed=3)
    assert a["s2_cos"] == b["s2_cos"]
    y = dissent.integrate_mode(a, "cos", "falling", 0.27, 1.0, 2.0)
    assert math.isfinite(y)
    g = dissent.optimize_gain(0.055, 0.215, 0.84, 1.3, T=5.0, gamma_m_hi=1.0, gamma_m_step=0.1,
                              trials=300, seed=1)
    assert g.min_variance <= g.unconditional


def test_scenario_and_errors():
    out = dissent.run_scenario("fig2a", trials=20, seed=1)
    assert out["report"]["driven"]["xi_min"] < 1.0
    assert "driven" in out["trajectories"]
    with pytest.raises(dissent.UsageError):
        dissent.run_scenario("nope")


def test_orientation_and_calibration():
    p = [0.0] * 9
    p[8], p[7] = 0.992, 0.008
    assert math.isclose(dissent.orientation(p), 0.998)
    lin, quad = dissent.calibrate_pn([1.0, 2.0, 3.0], [0.32, 0.68, 1.08])
    assert math.isclose(lin, 0.3) and math.isclose(quad, 0.02)
