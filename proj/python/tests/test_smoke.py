import math

import numpy as np
import pytest

import evcasimir as ev


def test_params_and_constants():
    p = ev.AdmissibleParams(M=1.0, beta=0.3, k=1.0)
    assert p.sigma0 == pytest.approx(3 * 0.3**3 / (4 * math.pi), rel=1e-14)
    assert p.P0 == pytest.approx(6400.0, rel=1e-12)
    assert ev.small_mass_saturation_bound() == pytest.approx(0.998302, abs=1e-5)
    with pytest.raises(ev.Error):
        ev.AdmissibleParams(k=3.0)


def test_distribution_round_trip_and_evaluate():
    g = ev.make_grid(1.0, 4, 1.0, 3, 2)
    assert g.shape == (4, 3, 2)
    zero = ev.DistributionFunction(g, np.zeros(g.shape))
    rep = ev.evaluate(zero, 1.0)
    assert rep["D"] == 0.0
    vals = np.full(g.shape, 0.01)
    f = ev.DistributionFunction(g, vals)
    assert np.array_equal(f.values, vals)
    assert ev.evaluate(f, 1.0)["D"] < 0.0
    with pytest.raises(ev.Error):
        ev.DistributionFunction(g, np.zeros((2, 2, 2)))


def test_machines_descend():
    p = ev.AdmissibleParams()
    f = ev.random_field(7, p)
    g, tr = ev.cap_excess(f, p.k)
    assert tr["op"] == "cap_excess"
    assert tr["D_after"] <= tr["D_before"] + 1e-10
    assert ev.evaluate(g, p.k)["D"] == tr["D_after"]
    h, t2 = ev.improve_tail(f, p)
    assert t2["D_after"] <= t2["D_before"] + 1e-10
    assert t2["rho_max_dev"] <= 1e-9


def test_static_and_witness():
    s = ev.integrate_static(1.0, 0.9)
    assert s["compactness"] < 8 / 9
    assert 0.5 * s["C"] * s["M"] <= abs(s["D"]) <= s["C"] * s["M"]
    assert len(s["r"]) == len(s["rho"])
    csv = ev.sweep_csv(1.0, 0.9, 0.95, 2)
    assert csv.startswith("central_eps,M,R0,compactness,D,E_b,E_Cb,cbec\n")
    w = ev.cbec_witness(1.0, 1.0, ev.AdmissibleParams().sigma0, 0.05)
    assert w["A"] == 0.125
    assert ev.evaluate(w["f"], 1.0)["D"] == pytest.approx(w["D_closed"], rel=1e-6)


def test_minimize_small_grid():
    s = ev.integrate_static(1.0, 0.98)
    p = ev.AdmissibleParams(M=s["M"], beta=0.3, k=1.0)
    g = ev.make_grid(1.6 * s["R0"], 32, 1.3 * math.sqrt(1 / 0.98**2 - 1), 80)
    out = ev.minimize(p, g, ev.flat_profile(g, p.M, 0.8 * s["R0"]))
    assert out["D"] == pytest.approx(s["D"], rel=1e-2)
    hist = out["D_history"]
    assert all(b <= a for a, b in zip(hist, hist[1:]))


def test_property_suite_is_deterministic():
    p = ev.AdmissibleParams()
    a = ev.property_suite(p, seed=0, count=2)
    b = ev.property_suite(p, seed=0, count=2)
    assert a == b
    assert a["pass"] is True
