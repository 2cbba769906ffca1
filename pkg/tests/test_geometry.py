import math

import numpy as np
import pytest

from lightcone_lab import geometry as geo
from lightcone_lab.geometry import NOT_OBSERVED

M = geo.Minkowski(3)
CYL = geo.StaticProduct(periods=[1.0])


def test_classify():
    o = np.zeros(4)
    assert geo.classify(M, o, [1, 0, 0, 0]) == ("timelike", "future")
    assert geo.classify(M, o, [1, 1, 0, 0]) == ("null", "future")
    assert geo.classify(M, o, [0, 1, 0, 0]) == ("spacelike", "none")
    assert geo.classify(M, o, [-1, 0, 1, 0]) == ("null", "past")


def test_minkowski_geodesic_exact():
    g = geo.geodesic(M, np.zeros(4), [1, 1, 0, 0], 2.0)
    assert np.array_equal(g.points[-1], [2.0, 2.0, 0.0, 0.0])
    assert g.drift == 0.0


def test_cylinder_geodesic_wraps():
    c = geo.StaticProduct(periods=[2 * math.pi])
    g = geo.geodesic(c, [0.0, 0.0], [1.0, 1.0], math.pi)
    assert np.allclose(g.points[-1], [math.pi, math.pi], atol=1e-12)


def test_conformal_geodesic_vs_reference():
    cf = geo.linear_conformal(1.0, 0.1, 0.0)
    x0, xi = [0.0, 0.0], [1.0, 0.6]
    g = geo.geodesic(cf, x0, xi, 1.5)
    ref = geo.geodesic_reference(cf, x0, xi, 1.5, n=400)
    p, v = g.at(1.5)
    assert np.max(np.abs(np.concatenate([p, v]) - ref)) < 1e-7
    assert g.drift < 1e-9


def test_sampled_h_geodesic_conserves_hamiltonian():
    ys = np.linspace(-20, 20, 401)
    m = geo.StaticProduct(h_grid=(ys, 1 + 0.3 * np.exp(-ys**2)))
    g = geo.geodesic(m, [0.0, -1.0], [1.0, 0.5], 3.0)
    assert g.drift < 1e-9


def test_geodesic_exit_flag():
    cf = geo.linear_conformal(1.0, 0.0, 0.0, box=((-1.0, 1.0), (-1.0, 1.0)))
    g = geo.geodesic(cf, [0.0, 0.0], [1.0, 1.0], 5.0)
    assert g.exited and g.max_param < 5.0


def test_time_sep_minkowski():
    assert geo.time_sep(M, np.zeros(4), [2, 1, 0, 0]) == pytest.approx(math.sqrt(3), abs=1e-12)
    assert geo.time_sep(M, np.zeros(4), [1, 2, 0, 0]) == 0.0


def test_time_sep_broken_path_oracle():
    val, _, ok = geo.time_sep_broken(M, np.zeros(4), [2, 1, 0, 0])
    assert ok and val == pytest.approx(1.7320508, abs=1e-6)


def test_time_sep_cylinder_winding():
    c = geo.StaticProduct(periods=[2 * math.pi])
    # shortest winding distance is pi, so tau = sqrt((pi + 0.5)^2 - pi^2)
    assert geo.time_sep(c, [0, 0], [math.pi + 0.5, math.pi]) == pytest.approx(math.sqrt(math.pi + 0.25), abs=1e-9)


def test_time_sep_conformal_vs_broken_paths():
    cf = geo.linear_conformal(1.0, 0.1, 0.0)
    a = geo.time_sep(cf, [0, 0], [1.0, 0.3])
    b, _, _ = geo.time_sep_broken(cf, [0, 0], [1.0, 0.3])
    assert abs(a - b) < 1e-5
    # constant factor c scales lengths by sqrt(c)
    c4 = geo.linear_conformal(4.0)
    assert geo.time_sep(c4, [0, 0], [1.0, 0.3]) == pytest.approx(2 * math.sqrt(1 - 0.09), rel=1e-8)


def test_reverse_triangle_and_asymmetry():
    rng = np.random.default_rng(3)
    for metric in (M, geo.StaticProduct(periods=[1.0, None, 2.0])):
        for _ in range(50):
            x = rng.normal(size=4)
            y = x + np.concatenate([[abs(rng.normal()) + 1.5], rng.normal(size=3) * 0.3])
            z = y + np.concatenate([[abs(rng.normal()) + 1.5], rng.normal(size=3) * 0.3])
            t = geo.time_sep
            assert t(metric, x, z) >= t(metric, x, y) + t(metric, y, z) - 1e-12
            if t(metric, x, y) > 0:
                assert t(metric, y, x) == 0.0


def test_cut_values():
    assert math.isinf(geo.cut_value(M, np.zeros(4), [1, 1, 0, 0]).value)
    for ell in (1.0, 2.5):
        r = geo.cut_value(geo.StaticProduct(periods=[ell]), [0.0, 0.3], [1.0, 1.0])
        assert r.value == pytest.approx(ell / 2, abs=1e-3)
    t = geo.StaticProduct(periods=[2 * math.pi, 2 * math.pi])
    assert geo.cut_value(t, [0, 0, 0], [1, 0, 1]).value == pytest.approx(math.pi, abs=1e-3)


def test_cut_value_matches_torus_closed_form():
    t = geo.StaticProduct(periods=[1.0, 2.0])
    for ang in np.linspace(0, 2 * np.pi, 13):
        u = np.array([math.cos(ang), math.sin(ang)])
        num = geo.cut_value(t, [0, 0, 0], np.concatenate([[1.0], u])).value
        assert num == pytest.approx(geo.torus_cut_closed_form(t.periods, u), abs=1e-6)


def test_cut_value_needs_null():
    with pytest.raises(geo.PreconditionError):
        geo.cut_value(M, np.zeros(4), [1, 0.5, 0, 0])


def test_obs_time_examples():
    mu = geo.unit_observer(M, np.zeros(4))
    assert geo.obs_time(mu, [0, 0.3, 0, 0]) == pytest.approx(0.3, abs=1e-9)
    assert geo.obs_time(mu, mu.at(0.37)) == pytest.approx(0.37, abs=1e-9)
    assert geo.obs_time(mu, [0, 0.3, 0, 0], "minus") == pytest.approx(-0.3, abs=1e-9)
    mu1 = geo.unit_observer(CYL, [0.0, 0.0])
    assert geo.obs_time(mu1, [0.0, 0.4]) == pytest.approx(0.4, abs=1e-9)


def test_obs_time_out_of_diamond():
    mu = geo.unit_observer(M, np.zeros(4))
    with pytest.raises(geo.PreconditionError):
        geo.obs_time(mu, [0, 1.5, 0, 0])


def test_tau_monotone_along_observer():
    mu = geo.unit_observer(CYL, [0.0, 0.0])
    x = np.array([-0.2, 0.35])
    vals = [geo.time_sep(CYL, x, mu.at(s)) for s in np.linspace(-1, 1, 401)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_obs_time_continuity():
    mu = geo.unit_observer(M, np.zeros(4))
    x = np.array([0.1, 0.2, 0.1, 0.0])
    f0 = geo.obs_time(mu, x)
    rng = np.random.default_rng(0)
    for _ in range(20):
        d = rng.normal(size=4)
        assert abs(geo.obs_time(mu, x + 1e-4 * d / np.linalg.norm(d)) - f0) < 1e-3


def test_earliest_light_obs_minkowski():
    obs = [geo.unit_observer(M, [0, 0.2, 0, 0])]
    U = geo.ObservationRegion(M, np.zeros(4), obs[0].eta, 0.3, obs)
    (_, s), = geo.earliest_light_obs(np.zeros(4), U).entries
    assert s == pytest.approx(0.2, abs=1e-9)
    mu = geo.unit_observer(M, np.zeros(4))
    U = geo.ObservationRegion(M, np.zeros(4), mu.eta, 0.3, [mu])
    (_, s), = geo.earliest_light_obs(mu.at(0.25), U).entries
    assert s == pytest.approx(0.25, abs=1e-9)


def test_not_observed_after_cut():
    # mu(-1) is already chronologically after q: only post-cut light reaches it
    mu = geo.unit_observer(CYL, [0.0, 0.5])
    U = geo.ObservationRegion(CYL, mu.z, mu.eta, 0.5, [mu])
    q = np.array([-2.0, 0.0])
    (_, s), = geo.earliest_light_obs(q, U).entries
    assert s is NOT_OBSERVED
    # the untruncated cone does reach the observer inside [-1, 1]
    arrivals = []
    for k in range(-3, 4):
        for sign in (1, -1):
            # q + r(1, sign) meets x = 0.5 + k at t = -2 + |0.5 + k|
            if np.sign(0.5 + k) == sign:
                arrivals.append(-2 + abs(0.5 + k))
    assert any(-1 <= a <= 1 for a in arrivals)
    (e, _), = geo.fan_arrivals(CYL, q, [mu])
    assert e is NOT_OBSERVED


def test_fan_cross_check_2p1():
    t = geo.StaticProduct(periods=[1.0, 1.0])
    R = geo.observer_family(t, [0, 0.5, 0.5], h_hat=0.2, n=16)
    s = geo.earliest_light_obs([-0.6, 0.3, 0.4], R, fan=720)
    assert s.flags == []
    assert len(s.entries) == len(R.observers) == 16


def test_observer_family_within_h():
    R = geo.observer_family(M, np.zeros(4), h_hat=0.2, n=64)
    assert len(R.observers) == 64
    c = R.observers[0]
    for mu in R.observers:
        assert np.linalg.norm(np.concatenate([mu.z - c.z, mu.eta - c.eta])) <= 0.2 + 1e-12
        assert geo.classify(M, mu.z, mu.eta) == ("timelike", "future")


def test_null_length_bound():
    m1 = geo.Minkowski(1)
    assert geo.null_length_bound(m1, [-1, 0], [1, 0]) == pytest.approx(math.sqrt(2), abs=1e-3)
    assert geo.null_length_bound(m1, [0, 0], [0, 0]) == 0.0
    tall = geo.null_length_bound(CYL, [-1.5, 0], [1.5, 0])
    assert math.isfinite(tall) and tall <= 3.0 * math.sqrt(2) + 1e-6


def test_kappa_cylinder():
    rep = geo.kappa_estimates(CYL, geo.unit_observer(CYL, [0.0, 0.0]), -0.5, 0.5)
    assert rep.min_rho == pytest.approx(0.5, abs=1e-3)
    assert rep.kappa1 < 0.1
    # cut point sits at spatial distance 1/2, so f^- jumps by 2 kappa1
    assert rep.kappa2 == pytest.approx(rep.kappa1 / 2, rel=1e-6)
    assert rep.theta1 > 0 and not rep.flags


def test_kappa_torus_shortest_circumference():
    t = geo.StaticProduct(periods=[1.0, 2.0])
    rep = geo.kappa_estimates(t, geo.unit_observer(t, [0, 0, 0]), -0.5, 0.5, n_points=3, n_dirs=8)
    assert rep.min_rho == pytest.approx(0.5, abs=1e-3)


def test_kappa_minkowski_flag():
    m = geo.Minkowski(1)
    rep = geo.kappa_estimates(m, geo.unit_observer(m, [0, 0]), -0.5, 0.5)
    assert any("no cut points" in f for f in rep.flags)
