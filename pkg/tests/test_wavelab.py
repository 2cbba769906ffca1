import json
import math

import numpy as np
import pytest

from lightcone_lab import wavelab as wl

BOX = wl.PolyBox(0.0, 0.1, -0.05, 0.05)
BUMP = wl.PolyBox(0.1, 0.4, -0.2, 0.2, wl.bump_poly(0.1, 0.4), wl.bump_poly(-0.2, 0.2))


def grid_for(box, T=1.0, h=1 / 100, **kw):
    return wl.causal_box(1, (box.x0,), (box.x1,), 0.0, T, h, **kw)


def counter_pulses(a=1):
    return [wl.PlanePulse([1.0], -0.5, 0.1, a=a), wl.PlanePulse([-1.0], -0.5, 0.1, a=a)]


# ---------------------------------------------------------------- linear solver

def test_indicator_closed_form_is_exact():
    # half the mass of a 0.1 x 0.1 box inside the backward triangle of (1, 0)
    assert wl.closed_form_Q_1p1(BOX, 1.0, 0.0) == pytest.approx(0.005, abs=1e-15)


def test_indicator_fd_matches_oracle():
    g = grid_for(BOX, h=1 / 400)
    u = wl.solve_linear(g, wl.PolySource([BOX]))
    assert abs(u.sample(1.0, 0.0) - 0.005) < 2e-4


def test_zero_source_gives_zero():
    g = wl.Grid(1, (-1.0,), (1.0,), 1 / 50, 0.5)
    u = wl.solve_linear(g, wl.Zero())
    assert not np.any(u.values)


def test_fd_convergence_slope_two():
    hs = [1 / 50, 1 / 100, 1 / 200, 1 / 400]
    errs = []
    for h in hs:
        g = grid_for(BUMP, h=h)
        u = wl.solve_linear(g, wl.PolySource([BUMP]), store="final")
        ex = wl.closed_form_field([BUMP], g, g.nt)
        errs.append(math.sqrt(np.sum((u.final - ex) ** 2) * h))
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert abs(slope - 2) <= 0.2


def test_closed_form_fundamental_solution_limit():
    d = 1e-3
    tiny = wl.PolyBox(0.0, d, -d / 2, d / 2, (1 / d**2,))
    assert wl.closed_form_Q_1p1(tiny, 1.0, 0.5) == pytest.approx(0.5, abs=1e-12)
    assert wl.closed_form_Q_1p1(tiny, 1.0, 1.5) == 0.0


def test_closed_form_time_invariance():
    moved = BUMP.shifted(0.37)
    for x in (-0.3, 0.0, 0.45):
        assert wl.closed_form_Q_1p1(moved, 1.37, x) == pytest.approx(wl.closed_form_Q_1p1(BUMP, 1.0, x), abs=1e-14)


def test_closed_form_rejects_other_kinds():
    with pytest.raises(wl.WaveError):
        wl.closed_form_Q_1p1([object()], 1.0, 0.0)


def test_cfl_violation():
    with pytest.raises(wl.CFLError):
        wl.Grid(1, (-1.0,), (1.0,), 0.01, 1.0, cfl=0.9)


def test_support_escape():
    g = wl.Grid(1, (-0.3,), (0.3,), 0.01, 1.0)
    with pytest.raises(wl.SupportEscapeError):
        wl.solve_linear(g, wl.PolySource([BUMP]))


def test_support_containment():
    src = wl.PolySource([BUMP])
    u = wl.solve_linear(grid_for(BUMP), src)
    rep = wl.support_report(u, src)
    assert rep["numerical"] == 0.0
    assert rep["physical"] < 1e-6
    # nothing before the source switches on
    assert not np.any(u.values[u.times < BUMP.t0])


def test_q_symmetry():
    g = wl.Grid(1, (-1.5,), (1.5,), 1 / 100, 1.0)
    rng = np.random.default_rng(1)
    t, x = g.times[:, None], g.axes[0][None, :]
    env = wl.smooth_bump((t - 0.5) / 0.4) * wl.smooth_bump(x / 0.5)
    for _ in range(3):
        f = env * rng.normal(size=env.shape)
        h = env * rng.normal(size=env.shape)
        (u,) = wl.evolve(g, 1, lambda n, lv: [f[n]])
        lhs = np.sum(u.values * h)
        rhs = np.sum(f * wl.solve_linear_adjoint(g, h))
        assert abs(lhs - rhs) <= 1e-6 * abs(lhs)


def test_q_linearity():
    g = grid_for(BUMP)
    f = wl.PolySource([BUMP])
    h = wl.PolySource([wl.PolyBox(0.2, 0.3, -0.1, 0.15, (1.0, 2.0), (0.5, -1.0))])
    both = wl.solve_linear(g, wl.Sum([f.scaled(2.0), h.scaled(-3.0)]))
    u1, u2 = wl.solve_linear(g, f), wl.solve_linear(g, h)
    assert np.max(np.abs(both.values - (2 * u1.values - 3 * u2.values))) < 1e-13


def test_static_product_unit_h_is_minkowski():
    g0 = grid_for(BUMP)
    g1 = grid_for(BUMP, h_coeff=lambda y: np.ones_like(y))
    u0 = wl.solve_linear(g0, wl.PolySource([BUMP]))
    u1 = wl.solve_linear(g1, wl.PolySource([BUMP]))
    assert np.max(np.abs(u0.values - u1.values)) < 1e-14


def test_static_product_slows_waves():
    g = grid_for(BUMP, h_coeff=lambda y: 4.0 * np.ones_like(y))
    u = wl.solve_linear(g, wl.PolySource([BUMP]))
    x = g.axes[0]
    # speed 1/2: after t = 1 the front is within 0.2 + 0.45 of the origin
    assert np.max(np.abs(u.final[np.abs(x) > 0.7])) < 1e-6 * np.max(np.abs(u.final))


# ---------------------------------------------------------------- nonlinear

def test_nonlinear_with_zero_a_is_linear():
    g = grid_for(BUMP)
    src = wl.PolySource([BUMP])
    u = wl.solve_nonlinear(g, src, 0.0, 0.3)
    v = wl.solve_linear(g, src)
    assert np.max(np.abs(u.values - 0.3 * v.values)) < 1e-15


def test_nonlinear_first_order_error_is_quadratic():
    g = grid_for(BUMP)
    src = wl.PolySource([BUMP]).scaled(50.0)
    q = wl.solve_linear(g, src).values
    eps = [1e-3, 3e-3, 1e-2]
    errs = [np.linalg.norm(wl.solve_nonlinear(g, src, 1.0, e).values - e * q) for e in eps]
    assert np.polyfit(np.log(eps), np.log(errs), 1)[0] >= 1.9


def test_blow_up_reports_time():
    g = grid_for(BUMP, T=2.0)
    src = wl.PolySource([BUMP])
    with pytest.raises(wl.BlowUpError) as err:
        wl.solve_nonlinear(g, src, -1.0, 1e4)
    assert 0.1 < err.value.t <= 2.0


# ---------------------------------------------------------------- expansion

def test_expansion_vanishes_without_nonlinearity():
    ex = wl.expansion_terms(grid_for(BUMP), wl.PolySource([BUMP]), 0.0)
    for w in ex.w[1:]:
        assert not np.any(w.values)


def test_expansion_terms_vanish_before_source():
    ex = wl.expansion_terms(grid_for(BUMP), wl.PolySource([BUMP]), 1.0)
    for w in ex.w:
        assert not np.any(w.values[w.times < BUMP.t0])


def test_w2_matches_nested_closed_form():
    src = wl.PolyBox(0.1, 0.4, -0.2, 0.2, wl.bump_poly(0.1, 0.4, 10.0), wl.bump_poly(-0.2, 0.2))
    pts = [(1.0, 0.0), (1.0, 0.5), (0.6, 0.1)]
    ref = [wl.closed_form_w2_1p1([src], 1.0, t, x) for t, x in pts]
    hs = [1 / 50, 1 / 100, 1 / 200, 1 / 400]
    errs = []
    for h in hs:
        ex = wl.expansion_terms(grid_for(src, h=h), wl.PolySource([src]), 1.0)
        errs.append(max(abs(ex.w[1].sample(t, x) - r) for (t, x), r in zip(pts, ref)))
    assert abs(np.polyfit(np.log(hs), np.log(errs), 1)[0] - 2) <= 0.2


def test_m4_matches_corner_difference():
    srcs = [wl.PolySource([wl.PolyBox(0.1, 0.3, c - 0.1, c + 0.1, wl.bump_poly(0.1, 0.3, 400.0),
                                      wl.bump_poly(c - 0.1, c + 0.1))]) for c in (-0.9, -0.3, 0.3, 0.9)]
    g = wl.causal_box(1, (-1.0,), (1.0,), 0.0, 1.6, 1 / 100)
    M = wl.interaction_waves(g, srcs, 1.0)[frozenset(range(4))].final
    e2 = np.max(np.abs(wl.corner_difference(g, srcs, 1.0, 2e-2)[-1] - M))
    e1 = np.max(np.abs(wl.corner_difference(g, srcs, 1.0, 1e-2)[-1] - M))
    assert e1 < 1e-3 * np.max(np.abs(M))
    assert 3 < e2 / e1 < 5  # centered corners: O(eps^2)


# ---------------------------------------------------------------- remainder

REMAINDER_SRC = wl.PolySource([wl.PolyBox(0.1, 0.4, -0.2, 0.2, wl.bump_poly(0.1, 0.4, 400.0),
                                          wl.bump_poly(-0.2, 0.2))])
REMAINDER_GRID = wl.causal_box(1, (-0.2,), (0.2,), 0.0, 1.5, 1 / 100)
EPS = list(np.geomspace(1e-3, 1e-2, 5))


def test_remainder_slope_five():
    fit = wl.remainder_slope(REMAINDER_GRID, REMAINDER_SRC, 1.0, EPS)
    assert abs(fit.slope - 5) <= 0.3 and not fit.flagged


def test_first_order_truncation_slope_two():
    fit = wl.remainder_slope(REMAINDER_GRID, REMAINDER_SRC, 1.0, EPS, order=1)
    assert abs(fit.slope - 2) <= 0.2


def test_remainder_floor_flagged_without_nonlinearity():
    fit = wl.remainder_slope(REMAINDER_GRID, REMAINDER_SRC, 0.0, EPS)
    assert fit.flagged


def test_remainder_needs_a_decade():
    with pytest.raises(wl.WaveError):
        wl.remainder_slope(REMAINDER_GRID, REMAINDER_SRC, 1.0, [1e-3, 5e-3])


# ---------------------------------------------------------------- interaction

def test_crossing_point_1p1_and_2p1():
    q, miss = wl.crossing_point(counter_pulses())
    assert np.allclose(q, [0.6, 0.0]) and miss < 1e-12
    dirs = [[math.cos(a), math.sin(a)] for a in (math.pi / 2, 7 * math.pi / 6, 11 * math.pi / 6)]
    q, miss = wl.crossing_point([wl.PlanePulse(o, -0.5, 0.1) for o in dirs])
    assert np.allclose(q, [0.6, 0.0, 0.0]) and miss < 1e-12


def test_m2_matches_closed_form_with_slope_two():
    p = counter_pulses()
    pts = [(1.0, 0.0), (1.0, 0.2), (1.0, -0.35), (0.8, 0.1)]
    ref = [wl.closed_form_M2_1p1(*p, 1.0, t, x) for t, x in pts]
    hs = [1 / 100, 1 / 200, 1 / 400, 1 / 800]
    errs = []
    for h in hs:
        g = wl.causal_box(1, wl.Sum(p).lo, wl.Sum(p).hi, 0.0, 1.0, h)
        M = wl.interaction_waves(g, p, 1.0, store="all")[frozenset({0, 1})]
        errs.append(max(abs(M.sample(t, x) - r) for (t, x), r in zip(pts, ref)))
    assert abs(np.polyfit(np.log(hs), np.log(errs), 1)[0] - 2) <= 0.2


def test_m2_lives_on_future_of_overlap():
    p = counter_pulses()
    g = wl.causal_box(1, wl.Sum(p).lo, wl.Sum(p).hi, 0.0, 1.2, 1 / 400)
    M = wl.interaction_waves(g, p, 1.0)[frozenset({0, 1})].final
    x = g.axes[0]
    # overlap of the two slabs starts at (0.5, 0) and ends at (0.6, 0) +- 0.1 in x
    outside = np.abs(x) > 1.2 - 0.5 + 0.1 + 3 * g.h
    assert np.max(np.abs(M[outside])) < 1e-3 * np.max(np.abs(M))
    assert wl.closed_form_M2_1p1(*p, 1.0, 0.5, 0.0) == 0.0
    assert wl.closed_form_M2_1p1(*p, 1.0, 1.0, 0.0) < 0


def test_contrast_1p1_and_parallel_control():
    p = counter_pulses()
    g = wl.causal_box(1, wl.Sum(p).lo, wl.Sum(p).hi, 0.0, 1.2, 1 / 400)
    _, rep = wl.interaction_experiment(g, p, 1.0)
    assert rep.ratio >= 10 and rep.verdict == "singular cone detected"
    par = [wl.PlanePulse([1.0], -0.5, 0.1), wl.PlanePulse([1.0], 0.3, 0.1)]
    g = wl.causal_box(1, wl.Sum(par).lo, wl.Sum(par).hi, 0.0, 1.2, 1 / 400)
    _, rep = wl.interaction_experiment(g, par, 1.0, q_ref=[0.6, 0.0])
    assert rep.ratio <= 2 and rep.verdict == "no interaction point"


def test_non_crossing_pulses_raise():
    par = [wl.PlanePulse([1.0], -0.5, 0.1), wl.PlanePulse([1.0], 0.3, 0.1)]
    g = wl.causal_box(1, wl.Sum(par).lo, wl.Sum(par).hi, 0.0, 1.2, 1 / 100)
    with pytest.raises(wl.WaveError, match="miss"):
        wl.interaction_experiment(g, par, 1.0)


# ---------------------------------------------------------------- probe

@pytest.fixture(scope="module")
def m2_history():
    p = counter_pulses()
    g = wl.causal_box(1, wl.Sum(p).lo, wl.Sum(p).hi, 0.0, 1.3, 1 / 400)
    return wl.interaction_waves(g, p, 1.0, store="all")[frozenset({0, 1})]


TAUS = [25, 50, 100, 200]


def test_probe_on_cone_is_polynomial(m2_history):
    fit = wl.probe_indicator(m2_history, (1.0, 0.4), (-1.0, 1.0), TAUS)
    assert fit.verdict == "polynomial" and math.isfinite(fit.m_hat)


def test_probe_off_cone_is_smooth(m2_history):
    for y in ((1.0, 0.0), (0.9, 1.0)):
        fit = wl.probe_indicator(m2_history, y, (-1.0, 1.0), TAUS)
        assert fit.verdict == "smooth"


def test_probe_on_zero_field(m2_history):
    z = wl.WaveField(m2_history.grid, np.zeros_like(m2_history.values), m2_history.steps)
    fit = wl.probe_indicator(z, (1.0, 0.0), (1.0, 1.0), TAUS)
    assert fit.values == [0.0] * 4 and fit.verdict == "smooth"


def test_probe_needs_three_taus(m2_history):
    with pytest.raises(wl.WaveError):
        wl.probe_indicator(m2_history, (1.0, 0.0), (1.0, 1.0), [10, 20])


# ---------------------------------------------------------------- measurement

REGION = ((0.0, 1.0), (-0.6, 0.6))


def test_measurement_of_zero_source():
    g = grid_for(BUMP)
    assert not np.any(wl.measurement_L_U(g, wl.PolySource([BUMP]).scaled(0.0), 1.0, 0.1, REGION))


def test_measurement_linear_limit_and_trace():
    src = wl.PolySource([wl.PolyBox(0.1, 0.4, -0.2, 0.2, wl.bump_poly(0.1, 0.4, 50.0), wl.bump_poly(-0.2, 0.2))])
    g = grid_for(BUMP)
    q = wl.restrict(wl.solve_linear(g, src), REGION)
    errs = [np.max(np.abs(wl.measurement_L_U(g, src, 1.0, e, REGION) / e - q)) for e in (1e-2, 5e-3)]
    assert errs[1] == pytest.approx(errs[0] / 2, rel=0.05)
    tr = wl.linearized_trace(g, src, 1.0, REGION, eps=1e-3)
    assert np.max(np.abs(tr - q)) < 1e-6 * np.max(np.abs(q))


def test_measurement_requires_source_in_region():
    with pytest.raises(wl.WaveError):
        wl.measurement_L_U(grid_for(BUMP), wl.PolySource([BUMP]), 1.0, 0.1, ((0.0, 1.0), (-0.1, 0.1)))


# ---------------------------------------------------------------- output

def test_binary_dump_roundtrip(tmp_path):
    u = wl.solve_linear(grid_for(BUMP, h=1 / 20), wl.PolySource([BUMP]), store=4)
    path = tmp_path / "u.bin"
    u.save_binary(path)
    side = json.loads(path.with_suffix(".bin.json").read_text())
    back = np.fromfile(path, dtype="<f8").reshape(side["shape"])
    assert np.array_equal(back, u.values)
    u.save_csv(tmp_path / "u.csv", stride=5)
    head = (tmp_path / "u.csv").read_text().splitlines()
    assert head[0] == "t,x1,value" and len(head) > 1
