"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` or as a script.
"""
import itertools
import math
import time

import numpy as np
import pytest
import sympy as sp

from lightcone_lab import geometry as geo
from lightcone_lab import reconstruction as rc
from lightcone_lab import wavelab as wl
from lightcone_lab.interaction import frame as fr
from lightcone_lab.interaction import indicator as ind
from lightcone_lab.interaction import oracle
from lightcone_lab.interaction import parametrix as pm
from lightcone_lab.interaction import polarization as pol

R = sp.Rational


def c01_parametrix_identity():
    f = fr.build_frame([R(1, 10), R(1, 5), R(1, 7), R(1, 11)])
    pairs = list(itertools.product(range(1, 5), repeat=2))
    ok = all(pm.box_q0_identity(pm.PlaneWaveExpr(sp.Integer(1), {1: a1, 2: a2}), f) for a1, a2 in pairs)
    return ok, f"{len(pairs)} exponent pairs exact"


def c02_null_frame_gram():
    out = []
    for r in (R(1, 10), R(1, 100)):
        f = fr.build_frame([r, r / 2, r / 3, r / 5])
        chk = fr.check_frame(f)
        out.append(chk["null"] and chk["omega_j5"])
        out.append(all(f.omega[(j, 5)] == -f.rho[j] ** 2 / 2 for j in range(1, 5)))
    return all(out), "rho in {1/10, 1/100}"


def c03_einstein_dominance():
    a = 6
    res = ind.einstein_indicator_leading(fr.build_frame(mode="einstein"), a=a)
    (lead,) = res.dominant if len(res.dominant) == 1 else (None,)
    ok = res.matches_expected and res.certified and lead is not None and lead.exps == (6 + 4 * a, -4, -2, 0, 20)
    return ok, f"{len(res.terms)} terms, leading exponents {None if lead is None else lead.exps}"


def c04_einstein_nonvanishing():
    f = fr.build_frame([R(1, 10), R(1, 5), R(1, 7), R(1, 11)])
    V1 = pol.pol_space(f.b[1]).basis
    V5 = pol.dual_family(V1)
    good = ind.einstein_indicator_leading(v={1: V1[0], 5: V5[0]})
    bad = ind.einstein_indicator_leading(v={1: V1[0], 5: sp.zeros(4, 4)})
    k = ind.kappa()
    ok = good.nonvanishing and not bad.nonvanishing and k != 0
    return ok, f"D != 0 nonzero, D = 0 zero, 6x6 determinant {'nonzero' if k != 0 else 'zero'}"


def c05_scalar():
    res = ind.scalar_indicator_leading(fr.build_frame(mode="scalar"), alpha=1, n=-10, symbols=(1, 1, 1, 1))
    ok = res.matches_expected and res.nonvanishing and res.certified
    return ok, f"dominant {sorted(lab for m in res.dominant for lab in m.labels)}"


def c06_oscillatory_oracle():
    worst = 0.0
    for m in range(4):
        for p, tau in [(-1.0, 100.0), (-0.5, 400.0), (-0.05, 4000.0)]:
            r = oracle.kernel_1d(m, p, tau) / oracle.closed_form_1d(m, p, tau)
            worst = max(worst, abs(r - 1))
    f = fr.build_frame([0.3, 0.25, 0.28, 0.2])
    full = abs(oracle.numeric_T_integral(f, (2, 2, 2, 2), 1e3) / oracle.closed_form_T(f, (2, 2, 2, 2), 1e3) - 1)
    return worst < 0.02 and full < 0.05, f"1-D worst {worst:.2e}, 4-D {full:.2e}"


def c07_solver_order():
    box = wl.PolyBox(0.1, 0.4, -0.2, 0.2, wl.bump_poly(0.1, 0.4), wl.bump_poly(-0.2, 0.2))
    hs = [1 / 50, 1 / 100, 1 / 200, 1 / 400]
    errs = []
    for h in hs:
        g = wl.causal_box(1, (box.x0,), (box.x1,), 0.0, 1.0, h)
        u = wl.solve_linear(g, wl.PolySource([box]), store="final")
        errs.append(math.sqrt(np.sum((u.final - wl.closed_form_field([box], g, g.nt)) ** 2) * h))
    slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    return abs(slope - 2) <= 0.2, f"slope {slope:.3f}"


def c08_remainder_order():
    src = wl.PolySource([wl.PolyBox(0.1, 0.4, -0.2, 0.2, wl.bump_poly(0.1, 0.4, 400.0), wl.bump_poly(-0.2, 0.2))])
    g = wl.causal_box(1, (-0.2,), (0.2,), 0.0, 1.5, 1 / 100)
    fit = wl.remainder_slope(g, src, 1.0, list(np.geomspace(1e-3, 1e-2, 5)))
    return abs(fit.slope - 5) <= 0.3 and not fit.flagged, f"slope {fit.slope:.3f}"


def c09_interaction_detection():
    p1 = [wl.PlanePulse([1.0], -0.5, 0.1), wl.PlanePulse([-1.0], -0.5, 0.1)]
    g = wl.causal_box(1, wl.Sum(p1).lo, wl.Sum(p1).hi, 0.0, 1.2, 1 / 400)
    _, r1 = wl.interaction_experiment(g, p1, 1.0)
    par = [wl.PlanePulse([1.0], -0.5, 0.1), wl.PlanePulse([1.0], 0.3, 0.1)]
    g = wl.causal_box(1, wl.Sum(par).lo, wl.Sum(par).hi, 0.0, 1.2, 1 / 400)
    _, rc_ = wl.interaction_experiment(g, par, 1.0, q_ref=[0.6, 0.0])
    dirs = [[math.cos(a), math.sin(a)] for a in (math.pi / 2, 7 * math.pi / 6, 11 * math.pi / 6)]
    p2 = [wl.PlanePulse(o, -0.5, 0.1) for o in dirs]
    g = wl.causal_box(2, wl.Sum(p2).lo, wl.Sum(p2).hi, 0.0, 1.0, 1 / 150)
    _, r2 = wl.interaction_experiment(g, p2, 1.0)
    ok = r1.ratio >= 10 and r2.ratio >= 10 and rc_.ratio <= 2
    return ok, f"1+1 {r1.ratio:.3g}, 2+1 {r2.ratio:.3g}, control {rc_.ratio:.3g}"


def c10_geometry_closed_forms():
    m = geo.Minkowski(3)
    rng = np.random.default_rng(10)
    mu = geo.unit_observer(m, np.zeros(4))
    err = 0.0
    for _ in range(50):
        x = rng.uniform(-0.3, 0.3, 4)
        y = x + np.concatenate([[rng.uniform(0.2, 1.0)], rng.uniform(-0.3, 0.3, 3)])
        dt, dx = y[0] - x[0], np.linalg.norm(y[1:] - x[1:])
        err = max(err, abs(geo.time_sep(m, x, y) - (math.sqrt(dt * dt - dx * dx) if dt > dx else 0.0)))
        q = np.concatenate([[rng.uniform(-0.4, 0.4)], rng.uniform(-0.2, 0.2, 3)])
        err = max(err, abs(geo.obs_time(mu, q) - (q[0] + np.linalg.norm(q[1:]))))
    cut = max(abs(geo.cut_value(geo.StaticProduct(periods=[ell]), [0.0, 0.3], [1.0, 1.0]).value - ell / 2)
              for ell in (1.0, 2.5))
    r1 = abs(geo.null_length_bound(geo.Minkowski(1), [-1, 0], [1, 0]) - math.sqrt(2))
    return err <= 1e-9 and cut <= 1e-3 and r1 <= 1e-3, f"tau/f+ {err:.1e}, cut {cut:.1e}, R1 {r1:.1e}"


def c11_t_equals_s():
    metric = geo.StaticProduct(periods=[1.0, None, None])
    mu = geo.unit_observer(metric, np.zeros(4))
    U = geo.ObservationRegion(metric, mu.z, mu.eta, 0.1, [mu])
    rng = np.random.default_rng(11)
    worst, n = 0.0, 50
    for i in range(n):
        y, zeta, s1 = rc.entry_instance(3, rng)
        worst = max(worst, abs(rc.T_value(U, y, zeta, s1, 0.5, seed=i).value - rc.S_value(U, y, zeta, s1, 0.5)))
    return worst <= 1e-3, f"{n} instances, worst {worst:.1e}"


def c12_injectivity():
    out = []
    for metric in (geo.Minkowski(3), geo.StaticProduct(periods=[1.0, None, None])):
        U = geo.observer_family(metric, np.zeros(4), h_hat=0.2, n=16)
        qs = rc.diamond_grid(U, -0.5, 0.5, 100)
        rep = rc.injectivity_and_embed([geo.earliest_light_obs(q, U) for q in qs])
        out.append((rep["n"], rep["min_distance"]))
    ok = all(n == 100 and d > 0 for n, d in out)
    return ok, "min distances " + ", ".join(f"{d:.3g}" for _, d in out)


def c13_stepwise_soundness():
    worst, count = 0.0, 0
    for metric in (geo.Minkowski(3), geo.StaticProduct(periods=[1.0, None, None])):
        U = geo.observer_family(metric, np.zeros(4), h_hat=0.2, n=16)
        D = rc.stepwise_collect(U, -0.5, 0.5, 0.05, n_grid=60)
        for s, q in zip(D.samples, D.meta["targets"]):
            count += 1
            for a, b in zip(s.values(), geo.earliest_light_obs(np.array(q), U).values()):
                if (a is geo.NOT_OBSERVED) != (b is geo.NOT_OBSERVED):
                    worst = math.inf
                elif a is not geo.NOT_OBSERVED:
                    worst = max(worst, abs(a - b))
    return worst <= 1e-6 and count > 0, f"{count} samples, worst {worst:.1e}"


CRITERIA = [
    (1, "parametrix identity", c01_parametrix_identity, 1),
    (2, "null-frame Gram", c02_null_frame_gram, 1),
    (3, "Einstein dominance", c03_einstein_dominance, 10),
    (4, "Einstein non-vanishing", c04_einstein_nonvanishing, 10),
    (5, "scalar dominance and non-vanishing", c05_scalar, 5),
    (6, "oscillatory oracle", c06_oscillatory_oracle, 30),
    (7, "wave solver order", c07_solver_order, 120),
    (8, "remainder order", c08_remainder_order, 300),
    (9, "interaction detection", c09_interaction_detection, 600),
    (10, "geometry closed forms", c10_geometry_closed_forms, 60),
    (11, "T equals S on the cylinder", c11_t_equals_s, 300),
    (12, "injectivity", c12_injectivity, 120),
    (13, "stepwise soundness", c13_stepwise_soundness, 300),
]


def evaluate(fn, budget):
    t = time.perf_counter()
    ok, detail = fn()
    dt = time.perf_counter() - t
    return ok and dt <= budget, f"{detail}; {dt:.1f} s of {budget} s"


@pytest.mark.parametrize("num,name,fn,budget", CRITERIA, ids=[f"criterion_{c[0]:02d}" for c in CRITERIA])
def test_criterion(num, name, fn, budget, capsys):
    ok, detail = evaluate(fn, budget)
    with capsys.disabled():
        print(f"\ncriterion {num:2d} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


if __name__ == "__main__":
    for num, name, fn, budget in CRITERIA:
        ok, detail = evaluate(fn, budget)
        print(f"criterion {num:2d} {name}: {'PASS' if ok else 'FAIL'} ({detail})", flush=True)
