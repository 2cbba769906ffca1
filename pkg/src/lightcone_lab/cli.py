"""Scenario runner: ``lightcone-lab run|validate|plots``.

Scenarios are strict JSON with a version field. Unknown keys are rejected
before anything runs. Exit codes: 0 all checks pass, 1 a check failed,
2 bad input.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import NOT_OBSERVED as NOT

VERSION = 1
OUT_ENV = "LIGHTCONE_OUT"
TOP_KEYS = {"version", "kind", "metric", "observers", "params", "seed", "out"}
OBS_KEYS = {"z0": None, "h_hat": 0.2, "n": 16}

CYLINDER = {"family": "static_product", "periods": [1.0, None, None]}
MINKOWSKI = {"family": "minkowski", "d": 3}

# per kind: default metric (None when unused) and parameter defaults
KINDS = {
    "geometry-suite": (MINKOWSKI, {"n_points": 20, "s_minus": -0.5, "s_plus": 0.5}),
    "indicator-einstein": (None, {"a": 6, "hierarchy": True, "rho": None}),
    "indicator-scalar": (None, {"n": -10, "alpha": 1, "symbols": [1, 1, 1, 1], "hierarchy": True}),
    "wave-expansion": (None, {"h": 0.01, "a": 1.0, "eps": [1e-3, 1.778279410038923e-3, 3.1622776601683794e-3,
                                                          5.623413251903491e-3, 1e-2],
                              "amp": 400.0, "T": 1.5, "convergence_h": [0.02, 0.01, 0.005, 0.0025]}),
    "interaction": (None, {"dim": 1, "h": None, "a": 1.0, "T": None, "control": None, "probe": True}),
    "reconstruction": (CYLINDER, {"n_tq": 50, "n_grid": 100, "n_collect": 40, "s_minus": -0.5, "s_plus": 0.5,
                                  "kappa2": 0.05}),
}


class InputError(ValueError):
    pass


# ----------------------------------------------------------------- scenario

@dataclass
class Scenario:
    kind: str
    params: dict
    metric: dict | None = None
    observers: dict = field(default_factory=dict)
    seed: int = 0
    out: str | None = None
    version: int = VERSION

    def to_dict(self) -> dict:
        d = {"version": self.version, "kind": self.kind, "params": self.params, "seed": self.seed}
        if self.metric is not None:
            d["metric"] = self.metric
        if self.observers:
            d["observers"] = self.observers
        if self.out is not None:
            d["out"] = self.out
        return d


def _check_type(name, value, default):
    if default is None or value is None:
        return
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, (int, float)):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    else:
        ok = isinstance(value, type(default))
    if not ok:
        raise InputError(f"invalid value for key {name!r}: {value!r}")


def validate(raw: dict) -> Scenario:
    """Scenario from parsed JSON; every problem names the offending key."""
    if not isinstance(raw, dict):
        raise InputError("scenario must be a JSON object")
    for k in raw:
        if k not in TOP_KEYS:
            raise InputError(f"unknown key {k!r}")
    if raw.get("version") != VERSION:
        raise InputError(f"invalid value for key 'version': expected {VERSION}")
    kind = raw.get("kind")
    if kind not in KINDS:
        raise InputError(f"invalid value for key 'kind': {kind!r}")
    metric_default, defaults = KINDS[kind]
    params = dict(raw.get("params", {}))
    for k, v in params.items():
        if k not in defaults:
            raise InputError(f"unknown key 'params.{k}'")
        _check_type(f"params.{k}", v, defaults[k])
    full = {**copy.deepcopy(defaults), **params}
    metric = raw.get("metric", metric_default)
    if metric is not None:
        from .geometry import GeometryError, metric_from_dict

        if metric_default is None:
            raise InputError(f"unknown key 'metric' for kind {kind!r}")
        try:
            metric_from_dict(metric)
        except (GeometryError, TypeError, KeyError, ValueError) as e:
            raise InputError(f"invalid value for key 'metric': {e}") from None
    obs = dict(raw.get("observers", {}))
    for k in obs:
        if k not in OBS_KEYS:
            raise InputError(f"unknown key 'observers.{k}'")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        raise InputError("invalid value for key 'seed'")
    out = raw.get("out")
    if out is not None and not isinstance(out, str):
        raise InputError("invalid value for key 'out'")
    if kind == "interaction" and full["dim"] not in (1, 2):
        raise InputError("invalid value for key 'params.dim': 1 or 2")
    if kind == "reconstruction" and not full["s_minus"] < full["s_plus"]:
        raise InputError("invalid value for key 'params.s_minus': must be below s_plus")
    return Scenario(kind, full, metric, obs, seed, out)


def load(path) -> Scenario:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"parse error at line {e.lineno}, column {e.colno}: {e.msg}") from None
    return validate(raw)


# ------------------------------------------------------------------ helpers

def task_rng(seed: int, task: int) -> np.random.Generator:
    """Counter-based stream per task."""
    return np.random.Generator(np.random.Philox(key=seed).jumped(task))


def _pmap(fn, items, jobs: int) -> list:
    if jobs <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def _check(name, value, tol, passed) -> dict:
    return {"name": name, "value": _num(value), "tolerance": tol, "pass": bool(passed)}


def _num(x):
    if isinstance(x, (bool, str)) or x is None:
        return x
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def _observers(sc: Scenario, metric):
    from . import geometry as geo

    o = {**OBS_KEYS, **sc.observers}
    z0 = np.zeros(metric.d + 1) if o["z0"] is None else np.asarray(o["z0"], float)
    return geo.observer_family(metric, z0, h_hat=o["h_hat"], n=o["n"], seed=sc.seed)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _obs_series(U, sample) -> dict:
    """Diagram data for one observation set (None for an empty one)."""
    entries = [] if sample is None else [[i, None if v is NOT else float(v)] for i, v in sample.entries]
    return {"plot": "observation_diagram",
            "observers": [[mu.z.tolist(), mu.eta.tolist()] for mu in U.observers],
            "entries": entries,
            "q": None if sample is None else [float(v) for v in sample.q]}


# --------------------------------------------------------------- experiments

def run_geometry(sc: Scenario, out: Path, jobs: int) -> tuple:
    from . import geometry as geo

    metric = geo.metric_from_dict(sc.metric)
    p = sc.params
    rng = task_rng(sc.seed, 0)
    checks, series = [], {}
    n = metric.d + 1
    flat = geo.is_flat(metric)
    mu = geo.unit_observer(metric, np.zeros(n))

    def spatial(dx):
        return metric.wrap_delta(dx) if isinstance(metric, geo.StaticProduct) else dx

    pts = []
    for _ in range(p["n_points"]):
        x = rng.uniform(-0.3, 0.3, n)
        y = x + np.concatenate([[rng.uniform(0.2, 1.0)], rng.uniform(-0.3, 0.3, n - 1)])
        pts.append((x, y))
    if flat and metric.d >= 1:
        err = 0.0
        for x, y in pts:
            dt, dx = y[0] - x[0], np.linalg.norm(spatial(y[1:] - x[1:]))
            exact = math.sqrt(dt * dt - dx * dx) if dt > dx else 0.0
            err = max(err, abs(geo.time_sep(metric, x, y) - exact))
        checks.append(_check("time separation closed form", err, 1e-9, err <= 1e-9))
        err = 0.0
        for _ in range(p["n_points"]):
            q = np.concatenate([[rng.uniform(-0.4, 0.4)], rng.uniform(-0.2, 0.2, n - 1)])
            exact = q[0] + np.linalg.norm(spatial(q[1:]))
            err = max(err, abs(geo.obs_time(mu, q) - exact))
        checks.append(_check("observation time closed form", err, 1e-9, err <= 1e-9))
    else:
        err = 0.0
        for x, y in pts[:4]:
            a = geo.time_sep(metric, x, y)
            b, _, _ = geo.time_sep_broken(metric, x, y)
            err = max(err, abs(a - b))
        checks.append(_check("time separation vs broken paths", err, 1e-5, err <= 1e-5))
    viol = 0
    for x, y in pts:
        z = y + (y - x)
        if geo.time_sep(metric, x, z) < geo.time_sep(metric, x, y) + geo.time_sep(metric, y, z) - 1e-12:
            viol += 1
    checks.append(_check("reverse triangle inequality violations", viol, 0, viol == 0))
    if isinstance(metric, geo.StaticProduct) and metric.flat and any(metric.periods):
        ell = min(pp for pp in metric.periods if pp)
        axis = [pp for pp in metric.periods].index(ell)
        xi = np.zeros(n)
        xi[0] = 1.0
        xi[1 + axis] = 1.0
        cut = geo.cut_value(metric, np.zeros(n), xi).value
        checks.append(_check("circle cut value", abs(cut - ell / 2), 1e-3, abs(cut - ell / 2) <= 1e-3))
    if metric.d == 1 and isinstance(metric, geo.Minkowski):
        r1 = geo.null_length_bound(metric, [-1.0, 0.0], [1.0, 0.0])
        checks.append(_check("null length bound on the unit diamond", abs(r1 - math.sqrt(2)), 1e-3,
                             abs(r1 - math.sqrt(2)) <= 1e-3))
    U = _observers(sc, metric)
    q = np.zeros(n)
    q[0] = p["s_minus"] / 2
    sample = geo.earliest_light_obs(q, U)
    _write_csv(out / "observations.csv", [f"q{i}" for i in range(n)] + ["observer", "s"], sample.rows())
    series["observation_set"] = {**_obs_series(U, sample), "title": "earliest light observations"}
    return checks, series, ["observations.csv"]


def _indicator_rows(res, mode: str, limit: int = 12) -> list:
    """Strongest terms first."""
    from .interaction import terms as tm

    dom = {id(m) for m in res.dominant}
    ranked = sorted(res.terms, key=lambda m: tm.priority_key(m.exps, mode))
    rows = []
    for m in ranked[:limit]:
        rows.append({"label": ",".join(sorted(m.labels)), "exps": list(m.exps), "class": m.coeff_class,
                     "dominant": id(m) in dom})
    return rows


def run_einstein(sc: Scenario, out: Path, jobs: int) -> tuple:
    import sympy as sp

    from .interaction import frame as fr
    from .interaction import indicator as ind
    from .interaction import polarization as pol

    p = sc.params
    frame = fr.build_frame(mode="einstein") if p["hierarchy"] or p["rho"] is None else fr.build_frame(p["rho"])
    res = ind.einstein_indicator_leading(frame, a=p["a"])
    checks = [_check("dominant term is the beta1 pair", "yes" if res.matches_expected else "no", "exact",
                     res.matches_expected),
              _check("dominance certified", str(res.certified), "exact", res.certified)]
    f = fr.build_frame([sp.Rational(1, 10), sp.Rational(1, 5), sp.Rational(1, 7), sp.Rational(1, 11)])
    V1 = pol.pol_space(f.b[1]).basis
    V5 = pol.dual_family(V1)
    good = ind.einstein_indicator_leading(v={1: V1[0], 5: V5[0]}, a=p["a"])
    bad = ind.einstein_indicator_leading(v={1: V1[0], 5: sp.zeros(4, 4)}, a=p["a"])
    checks.append(_check("leading coefficient nonzero iff D nonzero", "yes" if good.nonvanishing and not
                         bad.nonvanishing else "no", "exact", good.nonvanishing and not bad.nonvanishing))
    if p["hierarchy"]:
        k = ind.kappa(a=p["a"])
        checks.append(_check("6x6 determinant over L(b1) nonzero", "nonzero" if k != 0 else "zero", "exact", k != 0))
    report = res.to_json()
    (out / "indicator.json").write_text(json.dumps(report, indent=2, sort_keys=True, default=str))
    series = {"dominance": {"plot": "dominance_table", "rows": _indicator_rows(res, "einstein"),
                            "title": "Einstein indicator: strongest terms"}}
    return checks, series, ["indicator.json"]


def run_scalar(sc: Scenario, out: Path, jobs: int) -> tuple:
    from .interaction import frame as fr
    from .interaction import indicator as ind

    p = sc.params
    res = ind.scalar_indicator_leading(fr.build_frame(mode="scalar"), alpha=p["alpha"], n=p["n"],
                                       symbols=tuple(p["symbols"]))
    checks = [_check("dominant permutations are id and (2,1,3,4)", "yes" if res.matches_expected else "no",
                     "exact", res.matches_expected),
              _check("leading coefficient nonzero", str(res.nonvanishing), "exact",
                     res.nonvanishing or any(s == 0 for s in p["symbols"]) or p["alpha"] == 0)]
    tilde = ind.scalar_tilde_ratios(n=p["n"])
    checks.append(_check("paired-shape terms all weaker", "yes" if all(tilde.values()) else "no", "exact",
                         all(tilde.values())))
    (out / "indicator.json").write_text(json.dumps(res.to_json(), indent=2, sort_keys=True, default=str))
    series = {"dominance": {"plot": "dominance_table", "rows": _indicator_rows(res, "scalar"),
                            "title": "scalar indicator: strongest terms"}}
    return checks, series, ["indicator.json"]


def run_wave_expansion(sc: Scenario, out: Path, jobs: int) -> tuple:
    from . import wavelab as wl

    p = sc.params
    src = wl.PolySource([wl.PolyBox(0.1, 0.4, -0.2, 0.2, wl.bump_poly(0.1, 0.4, p["amp"]), wl.bump_poly(-0.2, 0.2))])
    grid = wl.causal_box(1, (-0.2,), (0.2,), 0.0, p["T"], p["h"])
    fit = wl.remainder_slope(grid, src, p["a"], p["eps"])
    trunc = wl.remainder_slope(grid, src, p["a"], p["eps"], order=1)
    checks = [_check("remainder slope", fit.slope, "5 +- 0.3", abs(fit.slope - 5) <= 0.3 and not fit.flagged),
              _check("first-order truncation slope", trunc.slope, "2 +- 0.2", abs(trunc.slope - 2) <= 0.2)]
    box = wl.PolyBox(0.1, 0.4, -0.2, 0.2, wl.bump_poly(0.1, 0.4), wl.bump_poly(-0.2, 0.2))
    hs, errs = p["convergence_h"], []
    for h in hs:
        g = wl.causal_box(1, (box.x0,), (box.x1,), 0.0, 1.0, h)
        u = wl.solve_linear(g, wl.PolySource([box]), store="final")
        errs.append(math.sqrt(np.sum((u.final - wl.closed_form_field([box], g, g.nt)) ** 2) * h))
    slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    checks.append(_check("solver order against the exact solution", slope, "2 +- 0.2", abs(slope - 2) <= 0.2))
    exp = wl.expansion_terms(grid, src.scaled(p["eps"][-1]), p["a"])
    names = ["w1", "p2", "p3", "q4a", "q4b"]
    x = grid.axes[0]
    _write_csv(out / "expansion_final.csv", ["x"] + names,
               [[float(xv)] + [float(w.final[i]) for w in exp.w] for i, xv in enumerate(x)])
    _write_csv(out / "remainder.csv", ["eps", "norm"], list(zip(fit.eps, fit.norms)))
    series = {"remainder": {"plot": "loglog", "x": fit.eps, "y": fit.norms, "slope": fit.slope,
                            "title": "remainder after the fourth-order expansion"},
              "convergence": {"plot": "loglog", "x": hs, "y": errs, "slope": slope,
                              "title": "solver convergence"}}
    return checks, series, ["expansion_final.csv", "remainder.csv"]


def _pulses(dim: int):
    from . import wavelab as wl

    if dim == 1:
        return [wl.PlanePulse([1.0], -0.5, 0.1), wl.PlanePulse([-1.0], -0.5, 0.1)]
    dirs = [[math.cos(a), math.sin(a)] for a in (math.pi / 2, 7 * math.pi / 6, 11 * math.pi / 6)]
    return [wl.PlanePulse(o, -0.5, 0.1) for o in dirs]


def _strip(grid, M, q, t_obs, rep) -> dict:
    from . import wavelab as wl

    score = wl.cone_score(grid, M)
    x = grid.axes[0]
    if grid.d == 2:
        j = int(np.argmin(np.abs(grid.axes[1] - q[2])))
        score = score[:, j]
    R = t_obs - q[0]
    return {"plot": "heat_strip", "x": x.tolist(), "score": score.tolist(), "cone": [q[1] - R, q[1] + R],
            "ratio": rep.ratio}


def run_interaction(sc: Scenario, out: Path, jobs: int) -> tuple:
    from . import wavelab as wl

    p = sc.params
    dim = p["dim"]
    h = p["h"] or (1 / 400 if dim == 1 else 1 / 150)
    T = p["T"] or (1.2 if dim == 1 else 1.0)
    control = p["control"] if p["control"] is not None else dim == 1
    pulses = _pulses(dim)
    grid = wl.causal_box(dim, wl.Sum(pulses).lo, wl.Sum(pulses).hi, 0.0, T, h)
    W, rep = wl.interaction_experiment(grid, pulses, p["a"])
    M = W[frozenset(range(len(pulses)))]
    checks = [_check(f"contrast {dim}+1", rep.ratio, ">= 10", rep.ratio >= 10)]
    series = {"contrast": {**_strip(grid, M.final, rep.q, T, rep), "title": f"cone contrast {dim}+1"}}
    files = []
    if dim == 1:
        _write_csv(out / "interaction_final.csv", ["x", "M"], list(zip(grid.axes[0].tolist(), M.final.tolist())))
        files.append("interaction_final.csv")
    else:
        M.save_binary(out / "interaction_final.npy")
        files += ["interaction_final.npy", "interaction_final.npy.json"]
    if control:
        par = ([wl.PlanePulse([1.0], -0.5, 0.1), wl.PlanePulse([1.0], 0.3, 0.1)] if dim == 1 else
               [pulses[0], wl.PlanePulse(pulses[0].omega, 0.3, 0.1), pulses[1]])
        g2 = wl.causal_box(dim, wl.Sum(par).lo, wl.Sum(par).hi, 0.0, T, h)
        _, crep = wl.interaction_experiment(g2, par, p["a"], q_ref=rep.q)
        checks.append(_check("parallel control", crep.ratio, "<= 2", crep.ratio <= 2))
    if p["probe"] and dim == 1:
        g = wl.causal_box(1, wl.Sum(pulses).lo, wl.Sum(pulses).hi, 0.0, T, h)
        hist = wl.interaction_waves(g, pulses, p["a"], store="all")[frozenset({0, 1})]
        taus = [25, 50, 100, 200]
        on = wl.probe_indicator(hist, (1.0, 0.4), (1.0, -1.0), taus)
        off = wl.probe_indicator(hist, (1.0, 0.0), (1.0, 1.0), taus)
        checks.append(_check("probe on the cone decays polynomially", on.verdict, "polynomial",
                             on.verdict != "smooth"))
        checks.append(_check("probe off the cone decays fast", off.verdict, "smooth", off.verdict == "smooth"))
        series["probe_on"] = {"plot": "decay", **on.to_dict(), "values": on.values, "title": "probe on cone"}
        series["probe_off"] = {"plot": "decay", **off.to_dict(), "values": off.values, "title": "probe off cone"}
    (out / "contrast.json").write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True, default=float))
    return checks, series, files + ["contrast.json"]


def _tq_task(args):
    from . import geometry as geo
    from . import reconstruction as rc

    metric_d, seed, i, s_plus = args
    metric = geo.metric_from_dict(metric_d)
    mu = geo.unit_observer(metric, np.zeros(metric.d + 1))
    U = geo.ObservationRegion(metric, mu.z, mu.eta, 0.1, [mu])
    rng = task_rng(seed, 1000 + i)
    y, zeta, s1 = rc.entry_instance(metric.d, rng)
    S = rc.S_value(U, y, zeta, s1, s_plus)
    T = rc.T_value(U, y, zeta, s1, s_plus, seed=int(rng.integers(2**31)))
    return [i, *y.tolist(), *zeta.tolist(), s1, S, T.value, T.stable]


def run_reconstruction(sc: Scenario, out: Path, jobs: int) -> tuple:
    from . import geometry as geo
    from . import reconstruction as rc

    metric = geo.metric_from_dict(sc.metric)
    if not geo.is_flat(metric):
        raise InputError("invalid value for key 'metric': reconstruction needs a flat metric")
    p = sc.params
    checks = []
    rows = _pmap(_tq_task, [(sc.metric, sc.seed, i, p["s_plus"]) for i in range(p["n_tq"])], jobs)
    n = metric.d + 1
    _write_csv(out / "t_vs_s.csv", ["i"] + [f"y{k}" for k in range(n)] + [f"zeta{k}" for k in range(n)]
               + ["s1", "S", "T", "stable"], rows)
    worst = max(abs(r[-3] - r[-2]) for r in rows)
    checks.append(_check("T equals S", worst, 1e-3, worst <= 1e-3))
    U = _observers(sc, metric)
    qs = rc.diamond_grid(U, p["s_minus"], p["s_plus"], p["n_grid"], seed=sc.seed)
    samples = [geo.earliest_light_obs(q, U) for q in qs]
    inj = rc.injectivity_and_embed(samples, metric)
    checks.append(_check("injectivity min sup-distance", inj["min_distance"], "> 0", inj["injective"]))
    checks.append(_check("embedding trend statistic", inj["trend"], "> 0", (inj["trend"] or 0) > 0))
    D = rc.stepwise_collect(U, p["s_minus"], p["s_plus"], p["kappa2"], n_grid=p["n_collect"], seed=sc.seed)
    worst = 0.0
    for s, q in zip(D.samples, D.meta["targets"]):
        for a, b in zip(s.values(), geo.earliest_light_obs(np.array(q), U).values()):
            if (a is geo.NOT_OBSERVED) != (b is geo.NOT_OBSERVED):
                worst = math.inf
            elif a is not geo.NOT_OBSERVED:
                worst = max(worst, abs(a - b))
    checks.append(_check("stepwise samples match direct observation sets", worst, 1e-6, worst <= 1e-6))
    checks.append(_check("stepwise coverage gaps", len(D.gaps), 0, not D.gaps))
    D.write(out, "dataset")
    series = {"observation_set": {**_obs_series(U, D.samples[0] if D.samples else None),
                                  "title": "collected observation set"}}
    return checks, series, ["t_vs_s.csv", "dataset.csv", "dataset.json"]


RUNNERS = {"geometry-suite": run_geometry, "indicator-einstein": run_einstein, "indicator-scalar": run_scalar,
           "wave-expansion": run_wave_expansion, "interaction": run_interaction,
           "reconstruction": run_reconstruction}


# ------------------------------------------------------------------- driver

def run(sc: Scenario, out: Path, jobs: int = 1, plots: bool = True) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    checks, series, files = RUNNERS[sc.kind](sc, out, jobs)
    report = {"scenario": sc.to_dict(), "seed": sc.seed, "checks": checks, "series": series,
              "all_pass": all(c["pass"] for c in checks), "artifacts": sorted(files)}
    if plots:
        from . import plots as pl

        report["artifacts"] = sorted(files + [p.name for p in pl.emit(report, out)])
    report["wall_clock"] = round(time.perf_counter() - t0, 3)
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True, default=_num))
    return report


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="lightcone-lab")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run")
    r.add_argument("scenario")
    r.add_argument("--seed", type=int)
    r.add_argument("--out")
    r.add_argument("--jobs", type=int, default=1)
    v = sub.add_parser("validate")
    v.add_argument("scenario")
    pl = sub.add_parser("plots")
    pl.add_argument("report")
    pl.add_argument("--out")
    args = ap.parse_args(argv)
    try:
        if args.cmd == "plots":
            from . import plots

            path = Path(args.report)
            try:
                report = json.loads(path.read_text())
            except (OSError, json.JSONDecodeError) as e:
                raise InputError(f"cannot read report: {e}") from None
            made = plots.emit(report, Path(args.out) if args.out else path.parent)
            for m in made:
                print(m)
            return 0
        sc = load(args.scenario)
        if args.cmd == "validate":
            print(f"ok: {sc.kind}")
            return 0
        if args.seed is not None:
            sc.seed = args.seed
        out = Path(args.out or sc.out or os.environ.get(OUT_ENV) or "lightcone-out")
        report = run(sc, out, max(1, args.jobs))
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    for c in report["checks"]:
        print(f"{'PASS' if c['pass'] else 'FAIL'}  {c['name']}: {c['value']} (tolerance {c['tolerance']})")
    failed = [c["name"] for c in report["checks"] if not c["pass"]]
    if failed:
        print("failed checks: " + ", ".join(failed), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
