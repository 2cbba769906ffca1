"""Data-side reconstruction of earliest light observation sets.

Everything here works on flat metrics (Minkowski and flat static products),
where null geodesics are straight lines in the covering space and cut values
have closed forms. Detection sets are synthesized from geometry: the set
detected from an intersecting tuple is the earliest light observation set of
its intersection point.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats
from scipy.optimize import minimize_scalar

from . import geometry as geo
from .geometry import NOT_OBSERVED, PreconditionError

GEOMETRY = "geometry-synthesized"
WAVE = "wave-lab-measured"


def _require_flat(metric):
    if not geo.is_flat(metric):
        raise geo.GeometryError("reconstruction works on flat metrics")


def _null(xi) -> np.ndarray:
    """Rescale a future null vector to time component 1."""
    xi = np.asarray(xi, float)
    if xi[0] <= 0:
        raise PreconditionError("null vector must be future pointing")
    return xi / xi[0]


def _periods(metric) -> tuple:
    if isinstance(metric, geo.StaticProduct):
        return tuple(metric.periods)
    return (None,) * metric.d


def _shifts(metric, max_wind: int) -> list:
    per = _periods(metric)
    if all(p is None for p in per):
        return [np.zeros(metric.d + 1)]
    ranges = [range(-max_wind, max_wind + 1) if p is not None else [0] for p in per]
    grid = np.array(np.meshgrid(*ranges, indexing="ij")).reshape(len(per), -1).T
    return [np.concatenate([[0.0], [k * (p or 0.0) for k, p in zip(ks, per)]]) for ks in grid]


def gplus_distance(metric, a, b) -> float:
    """Euclidean coordinate distance with periodic directions wrapped."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    d = b - a
    if isinstance(metric, geo.StaticProduct):
        n = metric.d
        d[1:n + 1] = metric.wrap_delta(d[1:n + 1])
    return float(np.linalg.norm(d))


def pair_distance(metric, x, xi, y, zeta) -> float:
    return math.hypot(gplus_distance(metric, x, y), float(np.linalg.norm(np.asarray(xi) - np.asarray(zeta))))


def axis_distance(metric, mu, x) -> float:
    """Distance from x to the observer's worldline over s in [-1, 1]."""
    f = lambda s: gplus_distance(metric, mu.at(s), x)  # noqa: E731
    ss = np.linspace(-1, 1, 81)
    k = int(np.argmin([f(s) for s in ss]))
    lo, hi = ss[max(k - 1, 0)], ss[min(k + 1, len(ss) - 1)]
    return float(min(f(ss[k]), minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12}).fun))


# ------------------------------------------------------------------ tuples

@dataclass
class SourceTuple:
    xs: np.ndarray  # (k, n) base points
    xis: np.ndarray  # (k, n) future null vectors, time component 1
    t0: float

    def __post_init__(self):
        self.xs = np.atleast_2d(np.asarray(self.xs, float))
        self.xis = np.array([_null(v) for v in np.atleast_2d(self.xis)])
        if self.t0 <= 0:
            raise PreconditionError("t0 must be positive")

    def flow_points(self) -> tuple:
        return self.xs + self.t0 * self.xis, self.xis

    def to_dict(self) -> dict:
        return {"xs": self.xs.tolist(), "xis": self.xis.tolist(), "t0": self.t0}


def recipe_tuple(metric, q, etas, back, t0: float) -> SourceTuple:
    """Tuple whose geodesics meet at q: x_j = gamma_{q, eta_j}(-(back_j + t0))."""
    q = np.asarray(q, float)
    etas = np.array([_null(e) for e in etas])
    for e in etas:
        if geo.classify(metric, q, e)[0] != "null":
            raise PreconditionError("recipe directions must be null")
    xs = np.array([q - (b + t0) * e for b, e in zip(back, etas)])
    return SourceTuple(xs, etas, t0)


def nearby_directions(zeta, k: int, theta: float, rng) -> list:
    """k null directions within theta of zeta (spatial unit vectors perturbed)."""
    zeta = _null(zeta)
    u = zeta[1:]
    d = len(u)
    out = []
    for _ in range(k):
        if d == 1:
            out.append(zeta.copy())
            continue
        p = rng.normal(size=d)
        p -= (p @ u) * u
        p *= rng.uniform(0.2, 1.0) * theta / 2 / max(np.linalg.norm(p), 1e-300)
        v = u + p
        out.append(np.concatenate([[1.0], v / np.linalg.norm(v)]))
    return out


def admissible_tuple(metric, tup: SourceTuple, theta1: float, mu_hat) -> tuple:
    """Check the three admissibility conditions; returns (ok, violations)."""
    viol = []
    P, V = tup.flow_points()
    k = len(P)
    for j in range(k):
        for s in np.linspace(0, tup.t0, 9):
            if not metric.in_box(tup.xs[j] + s * tup.xis[j]):
                viol.append(f"(i) geodesic {j + 1} leaves the region before t0")
                break
    for j in range(k):
        for m in range(j + 1, k):
            if geo.causal_leq(metric, P[j], P[m]) or geo.causal_leq(metric, P[m], P[j]):
                viol.append(f"(i) flow points {j + 1} and {m + 1} are causally related")
    worst = 0.0
    for j in range(k):
        for m in range(j + 1, k):
            worst = max(worst, pair_distance(metric, P[j], V[j], P[m], V[m]))
    if worst >= theta1:
        viol.append(f"(ii) pairwise distance {worst:.3g} >= {theta1:.3g}")
    far = max(axis_distance(metric, mu_hat, p) for p in P)
    if far >= theta1:
        viol.append(f"(iii) no observer point within {theta1:.3g} (distance {far:.3g})")
    return not viol, viol


# ------------------------------------------------------------ intersection

@dataclass
class Intersection:
    q: np.ndarray | None
    params: list
    miss: float
    flag: str = ""


def _closest(P1, V1, P2, V2):
    """Parameters and distance of closest approach of two lines."""
    A = np.stack([V1, -V2], axis=1)
    sol, *_ = np.linalg.lstsq(A, P2 - P1, rcond=None)
    r1, r2 = sol
    return float(r1), float(r2), float(np.linalg.norm(P1 + r1 * V1 - P2 - r2 * V2))


def cut_params(metric, tup: SourceTuple) -> list:
    P, V = tup.flow_points()
    return [geo.cut_value(metric, p, v).value for p, v in zip(P, V)]


def intersection_point(metric, tup: SourceTuple, tol: float = 1e-6, max_wind: int = 2) -> Intersection:
    """Common point of all geodesics from the flow points, before their cut points.

    Pairwise closest approach of geodesic 1 with every image of geodesic j,
    then a consistency check on the parameter along geodesic 1. Near misses
    within 10 tol are flagged ambiguous.
    """
    _require_flat(metric)
    P, V = tup.flow_points()
    rho = cut_params(metric, tup)
    shifts = _shifts(metric, max_wind)
    loose = 10 * tol
    per_j = []
    for j in range(1, len(P)):
        cands = []
        for sh in shifts:
            if np.linalg.norm(V[0] - V[j]) < 1e-14:
                # parallel null lines meet only if they coincide
                d = P[j] + sh - P[0]
                if np.linalg.norm(d - d[0] * V[0]) <= tol:
                    return Intersection(None, [], 0.0, "degenerate: coincident geodesics")
                continue
            r1, rj, miss = _closest(P[0], V[0], P[j] + sh, V[j])
            if 0 < r1 < rho[0] and 0 < rj < rho[j] and miss <= loose:
                cands.append((r1, rj, miss))
        per_j.append(cands)
    common = []
    for r1, rj, miss in (per_j[0] if per_j else []):
        params, worst = [rj], miss
        for cands in per_j[1:]:
            m = [c for c in cands if abs(c[0] - r1) <= loose]
            if not m:
                break
            c = min(m, key=lambda c: c[2])
            params.append(c[1])
            worst = max(worst, c[2])
        else:
            common.append((worst > tol, r1, params, worst))
    if not common:
        return Intersection(None, [], math.inf, "no common point before the cut points")
    fuzzy, r1, params, worst = min(common)
    if fuzzy:
        return Intersection(None, [], worst, "ambiguous")
    return Intersection(metric.canon(P[0] + r1 * V[0]), [r1] + params, worst)


@dataclass
class RegionV:
    metric: object
    cut_points: list

    @classmethod
    def of(cls, metric, tup: SourceTuple) -> "RegionV":
        P, V = tup.flow_points()
        pts = [None if math.isinf(r) else p + r * v for p, v, r in zip(P, V, cut_params(metric, tup))]
        return cls(metric, pts)

    def contains(self, y) -> bool:
        return not any(c is not None and geo.causal_leq(self.metric, c, y) for c in self.cut_points)


@dataclass
class DetectionRecord:
    tuple: SourceTuple
    q: np.ndarray | None
    sample: geo.ObsSetSample | None
    provenance: str
    flags: list = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return self.sample is None


def synth_Se(metric, tup: SourceTuple, U: geo.ObservationRegion, tol: float = 1e-6) -> DetectionRecord:
    """Detection set of a tuple: E_U(q) when the geodesics meet at q in V, else empty."""
    hit = intersection_point(metric, tup, tol)
    flags = [hit.flag] if hit.flag else []
    if hit.q is None or not RegionV.of(metric, tup).contains(hit.q):
        return DetectionRecord(tup, hit.q, None, GEOMETRY, flags)
    return DetectionRecord(tup, hit.q, geo.earliest_light_obs(hit.q, U), GEOMETRY, flags)


def in_detection_set(metric, q, y) -> bool:
    """y lies on the future light cone of q (boundary of J^+(q))."""
    return geo.causal_leq(metric, q, y, 1e-9) and not geo.chrono(metric, q, y, 1e-9)


def _onset(times, series, lo: float, hi: float, power: float = 2.0) -> float | None:
    """Onset of a rise |M| ~ C (t - t_a)^power, extrapolated from early samples.

    series**(1/power) is close to linear after the front; a line fitted on
    the samples between ``lo`` and ``hi`` times the peak is followed back to
    zero. Samples below ``lo`` carry the dispersive grid-scale precursor and
    a plain threshold would lag by a fixed time rather than a fixed number
    of cells.
    """
    peak = series.max()
    if peak <= 0:
        return None
    kp = int(np.argmax(series))
    above = np.nonzero(series[:kp + 1] > lo * peak)[0]
    if len(above) == 0:
        return None
    k0 = above[0]
    k1 = k0 + int(np.argmax(series[k0:kp + 1] > hi * peak))
    if k1 - k0 < 2:
        return float(times[k0])
    t = times[k0:k1 + 1]
    root = (series[k0:k1 + 1] / peak) ** (1 / power)
    slope, icpt = np.polyfit(t - t[0], root, 1)
    return float(t[0] - icpt / slope) if slope > 0 else float(times[k0])


def wave_arrivals(grid, pulses, U: geo.ObservationRegion, a: float = 1.0, lo: float = 0.02,
                  hi: float = 0.2) -> list:
    """Earliest singularity arrival per observer from the simulated interaction wave.

    1+1 Minkowski with static observers. The interaction wave M^(2) is
    sampled at each observer's cell and the onset of its rise is
    extrapolated back to zero (kinked pulses of order k rise with power
    2k). Returns observer parameters s, or NOT_OBSERVED.
    """
    from . import wavelab as wl

    if grid.d != 1 or not isinstance(U.metric, geo.Minkowski):
        raise geo.GeometryError("wave cross-validation runs in 1+1 Minkowski")
    M = wl.interaction_waves(grid, pulses, a, store="all")[frozenset(range(len(pulses)))]
    x = grid.axes[0]
    power = 2.0 * min(getattr(p, "a", 1) for p in pulses)
    out = []
    for mu in U.observers:
        if abs(mu.eta[1]) > 1e-12:
            raise geo.GeometryError("wave cross-validation needs static observers")
        i = int(np.argmin(np.abs(x - mu.z[1])))
        t = _onset(np.asarray(M.times), np.abs(M.values[:, i]), lo, hi, power)
        s = None if t is None else (t - mu.z[0]) / mu.eta[0]
        out.append(float(s) if s is not None and -1 <= s <= 1 else NOT_OBSERVED)
    return out


# ------------------------------------------------------------ S and T

@dataclass
class SValue:
    value: float
    r1: float
    r2: float


def _ray(metric, y, zeta):
    y, zeta = np.asarray(y, float), _null(zeta)
    return lambda r: y + r * zeta  # covering coordinates; causal tests wrap


def _first_true(pred, hi: float, tol: float = 1e-13) -> float:
    lo = 0.0
    while hi - lo > tol * max(1.0, hi):
        mid = (lo + hi) / 2
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _check_misses_observer(metric, mu, y, zeta, tol=1e-9):
    V = _null(zeta)
    for sh in _shifts(metric, 2):
        r, s, miss = _closest(np.asarray(y, float), V, mu.z + sh, mu.eta)
        if r > -tol and -1 <= s <= 1 and miss < tol:
            raise PreconditionError("geodesic meets the observer")


def _exit_param(metric, gamma, top) -> float:
    """inf{r : gamma(r) not in I^-(top)} by doubling and bisection."""
    out = lambda r: not geo.chrono(metric, gamma(r), top)  # noqa: E731
    if out(0.0):
        return 0.0
    hi = 0.25
    while not out(hi):
        hi *= 2
        if hi > 1e6:
            raise geo.GeometryError("geodesic never leaves the past of the observer")
    return _first_true(out, hi)


def S_value(U: geo.ObservationRegion, y, zeta, s1: float, s_plus: float, s_plus2: float | None = None,
            details: bool = False):
    """f^+ of the first point where gamma_{y,zeta} enters J^+(mu(s1)), capped at s_plus.

    r1 is the entry parameter, r2 the exit from I^-(mu(s_plus2)); the value
    is f^+(gamma(min(r1, r2))) and s_plus when gamma never meets
    J^+(mu(s1)) inside J^-(mu(s_plus)).
    """
    metric = U.metric
    _require_flat(metric)
    mu = U.observers[0]
    s_plus2 = (s_plus + 1) / 2 if s_plus2 is None else s_plus2
    _check_misses_observer(metric, mu, y, zeta)
    gamma = _ray(metric, y, zeta)
    r2 = _exit_param(metric, gamma, mu.at(s_plus2))
    base = mu.at(s1)
    entered = lambda r: geo.causal_leq(metric, base, gamma(r))  # noqa: E731
    r1 = _first_true(entered, r2) if entered(r2) else math.inf
    r0 = min(r1, r2)
    if math.isinf(r1):
        val = s_plus
    else:
        p = gamma(r0)
        val = min(geo.obs_time(mu, p, "plus"), s_plus) if geo.causal_leq(metric, mu.at(-1.0), p) else -1.0
    return SValue(val, r1, r2) if details else val


def entry_instance(d: int, rng, yt: float = -0.3) -> tuple:
    """Random (y, zeta, s1) whose ray enters J^+(mu(s1)) for the static observer at the origin.

    y is spacelike to mu(s1) at spatial distance 0.15..0.3, and the ray passes
    the axis at distance at least 0.03.
    """
    while True:
        u = rng.normal(size=d)
        yx = rng.uniform(0.15, 0.3) * u / np.linalg.norm(u)
        gap = rng.uniform(0.02, 0.1)
        w = rng.normal(size=d)
        w /= np.linalg.norm(w)
        if yx @ w < -gap - 0.02 and np.linalg.norm(yx - (yx @ w) * w) > 0.03:
            return np.concatenate([[yt], yx]), np.concatenate([[1.0], w]), yt + gap


@dataclass
class TValue:
    value: float
    collected: int
    levels: int
    stable: bool
    history: list
    tolerance: float

    @property
    def flagged(self) -> bool:
        return not self.stable


def T_value(U: geo.ObservationRegion, y, zeta, s1: float, s_plus: float, theta0: float = 0.2, levels: int = 7,
            per_level: int = 32, seed: int = 0, cauchy: float = 1e-4) -> TValue:
    """Infimum of observer traces over genuine observations of gamma_{y,zeta}.

    Each scan sample is a four-geodesic tuple with (x1, xi1) = (y, zeta):
    a point q = gamma(r) is picked, three more geodesics through q start
    within theta_k of (y, zeta), and the intersection is recomputed from the
    tuple. Samples whose intersection lies in J^+(mu(s1)) and J^-(mu(s_plus))
    are collected; the trace parameter is f^+(q). theta halves per level and
    r is drawn from the current bracket around the entry.
    """
    metric = U.metric
    _require_flat(metric)
    mu = U.observers[0]
    rng = np.random.default_rng(seed)
    zeta = _null(zeta)
    y = np.asarray(y, float)
    gamma = _ray(metric, y, zeta)
    rho = geo.cut_value(metric, y, zeta).value
    r_top = _exit_param(metric, gamma, mu.at(1.0))
    lo, hi = 0.0, min(rho, r_top)
    base, top = mu.at(s1), mu.at(s_plus)
    best = math.inf
    collected = 0
    history = []
    stable = False
    for k in range(levels):
        theta = theta0 / 2**k
        for _ in range(per_level):
            r = lo + (hi - lo) * rng.uniform(0.02, 1.0)
            if not 0 < r < rho:
                continue
            q = gamma(r)
            etas = [zeta] + nearby_directions(zeta, 3, theta, rng)
            tup = recipe_tuple(metric, q, etas, [r - r / 4] * 4, r / 4)
            tup.xs[0] = y  # keep the first pair exactly (y, zeta)
            hit = intersection_point(metric, tup, tol=1e-8)
            if hit.q is None:
                continue
            qq = q  # covering-space representative of hit.q
            if gplus_distance(metric, hit.q, q) > 1e-6:
                continue
            if not geo.causal_leq(metric, base, qq):
                lo = max(lo, r)
                continue
            if not geo.causal_leq(metric, qq, top):
                continue
            collected += 1
            best = min(best, geo.obs_time(mu, qq, "plus"))
            hi = min(hi, r)
        history.append(best)
        if k >= 2 and math.isfinite(best) and abs(history[-1] - history[-2]) < cauchy and hi - lo < cauchy:
            stable = True
            break
    if not math.isfinite(best):
        # never collected: the sentinel, certified only at this budget
        best = s_plus
        stable = hi - lo < cauchy or collected == 0
    return TValue(best, collected, len(history), stable, history, max(hi - lo, 0.0))


# -------------------------------------------------------- stepwise collect

@dataclass
class DataSet:
    metric: object
    U: geo.ObservationRegion
    samples: list  # ObsSetSample
    provenance: list
    s_grid: list
    gaps: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def qs(self) -> np.ndarray:
        return np.array([s.q for s in self.samples])

    def write(self, directory, stem: str = "dataset") -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with open(directory / f"{stem}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            n = self.metric.d + 1
            w.writerow([f"q{i}" for i in range(n)] + ["observer", "s"])
            for s in self.samples:
                w.writerows(s.rows())
        manifest = {"metric": self.metric.to_dict(), "observers": self.U.to_dict(), "s_grid": self.s_grid,
                    "n_samples": len(self.samples), "gaps": self.gaps, **self.meta}
        (directory / f"{stem}.json").write_text(json.dumps(manifest, indent=2, default=float))


def diamond_grid(U: geo.ObservationRegion, s_minus: float, s_plus: float, n: int, seed: int = 0) -> list:
    """Deterministic sample of the open diamond I(mu(s_-), mu(s_+))."""
    from scipy.stats import qmc

    metric = U.metric
    mu = U.observers[0]
    pm, pp = mu.at(s_minus), mu.at(s_plus)
    half = (s_plus - s_minus) / 2
    centre = (pm + pp) / 2
    dim = metric.d + 1
    pts = qmc.Sobol(dim, scramble=True, seed=seed).random_base2(int(math.ceil(math.log2(8 * n))))
    out = []
    for p in pts:
        x = centre + (2 * p - 1) * half
        if geo.chrono(metric, pm, x, 1e-9) and geo.chrono(metric, x, pp, 1e-9):
            out.append(metric.canon(x))
        if len(out) == n:
            break
    return out


def lattice_grid(U: geo.ObservationRegion, s_minus: float, s_plus: float, step: float) -> list:
    """Lattice points of spacing ``step`` inside the open diamond of the central observer."""
    metric = U.metric
    mu = U.observers[0]
    pm, pp = mu.at(s_minus), mu.at(s_plus)
    half = (s_plus - s_minus) / 2
    centre = (pm + pp) / 2
    k = int(math.floor(half / step))
    ax = np.arange(-k, k + 1) * step
    pts = np.array(np.meshgrid(*[ax] * (metric.d + 1), indexing="ij")).reshape(metric.d + 1, -1).T
    return [metric.canon(centre + p) for p in pts
            if geo.chrono(metric, pm, centre + p, 1e-9) and geo.chrono(metric, centre + p, pp, 1e-9)]


def _approach(metric, mu, q, delta: float):
    """Base pair near the observer whose geodesic reaches q.

    The past null ray from q heads back toward the observer position at
    time f^-(q); y stops at spatial distance about delta from it.
    """
    s = geo.obs_time(mu, q, "minus")
    foot = mu.at(s)
    d = q[1:] - foot[1:]
    if isinstance(metric, geo.StaticProduct):
        d = metric.wrap_delta(d)
    dist = float(np.linalg.norm(d))
    if dist < 1e-12:
        u = np.zeros(metric.d)
        u[0] = 1.0
        dist = 0.0
    else:
        u = d / dist
    zeta = np.concatenate([[1.0], u])
    r = max(dist - delta, delta)
    return q - r * zeta, zeta, r


def stepwise_collect(U: geo.ObservationRegion, s_minus: float, s_plus: float, kappa2: float, q_grid=None,
                     n_grid: int = 100, theta: float = 0.2, max_steps: int | None = None, seed: int = 0,
                     cauchy: float = 1e-4) -> DataSet:
    """Backward induction over s_0 = s_+ > s_1 > ... > s_K = s_-.

    Step j collects the q-grid points of J^+(mu(s_{j+1})) not reached
    before; each is reached by a genuine tuple based near the observer, its
    detection set is synthesized, and the closure limit is taken over a
    shrinking theta sequence. ``max_steps=0`` keeps only the seed layer.
    """
    metric = U.metric
    _require_flat(metric)
    mu = U.observers[0]
    rng = np.random.default_rng(seed)
    step = 0.9 * kappa2
    n_steps = max(1, int(math.ceil((s_plus - s_minus) / step)))
    s_grid = [s_plus - (s_plus - s_minus) * j / n_steps for j in range(n_steps + 1)]
    if q_grid is None:
        q_grid = diamond_grid(U, s_minus, s_plus, n_grid, seed)
    q_grid = [np.asarray(q, float) for q in q_grid]
    todo = list(range(len(q_grid)))
    samples, prov, gaps, layer_of, targets = [], [], [], [], []
    # seed layer: the first slab below the top, next to the observer tube
    layers = [s_grid[1]] + s_grid[2:]
    if max_steps is not None:
        layers = layers[: max_steps + 1]
    for j, s_lo in enumerate(layers):
        here = [i for i in todo if geo.causal_leq(metric, mu.at(s_lo), q_grid[i])]
        todo = [i for i in todo if i not in here]
        for i in here:
            q = q_grid[i]
            prev = None
            got = None
            for k in range(6):
                th = theta / 2**k
                y, zeta, r = _approach(metric, mu, q, th / 4)
                etas = [zeta] + nearby_directions(zeta, 3, th, rng)
                tup = recipe_tuple(metric, q, etas, [0.75 * r] * 4, 0.25 * r)
                rec = synth_Se(metric, tup, U)
                if rec.sample is None:
                    continue
                vals = np.array([np.nan if v is NOT_OBSERVED else v for v in rec.sample.values()])
                if prev is not None and np.array_equal(np.isnan(vals), np.isnan(prev)) and np.nanmax(
                        np.abs(np.nan_to_num(vals - prev)), initial=0.0) < cauchy:
                    got = rec
                    break
                prev, got = vals, rec
            if got is None:
                gaps.append({"q": q.tolist(), "layer": j, "reason": "no generating tuple"})
                continue
            samples.append(got.sample)
            prov.append(got.provenance)
            layer_of.append(j)
            targets.append(q.tolist())
    for i in todo:
        gaps.append({"q": q_grid[i].tolist(), "reason": "below the last step"})
    for g in gaps:
        if targets:
            k = int(np.argmin([gplus_distance(metric, g["q"], t) for t in targets]))
            g["nearest"] = targets[k]
    return DataSet(metric, U, samples, prov, s_grid, gaps,
                   {"kappa2": kappa2, "theta": theta, "cauchy": cauchy, "layers": layer_of,
                    "targets": targets})


# ---------------------------------------------------------- injectivity

def sup_distance(a: list, b: list) -> float:
    """Sup over observers; one-sided NA counts as +inf, two-sided NA as 0."""
    best = 0.0
    for x, y in zip(a, b):
        nx, ny = x is NOT_OBSERVED, y is NOT_OBSERVED
        if nx and ny:
            continue
        if nx != ny:
            return math.inf
        best = max(best, abs(x - y))
    return best


def injectivity_and_embed(samples, metric=None) -> dict:
    """Pairwise sup-distance matrix of the F_q and an embedding trend statistic."""
    if isinstance(samples, DataSet):
        metric = metric or samples.metric
        samples = samples.samples
    if len(samples) < 2:
        raise ValueError("need at least two samples")
    n = len(samples)
    vals = [s.values() for s in samples]
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = sup_distance(vals[i], vals[j])
    off = D[~np.eye(n, dtype=bool)]
    mn = float(off.min())
    rep = {"n": n, "min_distance": mn, "injective": mn > 0,
           "verdict": "injective" if mn > 0 else "non-injective input", "trend": None}
    if metric is not None:
        iu = np.triu_indices(n, 1)
        g = np.array([gplus_distance(metric, samples[i].q, samples[j].q) for i, j in zip(*iu)])
        f = D[iu]
        ok = np.isfinite(f)
        if ok.sum() > 2:
            rep["trend"] = float(stats.spearmanr(f[ok], g[ok]).correlation)
    rep["matrix"] = D
    return rep
