"""Causal geometry of a few explicit Lorentzian families.

Three families are supported:

* ``Minkowski(d)``: flat R^{1+d}, d in {1, 2, 3}.
* ``StaticProduct``: -dt^2 + h(y), with h either flat (each spatial axis a
  line or a circle of circumference l) or a one dimensional sampled
  coefficient h(y) dy^2.
* ``Conformal1p1``: c(t, x)(-dt^2 + dx^2) on R^{1+1}.

Events are numpy arrays (t, y1, ..., yd). Periodic coordinates are stored
in [0, l).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq, minimize
from scipy.stats import qmc

CAUSAL_TOL = 1e-12
INF = math.inf


class GeometryError(ValueError):
    pass


class PreconditionError(GeometryError):
    pass


class ToleranceError(GeometryError):
    pass


class Observed(enum.Enum):
    NOT_OBSERVED = "NA"


NOT_OBSERVED = Observed.NOT_OBSERVED


# ---------------------------------------------------------------- metrics

class Metric:
    family = "abstract"
    d = 1
    box = None  # ((t0, t1), (y0, y1), ...) working domain for numeric flows

    def g(self, x) -> np.ndarray:
        raise NotImplementedError

    def g_plus(self, x) -> np.ndarray:
        G = self.g(x).copy()
        G[0, 0] = -G[0, 0]
        return G

    def canon(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float)

    def in_box(self, x) -> bool:
        if self.box is None:
            return True
        return all(lo <= c <= hi for c, (lo, hi) in zip(x, self.box))

    # flat families override these with closed forms
    def spatial_distance(self, y1, y2) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


class Minkowski(Metric):
    family = "minkowski"

    def __init__(self, d: int = 3):
        if d not in (1, 2, 3):
            raise GeometryError("minkowski supports d = 1, 2, 3")
        self.d = d

    def g(self, x):
        return np.diag([-1.0] + [1.0] * self.d)

    def spatial_distance(self, y1, y2):
        return float(np.linalg.norm(np.asarray(y2, float) - np.asarray(y1, float)))

    def to_dict(self):
        return {"family": "minkowski", "d": self.d}


class StaticProduct(Metric):
    """-dt^2 + h. Either ``periods`` (one entry per axis, None for a line) or a
    sampled coefficient ``h_grid=(y_values, h_values)`` in one dimension."""

    family = "static_product"

    def __init__(self, periods=None, h_grid=None, box=None):
        if (periods is None) == (h_grid is None):
            raise GeometryError("give exactly one of periods or h_grid")
        self.periods = None if periods is None else tuple(None if p is None else float(p) for p in periods)
        self.h_grid = None
        if periods is not None:
            self.d = len(self.periods)
            if any(p is not None and p <= 0 for p in self.periods):
                raise GeometryError("circumferences must be positive")
        else:
            ys, hs = (np.asarray(v, float) for v in h_grid)
            if np.any(hs <= 0):
                raise GeometryError("h must be positive definite")
            self.h_grid = (ys, hs)
            self.d = 1
            self._h = CubicSpline(ys, hs)
            self._F = CubicSpline(ys, np.sqrt(hs)).antiderivative()
        self.box = box or ((-20.0, 20.0),) + ((-20.0, 20.0),) * self.d

    @property
    def flat(self) -> bool:
        return self.periods is not None

    def h(self, y) -> float:
        return 1.0 if self.flat else float(self._h(y))

    def g(self, x):
        if self.flat:
            return np.diag([-1.0] + [1.0] * self.d)
        return np.diag([-1.0, self.h(x[1])])

    def canon(self, x):
        x = np.asarray(x, dtype=float).copy()
        if self.flat:
            for i, p in enumerate(self.periods):
                if p is not None:
                    x[i + 1] = x[i + 1] % p
        return x

    def wrap_delta(self, dy) -> np.ndarray:
        """Shortest representative of a spatial displacement."""
        dy = np.array(dy, dtype=float)
        for i, p in enumerate(self.periods):
            if p is not None:
                dy[i] = dy[i] - p * round(dy[i] / p)
        return dy

    def spatial_distance(self, y1, y2):
        if self.flat:
            return float(np.linalg.norm(self.wrap_delta(np.asarray(y2, float) - np.asarray(y1, float))))
        return abs(float(self._F(y2[0]) - self._F(y1[0])))

    def to_dict(self):
        if self.flat:
            return {"family": "static_product", "periods": list(self.periods)}
        return {"family": "static_product", "h_grid": [self.h_grid[0].tolist(), self.h_grid[1].tolist()]}


class Conformal1p1(Metric):
    family = "conformal_1p1"
    d = 1

    def __init__(self, c, c_min: float = None, box=((-5.0, 5.0), (-5.0, 5.0)), dc=None, spec=None):
        self.c = c
        self.box = box
        self.dc = dc
        self.spec = spec
        if c_min is not None:
            ts = np.linspace(*box[0], 41)
            xs = np.linspace(*box[1], 41)
            if min(c(t, x) for t in ts for x in xs) < c_min:
                raise GeometryError("conformal factor below c_min on the working box")

    def g(self, x):
        return self.c(x[0], x[1]) * np.diag([-1.0, 1.0])

    def grad_log_c(self, x):
        if self.dc is not None:
            ct, cx = self.dc(x[0], x[1])
        else:
            e = 1e-6
            ct = (self.c(x[0] + e, x[1]) - self.c(x[0] - e, x[1])) / (2 * e)
            cx = (self.c(x[0], x[1] + e) - self.c(x[0], x[1] - e)) / (2 * e)
        c = self.c(x[0], x[1])
        return np.array([ct / c, cx / c])

    def to_dict(self):
        return {"family": "conformal_1p1", "c": self.spec}


def linear_conformal(a0: float = 1.0, at: float = 0.0, ax: float = 0.0, **kw) -> Conformal1p1:
    """c(t, x) = a0 + at t + ax x with exact derivatives."""
    return Conformal1p1(
        lambda t, x: a0 + at * t + ax * x,
        dc=lambda t, x: (at, ax),
        spec={"a0": a0, "at": at, "ax": ax},
        **kw,
    )


def metric_from_dict(d: dict) -> Metric:
    fam = d.get("family")
    if fam == "minkowski":
        return Minkowski(int(d.get("d", 3)))
    if fam == "static_product":
        if "periods" in d:
            return StaticProduct(periods=d["periods"])
        return StaticProduct(h_grid=d["h_grid"])
    if fam == "conformal_1p1":
        return linear_conformal(**d.get("c", {}))
    raise GeometryError(f"unknown metric family {fam!r}")


def is_flat(metric) -> bool:
    return isinstance(metric, Minkowski) or (isinstance(metric, StaticProduct) and metric.flat)


# ------------------------------------------------------------ classification

def classify(metric: Metric, x, v) -> tuple:
    """(causal class, time orientation) of a tangent vector."""
    v = np.asarray(v, float)
    G = metric.g(x)
    q = float(v @ G @ v)
    scale = float(v @ metric.g_plus(x) @ v)
    if abs(q) <= 1e-12 * max(scale, 1e-300):
        cls = "null"
    elif q < 0:
        cls = "timelike"
    else:
        cls = "spacelike"
    if cls == "spacelike" or scale == 0:
        return cls, "none"
    return cls, "future" if v[0] > 0 else "past"


# ---------------------------------------------------------------- geodesics

@dataclass
class Geodesic:
    x0: np.ndarray
    v0: np.ndarray
    s: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    max_param: float = INF
    exited: bool = False
    drift: float = 0.0
    _dense: object = field(default=None, repr=False)
    _metric: object = field(default=None, repr=False)

    def at(self, s: float):
        """Point and velocity at parameter s."""
        if self._dense is None:
            p = self.x0 + s * self.v0
            return self._metric.canon(p), self.v0.copy()
        y = self._dense(s)
        n = len(self.x0)
        return self._metric.canon(y[:n]), y[n:]


def _christoffel_rhs(metric: Metric):
    if isinstance(metric, Conformal1p1):
        eta = np.diag([-1.0, 1.0])

        def rhs(s, y):
            x, v = y[:2], y[2:]
            dl = metric.grad_log_c(x)
            # Gamma^a_bc v^b v^c = (v^a (dl.v) - 1/2 (v.eta.v) eta^{ad} dl_d) * 1/... (conformal formula)
            vdl = dl @ v
            vv = v @ eta @ v
            acc = -(2 * v * vdl - vv * (eta @ dl)) / 2
            return np.concatenate([v, acc])

        return rhs
    if isinstance(metric, StaticProduct) and not metric.flat:
        dh = metric._h.derivative()

        def rhs(s, y):
            x, v = y[:2], y[2:]
            h = metric.h(x[1])
            return np.array([v[0], v[1], 0.0, -float(dh(x[1])) / (2 * h) * v[1] ** 2])

        return rhs
    raise GeometryError("closed-form family has no numeric flow")


def geodesic(metric: Metric, x, xi, s_max: float, n_samples: int = 201, rtol: float = 1e-12) -> Geodesic:
    """Sampled geodesic; exact straight line on flat families."""
    x = np.asarray(x, float)
    xi = np.asarray(xi, float)
    if not np.any(xi):
        raise GeometryError("zero initial velocity")
    if s_max <= 0:
        raise GeometryError("s_max must be positive")
    s = np.linspace(0.0, s_max, n_samples) if s_max > 0 else np.array([0.0])
    if is_flat(metric):
        pts = np.array([metric.canon(x + si * xi) for si in s])
        vel = np.tile(xi, (len(s), 1))
        return Geodesic(x, xi, s, pts, vel, INF, False, 0.0, None, metric)
    rhs = _christoffel_rhs(metric)

    def leave(si, y):
        return 0.0 if not metric.in_box(y[: len(x)]) else 1.0

    leave.terminal = True
    sol = solve_ivp(rhs, (0.0, s_max), np.concatenate([x, xi]), method="DOP853", rtol=rtol, atol=1e-13,
                    dense_output=True, events=leave)
    exited = sol.status == 1
    s_end = float(sol.t[-1])
    s = s[s <= s_end + 1e-15]
    ys = sol.sol(s).T
    n = len(x)
    pts, vel = ys[:, :n], ys[:, n:]
    norms = np.array([v @ metric.g(p) @ v for p, v in zip(pts, vel)])
    ref = float(xi @ metric.g_plus(x) @ xi)
    drift = float(np.max(np.abs(norms - norms[0])) / ref)
    return Geodesic(x, xi, s, pts, vel, s_end if exited else INF, exited, drift, sol.sol, metric)


def geodesic_reference(metric: Metric, x, xi, s_max: float, n: int = 2000) -> np.ndarray:
    """Fixed-step RK4 with half-step Richardson extrapolation; endpoint only."""
    rhs = _christoffel_rhs(metric)

    def rk4(m):
        h = s_max / m
        y = np.concatenate([np.asarray(x, float), np.asarray(xi, float)])
        t = 0.0
        for _ in range(m):
            k1 = rhs(t, y)
            k2 = rhs(t + h / 2, y + h / 2 * k1)
            k3 = rhs(t + h / 2, y + h / 2 * k2)
            k4 = rhs(t + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        return y

    return (16 * rk4(2 * n) - rk4(n)) / 15


# --------------------------------------------------------- causal relations

def _delta(metric, x, y):
    """(dt, spatial distance) on the families with closed forms."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    return y[0] - x[0], metric.spatial_distance(x[1:], y[1:])


def causal_leq(metric, x, y, tol: float = CAUSAL_TOL) -> bool:
    """x <= y (causal curve from x to y, or x = y)."""
    if isinstance(metric, Conformal1p1):
        dt, dx = y[0] - x[0], abs(y[1] - x[1])
    else:
        dt, dx = _delta(metric, x, y)
    return dt >= dx - tol * max(1.0, abs(dt))


def chrono(metric, x, y, tol: float = CAUSAL_TOL) -> bool:
    """x << y."""
    if isinstance(metric, Conformal1p1):
        dt, dx = y[0] - x[0], abs(y[1] - x[1])
    else:
        dt, dx = _delta(metric, x, y)
    return dt > dx + tol * max(1.0, abs(dt))


def time_sep(metric, x, y) -> float:
    """Lorentzian time separation; 0 unless x << y."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if not chrono(metric, x, y):
        return 0.0
    if isinstance(metric, Conformal1p1):
        return _time_sep_conformal(metric, x, y)
    dt, d = _delta(metric, x, y)
    return math.sqrt(max(dt * dt - d * d, 0.0))


def _time_sep_conformal(metric, x, y, rtol: float = 1e-11) -> float:
    """Length of the timelike geodesic from x to y, found by shooting in rapidity."""
    rhs = _christoffel_rhs(metric)
    c0 = metric.c(*x)

    def shoot(theta):
        v = np.array([math.cosh(theta), math.sinh(theta)]) / math.sqrt(c0)

        def hit(s, yy):
            return yy[0] - y[0]

        hit.terminal = True
        sol = solve_ivp(rhs, (0.0, 50.0 * (y[0] - x[0]) + 10), np.concatenate([x, v]), method="DOP853",
                        rtol=rtol, atol=1e-13, events=hit)
        if not sol.t_events[0].size:
            raise ToleranceError("shooting ray never reached the target time")
        return sol.y_events[0][0][1] - y[1], float(sol.t_events[0][0])

    lim = math.atanh(min(abs(y[1] - x[1]) / (y[0] - x[0]), 1 - 1e-15)) + 3.0
    lo, hi = -lim, lim
    while shoot(lo)[0] > 0:
        lo -= 2.0
    while shoot(hi)[0] < 0:
        hi += 2.0
    theta = brentq(lambda th: shoot(th)[0], lo, hi, xtol=1e-14, rtol=1e-14)
    return shoot(theta)[1]


def time_sep_broken(metric, x, y, K: int = 8, tol: float = 1e-6, K_max: int = 64) -> tuple:
    """Maximize length over broken causal paths with K segments, doubling K.

    Returns (length, K used, converged). An independent oracle for time_sep.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if not chrono(metric, x, y):
        return 0.0, K, True
    d = len(x) - 1
    target = y.copy()
    if isinstance(metric, StaticProduct) and metric.flat:
        target[1:] = x[1:] + metric.wrap_delta(y[1:] - x[1:])
    dt_total = target[0] - x[0]
    disp = target[1:] - x[1:]

    def weight(p):
        if isinstance(metric, Conformal1p1):
            return math.sqrt(metric.c(p[0], p[1]))
        return 1.0

    def solve(K, w0=None):
        dt = dt_total / K

        def unpack(w):
            w = w.reshape(K, d)
            n = np.linalg.norm(w, axis=1, keepdims=True)
            return np.tanh(n) * w / np.maximum(n, 1e-300)

        def length(w):
            v = unpack(w)
            pos = np.concatenate([x[None, 1:], x[1:] + np.cumsum(v * dt, axis=0)])
            out = 0.0
            for i in range(K):
                mid = np.concatenate([[x[0] + (i + 0.5) * dt], (pos[i] + pos[i + 1]) / 2])
                out += weight(mid) * dt * math.sqrt(max(1 - float(v[i] @ v[i]), 0.0))
            return -out

        cons = {"type": "eq", "fun": lambda w: (unpack(w) * dt).sum(axis=0) - disp}
        if w0 is None:
            v = disp / dt_total
            n = np.linalg.norm(v)
            w0 = np.tile(v * (np.arctanh(min(n, 0.999)) / n if n > 0 else 0), K)
        res = minimize(length, w0.ravel(), constraints=[cons], method="SLSQP",
                       options={"ftol": 1e-14, "maxiter": 500})
        return -res.fun, res.x

    prev, w = solve(K)
    while K < K_max:
        K *= 2
        cur, w = solve(K, np.repeat(w.reshape(-1, d), 2, axis=0))
        if abs(cur - prev) < tol:
            return cur, K, True
        prev = cur
    return prev, K, False


# ----------------------------------------------------------------- cut values

@dataclass
class CutResult:
    value: float
    flag: str = ""  # "", "no-cut", "domain-exit"


def torus_cut_closed_form(periods, omega, max_wind: int = 4) -> float:
    """min over nonzero winding vectors L of |L|^2 / (2 omega.L), omega.L > 0.

    For xi = (1, omega), |omega| = 1, the straight null ray stops minimizing
    when some image of x is as close as the ray's own spatial point.
    """
    omega = np.asarray(omega, float)
    axes = [i for i, p in enumerate(periods) if p is not None]
    best = INF
    if not axes:
        return best
    ranges = [range(-max_wind, max_wind + 1) if p is not None else [0] for p in periods]
    for ks in np.array(np.meshgrid(*ranges)).T.reshape(-1, len(periods)):
        if not np.any(ks):
            continue
        L = np.array([k * (p or 0.0) for k, p in zip(ks, periods)])
        dot = float(omega @ L)
        if dot > 1e-15:
            best = min(best, float(L @ L) / (2 * dot))
    return best


def cut_value(metric, x, xi, tol: float = 1e-6, horizon: float = 64.0) -> CutResult:
    """rho(x, xi) = sup{s : tau(x, gamma(s)) = 0} by bracketing and bisection."""
    x = np.asarray(x, float)
    xi = np.asarray(xi, float)
    cls, ori = classify(metric, x, xi)
    if cls != "null" or ori != "future":
        raise PreconditionError("cut_value needs a future null vector")
    if isinstance(metric, (Minkowski, Conformal1p1)):
        return CutResult(INF, "no-cut")
    geo = None if is_flat(metric) else geodesic(metric, x, xi, horizon)

    def point(s):
        if geo is None:
            return x + s * xi
        return geo.at(s)[0]

    s_exit = horizon if geo is None or not geo.exited else geo.max_param
    lo, hi = 0.0, min(0.25, s_exit)
    while not chrono(metric, x, point(hi)):
        lo = hi
        if hi >= s_exit:
            return CutResult(INF if geo is None or not geo.exited else lo, "no-cut" if geo is None or not geo.exited else "domain-exit")
        hi = min(2 * hi, s_exit)
    while hi - lo > tol * 1e-3:
        mid = (lo + hi) / 2
        if chrono(metric, x, point(mid)):
            hi = mid
        else:
            lo = mid
    return CutResult((lo + hi) / 2, "")


# ------------------------------------------------------------------ observers

@dataclass
class Observer:
    metric: Metric
    z: np.ndarray
    eta: np.ndarray
    markers: tuple = (-0.9, -0.8, -0.7, 0.7, 0.8, 0.9)  # s_-3 .. s_+3

    def __post_init__(self):
        self.z = np.asarray(self.z, float)
        self.eta = np.asarray(self.eta, float)
        cls, ori = classify(self.metric, self.z, self.eta)
        if cls != "timelike" or ori != "future":
            raise GeometryError("observer velocity must be future timelike")
        if list(self.markers) != sorted(self.markers) or not all(-1 < m < 1 for m in self.markers):
            raise GeometryError("markers must increase inside (-1, 1)")
        self._fwd = self._bwd = None
        if not is_flat(self.metric):
            self._fwd = geodesic(self.metric, self.z, self.eta, 1.0)
            self._bwd = geodesic(self.metric, self.z, -self.eta, 1.0)

    def at(self, s: float) -> np.ndarray:
        if self._fwd is None:
            return self.metric.canon(self.z + s * self.eta)
        if s >= 0:
            return self._fwd.at(s)[0]
        return self._bwd.at(-s)[0]

    def to_dict(self) -> dict:
        return {"z": self.z.tolist(), "eta": self.eta.tolist()}


def unit_observer(metric, z, spatial_velocity=None) -> Observer:
    """Observer through z with g-unit velocity and the given spatial velocity."""
    z = np.asarray(z, float)
    d = len(z) - 1
    u = np.zeros(d) if spatial_velocity is None else np.asarray(spatial_velocity, float)
    v = np.concatenate([[1.0], u])
    n = -float(v @ metric.g(z) @ v)
    if n <= 0:
        raise GeometryError("spatial velocity not subluminal")
    return Observer(metric, z, v / math.sqrt(n))


def _bisect_first(pred, lo=-1.0, hi=1.0, tol=1e-13):
    """Smallest s in [lo, hi] with pred(s), pred assumed monotone false -> true."""
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def obs_time(mu: Observer, x, side: str = "plus", tol: float = 1e-13) -> float:
    """f_mu^+(x) = inf{s : tau(x, mu(s)) > 0}, f_mu^-(x) = sup{s : tau(mu(s), x) > 0}."""
    m = mu.metric
    x = np.asarray(x, float)
    if not (causal_leq(m, mu.at(-1.0), x) and causal_leq(m, x, mu.at(1.0))):
        raise PreconditionError("point outside the observer's causal diamond")
    if side == "plus":
        pred = lambda s: chrono(m, x, mu.at(s))  # noqa: E731
        if not pred(1.0):
            return 1.0
        if pred(-1.0):
            return -1.0
        return _bisect_first(pred, tol=tol)
    if side == "minus":
        pred = lambda s: not chrono(m, mu.at(s), x)  # noqa: E731
        if pred(-1.0):
            return -1.0
        if not pred(1.0):
            return 1.0
        return _bisect_first(pred, tol=tol)
    raise GeometryError(f"unknown side {side!r}")


def earliest_arrival(mu: Observer, q, tol: float = 1e-13):
    """Parameter of the single point of mu in E_U(q), or NOT_OBSERVED.

    The earliest point of mu inside J^+(q) lies on the boundary of J^+(q),
    i.e. on a null geodesic from q before its cut point, which is exactly the
    truncated cone. If mu(-1) is already chronologically after q the
    observer never meets the truncated cone.
    """
    m = mu.metric
    q = np.asarray(q, float)
    inside = lambda s: causal_leq(m, q, mu.at(s))  # noqa: E731
    if not inside(1.0):
        return NOT_OBSERVED
    if inside(-1.0):
        return -1.0 if not chrono(m, q, mu.at(-1.0)) else NOT_OBSERVED
    return _bisect_first(inside, tol=tol)


@dataclass
class ObservationRegion:
    metric: Metric
    z0: np.ndarray
    eta0: np.ndarray
    h_hat: float
    observers: list

    def to_dict(self) -> dict:
        return {"z0": list(map(float, self.z0)), "eta0": list(map(float, self.eta0)), "h_hat": self.h_hat,
                "n": len(self.observers)}


def observer_family(metric, z0, spatial_velocity0=None, h_hat: float = 0.2, n: int = 64, seed: int = 0,
                    include_center: bool = True) -> ObservationRegion:
    """Deterministic Sobol sample of observers within h_hat of the centre.

    Offsets in (z, spatial velocity) are scaled into the h_hat ball of the
    product Euclidean distance.
    """
    z0 = np.asarray(z0, float)
    d = len(z0) - 1
    u0 = np.zeros(d) if spatial_velocity0 is None else np.asarray(spatial_velocity0, float)
    center = unit_observer(metric, z0, u0)
    dim = (d + 1) + d
    sob = qmc.Sobol(dim, scramble=True, seed=seed)
    pts = sob.random(n) * 2 - 1
    obs = [center] if include_center else []
    for p in pts:
        if len(obs) >= n:
            break
        r = np.linalg.norm(p)
        if r > 1:
            p = p / r
        p = p * h_hat * 0.999
        for _ in range(20):
            # normalizing the velocity stretches offsets; shrink until inside
            try:
                mu = unit_observer(metric, z0 + p[: d + 1], u0 + p[d + 1:])
            except GeometryError:
                p = p * 0.5
                continue
            off = np.linalg.norm(np.concatenate([mu.z - center.z, mu.eta - center.eta]))
            if off <= h_hat:
                obs.append(mu)
                break
            p = p * 0.99 * h_hat / off
    return ObservationRegion(metric, z0, center.eta, h_hat, obs)


@dataclass
class ObsSetSample:
    q: np.ndarray
    entries: list  # (observer index, s or NOT_OBSERVED)
    flags: list = field(default_factory=list)

    def values(self) -> list:
        return [s for _, s in self.entries]

    def rows(self) -> list:
        return [list(map(float, self.q)) + [i, "NA" if s is NOT_OBSERVED else float(s)] for i, s in self.entries]


def earliest_light_obs(q, U: ObservationRegion, fan: int = 0) -> ObsSetSample:
    """E_U(q) sampled on the observer family.

    With ``fan > 0`` a fan of null rays from q cross-checks the arrivals
    (flat 1+1 and 2+1 only); disagreements beyond the fan resolution raise
    the fan-resolution-insufficient flag.
    """
    q = np.asarray(q, float)
    entries = [(i, earliest_arrival(mu, q)) for i, mu in enumerate(U.observers)]
    out = ObsSetSample(q, entries)
    if fan:
        est = fan_arrivals(U.metric, q, U.observers, fan)
        for (i, s), (e, res) in zip(entries, est):
            if (s is NOT_OBSERVED) != (e is NOT_OBSERVED):
                out.flags.append(f"fan-resolution-insufficient:{i}")
            elif s is not NOT_OBSERVED and abs(s - e) > res:
                out.flags.append(f"fan-resolution-insufficient:{i}")
    return out


def fan_arrivals(metric, q, observers, n_dirs: int = 720, max_wind: int = 3) -> list:
    """Earliest hit of each observer by a fan of truncated null rays.

    Returns (s estimate or NOT_OBSERVED, resolution) per observer. Rays and
    observers are straight lines in the covering space.
    """
    if not is_flat(metric) or metric.d > 2:
        raise GeometryError("fan cross-check is implemented for flat 1+1 and 2+1")
    q = np.asarray(q, float)
    d = metric.d
    periods = metric.periods if isinstance(metric, StaticProduct) else (None,) * d
    if d == 1:
        dirs = [np.array([1.0]), np.array([-1.0])]
    else:
        th = 2 * np.pi * np.arange(n_dirs) / n_dirs
        dirs = [np.array([math.cos(a), math.sin(a)]) for a in th]
    dth = 0.0 if d == 1 else 2 * np.pi / n_dirs
    cuts = [torus_cut_closed_form(periods, u) for u in dirs]
    shifts = [np.zeros(d)]
    if any(p is not None for p in periods):
        ranges = [range(-max_wind, max_wind + 1) if p is not None else [0] for p in periods]
        shifts = [np.array([k * (p or 0.0) for k, p in zip(ks, periods)])
                  for ks in np.array(np.meshgrid(*ranges)).T.reshape(-1, d)]
    U = np.array([np.concatenate([[1.0], u]) for u in dirs])  # ray tangents
    rho = np.array(cuts)
    S = np.array([np.concatenate([[0.0], sh]) for sh in shifts])
    out = []
    for mu in observers:
        # q + r U = z + shift + s eta, least squares in (r, s) for every ray/shift pair
        b = (mu.z[None, :] + S)[:, None, :] - q[None, None, :]  # (shift, 1, n)
        e = mu.eta
        uu = np.einsum("ij,ij->i", U, U)[None, :]
        ue = (U @ e)[None, :]
        ee = float(e @ e)
        ub = b[:, 0, :] @ U.T  # (shift, ray)
        eb = (b[:, 0, :] @ e)[:, None]
        det = uu * ee - ue * ue
        r = (ee * ub - ue * eb) / det
        sv = (ue * ub - uu * eb) / det
        resid = r[..., None] * U[None] - sv[..., None] * e[None, None] - b
        miss = np.linalg.norm(resid, axis=-1)
        allow = 1e-9 + r * dth
        ok = (r >= -1e-12) & (r <= rho[None, :] + 1e-12) & (sv >= -1 - 1e-12) & (sv <= 1 + 1e-12) & (miss <= allow)
        if not ok.any():
            out.append((NOT_OBSERVED, 0.0))
            continue
        idx = np.unravel_index(np.argmin(np.where(ok, sv, np.inf)), sv.shape)
        out.append((float(sv[idx]), float(2 * allow[idx] + 1e-9)))
    return out


# --------------------------------------------------------- null length bound

def in_diamond(metric, x, p_minus, p_plus, tol: float = 1e-12) -> bool:
    return causal_leq(metric, p_minus, x, tol) and causal_leq(metric, x, p_plus, tol)


def null_length_bound(metric, p_minus, p_plus, n_base: int = 9, n_dirs: int = 16) -> float:
    """Longest g+-unit null chord of J(p-, p+) over a sampled fan.

    Base points: both tips plus an n_base grid on the axis between them and
    spatial offsets; each chord is extended both ways by bisection on
    diamond membership.
    """
    p_minus = np.asarray(p_minus, float)
    p_plus = np.asarray(p_plus, float)
    if not causal_leq(metric, p_minus, p_plus):
        raise PreconditionError("p- must precede p+")
    if np.allclose(p_minus, p_plus):
        return 0.0
    d = len(p_minus) - 1
    if d == 1:
        dirs = [np.array([1.0]), np.array([-1.0])]
    else:
        rng = np.random.default_rng(0)
        raw = rng.normal(size=(n_dirs, d))
        dirs = list(raw / np.linalg.norm(raw, axis=1, keepdims=True))
        if d == 2:
            dirs = [np.array([math.cos(a), math.sin(a)]) for a in 2 * np.pi * np.arange(n_dirs) / n_dirs]
    height = p_plus[0] - p_minus[0]
    bases = [p_minus, p_plus]
    for a in np.linspace(0, 1, n_base):
        c = p_minus + a * (p_plus - p_minus)
        bases.append(c)
        for u in dirs:
            off = min(a, 1 - a) * height * 0.999
            bases.append(c + np.concatenate([[0.0], off * u]))
    best = 0.0
    for b in bases:
        if not in_diamond(metric, b, p_minus, p_plus):
            continue
        for u in dirs:
            v = np.concatenate([[1.0], u])
            n = math.sqrt(float(v @ metric.g_plus(b) @ v))
            v = v / n

            def reach(sign):
                lo, hi = 0.0, 2 * math.sqrt(2) * height + 1.0
                for _ in range(60):
                    mid = (lo + hi) / 2
                    if in_diamond(metric, b + sign * mid * v, p_minus, p_plus):
                        lo = mid
                    else:
                        hi = mid
                return lo

            best = max(best, reach(1) + reach(-1))
    return best


# ------------------------------------------------------------------ kappa

@dataclass
class KappaReport:
    theta1: float
    kappa1: float
    kappa2: float
    min_rho: float
    evidence: list
    flags: list = field(default_factory=list)
    modulus: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"theta1": self.theta1, "kappa1": self.kappa1, "kappa2": self.kappa2, "min_rho": self.min_rho,
                "flags": self.flags, "modulus": self.modulus, "n_samples": len(self.evidence)}


def null_dirs(d: int, n: int) -> list:
    if d == 1:
        return [np.array([1.0]), np.array([-1.0])]
    if d == 2:
        return [np.array([math.cos(a), math.sin(a)]) for a in 2 * np.pi * np.arange(n) / n]
    pts = qmc.Sobol(2, scramble=False).random(n)
    out = []
    for u, w in pts:
        z = 2 * u - 1
        ph = 2 * np.pi * w
        r = math.sqrt(1 - z * z)
        out.append(np.array([r * math.cos(ph), r * math.sin(ph), z]))
    return out


def kappa_estimates(metric, mu: Observer, s_minus: float, s_plus: float, n_points: int = 9, n_dirs: int = 16,
                    kappa_cap: float = 0.2, s_plus2: float | None = None) -> KappaReport:
    """Sampled constants of the cut-point margins.

    Null directions are sampled as (1, omega) with |omega| = 1 (the time
    component normalized), matching the cut-value convention.
    """
    if not is_flat(metric):
        raise GeometryError("kappa estimates use closed-form cut values")
    s_plus2 = (s_plus + 1) / 2 if s_plus2 is None else s_plus2
    flags = []
    rs = np.linspace(s_minus, s_plus, n_points)
    dirs = null_dirs(metric.d, n_dirs)
    evidence = []
    min_rho = INF
    for r1 in rs:
        xh = mu.at(r1)
        for u in dirs:
            xi = np.concatenate([[1.0], u])
            rho = cut_value(metric, xh, xi).value
            evidence.append({"r1": float(r1), "dir": u.tolist(), "rho": rho})
            min_rho = min(min_rho, rho)
    if math.isinf(min_rho):
        flags.append("no cut points; kappa1 = horizon cap")
        kappa1 = kappa_cap
    else:
        kappa1 = min(0.999 * min_rho / 5, kappa_cap)
    # margin of f^- past the first cut point, for samples ending before mu(s_+2)
    top = mu.at(s_plus2)
    eps1 = INF
    for ev in evidence:
        if math.isinf(ev["rho"]):
            continue
        xh = mu.at(ev["r1"])
        xi = np.concatenate([[1.0], ev["dir"]])
        t = kappa1 + cut_value(metric, xh + kappa1 * xi, xi).value
        p2 = xh + t * xi
        if causal_leq(metric, p2, top) and causal_leq(metric, mu.at(-1.0), p2):
            eps1 = min(eps1, obs_time(mu, p2, "minus") - ev["r1"])
    if math.isinf(eps1):
        flags.append("no sampled cut point below s_+2; kappa2 = observer span cap")
        kappa2 = (s_plus - s_minus) / 4
        eps1 = 4 * kappa2
    else:
        kappa2 = eps1 / 4
    # sampled continuity modulus of f^- around the observer
    modulus = []
    theta1 = None
    rng = np.random.default_rng(1)
    for k in range(1, 12):
        delta = 2.0 ** -k
        worst = 0.0
        for r1 in rs:
            xh = mu.at(r1)
            base = obs_time(mu, xh, "minus") if causal_leq(metric, mu.at(-1.0), xh) else r1
            for _ in range(8):
                off = rng.normal(size=len(xh))
                x = xh + delta * off / np.linalg.norm(off)
                try:
                    worst = max(worst, abs(obs_time(mu, x, "minus") - base))
                except PreconditionError:
                    continue
        modulus.append((delta, worst))
        if theta1 is None and worst < eps1 / 2:
            theta1 = delta
    if theta1 is None:
        theta1 = modulus[-1][0]
        flags.append("continuity modulus not resolved; theta1 = smallest probe")
    return KappaReport(theta1, kappa1, kappa2, min_rho, evidence, flags, modulus)
