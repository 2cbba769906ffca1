"""Finite-difference lab for (d_t^2 - Laplacian) u + a u^2 = f in 1+1 and 2+1.

All solves use the explicit leapfrog scheme

    u^{n+1} = 2 u^n - u^{n-1} + dt^2 (L u^n + f^n - a (u^n)^2)

with zero data before the sources switch on. Several fields can be stepped
together when the source of one is built from the others at the same time
level; this is how the perturbation series and the mixed interaction waves
are computed in one pass.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import integrate


class WaveError(ValueError):
    pass


class CFLError(WaveError):
    pass


class SupportEscapeError(WaveError):
    pass


class BlowUpError(WaveError):
    def __init__(self, msg, t):
        super().__init__(msg)
        self.t = t


# -------------------------------------------------------------------- grid

@dataclass
class Grid:
    d: int
    lo: tuple
    hi: tuple
    h: float
    T: float
    cfl: float = 0.5
    cfl_max: float = 0.5
    h_coeff: object = None  # optional 1-D metric coefficient h(y) for -dt^2 + h dy^2

    def __post_init__(self):
        if self.d not in (1, 2):
            raise WaveError("grid dimension must be 1 or 2")
        if self.h_coeff is not None and self.d != 1:
            raise WaveError("variable h is supported in 1+1 only")
        speed = 1.0
        if self.h_coeff is not None:
            speed = 1.0 / math.sqrt(float(np.min(self.h_coeff(self.axes[0]))))
        ratio = self.cfl
        if ratio > self.cfl_max:
            raise CFLError(f"CFL ratio {ratio} exceeds {self.cfl_max}")
        self.dt = ratio * self.h / (math.sqrt(self.d) * speed)
        self.nt = int(math.ceil(self.T / self.dt - 1e-9))
        self.dt = self.T / self.nt
        if self.dt * math.sqrt(self.d) * speed / self.h > self.cfl_max + 1e-12:
            raise CFLError("CFL violated after rounding the step count")

    @property
    def axes(self) -> list:
        return [self.lo[i] + self.h * np.arange(int(round((self.hi[i] - self.lo[i]) / self.h)) + 1)
                for i in range(self.d)]

    @property
    def shape(self) -> tuple:
        return tuple(len(a) for a in self.axes)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.nt + 1)

    def mesh(self) -> tuple:
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    def to_dict(self) -> dict:
        return {"d": self.d, "lo": list(self.lo), "hi": list(self.hi), "h": self.h, "T": self.T, "dt": self.dt,
                "nt": self.nt, "cfl": self.cfl}


def causal_box(d: int, support_lo, support_hi, t_start: float, T: float, h: float, margin: float = 0.1, **kw) -> Grid:
    """Grid whose boundary stays outside J^+(supports) up to time T."""
    reach = T - t_start + margin
    lo = tuple(float(np.floor((support_lo[i] - reach) / h) * h) for i in range(d))
    hi = tuple(float(np.ceil((support_hi[i] + reach) / h) * h) for i in range(d))
    return Grid(d, lo, hi, h, T, **kw)


def _laplacian(u: np.ndarray, grid: Grid, sqrt_h=None) -> np.ndarray:
    out = np.zeros_like(u)
    h2 = grid.h * grid.h
    if grid.d == 1:
        if sqrt_h is None:
            out[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / h2
        else:
            sh, shm = sqrt_h
            flux = (u[1:] - u[:-1]) / shm
            out[1:-1] = (flux[1:] - flux[:-1]) / (sh[1:-1] * h2)
    else:
        out[1:-1, 1:-1] = (u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:] + u[1:-1, :-2] - 4 * u[1:-1, 1:-1]) / h2
    return out


# ------------------------------------------------------------------ sources

class Source:
    """A discrete source: ``at(n, grid)`` returns f^n (or None when zero)."""

    t_range = (0.0, 0.0)
    lo = ()
    hi = ()

    def at(self, n: int, grid: Grid):
        raise NotImplementedError

    def scaled(self, c: float) -> "Source":
        return Scaled(self, c)

    def to_dict(self) -> dict:
        return {"kind": type(self).__name__}


class Scaled(Source):
    def __init__(self, src, c):
        self.src, self.c = src, c
        self.t_range, self.lo, self.hi = src.t_range, src.lo, src.hi

    def at(self, n, grid):
        f = self.src.at(n, grid)
        return None if f is None else self.c * f


class Zero(Source):
    def at(self, n, grid):
        return None


@dataclass
class PolyBox:
    """f(t, x) = p_t(t) p_x(x) on [t0, t1] x [x0, x1] (1+1), zero elsewhere.

    Polynomial coefficients are in increasing degree.
    """

    t0: float
    t1: float
    x0: float
    x1: float
    pt: tuple = (1.0,)
    px: tuple = (1.0,)

    def __call__(self, t, x):
        inside = (t >= self.t0) & (t <= self.t1) & (x >= self.x0) & (x <= self.x1)
        return np.where(inside, P.polyval(t, self.pt) * P.polyval(x, self.px), 0.0)

    def shifted(self, dt: float) -> "PolyBox":
        # p_t(s - dt) by composition
        comp = np.array([0.0])
        for k, c in enumerate(self.pt):
            comp = P.polyadd(comp, c * P.polypow([-dt, 1.0], k))
        return PolyBox(self.t0 + dt, self.t1 + dt, self.x0, self.x1, tuple(comp), self.px)


def bump_poly(lo: float, hi: float, amp: float = 1.0) -> tuple:
    """amp * (1 - s^2)^2 with s mapping [lo, hi] onto [-1, 1]; C^1 at the ends."""
    c, r = (lo + hi) / 2, (hi - lo) / 2
    s = np.array([-c / r, 1.0 / r])
    one_minus = P.polysub([1.0], P.polymul(s, s))
    return tuple(amp * P.polymul(one_minus, one_minus))


class PolySource(Source):
    """Sum of PolyBox terms sampled on the grid (1+1)."""

    def __init__(self, boxes):
        self.boxes = list(boxes)
        self.t_range = (min(b.t0 for b in self.boxes), max(b.t1 for b in self.boxes))
        self.lo = (min(b.x0 for b in self.boxes),)
        self.hi = (max(b.x1 for b in self.boxes),)

    def at(self, n, grid):
        t = n * grid.dt
        if t < self.t_range[0] - 1e-12 or t > self.t_range[1] + 1e-12:
            return None
        x = grid.axes[0]
        return sum(b(t, x) for b in self.boxes)

    def to_dict(self):
        return {"kind": "poly", "boxes": [vars(b) | {"pt": list(b.pt), "px": list(b.px)} for b in self.boxes]}


class FieldSource(Source):
    """Smooth callable f(t, *coords) with a declared spacetime support box."""

    def __init__(self, f, t_range, lo, hi):
        self.f, self.t_range, self.lo, self.hi = f, tuple(t_range), tuple(lo), tuple(hi)

    def at(self, n, grid):
        t = n * grid.dt
        if t < self.t_range[0] - 1e-12 or t > self.t_range[1] + 1e-12:
            return None
        return self.f(t, *grid.mesh())


def smooth_bump(s):
    """C-infinity bump on (-1, 1), equal to 1 at 0."""
    s = np.asarray(s, float)
    out = np.zeros_like(s)
    m = np.abs(s) < 1
    out[m] = np.exp(1 - 1 / (1 - s[m] ** 2))
    return out


def ridge_profile(s, a: int = 1, w: float = 0.1):
    """Front profile s_+^a times a smooth cutoff of width w: singular only at s = 0."""
    s = np.asarray(s, float)
    return np.maximum(s, 0.0) ** a * smooth_bump(s / w)


class PlanePulse(Source):
    """Plane pulse created at t0 and moving in direction ``omega``.

    The discrete source lives on two time levels. It produces the data
    u = A W(x) P(omega.x - c - (t - t0)) at level n0 and its one-way discrete
    continuation at n0 + 1, after which the field evolves freely. P is ``ridge_profile`` (singular front)
    and W a smooth transverse window in 2+1.
    """

    def __init__(self, omega, c: float, t0: float, amp: float = 1.0, a: int = 1, w: float = 0.1,
                 center=None, window: float = 0.6):
        self.omega = np.asarray(omega, float) / np.linalg.norm(omega)
        self.c, self.t0, self.amp, self.a, self.w = c, t0, amp, a, w
        self.center = None if center is None else np.asarray(center, float)
        self.window = window
        d = len(self.omega)
        self.t_range = (t0, t0)
        if d == 1:
            s0 = c * self.omega[0]
            lo, hi = min(s0, s0 - self.omega[0] * w), max(s0, s0 - self.omega[0] * w)
            self.lo, self.hi = (lo - 0.05,), (hi + 0.05,)
        else:
            ctr = self.center if self.center is not None else c * self.omega
            self.lo = tuple(ctr - window - w)
            self.hi = tuple(ctr + window + w)

    def values(self, t: float, grid: Grid) -> np.ndarray:
        return self.field_at(t, *grid.mesh())

    def field_at(self, t, *X):
        """Continuum pulse (zero before t0), pointwise."""
        if np.all(np.asarray(t) < self.t0):
            return np.zeros(np.broadcast(*X).shape)
        s = sum(o * x for o, x in zip(self.omega, X)) - self.c - (t - self.t0)
        u = self.amp * ridge_profile(-s, self.a, self.w)
        if len(X) == 2:
            perp = np.array([-self.omega[1], self.omega[0]])
            ctr = self.center if self.center is not None else self.c * self.omega
            r = sum(p * (x - c0) for p, x, c0 in zip(perp, X, ctr))
            u = u * smooth_bump(r / self.window)
        return u

    def launch(self, grid: Grid) -> tuple:
        """Levels n0 and n0 + 1 of a one-way discrete wave.

        Level n0 samples the profile; level n0 + 1 advances every Fourier
        mode by the leapfrog dispersion relation, keeping only motion along
        omega. Sampling both levels from the continuum profile would also
        launch an O(h) counter-moving wave from the kink.
        """
        n0 = int(round(self.t0 / grid.dt))
        A = self.values(n0 * grid.dt, grid)
        ks = np.meshgrid(*[2 * np.pi * np.fft.fftfreq(n, grid.h) for n in grid.shape], indexing="ij")
        s2 = sum(np.sin(k * grid.h / 2) ** 2 for k in ks) * (grid.dt / grid.h) ** 2
        freq = 2 / grid.dt * np.arcsin(np.sqrt(np.minimum(s2, 1.0)))
        sign = np.sign(sum(o * k for o, k in zip(self.omega, ks)))
        # one-way near k = 0, standing near Nyquist where the sign of k.omega
        # jumps between aliased neighbours
        kmax = np.max([np.abs(k) * grid.h / np.pi for k in ks], axis=0)
        taper = np.where(kmax < 0.5, 1.0, np.cos(np.pi * np.clip(kmax - 0.5, 0, 0.5)) ** 2)
        H = np.cos(freq * grid.dt) - 1j * sign * taper * np.sin(freq * grid.dt)
        B = np.real(np.fft.ifftn(np.fft.fftn(A) * H))
        return n0, A, B

    def at(self, n, grid):
        key = (id(grid), grid.dt, grid.shape)
        if getattr(self, "_cache_key", None) != key:
            self._cache_key, self._cache = key, self.launch(grid)
        n0, A, B = self._cache
        if n == n0 - 1:
            return A / grid.dt**2
        if n == n0:
            return (B - 2 * A) / grid.dt**2 - _laplacian(A, grid)
        return None

    def to_dict(self):
        return {"kind": "plane_pulse", "omega": self.omega.tolist(), "c": self.c, "t0": self.t0, "amp": self.amp,
                "a": self.a, "w": self.w}


class Sum(Source):
    def __init__(self, srcs):
        self.srcs = list(srcs)
        self.t_range = (min(s.t_range[0] for s in self.srcs), max(s.t_range[1] for s in self.srcs))
        d = len(self.srcs[0].lo)
        self.lo = tuple(min(s.lo[i] for s in self.srcs) for i in range(d))
        self.hi = tuple(max(s.hi[i] for s in self.srcs) for i in range(d))

    def at(self, n, grid):
        parts = [f for f in (s.at(n, grid) for s in self.srcs) if f is not None]
        return sum(parts) if parts else None


# ------------------------------------------------------------------ fields

@dataclass
class WaveField:
    grid: Grid
    values: np.ndarray  # (n stored levels, *shape)
    steps: np.ndarray  # time indices of the stored levels
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.steps * self.grid.dt

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    def level(self, n: int) -> np.ndarray:
        i = int(np.searchsorted(self.steps, n))
        if i >= len(self.steps) or self.steps[i] != n:
            raise WaveError(f"time level {n} not stored")
        return self.values[i]

    def sample(self, t: float, x) -> float:
        """Value at a grid time level and (interpolated) spatial point, 1+1."""
        n = int(round(t / self.grid.dt))
        return float(np.interp(x, self.grid.axes[0], self.level(n)))

    def save_csv(self, path, stride: int = 1) -> None:
        rows = ["t," + ",".join(f"x{i + 1}" for i in range(self.grid.d)) + ",value"]
        X = [a.ravel() for a in self.grid.mesh()]
        for k in range(0, len(self.steps), stride):
            t = self.steps[k] * self.grid.dt
            vals = self.values[k].ravel()
            for j in range(len(vals)):
                rows.append(f"{t:.9g}," + ",".join(f"{x[j]:.9g}" for x in X) + f",{vals[j]:.12g}")
        Path(path).write_text("\n".join(rows) + "\n")

    def save_binary(self, path) -> None:
        path = Path(path)
        np.ascontiguousarray(self.values, dtype="<f8").tofile(path)
        side = {"grid": self.grid.to_dict(), "steps": self.steps.tolist(), "shape": list(self.values.shape),
                "dtype": "float64 little-endian row-major", **self.meta}
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(side, indent=2))


def _dirichlet(u: np.ndarray) -> None:
    u[0] = u[-1] = 0.0
    if u.ndim == 2:
        u[:, 0] = u[:, -1] = 0.0


def _store_plan(grid: Grid, store):
    if store == "all":
        return set(range(grid.nt + 1))
    if store == "final":
        return {grid.nt}
    if isinstance(store, int):
        return set(range(0, grid.nt + 1, store)) | {grid.nt}
    return set(store)


def evolve(grid: Grid, n_fields: int, source_fn, store="all", a=0.0, nonlinear=(), cap=None, sqrt_h=None):
    """Step several coupled fields.

    ``source_fn(n, levels)`` returns a list of per-field sources f^n (None for
    zero) given the current levels. Fields listed in ``nonlinear`` get the
    -a u^2 term. Returns a list of WaveField.
    """
    plan = _store_plan(grid, store)
    shape = grid.shape
    prev = [np.zeros(shape) for _ in range(n_fields)]
    cur = [np.zeros(shape) for _ in range(n_fields)]
    stored = [[] for _ in range(n_fields)]
    steps = []
    a_arr = a(*grid.mesh()) if callable(a) else a
    if sqrt_h is None and grid.h_coeff is not None:
        x = grid.axes[0]
        sqrt_h = (np.sqrt(grid.h_coeff(x)), np.sqrt(grid.h_coeff((x[1:] + x[:-1]) / 2)))
    for n in range(grid.nt + 1):
        if n in plan:
            steps.append(n)
            for k in range(n_fields):
                stored[k].append(cur[k].copy())
        if n == grid.nt:
            break
        srcs = source_fn(n, cur)
        nxt = []
        for k in range(n_fields):
            acc = _laplacian(cur[k], grid, sqrt_h)
            if srcs[k] is not None:
                acc = acc + srcs[k]
            if k in nonlinear:
                acc = acc - a_arr * cur[k] ** 2
            u = 2 * cur[k] - prev[k] + grid.dt**2 * acc
            _dirichlet(u)
            nxt.append(u)
        if cap is not None:
            for k in nonlinear:
                m = float(np.max(np.abs(nxt[k])))
                if not math.isfinite(m) or m > cap:
                    raise BlowUpError(f"blow-up: |u| = {m:.3g} exceeds cap {cap:.3g}", (n + 1) * grid.dt)
        prev, cur = cur, nxt
    st = np.array(steps)
    return [WaveField(grid, np.array(stored[k]), st) for k in range(n_fields)]


def check_support(grid: Grid, src: Source) -> None:
    """Raise if J^+(supp f) reaches the boundary before T."""
    reach = grid.T - src.t_range[0]
    for i in range(grid.d):
        if src.lo[i] - reach < grid.lo[i] + grid.h or src.hi[i] + reach > grid.hi[i] - grid.h:
            raise SupportEscapeError(f"domain of influence leaves the box along axis {i} before T")


def support_report(u: WaveField, src: Source, cells: int = 1) -> dict:
    """Cell-by-cell support audit against the source's spacetime box.

    ``numerical`` is the largest |u| outside the scheme's own domain of
    influence (one cell per step), which must be exactly zero.
    ``physical`` is the largest |u| outside J^+(supp f) dilated by ``cells``
    cells, relative to max |u|; leapfrog precursors make it small, not zero.
    """
    g = u.grid
    X = g.mesh()
    peak = float(np.max(np.abs(u.values))) or 1.0
    num = phys = 0.0
    n0 = int(math.floor(src.t_range[0] / g.dt + 1e-9))
    for k, n in enumerate(u.steps):
        v = np.abs(u.values[k])
        t = n * g.dt
        if t < src.t_range[0] - g.dt:
            num = max(num, float(v.max()))
            continue
        gap = np.zeros(g.shape)
        for i in range(g.d):
            gap = np.maximum(gap, np.maximum(src.lo[i] - X[i], X[i] - src.hi[i]))
        out_num = gap > (n - n0 + 1) * g.h + 1e-12
        out_phys = gap > max(t - src.t_range[0], 0.0) + cells * g.h + 1e-12
        if g.d == 2:
            d2 = np.zeros(g.shape)
            for i in range(g.d):
                d2 += np.maximum(np.maximum(src.lo[i] - X[i], X[i] - src.hi[i]), 0) ** 2
            out_phys = np.sqrt(d2) > max(t - src.t_range[0], 0.0) + cells * g.h + 1e-12
        if out_num.any():
            num = max(num, float(v[out_num].max()))
        if out_phys.any():
            phys = max(phys, float(v[out_phys].max()) / peak)
    return {"numerical": num, "physical": phys}


def solve_linear(grid: Grid, src: Source, store="all", check: bool = True) -> WaveField:
    """u = Q f with zero data in the past."""
    if check and not isinstance(src, Zero):
        check_support(grid, src)
    (u,) = evolve(grid, 1, lambda n, lv: [src.at(n, grid)], store)
    return u


def solve_linear_adjoint(grid: Grid, g_levels: np.ndarray) -> np.ndarray:
    """Q* g: time-reversed causal inverse applied to a level array (nt+1, *shape)."""
    rev = g_levels[::-1]
    (u,) = evolve(grid, 1, lambda n, lv: [rev[n]], "all")
    return u.values[::-1]


def solve_nonlinear(grid: Grid, srcs, a, eps, store="all", cap_factor: float = 1e6, check: bool = True) -> WaveField:
    """(d_t^2 - L) u + a u^2 = sum eps_j f_j."""
    srcs = srcs if isinstance(srcs, (list, tuple)) else [srcs]
    eps = eps if isinstance(eps, (list, tuple, np.ndarray)) else [eps]
    if check:
        for s in srcs:
            check_support(grid, s)
    amp = max(abs(e) for e in eps) or 1.0
    cap = cap_factor * amp

    def fn(n, lv):
        parts = [e * f for e, f in ((e, s.at(n, grid)) for e, s in zip(eps, srcs)) if f is not None]
        return [sum(parts) if parts else None]

    (u,) = evolve(grid, 1, fn, store, a=a, nonlinear=(0,), cap=cap)
    return u


# ------------------------------------------------------------ closed forms

def closed_form_Q_1p1(boxes, t, x, nodes: int = 24):
    """(Qf)(t, x) = 1/2 integral of f over the backward characteristic triangle.

    f is a sum of PolyBox terms; each piece between breakpoints is a
    polynomial in s, integrated exactly by Gauss-Legendre. t and x may be
    arrays (broadcast together).
    """
    if not isinstance(boxes, (list, tuple)):
        boxes = [boxes]
    t, x = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
    gl_x, gl_w = np.polynomial.legendre.leggauss(nodes)
    total = np.zeros(t.shape)
    for b in boxes:
        if not isinstance(b, PolyBox):
            raise WaveError("closed form supports PolyBox terms only")
        Px = P.polyint(b.px)
        lo_s = np.full(t.shape, b.t0)
        hi_s = np.maximum(np.minimum(b.t1, t), lo_s)
        cand = [x + t - b.x1, x + t - b.x0, b.x0 - x + t, b.x1 - x + t]
        pts = np.sort(np.stack([lo_s, hi_s] + [np.clip(c, lo_s, hi_s) for c in cand]), axis=0)
        for s0, s1 in zip(pts[:-1], pts[1:]):
            half = (s1 - s0)[..., None] / 2
            s = half * gl_x + ((s0 + s1) / 2)[..., None]
            up = np.minimum(x[..., None] + t[..., None] - s, b.x1)
            dn = np.maximum(x[..., None] - t[..., None] + s, b.x0)
            inner = np.where(up > dn, P.polyval(up, Px) - P.polyval(dn, Px), 0.0)
            total += half[..., 0] * np.sum(gl_w * P.polyval(s, b.pt) * inner, axis=-1)
    out = 0.5 * total
    return float(out) if out.ndim == 0 else out


def closed_form_field(boxes, grid: Grid, n: int) -> np.ndarray:
    return closed_form_Q_1p1(boxes, n * grid.dt, grid.axes[0])


def nested_Q_1p1(func, t: float, x: float, xi_breaks=(), eta_breaks=(), nodes: int = 16) -> float:
    """1/2 integral of func(s, y) over the backward triangle of (t, x).

    Works in xi = y - s, eta = y + s (dy ds = dxi deta / 2) on the square
    [x - t, x + t]^2; func must vanish for s <= 0, which covers the part of
    the square outside the triangle. Composite Gauss-Legendre with panels
    split at the given characteristic breakpoints, where func may have kinks.
    """
    if t <= 0:
        return 0.0
    g, wts = np.polynomial.legendre.leggauss(nodes)
    lo, hi = x - t, x + t

    def panels(br):
        pts = sorted({lo, hi} | {b for b in br if lo < b < hi})
        return list(zip(pts[:-1], pts[1:]))

    total = 0.0
    for a0, a1 in panels(xi_breaks):
        xi = (a1 - a0) / 2 * g + (a0 + a1) / 2
        for b0, b1 in panels(eta_breaks):
            eta = (b1 - b0) / 2 * g + (b0 + b1) / 2
            XI, ETA = np.meshgrid(xi, eta, indexing="ij")
            S, Y = (ETA - XI) / 2, (ETA + XI) / 2
            vals = np.where(S > 0, func(S, Y), 0.0)
            total += (a1 - a0) * (b1 - b0) / 4 * float(wts @ vals @ wts)
    return 0.25 * total


def poly_breaks(boxes) -> tuple:
    """Characteristic lines through the corners of PolyBox supports."""
    xi = {b.x0 - b.t0 for b in boxes} | {b.x1 - b.t0 for b in boxes} | {b.x0 - b.t1 for b in boxes} | {
        b.x1 - b.t1 for b in boxes}
    eta = {b.x0 + b.t0 for b in boxes} | {b.x1 + b.t0 for b in boxes} | {b.x0 + b.t1 for b in boxes} | {
        b.x1 + b.t1 for b in boxes}
    return sorted(xi), sorted(eta)


def closed_form_w2_1p1(boxes, a: float, t: float, x: float, nodes: int = 16) -> float:
    """w2 = -Q(a w1^2) with w1 from the exact closed form, by nested quadrature."""
    boxes = boxes if isinstance(boxes, (list, tuple)) else [boxes]
    xi, eta = poly_breaks(boxes)
    return -a * nested_Q_1p1(lambda S, Y: closed_form_Q_1p1(boxes, S, Y) ** 2, t, x, xi, eta, nodes)


def closed_form_M2_1p1(p1: "PlanePulse", p2: "PlanePulse", a: float, t: float, x: float) -> float:
    """-2 Q(a u1 u2) for a right-moving and a left-moving 1+1 pulse.

    With xi = y - s and eta = y + s the product separates, dy ds = dxi deta / 2
    and the backward triangle becomes xi >= x - t, eta <= x + t, so the
    double integral is a product of two one-dimensional ones.
    """
    if p1.omega[0] < 0:
        p1, p2 = p2, p1
    if not (p1.omega[0] > 0 > p2.omega[0]):
        raise WaveError("need one right-moving and one left-moving pulse")
    # u1 = A1 R(-(xi - c1 + t01)),  u2 = A2 R(-(-eta - c2 + t02))
    lo1, hi1 = p1.c - p1.t0 - p1.w, p1.c - p1.t0
    lo2, hi2 = -(p2.c - p2.t0), -(p2.c - p2.t0) + p2.w
    F1 = lambda xi: p1.amp * ridge_profile(-(xi - p1.c + p1.t0), p1.a, p1.w)
    F2 = lambda eta: p2.amp * ridge_profile(-(-eta - p2.c + p2.t0), p2.a, p2.w)
    a1 = max(lo1, x - t)
    b2 = min(hi2, x + t)
    I1 = integrate.quad(F1, a1, hi1, epsabs=1e-15, epsrel=1e-13, limit=200)[0] if hi1 > a1 else 0.0
    I2 = integrate.quad(F2, lo2, b2, epsabs=1e-15, epsrel=1e-13, limit=200)[0] if b2 > lo2 else 0.0
    return -2.0 * a * 0.5 * 0.5 * I1 * I2


# ------------------------------------------------------- expansion series

@dataclass
class ExpansionResult:
    w: list  # w1..w4 (WaveField)
    diagnostics: dict = field(default_factory=dict)


def expansion_terms(grid: Grid, src: Source, a, store="all") -> ExpansionResult:
    """w1 = Qf, w2 = -Q(a w1^2), w3 = 2Q(a w1 Q(a w1 w1)),
    w4 = -Q(a Q(a w1 w1)^2) - 4Q(a w1 Q(a w1 Q(a w1 w1)))."""
    check_support(grid, src)
    a_arr = a(*grid.mesh()) if callable(a) else a

    def fn(n, lv):
        w1, p2, p3, _, _ = lv
        return [src.at(n, grid), a_arr * w1 * w1, a_arr * w1 * p2, a_arr * p2 * p2, a_arr * w1 * p3]

    w1, p2, p3, q4a, q4b = evolve(grid, 5, fn, store)
    w2 = WaveField(grid, -p2.values, p2.steps)
    w3 = WaveField(grid, 2 * p3.values, p3.steps)
    w4 = WaveField(grid, -q4a.values - 4 * q4b.values, q4a.steps)
    diag = {f"w{j + 1}_linf": float(np.max(np.abs(w.values))) for j, w in enumerate((w1, w2, w3, w4))}
    return ExpansionResult([w1, w2, w3, w4], diag)


def interaction_waves(grid: Grid, srcs, a, store="final") -> dict:
    """Mixed-derivative coefficients W[S] for every nonempty subset S of sources.

    W[{j}] = Q f_j and W[S] = -Q(a sum W[A] W[B]) over ordered splits of S
    into two nonempty parts; W[all] is the mixed derivative M^(l).
    """
    for s in srcs:
        check_support(grid, s)
    L = len(srcs)
    subsets = [frozenset(c) for r in range(1, L + 1) for c in itertools.combinations(range(L), r)]
    index = {S: i for i, S in enumerate(subsets)}
    a_arr = a(*grid.mesh()) if callable(a) else a
    splits = {}
    for S in subsets:
        if len(S) > 1:
            pairs = []
            for r in range(1, len(S)):
                for A in itertools.combinations(sorted(S), r):
                    A = frozenset(A)
                    pairs.append((index[A], index[S - A]))
            splits[index[S]] = pairs

    def fn(n, lv):
        out = []
        for i, S in enumerate(subsets):
            if len(S) == 1:
                out.append(srcs[next(iter(S))].at(n, grid))
            else:
                acc = sum(lv[p] * lv[q] for p, q in splits[i])
                out.append(-a_arr * acc)
        return out

    fields = evolve(grid, len(subsets), fn, store)
    return {S: fields[index[S]] for S in subsets}


def corner_difference(grid: Grid, srcs, a, eps: float, store="final") -> np.ndarray:
    """Centered 2^l-corner estimate of the mixed derivative d^l u / d eps_1..d eps_l at 0."""
    L = len(srcs)
    acc = None
    for signs in itertools.product((1, -1), repeat=L):
        u = solve_nonlinear(grid, srcs, a, [s * eps for s in signs], store=store).values
        term = np.prod(signs) * u
        acc = term if acc is None else acc + term
    return acc / (2 * eps) ** L


# ------------------------------------------------------------ remainder fit

@dataclass
class SlopeFit:
    slope: float
    eps: list
    norms: list
    flagged: bool = False
    note: str = ""

    def to_dict(self) -> dict:
        return {"slope": self.slope, "eps": self.eps, "norms": self.norms, "flagged": self.flagged,
                "note": self.note}


def _l2(grid: Grid, v: np.ndarray) -> float:
    return float(math.sqrt(np.sum(v * v) * grid.h**grid.d * grid.dt))


def remainder_slope(grid: Grid, src: Source, a, eps_list, order: int = 4, floor: float = 1e-13) -> SlopeFit:
    """Least-squares slope of log ||u_eps - sum_{j<=order} eps^j w_j|| against log eps."""
    eps_list = sorted(eps_list)
    if eps_list[-1] / eps_list[0] < 10 - 1e-9:
        raise WaveError("eps list must span at least one decade")
    ex = expansion_terms(grid, src, a)
    w = [f.values for f in ex.w]
    norms = []
    for e in eps_list:
        u = solve_nonlinear(grid, src, a, e).values
        r = u - sum(e ** (j + 1) * w[j] for j in range(order))
        norms.append(_l2(grid, r))
    ref = [_l2(grid, e * w[0]) for e in eps_list]
    flagged = any(nv <= floor * max(rv, 1e-300) for nv, rv in zip(norms, ref))
    logs = np.log(np.maximum(norms, 1e-300))
    slope = float(np.polyfit(np.log(eps_list), logs, 1)[0])
    note = "remainder at the rounding floor" if flagged else ""
    return SlopeFit(slope, list(eps_list), norms, flagged, note)


# ------------------------------------------------- interaction experiment

def crossing_point(pulses) -> tuple:
    """Event where all fronts meet, and the miss distance of the fit.

    Front j sits at omega_j . x = c_j + (t - t0_j).
    """
    d = len(pulses[0].omega)
    A = np.array([np.concatenate([[-1.0], p.omega]) for p in pulses])
    b = np.array([p.c - p.t0 for p in pulses])
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    miss = float(np.linalg.norm(A @ sol - b))
    rank = np.linalg.matrix_rank(A)
    if rank < min(len(pulses), d + 1):
        miss = math.inf
    return sol, miss


def _highpass_energy(M: np.ndarray, d: int) -> np.ndarray:
    """Squared second differences, summed over all axes."""
    E = np.zeros_like(M)
    if d == 1:
        E[1:-1] = (M[2:] - 2 * M[1:-1] + M[:-2]) ** 2
    else:
        E[1:-1, 1:-1] = (M[2:, 1:-1] - 2 * M[1:-1, 1:-1] + M[:-2, 1:-1]) ** 2 + (
            M[1:-1, 2:] - 2 * M[1:-1, 1:-1] + M[1:-1, :-2]) ** 2
    return E


def _window_sum(E: np.ndarray, d: int, k: int = 1) -> np.ndarray:
    """Sum over a (2k+1)-cell window (3 cells across by default)."""
    out = np.zeros_like(E)
    if d == 1:
        for s in range(-k, k + 1):
            out += np.roll(E, s)
    else:
        for s in range(-k, k + 1):
            for r in range(-k, k + 1):
                out += np.roll(np.roll(E, s, 0), r, 1)
    return out


@dataclass
class ContrastReport:
    ratio: float
    on: float
    off: float
    verdict: str
    q: list
    miss: float
    n_on: int
    n_off: int

    def to_dict(self) -> dict:
        return dict(vars(self))


def cone_score(grid: Grid, M: np.ndarray, floor: float = 1e-30) -> np.ndarray:
    """Windowed second-difference energy over windowed field energy, per cell."""
    return _window_sum(_highpass_energy(M, grid.d), grid.d) / (_window_sum(M * M, grid.d) + floor)


def cone_contrast(grid: Grid, M: np.ndarray, q, t_obs: float, pulses, tube: int = 2, margin: float = 0.08,
                  floor: float = 1e-30) -> tuple:
    """Detector: windowed second-difference energy over local field energy.

    On-cone cells lie within ``tube`` cells of the sphere |x - q_x| = t_obs - q_t;
    off-cone cells lie strictly inside the cone, away from every incoming
    front and from the pairwise front intersections.
    """
    X = grid.mesh()
    d = grid.d
    R = t_obs - q[0]
    r = np.sqrt(sum((x - qx) ** 2 for x, qx in zip(X, q[1:])))
    on = np.abs(r - R) <= tube * grid.h
    off = r < R - margin
    for p in pulses:
        s = sum(o * x for o, x in zip(p.omega, X)) - p.c - (t_obs - p.t0)
        off &= np.abs(s) > margin + p.w
    if d == 2:
        for p1, p2 in itertools.combinations(pulses, 2):
            # line where the two fronts meet at t_obs
            A = np.array([p1.omega, p2.omega])
            if abs(np.linalg.det(A)) < 1e-9:
                continue
            pt = np.linalg.solve(A, [p1.c + t_obs - p1.t0, p2.c + t_obs - p2.t0])
            dist = np.sqrt(sum((x - c) ** 2 for x, c in zip(X, pt)))
            off &= dist > 2 * margin
    score = cone_score(grid, M, floor)
    n_on, n_off = int(on.sum()), int(off.sum())
    e_on = float(score[on].mean()) if n_on else 0.0
    e_off = float(score[off].mean()) if n_off else 0.0
    # both sides at the floor means there is nothing to contrast
    if e_on <= 1e-20 and e_off <= 1e-20:
        return 1.0, e_on, e_off, n_on, n_off
    return (e_on + 1e-20) / (e_off + 1e-20), e_on, e_off, n_on, n_off


def interaction_experiment(grid: Grid, pulses, a=1.0, t_obs: float | None = None, q_ref=None,
                           tube: int = 2) -> tuple:
    """Top-order interaction wave of d+1 pulses and its cone contrast.

    Returns (dict of W fields, ContrastReport). If the fronts do not meet,
    ``q_ref`` (the crossing point of the aimed configuration) positions the
    windows and the verdict is "no interaction point".
    """
    q, miss = crossing_point(pulses)
    t_obs = grid.T if t_obs is None else t_obs
    if not math.isfinite(miss) or miss > 1e-6:
        if q_ref is None:
            raise WaveError(f"pulses do not meet: miss distance {miss}")
        q = np.asarray(q_ref, float)
        verdict = "no interaction point"
    else:
        verdict = None
    W = interaction_waves(grid, pulses, a, store="final")
    M = W[frozenset(range(len(pulses)))].final
    ratio, on, off, n_on, n_off = cone_contrast(grid, M, q, t_obs, pulses, tube)
    if verdict is None:
        verdict = "singular cone detected" if ratio >= 10 else "no contrast"
    rep = ContrastReport(ratio, on, off, verdict, [float(v) for v in q], miss if math.isfinite(miss) else -1.0,
                         n_on, n_off)
    return W, rep


# ------------------------------------------------------------ probe

@dataclass
class ProbeFit:
    taus: list
    values: list
    m_hat: float | None
    verdict: str

    def to_dict(self) -> dict:
        return {"taus": self.taus, "abs_theta": self.values, "m_hat": self.m_hat, "verdict": self.verdict}


def probe_indicator(M: WaveField, y, eta, taus, sigma: float = 4.0, floor: float = 1e-12) -> ProbeFit:
    """Theta_tau = <F_tau, M> with F_tau = exp(i tau p(x)) and

        p(x) = eta.(x - y) + (i/2) sigma |x - y|^2

    over every stored spacetime level. Fits |Theta| ~ tau^{-m}.
    """
    if len(taus) < 3:
        raise WaveError("need at least three tau values to fit")
    grid = M.grid
    y = np.asarray(y, float)
    eta = np.asarray(eta, float)
    X = grid.mesh()
    vol = grid.h**grid.d * grid.dt * (M.steps[1] - M.steps[0] if len(M.steps) > 1 else 1)
    total = float(np.sqrt(np.sum(M.values**2) * vol))
    vals = []
    for tau in taus:
        acc = 0j
        for k, n in enumerate(M.steps):
            t = n * grid.dt
            dx = [t - y[0]] + [x - yc for x, yc in zip(X, y[1:])]
            lin = sum(e * v for e, v in zip(eta, dx))
            quad = sum(v * v for v in dx)
            F = np.exp(1j * tau * lin - 0.5 * tau * sigma * quad)
            acc += np.sum(F * M.values[k])
        vals.append(abs(acc) * vol)
    if total == 0 or max(vals) <= floor * max(total, 1e-300):
        return ProbeFit(list(taus), vals, None, "smooth")
    lt, lv = np.log(taus), np.log(np.maximum(vals, 1e-300))
    slope = float(np.polyfit(lt, lv, 1)[0])
    # local slopes steepen without bound for rapidly decaying data
    loc = np.diff(lv) / np.diff(lt)
    superpoly = loc[-1] < -12 or (loc[-1] < 2 * loc[0] - 2 and loc[-1] < -6) or vals[-1] <= floor * total
    return ProbeFit(list(taus), vals, -slope, "smooth" if superpoly else "polynomial")


# ------------------------------------------------------- measurement map

def measurement_L_U(grid: Grid, src: Source, a, eps: float, region) -> np.ndarray:
    """Nonlinear solution restricted to the spacetime box region = ((t0, t1), (x0, x1), ...)."""
    for i in range(grid.d):
        if src.lo[i] < region[i + 1][0] or src.hi[i] > region[i + 1][1]:
            raise WaveError("source support must lie inside U")
    u = solve_nonlinear(grid, src, a, eps)
    return restrict(u, region)


def restrict(u: WaveField, region) -> np.ndarray:
    t = u.times
    tm = (t >= region[0][0] - 1e-12) & (t <= region[0][1] + 1e-12)
    idx = [np.nonzero((ax >= lo - 1e-12) & (ax <= hi + 1e-12))[0] for ax, (lo, hi) in zip(u.grid.axes, region[1:])]
    out = u.values[tm]
    for k, ii in enumerate(idx):
        out = np.take(out, ii, axis=k + 1)
    return out


def linearized_trace(grid: Grid, src: Source, a, region, eps: float = 1e-3) -> np.ndarray:
    """d/d eps L_U(eps f) at eps = 0 by a centered difference (the DtN-type linear trace)."""
    up = measurement_L_U(grid, src, a, eps, region)
    dn = measurement_L_U(grid, src, a, -eps, region)
    return (up - dn) / (2 * eps)
