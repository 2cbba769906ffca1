"""Plane-wave products and the formal parametrix Q0.

A PlaneWaveExpr stands for

    coeff * prod_j (b(j).x)_+^{a_j} * [exp(i tau b(5).x) if osc]

with covectors taken from a NullFrame (or any dict of exact covectors).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import sympy as sp
from sympy import QQ
from sympy.polys.rings import ring

from .frame import SingularPairError, mdot

TAU = sp.Symbol("tau", positive=True)
X = sp.symbols("x0:4", real=True)


@dataclass
class PlaneWaveExpr:
    coeff: sp.Expr
    exps: dict  # covector index -> exponent a_j >= 0
    osc: bool = False
    tau: sp.Symbol = field(default=TAU)

    def active(self) -> list:
        return sorted(self.exps)


def covectors(frame_or_dict) -> dict:
    return frame_or_dict.b if hasattr(frame_or_dict, "b") else frame_or_dict


def q0_apply(e: PlaneWaveExpr, frame) -> PlaneWaveExpr:
    """Formal parametrix on a product of two active factors."""
    b = covectors(frame)
    idx = e.active()
    if not e.osc and len(idx) == 2:
        i, j = idx
        w = sp.radsimp(mdot(b[i], b[j]))
        if w == 0:
            raise SingularPairError(f"omega_{i}{j} = 0")
        a1, a2 = e.exps[i], e.exps[j]
        coeff = e.coeff / (2 * (a1 + 1) * (a2 + 1) * w)
        return PlaneWaveExpr(coeff, {i: a1 + 1, j: a2 + 1}, False, e.tau)
    if e.osc and len(idx) == 1:
        (j,) = idx
        w = sp.radsimp(mdot(b[j], b[5]))
        if w == 0:
            raise SingularPairError(f"omega_{j}5 = 0")
        a = e.exps[j]
        coeff = e.coeff / (2 * sp.I * (a + 1) * w * e.tau)
        return PlaneWaveExpr(coeff, {j: a + 1}, True, e.tau)
    raise ValueError("Q0 needs exactly two active factors")


class _Lifted:
    """Covector entries as polynomials over QQ, one generator per square root.

    Relations s^2 = r are applied when testing for zero, so all arithmetic
    stays exact and fast.
    """

    def __init__(self, b: dict):
        rads = {}
        for v in b.values():
            for c in v:
                for p in sp.sympify(c).atoms(sp.Pow):
                    if p.exp == sp.Rational(1, 2) and p not in rads:
                        rads[p] = len(rads)
        names = [f"x{k}" for k in range(4)] + [f"s{i}" for i in range(len(rads))] + ["itau"]
        self.R, *gens = ring(",".join(names), QQ)
        self.x = gens[:4]
        self.itau = gens[-1]
        self.n_rad = len(rads)
        sub = {p: sp.Symbol(f"s{i}") for p, i in rads.items()}
        self.roots = [QQ(int(p.base.p), int(p.base.q)) for p in rads]
        self.b = {j: [self.R(sp.sympify(c).xreplace(sub)) for c in v] for j, v in b.items()}

    def linear(self, j):
        return sum((self.b[j][k] * self.x[k] for k in range(4)), self.R.zero)

    def omega(self, i, j):
        u, v = self.b[i], self.b[j]
        return -u[0] * v[0] + u[1] * v[1] + u[2] * v[2] + u[3] * v[3]

    def is_zero(self, P) -> bool:
        acc = {}
        for mon, c in P.terms():
            m = list(mon)
            for i, r in enumerate(self.roots):
                e = m[4 + i]
                c = c * r ** (e // 2)
                m[4 + i] = e % 2
            key = tuple(m)
            acc[key] = acc.get(key, 0) + c
        return all(v == 0 for v in acc.values())


def _box_with_phase(L: _Lifted, P, phase):
    """Box of P * exp(i tau phase.x), returned with the exponential divided out.

    Each derivative is taken directly: d_k(P E) = (d_k P + i tau phase_k P) E.
    """
    sign = [-1, 1, 1, 1]
    out = L.R.zero
    for k in range(4):
        d1 = P.diff(L.x[k])
        if phase is not None:
            d1 = d1 + L.itau * phase[k] * P
        d2 = d1.diff(L.x[k])
        if phase is not None:
            d2 = d2 + L.itau * phase[k] * d1
        out += sign[k] * d2
    return out


def box_q0_identity(e: PlaneWaveExpr, frame) -> bool:
    """Exact check that Box(Q0 e) = e by direct differentiation.

    With Q0 e = coeff/den * N the identity reads Box(N) = den * (e/coeff).
    """
    b = covectors(frame)
    q = q0_apply(e, frame)
    L = _Lifted(b)
    N = L.R.one
    for j, a in q.exps.items():
        N *= L.linear(j) ** a
    M = L.R.one
    for j, a in e.exps.items():
        M *= L.linear(j) ** a
    idx = e.active()
    if e.osc:
        (j,) = idx
        den = 2 * (e.exps[j] + 1) * L.omega(j, 5) * L.itau
        phase = L.b[5]
    else:
        i, j = idx
        den = 2 * (e.exps[i] + 1) * (e.exps[j] + 1) * L.omega(i, j)
        phase = None
    return L.is_zero(_box_with_phase(L, N, phase) - den * M)


def to_sympy(e: PlaneWaveExpr, frame) -> sp.Expr:
    """Explicit function of x on the region where every b(j).x > 0."""
    b = covectors(frame)
    out = e.coeff
    for j, a in e.exps.items():
        out *= sum(b[j][k] * X[k] for k in range(4)) ** a
    if e.osc:
        out *= sp.exp(sp.I * e.tau * sum(b[5][k] * X[k] for k in range(4)))
    return out
