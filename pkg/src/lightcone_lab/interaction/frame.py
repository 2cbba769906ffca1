"""Exact null frames b(1)..b(5) near the direction (1, 1, 0, 0).

Numeric frames carry exact sympy entries (rational rho, square roots kept
symbolic). Hierarchy frames carry no numbers at all; Gram entries are
replaced by their leading orders under a fixed ordering of the small
parameters.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import sympy as sp

MINKOWSKI = sp.diag(-1, 1, 1, 1)

# Storage order of rho exponents inside a Monomial: (n4, n2, n3, n1).
RHO_SLOTS = (4, 2, 3, 1)

# Smallest parameter first; the larger parameter of a pair is the later one.
EINSTEIN_ORDER = (4, 2, 3, 1)
SCALAR_ORDER = (4, 2, 1, 3)
NATURAL_ORDER = (4, 3, 2, 1)

ORDERS = {"einstein": EINSTEIN_ORDER, "scalar": SCALAR_ORDER, "natural": NATURAL_ORDER}


class FrameError(ValueError):
    pass


class SingularPairError(ValueError):
    """Raised when a Gram entry needed as a divisor vanishes."""


def as_rational(x) -> sp.Rational:
    if isinstance(x, sp.Basic):
        return sp.nsimplify(x)
    return sp.Rational(str(Fraction(str(x)))) if isinstance(x, float) else sp.Rational(x)


def mdot(u, v) -> sp.Expr:
    """Minkowski pairing of two covectors."""
    return sp.expand(-u[0] * v[0] + u[1] * v[1] + u[2] * v[2] + u[3] * v[3])


def frame_row(r) -> list:
    rad = 1 - r**2 / 4 - r**4
    if rad <= 0:
        raise FrameError(f"rho={r} too large: 1 - rho^2/4 - rho^4 = {rad} <= 0")
    return [sp.Integer(1), 1 - r**2 / 2, r * sp.sqrt(rad), r**3]


@dataclass
class NullFrame:
    mode: str  # "numeric" or one of the keys of ORDERS
    rho: dict | None
    b: dict  # j -> list of 4 sympy entries (numeric mode only)
    omega: dict = field(default_factory=dict)  # (k, j) -> exact Gram entry
    order: tuple = EINSTEIN_ORDER

    @property
    def numeric(self) -> bool:
        return self.mode == "numeric"

    @property
    def p(self) -> dict:
        """Phase weights p_j = omega_{j5} (template convention)."""
        return {j: self.omega[(j, 5)] for j in range(1, 5)}

    def B(self) -> sp.Matrix:
        return sp.Matrix([self.b[j] for j in range(1, 5)])

    def A(self) -> sp.Matrix:
        """Change of coordinates x = A y, where y^j = b(j).x."""
        return self.B().inv()

    def det_A(self) -> sp.Expr:
        return sp.nsimplify(1 / sp.radsimp(self.B().det()))

    def coordinate_phase(self) -> dict:
        """Exact coefficients c with b(5) = sum c_j b(j); the true y-phase."""
        c = self.B().T.solve(sp.Matrix(self.b[5]))
        return {j: sp.radsimp(c[j - 1]) for j in range(1, 5)}

    def larger(self, k: int, j: int) -> int:
        """Index of the larger rho under the active hierarchy."""
        return k if self.order.index(k) > self.order.index(j) else j

    def omega_leading(self, k: int, j: int):
        """Leading order of omega_kj as (coefficient, rho index, power)."""
        if 5 in (k, j):
            other = j if k == 5 else k
            return sp.Rational(-1, 2), other, 2
        if k == j:
            return sp.Integer(0), k, 0
        return sp.Rational(-1, 2), self.larger(k, j), 2


def build_frame(rho=None, mode: str = "numeric") -> NullFrame:
    """Null frame with the exact null normalization of the third entry.

    ``rho`` maps 1..4 to values in (0, 1) (a sequence is read as rho1..rho4).
    In hierarchy modes ("einstein", "scalar", "natural") rho may be omitted.
    """
    if mode == "numeric":
        if rho is None:
            raise FrameError("numeric frame needs rho values")
        if not isinstance(rho, dict):
            rho = {j + 1: r for j, r in enumerate(rho)}
        rho = {j: as_rational(r) for j, r in rho.items()}
        for j, r in rho.items():
            if not (0 < r < 1):
                raise FrameError(f"rho_{j}={r} outside (0, 1)")
        b = {j: frame_row(rho[j]) for j in range(1, 5)}
        b[5] = [sp.Integer(1), sp.Integer(1), sp.Integer(0), sp.Integer(0)]
        omega = {}
        for k in range(1, 6):
            for j in range(1, 6):
                omega[(k, j)] = sp.radsimp(mdot(b[k], b[j]))
        return NullFrame("numeric", rho, b, omega, EINSTEIN_ORDER)
    if mode not in ORDERS:
        raise FrameError(f"unknown frame mode {mode!r}")
    return NullFrame(mode, None, {}, {}, ORDERS[mode])


def check_frame(frame: NullFrame) -> dict:
    """Exact invariants: nullity, omega_j5 = -rho_j^2/2, independence."""
    out = {"null": True, "omega_j5": True, "independent": True, "b5_generic": True}
    for j in range(1, 6):
        if sp.simplify(frame.omega[(j, j)]) != 0:
            out["null"] = False
    for j in range(1, 5):
        if sp.simplify(frame.omega[(j, 5)] + frame.rho[j] ** 2 / 2) != 0:
            out["omega_j5"] = False
    B = frame.B()
    if sp.simplify(B.det()) == 0:
        out["independent"] = False
    for trio in combinations(range(1, 5), 3):
        M = sp.Matrix([frame.b[j] for j in trio] + [frame.b[5]])
        if sp.simplify(M.det()) == 0:
            out["b5_generic"] = False
    return out


def det_B_leading(order: tuple = EINSTEIN_ORDER):
    """Leading term of det B as (coefficient, {rho index: power}).

    det B = -1/2 det[1, rho^2, f(rho), rho^3] with f(r) = r sqrt(1 - r^2/4 - r^4).
    The alternating analytic function is the Vandermonde product times a
    symmetric factor whose value at 0 is read off the Taylor coefficients.
    """
    r = sp.Symbol("r")
    f = sp.series(r * sp.sqrt(1 - r**2 / 4 - r**4), r, 0, 5).removeO()
    funcs = [sp.Integer(1), r**2, f, r**3]
    taylor = sp.Matrix([[sp.Poly(fn, r).coeff_monomial(r**d) for d in range(4)] for fn in funcs])
    s0 = taylor.det()
    # det[phi_k(rho_j)]_{j,k} with rows j: = det(Vandermonde rows) * det(taylor^T) at leading order
    coeff = sp.Rational(-1, 2) * s0
    powers = {j: 0 for j in range(1, 5)}
    # Vandermonde prod_{i<j} (rho_j - rho_i), rows ordered 1..4
    for i, j in combinations(range(1, 5), 2):
        big = j if order.index(j) > order.index(i) else i
        powers[big] += 1
        if big == i:
            coeff = -coeff
    return coeff, powers


def det_A_leading(order: tuple = EINSTEIN_ORDER):
    """Leading term of det A = 1/det B as (coefficient, {rho index: power})."""
    c, pw = det_B_leading(order)
    return 1 / c, {j: -n for j, n in pw.items()}
