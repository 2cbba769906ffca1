"""Leading behaviour of the Einstein-type and scalar indicator functions."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import sympy as sp

from .frame import NATURAL_ORDER, EINSTEIN_ORDER, build_frame, det_A_leading
from .polarization import dual_family, pairing_B, pol_space
from .terms import (
    D_SYM,
    IDENTITY,
    SIGMA0,
    AsymSum,
    Monomial,
    TermSpec,
    dominant_terms,
    einstein_specs,
    priority_key,
    scalar_specs,
    slot_exponents,
    term_asymptotics,
)

EXPECTED_EINSTEIN = {TermSpec(IDENTITY, k=(6, 0, 0, 0)).label, TermSpec(SIGMA0, k=(6, 0, 0, 0)).label}
EXPECTED_SCALAR = {TermSpec(IDENTITY, mode="scalar").label, TermSpec(SIGMA0, mode="scalar").label}


@dataclass
class IndicatorResult:
    terms: AsymSum
    dominant: list
    certified: bool
    nonvanishing: bool
    matches_expected: bool
    leading: Monomial | None = None
    det_A: tuple | None = None
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "dominant": [m.to_json() for m in self.dominant],
            "certified": self.certified,
            "nonvanishing": self.nonvanishing,
            "matches_expected": self.matches_expected,
            "leading": self.leading.to_json() if self.leading else None,
            "det_A": None if self.det_A is None else {"coeff": str(self.det_A[0]), "powers": self.det_A[1]},
            "n_terms": len(self.terms),
            "notes": list(self.notes),
        }


@lru_cache(maxsize=8)
def _einstein_sum(a: int) -> AsymSum:
    tot = AsymSum()
    for spec in einstein_specs():
        tot.extend(term_asymptotics(spec, a=a))
    return tot


def _substitute(tot: AsymSum, D) -> AsymSum:
    out = AsymSum()
    for m in tot:
        if m.coeff_value is not None and m.coeff_value.has(D_SYM):
            val = sp.simplify(m.coeff_value.subs(D_SYM, D))
            cls = "zero" if val == 0 else ("nonzero*D" if val.has(D_SYM) else "exact")
            out.add(Monomial(m.exps, cls, val, m.labels, m.convention))
        else:
            out.add(m)
    return out


def einstein_indicator_leading(frame=None, v=None, a: int = 6) -> IndicatorResult:
    """Dominant part of the Einstein-type indicator over every admissible term.

    ``v`` maps 1 and 5 to polarization tensors; the coefficient then carries
    the exact inner product D of v(5) and v(1). Without ``v`` the coefficient
    stays symbolic in D. Waves 2..4 always use the b(r) x b(r) polarizations.
    """
    tot = _einstein_sum(a)
    D = None
    if v is not None:
        D = sp.nsimplify(pairing_B(v[5], v[1]))
        tot = _substitute(tot, D)
    dom = dominant_terms(tot)
    labels = {lab for m in dom.dominant for lab in m.labels}
    leading = next((m for m in tot if any(lab in EXPECTED_EINSTEIN for lab in m.labels)), None)
    order = frame.order if frame is not None and not frame.numeric else EINSTEIN_ORDER
    notes = [
        "exponents relative to det(A) rho^(-2(a+1)); tau exponent per displayed template",
    ]
    if D is not None and D == 0:
        notes.append("D = 0: leading coefficient vanishes")
    return IndicatorResult(
        terms=tot,
        dominant=dom.dominant,
        certified=dom.certified,
        nonvanishing=bool(dom.dominant) and leading is not None and leading.coeff_class not in ("zero", "O(1)-bounded"),
        matches_expected=labels == EXPECTED_EINSTEIN and len(dom.dominant) == 1,
        leading=leading,
        det_A=det_A_leading(order),
        notes=notes,
    )


def leading_coefficient(a: int, v1, v5) -> sp.Expr:
    """Coefficient of the dominant monomial for the given v(1), v(5)."""
    res = einstein_indicator_leading(v={1: v1, 5: v5}, a=a)
    return sp.Integer(0) if res.leading is None or res.leading.coeff_value is None else res.leading.coeff_value


def kappa(a: int = 6, rho1=sp.Rational(1, 10), V1=None, V5=None) -> sp.Expr:
    """6 x 6 determinant of leading coefficients over a basis of L(b(1)).

    V1 defaults to the exact basis of L(b(1)) at rho1 and V5 to its dual
    family, so entry (p, q) is 2 c1 B(V5_q, V1_p) with c1 the single-term
    coefficient at D = 1.
    """
    if V1 is None:
        b1 = build_frame({1: rho1, 2: sp.Rational(1, 5), 3: sp.Rational(1, 7), 4: sp.Rational(1, 11)}).b[1]
        V1 = pol_space(b1).basis
    if V5 is None:
        V5 = dual_family(V1)
    c = einstein_indicator_leading(a=a).leading.coeff_value.subs(D_SYM, 1)
    K = sp.Matrix(len(V1), len(V5), lambda p, q: c * sp.radsimp(pairing_B(V5[q], V1[p])))
    return sp.simplify(K.det())


def det_A_claim() -> dict:
    """det(A) leading term under both orderings of the small parameters."""
    return {"einstein": det_A_leading(EINSTEIN_ORDER), "natural": det_A_leading(NATURAL_ORDER)}


# ------------------------------------------------------------------ scalar

def scalar_indicator_leading(frame=None, alpha=1, n: int = -10, symbols=(1, 1, 1, 1)) -> IndicatorResult:
    """Dominant part of the scalar indicator under the 4-2-1-3 hierarchy.

    n is the conormal order of the sources, so every wave has exponent
    a = -n - 1. The tau power is 4a + 8 = -4n + 4.
    """
    a = -n - 1
    notes = ["exponents relative to det(A) rho^(-2a)"]
    exact = all(m >= 1 for m in slot_exponents(TermSpec(mode="scalar"), a)[0].values())
    tot = AsymSum()
    for spec in scalar_specs():
        if exact:
            piece = term_asymptotics(spec, a=a, alpha=alpha, symbols=symbols)
        else:
            piece = term_asymptotics(spec, a=max(a, 1), alpha=alpha, symbols=symbols)
        tot.extend(piece)
    if not exact:
        # exponent bookkeeping is linear in a; coefficients become a nonzero constant
        notes.append("a < 1: coefficient kept as a nonzero symbolic constant C_n")
        shift = a - max(a, 1)
        C = sp.Symbol("C_n", nonzero=True)
        prod = sp.nsimplify(alpha) ** 3 * sp.prod([sp.nsimplify(s) for s in symbols])
        fixed = AsymSum()
        for m in tot:
            exps = (m.exps[0] + 4 * shift,) + tuple(m.exps[1:])
            weight = -8 if set(m.labels) == EXPECTED_SCALAR else -1
            val = weight * C * prod
            fixed.add(Monomial(exps, "zero" if val == 0 else "nonzero*P", val, m.labels, m.convention))
        tot = fixed
    dom = dominant_terms(tot, mode="scalar")
    labels = {lab for m in dom.dominant for lab in m.labels}
    leading = dom.dominant[0] if dom.dominant else None
    if any(sp.nsimplify(s) == 0 for s in symbols) or sp.nsimplify(alpha) == 0:
        notes.append("vanishing P: a principal symbol or alpha is zero")
    return IndicatorResult(
        terms=tot,
        dominant=dom.dominant,
        certified=dom.certified,
        nonvanishing=leading is not None and leading.coeff_class not in ("zero", "O(1)-bounded"),
        matches_expected=labels == EXPECTED_SCALAR,
        leading=leading,
        notes=notes,
    )


def scalar_tilde_ratios(n: int = -10) -> dict:
    """Exponent-strict check that every paired-shape term loses to the nested identity term."""
    a = -n - 1
    ref = term_asymptotics(TermSpec(mode="scalar"), a=max(a, 1))
    (ref_m,) = list(ref)
    out = {}
    for spec in scalar_specs():
        if spec.tilde:
            (m,) = list(term_asymptotics(spec, a=max(a, 1)))
            out[spec.sigma] = priority_key(ref_m.exps, "scalar") < priority_key(m.exps, "scalar")
    return out
