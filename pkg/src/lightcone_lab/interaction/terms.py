"""Four-wave interaction terms: constraint tables, leading monomials and the
monomial dominance order.

Conventions
-----------
* ``TermSpec.k`` holds derivative orders per *wave* (k[j-1] acts on u_j).
  The constraint tables are stated per *slot*; ``slot_k`` converts, with
  slot i holding wave sigma(i).
* A Monomial stores exps = (n_tau, n4, n2, n3, n1) for
  tau^{-n_tau} rho4^{n4} rho2^{n2} rho3^{n3} rho1^{n1}, after removing the
  factors shared by every term of one enumeration: det(A) and a common rho
  power (rho^{-2(a+1)} in einstein mode, rho^{-2a} in scalar mode).
* Einstein-mode tau exponents follow the displayed templates literally; the
  direct count of integrations by parts is 4 lower for every term.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations, permutations, product

import sympy as sp

from .frame import EINSTEIN_ORDER, SCALAR_ORDER, SingularPairError

Q0, ID = "Q0", "I"
IDENTITY = (1, 2, 3, 4)
SIGMA0 = (2, 1, 3, 4)
EINSTEIN_TAU_OFFSET = 4

D_SYM = sp.Symbol("D")  # inner product of v(5) and v(1)


class ConstraintError(ValueError):
    pass


@dataclass(frozen=True)
class TermSpec:
    sigma: tuple = IDENTITY
    S: tuple = (Q0, Q0)
    k: tuple = (0, 0, 0, 0)  # per wave
    tilde: bool = False
    mode: str = "einstein"

    @property
    def slot_k(self) -> tuple:
        return tuple(self.k[self.sigma[i] - 1] for i in range(4))

    @property
    def label(self) -> str:
        shape = "Tt" if self.tilde else "T"
        s = "".join("Q" if x == Q0 else "I" for x in self.S)
        return f"{shape}[{s}]k={''.join(map(str, self.k))}s={''.join(map(str, self.sigma))}"

    @property
    def is_beta1(self) -> bool:
        return (
            self.mode == "einstein"
            and not self.tilde
            and self.S == (Q0, Q0)
            and self.k == (6, 0, 0, 0)
            and self.sigma in (IDENTITY, SIGMA0)
        )


def table_ok(spec: TermSpec) -> bool:
    """Literal tables for each (S1, S2) and shape, checked on slot orders."""
    k1, k2, k3, k4 = spec.slot_k
    tot = k1 + k2 + k3 + k4
    if min(spec.k) < 0:
        return False
    S = spec.S
    if S == (Q0, Q0):
        if spec.tilde:
            return tot <= 6 and k1 + k2 <= 4 and k3 + k4 <= 4
        return tot <= 6 and k3 + k4 <= 4 and k4 <= 2
    if S == (ID, Q0):
        if spec.tilde:
            return tot <= 4 and k1 + k2 <= 2
        return tot <= 4 and k4 <= 2
    if S == (Q0, ID):
        return tot <= 4 and k3 + k4 <= 2
    return tot <= 2


def summary_table_ok(spec: TermSpec) -> bool:
    """Unified summary form of the tables."""
    k1, k2, k3, k4 = spec.slot_k
    K1 = int(spec.S[0] == Q0)
    K2 = int(spec.S[1] == Q0)
    ok = k1 + k2 + k3 + k4 <= 2 * K1 + 2 * K2 + 2 and k3 + k4 <= 2 * K2 + 2
    if spec.tilde:
        return ok and k1 + k2 <= 2 * K1 + 2
    return ok and k4 <= 2


def check_spec(spec: TermSpec, a=None) -> None:
    if spec.mode == "scalar":
        if any(spec.k) or spec.S != (Q0, Q0):
            raise ConstraintError("scalar terms have k = 0 and S = (Q0, Q0)")
        return
    if sorted(spec.sigma) != [1, 2, 3, 4]:
        raise ConstraintError(f"not a permutation: {spec.sigma}")
    if not table_ok(spec):
        raise ConstraintError(f"orders {spec.k} violate the table for {spec.label}")
    if a is not None and a < max(spec.k):
        raise ConstraintError(f"a={a} smaller than max k={max(spec.k)}")


def derivative_budget(spec: TermSpec) -> int:
    return 2 * sum(s == Q0 for s in spec.S) + 2


# ---------------------------------------------------------------- monomials

@dataclass
class Monomial:
    exps: tuple  # (n_tau, n4, n2, n3, n1)
    coeff_class: str = "O(1)-bounded"  # exact | nonzero*D | nonzero*P | O(1)-bounded | zero
    coeff_value: sp.Expr | None = None
    labels: tuple = ()
    convention: str = ""

    def to_json(self) -> dict:
        out = {"coeff_class": self.coeff_class, "exps": list(self.exps), "labels": list(self.labels)}
        if self.coeff_value is not None:
            out["coeff_value"] = str(self.coeff_value)
        if self.convention:
            out["convention"] = self.convention
        return out


def _merge_class(c1: str, c2: str) -> str:
    if "O(1)-bounded" in (c1, c2):
        return "O(1)-bounded"
    if c1 == "zero":
        return c2
    if c2 == "zero":
        return c1
    return c1 if c1 == c2 else "O(1)-bounded"


class AsymSum:
    """Multiset of monomials with equal exponent vectors merged."""

    def __init__(self, monomials=()):
        self._by_exps: dict = {}
        for m in monomials:
            self.add(m)

    def add(self, m: Monomial) -> None:
        cur = self._by_exps.get(m.exps)
        if cur is None:
            self._by_exps[m.exps] = Monomial(m.exps, m.coeff_class, m.coeff_value, tuple(m.labels), m.convention)
            return
        cls = _merge_class(cur.coeff_class, m.coeff_class)
        val = None
        if cls != "O(1)-bounded" and cur.coeff_value is not None and m.coeff_value is not None:
            val = sp.simplify(cur.coeff_value + m.coeff_value)
            if val == 0:
                cls = "zero"
        cur.coeff_class, cur.coeff_value = cls, val
        cur.labels = cur.labels + tuple(m.labels)

    def extend(self, other) -> None:
        for m in other:
            self.add(m)

    def __iter__(self):
        return iter(self._by_exps.values())

    def __len__(self) -> int:
        return len(self._by_exps)

    def to_json(self) -> list:
        return [m.to_json() for m in sorted(self, key=lambda m: m.exps)]


def priority_key(exps: tuple, mode: str = "einstein") -> tuple:
    """Comparison key: smaller key means stronger asymptotics."""
    nt, n4, n2, n3, n1 = exps
    if mode == "scalar":
        return (nt, n4, n2, n1, n3)
    return (nt, n4, n2, n3, n1)


def precedes(weak: Monomial, strong: Monomial, mode: str = "einstein") -> bool:
    """weak < strong: strong has nonzero coefficient and lexicographically smaller exponents."""
    if strong.coeff_class in ("O(1)-bounded", "zero"):
        return False
    return priority_key(strong.exps, mode) < priority_key(weak.exps, mode)


@dataclass
class Dominance:
    dominant: list
    certified: bool
    blockers: list = field(default_factory=list)


def dominant_terms(terms, mode: str = "einstein") -> Dominance:
    """Monomials maximal under the order; bounded-only entries never win.

    The result is certified when every O(1)-bounded entry is strictly weaker
    than the winning exponent vector.
    """
    terms = [m for m in terms if m.coeff_class != "zero"]
    if not terms:
        return Dominance([], True)
    nonzero = [m for m in terms if m.coeff_class != "O(1)-bounded"]
    bounded = [m for m in terms if m.coeff_class == "O(1)-bounded"]
    if not nonzero:
        return Dominance([], False, bounded)
    best = min(priority_key(m.exps, mode) for m in nonzero)
    dom = [m for m in nonzero if priority_key(m.exps, mode) == best]
    blockers = [m for m in bounded if priority_key(m.exps, mode) <= best]
    return Dominance(dom, not blockers, blockers)


# ------------------------------------------------------- term templates

def slot_exponents(spec: TermSpec, a):
    """Wave exponents after the parametrices, the omega divisors and the tau factor.

    Returns (m per wave, list of omega index pairs, extra tau power).
    """
    sig = spec.sigma
    ks = spec.slot_k
    m = {sig[i]: a - ks[i] for i in range(4)}
    omegas = []
    extra_tau = 0
    if spec.S[0] == Q0:
        m[sig[0]] += 1
        m[sig[1]] += 1
        omegas.append((sig[0], sig[1]))
    if spec.S[1] == Q0:
        if spec.tilde:
            m[sig[2]] += 1
            m[sig[3]] += 1
            omegas.append((sig[2], sig[3]))
        else:
            m[sig[3]] += 1
            omegas.append((sig[3], 5))
            extra_tau = 1
    return m, omegas, extra_tau


def _larger(order, k, j):
    return k if order.index(k) > order.index(j) else j


def kinematic_exponents(spec: TermSpec, a) -> tuple:
    """(n_tau, {j: rho_j exponent}) of the template, before polarization."""
    order = SCALAR_ORDER if spec.mode == "scalar" else EINSTEIN_ORDER
    m, omegas, extra_tau = slot_exponents(spec, a)
    common = 2 * a if spec.mode == "scalar" else 2 * (a + 1)
    rho = {j: -2 * (m[j] + 1) + common for j in range(1, 5)}
    for k, j in omegas:
        big = j if k == 5 else (k if j == 5 else _larger(order, k, j))
        rho[big] -= 2
    n_tau = sum(m[j] + 1 for j in range(1, 5)) + extra_tau
    if spec.mode == "einstein":
        n_tau += EINSTEIN_TAU_OFFSET
    return n_tau, rho


def pack(n_tau, rho: dict) -> tuple:
    return (n_tau, rho[4], rho[2], rho[3], rho[1])


# ------------------------------------------------ polarization contraction model

def _levels(spec: TermSpec):
    s = spec.sigma
    b1 = 2 if spec.S[0] == Q0 else 0
    b2 = 2 if spec.S[1] == Q0 else 0
    if spec.tilde:
        return [
            ([("wave", s[1]), ("wave", s[0])], b1, {s[0], s[1]}),
            ([("wave", s[3]), ("wave", s[2])], b2, {s[2], s[3]}),
            ([("sub", 1), ("sub", 0)], 2, {1, 2, 3, 4}),
        ]
    return [
        ([("wave", s[1]), ("wave", s[0])], b1, {s[0], s[1]}),
        ([("wave", s[2]), ("sub", 0)], b2, {s[0], s[1], s[2]}),
        ([("wave", s[3]), ("sub", 1)], 2, {1, 2, 3, 4}),
    ]


def _pol_labels(j: int) -> tuple:
    # wave 1 carries a generic polarization, waves 2..4 carry b(j) x b(j)
    return ("v1", "v1") if j == 1 else (("b", j), ("b", j))


@lru_cache(maxsize=None)
def _index_matchings(n: int) -> tuple:
    """All (kept pair, perfect matching of the rest) splits of range(n)."""

    def match(items):
        if not items:
            return [[]]
        first, rest = items[0], items[1:]
        out = []
        for t in range(len(rest)):
            for m in match(rest[:t] + rest[t + 1:]):
                out.append([(first, rest[t])] + m)
        return out

    splits = []
    for keep in combinations(range(n), 2):
        rest = [i for i in range(n) if i not in keep]
        for m in match(rest):
            splits.append((keep, tuple(m)))
    return tuple(splits)


def _distributions(levels, k_wave):
    """All assignments of derivative targets per level matching k_wave."""
    need = {j: k_wave[j - 1] for j in range(1, 5)}

    def rec(i, remaining):
        if i == len(levels):
            if all(v == 0 for v in remaining.values()):
                yield []
            return
        _, budget, present = levels[i]
        for combo in _multisets(sorted(present), budget):
            rem = dict(remaining)
            ok = True
            for t in combo:
                rem[t] -= 1
                if rem[t] < 0:
                    ok = False
                    break
            if ok:
                for tail in rec(i + 1, rem):
                    yield [combo] + tail

    yield from rec(0, need)


def _multisets(elems, size):
    if size == 0:
        yield ()
        return
    if not elems:
        return
    first, rest = elems[0], elems[1:]
    for c in range(size, -1, -1):
        for tail in _multisets(rest, size - c):
            yield (first,) * c + tail


def _add(u: tuple, v: tuple) -> tuple:
    return tuple(x + y for x, y in zip(u, v))


@lru_cache(maxsize=None)
def pol_bound(spec: TermSpec):
    """Smallest rho exponent (under the hierarchy) over all contraction patterns.

    Each nesting level is a bilinear operator with its full derivative
    budget; all indices but two are contracted pairwise and two pass upward;
    the top pair meets the generic probe polarization. Returns a dict
    {j: exponent} or None when every pattern vanishes.
    """
    order = EINSTEIN_ORDER
    pos = {j: i for i, j in enumerate(order)}
    zero = (0, 0, 0, 0)
    levels = _levels(spec)
    best = None
    for dist in _distributions(levels, spec.k):
        states = []  # per level: {passed pair: min exponent vector}
        for li, (args, _budget, _present) in enumerate(levels):
            inputs = [([], zero)]
            for kind, val in args:
                if kind == "wave":
                    inputs = [(inp + list(_pol_labels(val)), w) for inp, w in inputs]
                else:
                    inputs = [
                        (inp + list(pair), _add(w, vec))
                        for inp, w in inputs
                        for pair, vec in states[val].items()
                    ]
            derivs = [("b", t) for t in dist[li]]
            out = {}
            for inp, w in inputs:
                items = inp + derivs
                for keep, mt in _index_matchings(len(items)):
                    vec = list(w)
                    dead = False
                    for x, y in mt:
                        x, y = items[x], items[y]
                        if x == "v1" or y == "v1":
                            continue  # conservative: no decay credited
                        if x[1] == y[1]:
                            dead = True
                            break
                        vec[max(pos[x[1]], pos[y[1]])] += 2
                    if dead:
                        continue
                    vec = tuple(vec)
                    pair = tuple(sorted((items[keep[0]], items[keep[1]]), key=str))
                    if pair not in out or vec < out[pair]:
                        out[pair] = vec
            states.append(out)
        for vec in states[-1].values():
            if best is None or vec < best:
                best = vec
    if best is None:
        return None
    return {j: best[pos[j]] for j in order}


# ------------------------------------------------------- term asymptotics

def beta1_coefficient(a) -> sp.Expr:
    """Leading coefficient of the strongest term in hierarchy mode (det(A) removed).

    Built from: derivative falling factorial, the three squared Gram entries
    omega_{r1}^2 ~ rho1^4/4, the two parametrix divisors, and the four
    one-dimensional Laplace-type integrals m! (-i tau p)^{-(m+1)}.
    """
    a = sp.Integer(a)
    m = {1: a - 5, 2: a + 1, 3: a, 4: a + 1}
    c = sp.ff(a, 6) * sp.Rational(1, 64) * D_SYM
    c /= 2 * (a + 1) * (a - 5) * sp.Rational(-1, 2)
    c /= 2 * sp.I * (a + 1) * sp.Rational(-1, 2)
    for j in range(1, 5):
        c *= sp.factorial(m[j]) * (sp.I / 2) ** (-(m[j] + 1))
    return sp.simplify(c)


def scalar_coefficient(spec: TermSpec, a, alpha, symbols) -> sp.Expr:
    """Exact leading coefficient of one scalar term (det(A) removed).

    Weight 4 for the nested shape and 1 for the paired shape, overall minus
    sign and three factors of alpha, as in the fourth-order interaction
    formula; symbols are the principal symbols of the four waves.
    """
    m, omegas, _ = slot_exponents(spec, a)
    c = -(1 if spec.tilde else 4) * sp.nsimplify(alpha) ** 3 * sp.prod([sp.nsimplify(s) for s in symbols])
    slot_exps = {j: m[j] for j in m}
    if spec.S[0] == Q0:
        s1, s2 = spec.sigma[0], spec.sigma[1]
        c /= 2 * slot_exps[s1] * slot_exps[s2] * sp.Rational(-1, 2)
    if spec.S[1] == Q0:
        if spec.tilde:
            s3, s4 = spec.sigma[2], spec.sigma[3]
            c /= 2 * slot_exps[s3] * slot_exps[s4] * sp.Rational(-1, 2)
        else:
            c /= 2 * sp.I * slot_exps[spec.sigma[3]] * sp.Rational(-1, 2)
    for j in range(1, 5):
        c *= sp.gamma(m[j] + 1) * (sp.I / 2) ** (-(m[j] + 1))
    return sp.simplify(c)


def term_asymptotics(spec: TermSpec, frame=None, a=6, alpha=1, symbols=(1, 1, 1, 1)) -> AsymSum:
    """Leading monomial of one interaction term.

    Einstein mode uses the exact polarization factor for the strongest term
    and the contraction bound (class O(1)-bounded) for every other term.
    """
    check_spec(spec, a if spec.mode == "einstein" else None)
    if frame is not None and frame.numeric:
        for k, j in slot_exponents(spec, a)[1]:
            if frame.omega[(k, j)] == 0:
                raise SingularPairError(f"omega_{k}{j} = 0")
    n_tau, rho = kinematic_exponents(spec, a)
    if spec.mode == "scalar":
        conv = "scalar: common factor det(A) rho^(-2a); tau exponent counted directly"
        val = scalar_coefficient(spec, a, alpha, symbols)
        cls = "zero" if val == 0 else "nonzero*P"
        return AsymSum([Monomial(pack(n_tau, rho), cls, val, (spec.label,), conv)])
    conv = "einstein: common factor det(A) rho^(-2(a+1)); tau exponent per displayed template (+4)"
    if spec.is_beta1:
        rho[1] += 12
        return AsymSum([Monomial(pack(n_tau, rho), "nonzero*D", beta1_coefficient(a), (spec.label,), conv)])
    if sum(spec.k) == derivative_budget(spec):
        bound = pol_bound(spec)
        if bound is None:
            return AsymSum([Monomial(pack(n_tau, rho), "zero", sp.Integer(0), (spec.label,), conv)])
        for j, e in bound.items():
            rho[j] += e
    return AsymSum([Monomial(pack(n_tau, rho), "O(1)-bounded", None, (spec.label,), conv)])


# ------------------------------------------------------------ enumeration

def einstein_specs():
    """Every admissible (shape, S, sigma, k) of the einstein tables."""
    for S in product((Q0, ID), repeat=2):
        budget = 2 * sum(s == Q0 for s in S) + 2
        ks = [k for k in product(range(budget + 1), repeat=4) if sum(k) <= budget]
        for tilde in (False, True):
            for sigma in permutations(IDENTITY):
                for k in ks:
                    spec = TermSpec(sigma, S, k, tilde, "einstein")
                    if table_ok(spec):
                        yield spec


def scalar_specs():
    for tilde in (False, True):
        for sigma in permutations(IDENTITY):
            yield TermSpec(sigma, (Q0, Q0), (0, 0, 0, 0), tilde, "scalar")


def table_cross_check() -> list:
    """Specs on which the literal tables and the unified summary disagree."""
    out = []
    for S in product((Q0, ID), repeat=2):
        for tilde in (False, True):
            for k in product(range(7), repeat=4):
                spec = TermSpec(IDENTITY, S, k, tilde)
                if table_ok(spec) != summary_table_ok(spec):
                    out.append(spec)
    return out
