"""Polarization tensors: the harmonic subspace L(b), the factor of the
strongest term, and the kappa determinant built from a basis of L(b(1)).
"""
from __future__ import annotations

from dataclasses import dataclass

import sympy as sp

from .frame import MINKOWSKI, mdot

GINV = MINKOWSKI  # diag(-1,1,1,1) is its own inverse

SYM_INDEX = [(m, n) for m in range(4) for n in range(m, 4)]


class NotNullError(ValueError):
    pass


def sym_from_vec(vec) -> sp.Matrix:
    v = sp.zeros(4, 4)
    for (m, n), c in zip(SYM_INDEX, vec):
        v[m, n] = c
        v[n, m] = c
    return v


def vec_from_sym(v: sp.Matrix) -> list:
    return [v[m, n] for m, n in SYM_INDEX]


def harmonicity_residual(xi, v: sp.Matrix) -> list:
    """-g^{mn} xi_m v_{nj} + 1/2 xi_j g^{pq} v_{pq}, for j = 0..3."""
    tr = sum(GINV[p, p] * v[p, p] for p in range(4))
    return [
        sp.radsimp(sp.expand(-sum(GINV[m, m] * xi[m] * v[m, j] for m in range(4)) + xi[j] * tr / 2))
        for j in range(4)
    ]


def constraint_matrix(xi) -> sp.Matrix:
    """The 4 x 10 linear system of the harmonicity condition."""
    rows = []
    for j in range(4):
        row = []
        for k in range(len(SYM_INDEX)):
            e = [0] * len(SYM_INDEX)
            e[k] = 1
            row.append(harmonicity_residual(xi, sym_from_vec(e))[j])
        rows.append(row)
    return sp.Matrix(rows)


@dataclass
class PolSpace:
    b: list
    basis: list  # PolTensor matrices

    @property
    def dim(self) -> int:
        return len(self.basis)

    def contains(self, v: sp.Matrix) -> bool:
        return all(sp.simplify(r) == 0 for r in harmonicity_residual(self.b, v))


def pol_space(b) -> PolSpace:
    b = [sp.sympify(c) for c in b]
    if all(c == 0 for c in b):
        raise NotNullError("zero covector")
    if sp.simplify(mdot(b, b)) != 0:
        raise NotNullError(f"covector is not null: g(b,b) = {mdot(b, b)}")
    ns = constraint_matrix(b).nullspace(simplify=True)
    return PolSpace(b, [sym_from_vec(list(v)) for v in ns])


def raise_indices(v: sp.Matrix) -> sp.Matrix:
    return GINV * v * GINV


def pairing_B(v: sp.Matrix, w: sp.Matrix) -> sp.Expr:
    """B(v, w) = g_nj g_mk v^{nm} w^{jk} for covariant inputs v, w."""
    vu, wu = raise_indices(v), raise_indices(w)
    return sp.expand(sum(MINKOWSKI[n, n] * MINKOWSKI[m, m] * vu[n, m] * wu[n, m] for n in range(4) for m in range(4)))


def contract(v: sp.Matrix, b) -> sp.Expr:
    """v^{rs} b_r b_s."""
    vu = raise_indices(v)
    return sp.expand(sum(vu[r, s] * b[r] * b[s] for r in range(4) for s in range(4)))


def null_polarization(b) -> sp.Matrix:
    """v_{mk} = b_m b_k, the choice used for waves 2, 3, 4."""
    return sp.Matrix(4, 4, lambda m, k: b[m] * b[k])


def pol_factor(frame, v: dict):
    """Polarization factor of the strongest term and the inner product D.

    v maps 1..5 to covariant symmetric matrices.
    """
    b1 = frame.b[1]
    D = pairing_B(v[5], v[1])
    P = sp.radsimp(contract(v[4], b1) * contract(v[3], b1) * contract(v[2], b1) * D)
    return P, D


def dual_family(V1: list) -> list:
    """V5 with B(V5_p, V1_q) = delta_pq (minimum-norm exact solution)."""
    M = sp.Matrix([[pairing_B(sym_from_vec([int(i == k) for i in range(10)]), w) for k in range(10)] for w in V1])
    MMt = (M * M.T).applyfunc(sp.radsimp)
    X = M.T * MMt.inv()
    return [sym_from_vec([sp.radsimp(X[k, p]) for k in range(10)]) for p in range(len(V1))]
