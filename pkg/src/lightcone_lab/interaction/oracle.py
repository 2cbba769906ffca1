"""Numeric oracle for the oscillatory integrals behind the term templates.

In the coordinates y^j = b(j).x the integrand factorizes; each factor is

    I(m, p, tau) = int_0^inf y^m exp(i tau p y) chi(y) dy,

with the Gaussian cutoff chi(y) = exp(-y^2 / W^2). Integration by parts
gives m! (-i tau p)^{-(m+1)} (1 + O(1/tau)).
"""
from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .frame import SingularPairError


class QuadratureError(RuntimeError):
    def __init__(self, msg, estimate=None):
        super().__init__(msg)
        self.estimate = estimate


def cutoff_width(tau_min: float, p_min: float) -> float:
    return 10.0 / math.sqrt(tau_min * p_min)


def closed_form_1d(m: int, p: float, tau: float) -> complex:
    if p == 0:
        raise SingularPairError("p = 0")
    return math.factorial(m) * (-1j * tau * p) ** (-(m + 1))


def kernel_1d(m: int, p: float, tau: float, W: float | None = None, rtol: float = 1e-9) -> complex:
    """Adaptive Fourier-weighted quadrature of one factor."""
    if p == 0:
        raise SingularPairError("p = 0: no oscillation to integrate against")
    if W is None:
        W = cutoff_width(tau, abs(p))
    w = tau * p

    def f(y):
        return y**m * math.exp(-((y / W) ** 2))

    scale = math.factorial(m) * abs(w) ** (-(m + 1))
    eps = rtol * scale
    top = 7.0 * W  # chi < e^-49 beyond this point
    with warnings.catch_warnings():
        # roundoff notices are superseded by the explicit error check below
        warnings.simplefilter("ignore", IntegrationWarning)
        re, err_re = quad(f, 0, top, weight="cos", wvar=w, limit=500, epsabs=eps, epsrel=rtol)
        im, err_im = quad(f, 0, top, weight="sin", wvar=w, limit=500, epsabs=eps, epsrel=rtol)
    val = complex(re, im)
    err = math.hypot(err_re, err_im)
    if not np.isfinite(err) or err > 1e-4 * scale:  # oracle needs ~1e-4 relative
        raise QuadratureError(f"quadrature tolerance not met (err {err:.3g}, value {abs(val):.3g})", val)
    return val


def phase_weights(frame, phase: str = "template") -> dict:
    if phase == "template":
        return {j: float(v) for j, v in frame.p.items()}
    if phase == "coordinate":
        return {j: float(v) for j, v in frame.coordinate_phase().items()}
    raise ValueError(f"unknown phase convention {phase!r}")


def numeric_T_integral(frame, a_vec, tau: float, tau_min: float | None = None, phase: str = "template") -> complex:
    """Product of the four factors, det(A) left out.

    a_vec holds the final exponents m_1..m_4. The cutoff width is fixed by
    tau_min (defaults to tau) so a tau sweep uses one cutoff.
    """
    if not frame.numeric:
        raise ValueError("numeric frame required")
    p = phase_weights(frame, phase)
    if any(v == 0 for v in p.values()):
        raise SingularPairError("p_j = 0 for some factor")
    W = cutoff_width(tau_min or tau, min(abs(v) for v in p.values()))
    out = 1 + 0j
    for j, m in zip(range(1, 5), a_vec):
        out *= kernel_1d(int(m), p[j], tau, W)
    return out


def closed_form_T(frame, a_vec, tau: float, phase: str = "template") -> complex:
    p = phase_weights(frame, phase)
    out = 1 + 0j
    for j, m in zip(range(1, 5), a_vec):
        out *= closed_form_1d(int(m), p[j], tau)
    return out


def ratio_fit(frame, a_vec, taus=(1e2, 1e3, 1e4)) -> dict:
    """|ratio - 1| over a tau sweep and the constant C in |ratio - 1| <= C / tau."""
    tau_min = min(taus)
    devs = []
    for t in taus:
        r = numeric_T_integral(frame, a_vec, t, tau_min) / closed_form_T(frame, a_vec, t)
        devs.append(abs(r - 1))
    C = max(d * t for d, t in zip(devs, taus))
    return {"taus": list(taus), "deviation": devs, "C": C}
