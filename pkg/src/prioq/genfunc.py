"""Boundary and horizontal generating functions and the bivariate P(x, y).

psi0(y) = sum_j pi_{0,j} y^j is known in closed form.  Its Taylor
coefficients are pulled out by trapezoidal quadrature on a circle inside
the radius of convergence.  The row functions phi_j(x) = sum_i pi_{i,j} x^i
follow from a recursion in j that needs phi_{j-1} and its value at x0,
the small kernel root at y = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import KernelZero, PoleAtX, PrioqError, RadiusConflict
from .kernel import branch_points, fundamental_coeffs, kernel_coeffs, root_x0, spectral_data, sqrt_discriminant
from .model import ModelParams

# below this distance the difference quotient switches to a Taylor series
_DQ_SWITCH = 1e-6
_DQ_TERMS = 4
_SERIES_MAX = 10_000


@dataclass(frozen=True)
class BoundaryGF:
    """Closed-form ingredients of psi0.

    ``F`` and ``f`` hold quadratic coefficients, highest degree first.
    """

    F: tuple
    f: tuple
    eta1: float
    eta2: float
    pf_a: float
    pf_b: float
    pi00: float

    def F_at(self, y):
        c2, c1, c0 = self.F
        return (c2 * y + c1) * y + c0

    def f_at(self, y):
        c2, c1, c0 = self.f
        return (c2 * y + c1) * y + c0


def boundary_gf(params: ModelParams) -> BoundaryGF:
    params.require_supported()
    p, q, mh, ml = params.p, params.q, params.mu_h, params.mu_l
    pb, qb, mlb = params.pbar, params.qbar, params.mubar_l

    s = pb + mh - 2.0 * pb * ml
    F = (s * q, s * qb + 2.0 * pb * q * ml - 1.0, 2.0 * pb * qb * ml)

    bp = 1.0 - mh * qb - pb * qb * mlb - pb * q * ml
    lead = (mh - pb * ml) * mlb * q
    f = (lead, ml * bp, -pb * qb * ml * ml)

    # eta are the roots of c t^2 - B' t - lead/mu_l = 0, c = pbar qbar mu_l
    c = pb * qb * ml
    e = lead / ml
    disc = math.sqrt(bp * bp + 4.0 * c * e)
    big = (bp + disc) / (2.0 * c) if bp >= 0 else (bp - disc) / (2.0 * c)
    other = -e / (c * big)
    eta1, eta2 = max(big, other), min(big, other)

    pi00 = (1.0 - params.rho) / (pb * qb)
    scale = pi00 / (2.0 * pb * ml)
    pf_a = scale * eta1 / (eta1 - eta2)
    pf_b = scale * eta2 / (eta2 - eta1)
    return BoundaryGF(F, f, eta1, eta2, pf_a, pf_b, pi00)


def tt_star(params: ModelParams, y, gf: BoundaryGF | None = None):
    """Return ``(T(y), T*(y)) = F(y) -/+ y sqrt(Delta(y))``."""
    gf = gf or boundary_gf(params)
    Fy = gf.F_at(y)
    ys = y * sqrt_discriminant(params, y)
    return Fy - ys, Fy + ys


def dT_dy(params: ModelParams, y: float, gf: BoundaryGF | None = None) -> float:
    """Derivative of T(y) = F(y) - y sqrt(Delta(y)) on the real segment where Delta > 0."""
    gf = gf or boundary_gf(params)
    c2, c1, _ = gf.F
    y0, y1 = branch_points(params)
    kappa2 = ((params.p * params.mu_h - params.pbar * params.mubar_h) * params.q) ** 2
    sq = sqrt_discriminant(params, y)
    d_delta = kappa2 * (2.0 * y - y0 - y1)
    return 2.0 * c2 * y + c1 - sq - y * d_delta / (2.0 * sq)


def _psi0_partial_fractions(params, y, gf):
    _, ts = tt_star(params, y, gf)
    u = params.q * y + params.qbar
    return ts / u * (gf.pf_a / (1.0 - gf.eta1 * y) + gf.pf_b / (1.0 - gf.eta2 * y))


def _psi0_over_T(params, y, gf):
    t, _ = tt_star(params, y, gf)
    return 2.0 * params.pbar * params.qbar * params.mu_l * (1.0 - y) * gf.pi00 / t


def _psi0_root(params, y, gf):
    # x0 form with the factor (1 - y) divided out of numerator and denominator
    ml, mh, q = params.mu_l, params.mu_h, params.q
    a, b, _ = kernel_coeffs(params, y)
    x0 = root_x0(params, y)
    e = a * (x0 + 1.0) + b
    u = q * y + params.qbar
    return params.qbar * ml * x0 * gf.pi00 / (u * (ml + ((mh - ml) * y + ml) * q / e))


def psi0_forms(params: ModelParams, y) -> tuple[float, float]:
    """psi0(y) by the partial-fraction form and by the kernel-root form."""
    gf = boundary_gf(params)
    return float(_psi0_partial_fractions(params, y, gf)), float(_psi0_root(params, y, gf))


def psi0(params: ModelParams, y: float) -> float:
    """Boundary generating function sum_j pi_{0,j} y^j for real y in [-1, 1]."""
    y = float(y)
    if not -1.0 <= y <= 1.0:
        raise PrioqError(f"psi0 is only exposed on [-1, 1], got y={y}")
    gf = boundary_gf(params)
    u = params.q * y + params.qbar
    if abs(u) < 1e-8 or abs(1.0 - gf.eta2 * y) < 1e-8:
        return float(_psi0_over_T(params, y, gf))
    return float(_psi0_partial_fractions(params, y, gf))


def psi0_at_one(params: ModelParams) -> float:
    """psi0(1) = (1 - rho_h) / pbar, forced by normalisation of P."""
    return (1.0 - params.rho_h) / params.pbar


def dominant_singularity(params: ModelParams, gf: BoundaryGF | None = None) -> float:
    """1/eta1 when it is a pole of psi0 (F(y0) >= 0), else the branch point y0."""
    gf = gf or boundary_gf(params)
    y0 = spectral_data(params).y0
    tol = 1e-10 * max(1.0, abs(gf.F[2]))
    return 1.0 / gf.eta1 if gf.F_at(y0) >= -tol else y0


def contour_radius(params: ModelParams, gf: BoundaryGF | None = None) -> float:
    gf = gf or boundary_gf(params)
    r = 0.9 * dominant_singularity(params, gf)
    if not r > 0.0:
        raise RadiusConflict(f"contour radius {r} is not positive")
    return r


def psi0_series(params: ModelParams, n_max: int) -> np.ndarray:
    """Coefficients pi_{0,0} .. pi_{0,n_max} of psi0."""
    n_max = int(n_max)
    if not 0 <= n_max <= _SERIES_MAX:
        raise PrioqError(f"n_max must lie in [0, {_SERIES_MAX}], got {n_max}")
    gf = boundary_gf(params)
    r = contour_radius(params, gf)
    m = max(4096, 8 * n_max)
    nodes = r * np.exp(2j * np.pi * np.arange(m) / m)
    vals = _psi0_partial_fractions(params, nodes, gf)
    raw = np.fft.fft(vals)[: n_max + 1] / m
    n = np.arange(n_max + 1)
    with np.errstate(under="ignore"):
        scale = np.exp(-n * math.log(r))
    coef = raw.real * scale
    # roundoff floor of the quadrature, per coefficient
    floor = 64.0 * np.finfo(float).eps * np.abs(vals).max() * scale
    bad = coef < -floor
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        raise PrioqError(f"series coefficient {j} is negative ({coef[j]:.3e})")
    coef[0] = gf.pi00
    return np.clip(coef, 0.0, None)


class HorizontalGF:
    """Row generating functions phi_0 .. phi_{j_max}.

    Each phi_j is rational with its only pole at x1 = 1/r0.  The constants
    phi_j(x0) and the Taylor data near x0 come from samples on a circle
    around x0 of radius (x1 - x0)/2, where the difference quotient is
    well conditioned.  Inside half that radius the difference quotient is
    taken from the Taylor data instead of by subtraction.
    """

    def __init__(self, params: ModelParams, j_max: int, n_nodes: int = 64):
        params.require_stable()
        self.params = params
        self.j_max = int(j_max)
        sd = spectral_data(params)
        self.x0, self.x1, self.r0 = sd.x0_at0, sd.x1_at0, sd.r0
        self.pi00 = (1.0 - params.rho) / (params.pbar * params.qbar)
        self.boundary = psi0_series(params, self.j_max + 1) if self.j_max >= 1 else np.array([self.pi00])

        self.radius = 0.5 * (self.x1 - self.x0)
        theta = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
        self._unit = np.exp(1j * theta)
        nodes = self.x0 + self.radius * self._unit
        self.at_x0 = np.empty(self.j_max + 1)
        self._n_terms = n_nodes // 2
        self.taylor = np.empty((self.j_max + 1, self._n_terms))
        vals = self._phi0(nodes)
        self._store(0, vals)
        for j in range(1, self.j_max + 1):
            vals = self._step(j, nodes, (vals - self.at_x0[j - 1]) / (nodes - self.x0))
            self._store(j, vals)

    def _store(self, j, vals):
        hat = np.fft.fft(vals) / len(vals)
        k = np.arange(self._n_terms)
        self.taylor[j] = (hat[k] / self.radius**k).real
        self.at_x0[j] = self.taylor[j, 0]

    def _phi0(self, x):
        return self.pi00 / (1.0 - self.r0 * x)

    def a_coeff(self, j: int) -> float:
        pm = self.params
        p, q, mh, ml = pm.p, pm.q, pm.mu_h, pm.mu_l
        pb, qb, mhb = pm.pbar, pm.qbar, pm.mubar_h
        b = self.boundary
        num = (
            (pb * qb * (ml - mh) - pb * q * ml) * b[j]
            - pb * qb * ml * b[j + 1]
            + pb * q * (ml - mh) * b[j - 1]
            - q * (pb * mhb + p * mh) * self.at_x0[j - 1]
        )
        return num / (p * qb * mhb)

    def _step(self, j, x, dq):
        pm = self.params
        p, q, mh = pm.p, pm.q, pm.mu_h
        qb, mhb = pm.qbar, pm.mubar_h
        dx = x - self.x1
        c = self.at_x0[j - 1]
        m = q * (p * x + pm.pbar) * (mhb * x + mh) / (p * qb * mhb)
        return (self.a_coeff(j) - q * c * (x + self.x0) / qb - m * dq) / dx

    def _dq(self, j, x, prev):
        d = x - self.x0
        if abs(d) < _DQ_SWITCH:
            t = self.taylor[j, 1:]
            return sum(t[k] * d**k for k in range(_DQ_TERMS))
        if abs(d) < 0.5 * self.radius:
            # the direct quotient loses digits that compound over the recursion
            return np.polynomial.polynomial.polyval(d, self.taylor[j, 1:])
        return (prev - self.at_x0[j]) / d

    def __call__(self, j: int, x):
        j = int(j)
        if not 0 <= j <= self.j_max:
            raise PrioqError(f"row {j} outside 0..{self.j_max}")
        if abs(x - self.x1) < 1e-12:
            raise PoleAtX(f"x = {x} hits the pole x1 = {self.x1}")
        val = self._phi0(x)
        for k in range(1, j + 1):
            val = self._step(k, x, self._dq(k - 1, x, val))
        return val


def phi_j(params: ModelParams, j: int, x) -> float:
    """phi_j(x) = sum_i pi_{i,j} x^i."""
    return HorizontalGF(params, max(int(j), 0))(j, x)


def eval_P(params: ModelParams, x, y: float):
    """Bivariate generating function P(x, y) for |x| <= 1 and y in [-1, 1]."""
    y = float(y)
    if not -1.0 <= y <= 1.0:
        raise PrioqError(f"y must lie in [-1, 1], got {y}")
    if abs(y) < 1e-6:
        rows = HorizontalGF(params, 2)
        return sum(rows(j, x) * y**j for j in range(3))

    pm = params
    gf = boundary_gf(pm)
    a, b, c = kernel_coeffs(pm, y)
    sq = sqrt_discriminant(pm, y)
    plus = -b + sq           # b < 0 on [-1, 1], so no cancellation
    ax1 = 0.5 * plus
    if abs(a * x - ax1) < 1e-12 * max(abs(a), 1.0):
        raise KernelZero(f"x = {x} is a zero of the kernel at y = {y}")
    ps = psi0(pm, y)
    x0 = root_x0(pm, y)
    if abs(x - x0) > _DQ_SWITCH:
        fc = fundamental_coeffs(pm, x, y)
        return (fc.H2 * ps + fc.H0 * gf.pi00) / fc.H
    # numerator vanishes at x0; divide the common factor (x - x0) out
    u = pm.q * y + pm.qbar
    alpha = pm.pbar * u * ((pm.mu_h - pm.mu_l) * y + pm.mu_l) * ps
    alpha += pm.pbar * pm.qbar * pm.mu_l * (y - 1.0) * gf.pi00
    return -alpha / (y * (a * x - ax1))
