"""The kernel K(x, y), its roots and branch points, and the fundamental form.

K(x, y) = a(y) x^2 + b(y) x + c(y) is quadratic in x with coefficients
affine in y.  x0(y) is the small root and x1(y) the large one; both are
analytic off the cut [y0, y1] between the two branch points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import PoleAtY
from .model import ModelParams, Region, transition_table

# roots are merged when |Delta| falls below this multiple of b^2 + |4ac|
_COALESCE = 1e-14


def _u(params: ModelParams, y):
    return params.q * y + params.qbar


def kernel_coeffs(params: ModelParams, y):
    """Return ``(a(y), b(y), c(y))``."""
    u = _u(params, y)
    p, mh = params.p, params.mu_h
    a = p * params.mubar_h * u
    b = (p * mh + params.pbar * params.mubar_h) * u - 1.0
    c = params.pbar * mh * u
    return a, b, c


def kernel(params: ModelParams, x, y):
    a, b, c = kernel_coeffs(params, y)
    return (a * x + b) * x + c


def _kappa(params: ModelParams) -> float:
    # |p mu_h - pbar mubar_h| * q ; p + mu_h < 1 makes the bracket negative
    return abs(params.p * params.mu_h - params.pbar * params.mubar_h) * params.q


def branch_points(params: ModelParams) -> tuple[float, float]:
    p, q, mh = params.p, params.q, params.mu_h
    pb, mhb = params.pbar, params.mubar_h
    s = p * mh + pb * mhb
    d = (p * mh - pb * mhb) ** 2 * q
    g = 2.0 * math.sqrt(p * mh * pb * mhb)
    shift = params.qbar / q
    return (s - g) / d - shift, (s + g) / d - shift


def discriminant(params: ModelParams, y, factored: bool = False):
    """Delta(y) = b^2 - 4ac, or the product form kappa^2 (y - y0)(y - y1)."""
    if factored:
        y0, y1 = branch_points(params)
        return _kappa(params) ** 2 * (y - y0) * (y - y1)
    a, b, c = kernel_coeffs(params, y)
    return b * b - 4.0 * a * c


def sqrt_discriminant(params: ModelParams, y):
    """Square root of Delta on the plane cut along [y0, y1].

    Real arguments with Delta >= 0 get the nonnegative root.  Complex
    arguments use the continuation of that root from [-1, 1], written as
    -kappa * sqrt(y - y0) * sqrt(y - y1) with principal square roots.
    """
    if np.iscomplexobj(y):
        y0, y1 = branch_points(params)
        yc = np.asarray(y, dtype=complex)
        out = -_kappa(params) * np.sqrt(yc - y0) * np.sqrt(yc - y1)
        return out if np.ndim(y) else complex(out)
    delta = discriminant(params, y)
    if np.ndim(delta):
        if np.all(delta >= 0):
            return np.sqrt(delta)
        return sqrt_discriminant(params, np.asarray(y, dtype=complex))
    if delta >= 0:
        return math.sqrt(delta)
    return sqrt_discriminant(params, complex(y))


@dataclass(frozen=True)
class KernelPoint:
    y: complex
    a: complex
    b: complex
    c: complex
    delta: complex
    x0: complex
    x1: complex


def _roots(a, b, c, sq):
    """Cancellation-safe roots (-b -/+ sq) / 2a, returned as (x0, x1)."""
    minus = -b - sq
    plus = -b + sq
    scale = abs(b) ** 2 + abs(4.0 * a * c)
    if abs(sq) ** 2 < _COALESCE * scale:
        x = -b / (2.0 * a)
        return x, x
    if abs(minus) >= abs(plus):
        x0 = minus / (2.0 * a)
        return x0, c / (a * x0)
    x1 = plus / (2.0 * a)
    return c / (a * x1), x1


def kernel_roots(params: ModelParams, y) -> KernelPoint:
    """Both roots of K(., y); x0 takes the minus sign of sqrt(Delta)."""
    if abs(y + params.qbar / params.q) < 1e-14:
        raise PoleAtY(f"a(y) vanishes at y = -qbar/q = {-params.qbar / params.q}")
    a, b, c = kernel_coeffs(params, y)
    sq = sqrt_discriminant(params, y)
    x0, x1 = _roots(a, b, c, sq)
    return KernelPoint(y, a, b, c, b * b - 4.0 * a * c, x0, x1)


def root_x0(params: ModelParams, y):
    """Vectorised small root x0(y) (no pole check)."""
    a, b, c = kernel_coeffs(params, y)
    sq = sqrt_discriminant(params, y)
    minus = -b - sq
    plus = -b + sq
    big = np.abs(minus) >= np.abs(plus)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(big, minus / (2.0 * a), 2.0 * c / plus)


def root_x1(params: ModelParams, y):
    a, b, c = kernel_coeffs(params, y)
    sq = sqrt_discriminant(params, y)
    minus = -b - sq
    plus = -b + sq
    big = np.abs(plus) >= np.abs(minus)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(big, plus / (2.0 * a), 2.0 * c / minus)


@dataclass(frozen=True)
class SpectralData:
    y0: float
    y1: float
    y_b: float
    x0_at0: float
    x1_at0: float
    r0: float
    w: float


def spectral_data(params: ModelParams) -> SpectralData:
    params.require_stable()
    y0, y1 = branch_points(params)
    y_b = (1.0 / (params.p * params.mu_h + params.pbar * params.mubar_h) - params.qbar) / params.q
    at0 = kernel_roots(params, 0.0)
    x0, x1 = float(np.real(at0.x0)), float(np.real(at0.x1))
    w = params.p * params.mubar_h / (params.pbar * params.mu_h)
    return SpectralData(y0, y1, y_b, x0, x1, 1.0 / x1, w)


@dataclass(frozen=True)
class FundamentalCoeffs:
    """Coefficients of H P = H1 P1 + H2 P2 + H0 pi00 at one point (x, y).

    ``H`` .. ``H0`` come from the simplified closed forms; ``h`` .. ``h0``
    are the raw polynomials built from the transition tables.
    """

    x: complex
    y: complex
    H: complex
    H1: complex
    H2: complex
    H0: complex
    h: complex
    h1: complex
    h2: complex
    h0: complex

    def composed(self):
        """H, H1, H2, H0 recombined from the raw polynomials."""
        x, y = self.x, self.y
        H = -self.h
        H1 = -self.h + self.h1 * y
        H2 = -self.h + self.h2 * x
        H0 = self.h0 * x * y + self.h - self.h1 * y - self.h2 * x
        return H, H1, H2, H0


def raw_polynomials(params: ModelParams, x, y):
    """h, h1, h2, h0 evaluated directly from the four transition tables."""

    def shifted(region, si, sj):
        # x^si y^sj times the region's one-step generating function, minus x^si y^sj
        total = sum(pr * x ** (di + si) * y ** (dj + sj) for di, dj, pr in transition_table(params, region).entries)
        return total - x**si * y**sj

    h = shifted(Region.INTERIOR, 1, 1)
    h1 = shifted(Region.HBOUNDARY, 1, 0)
    h2 = shifted(Region.VBOUNDARY, 0, 1)
    h0 = shifted(Region.ORIGIN, 0, 0)
    return h, h1, h2, h0


def fundamental_coeffs(params: ModelParams, x, y) -> FundamentalCoeffs:
    u = _u(params, y)
    mh, ml = params.mu_h, params.mu_l
    H = -y * kernel(params, x, y)
    H1 = 0.0 * x * y
    H2 = params.pbar * u * ((mh - ml) * x * y - mh * y + ml * x)
    H0 = params.pbar * params.qbar * ml * (y - 1.0) * x
    return FundamentalCoeffs(x, y, H, H1, H2, H0, *raw_polynomials(params, x, y))


def b2_coeff(params: ModelParams, y):
    """b2(y), the x-free part of h2(x, y) = y a(y) x + b2(y)."""
    p, q, mh, ml = params.p, params.q, params.mu_h, params.mu_l
    pb, qb = params.pbar, params.qbar
    p01 = p * q * mh + pb * q * params.mubar_l
    p00 = pb * qb * params.mubar_l + p * qb * mh + pb * q * ml
    return p01 * y * y + (p00 - 1.0) * y + pb * qb * ml


def h2_poly(params: ModelParams, x, y):
    a, _, _ = kernel_coeffs(params, y)
    return y * a * x + b2_coeff(params, y)
