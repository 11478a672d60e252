"""Tail regimes and exact tail asymptotics in both queue directions.

Every result has the shape  pi ~ constant * n**power * rate**n.  Gamma
factors from the transfer theorem are already folded into ``constant``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

from .exceptions import InstabilityOnPath, NoBracket, PrioqError, SimplexViolation
from .genfunc import boundary_gf, psi0_at_one
from .kernel import b2_coeff, branch_points, kernel_coeffs, spectral_data
from .model import ModelParams, new_params
from .oracle import MARGINAL, Direction


class RegimeTag(enum.Enum):
    EXACT_GEOMETRIC = "exact_geometric"
    GEOMETRIC_HALF_POWER = "geometric_half_power"
    GEOMETRIC_THREE_HALVES_POWER = "geometric_three_halves_power"

    @property
    def power(self) -> float:
        return {"exact_geometric": 0.0, "geometric_half_power": -0.5}.get(self.value, -1.5)


@dataclass(frozen=True)
class Regime:
    tag: RegimeTag
    F_y0: float
    dominant: float     # radius of convergence of psi0
    y0: float
    inv_eta1: float


@dataclass(frozen=True)
class TailAsymptotics:
    """pi_n ~ constant * n**power * rate**n along ``direction``.

    ``alt_constant`` is an independent evaluation of the same constant
    where one exists.  ``literal_constant`` keeps the uncorrected closed
    form when it differs from ``constant``.
    """

    direction: Direction
    fixed_index: object
    rate: float
    power: float
    constant: float
    regime: RegimeTag | None = None
    alt_constant: float | None = None
    literal_constant: float | None = None

    def predict(self, n):
        return self.constant * n**self.power * self.rate**n

    def as_dict(self) -> dict:
        return {
            "direction": self.direction.value,
            "fixed_index": self.fixed_index,
            "rate": self.rate,
            "power": self.power,
            "constant": self.constant,
            "regime": None if self.regime is None else self.regime.value,
            "alt_constant": self.alt_constant,
            "literal_constant": self.literal_constant,
        }


def default_zero_tol(params: ModelParams) -> float:
    return 1e-10 * max(1.0, abs(2.0 * params.pbar * params.qbar * params.mu_l))


def classify_regime(params: ModelParams, zero_tol: float | None = None) -> Regime:
    gf = boundary_gf(params)      # gates stability and mu_l <= mu_h
    if zero_tol is None:
        zero_tol = default_zero_tol(params)
    y0, _ = branch_points(params)
    F_y0 = gf.F_at(y0)
    inv = 1.0 / gf.eta1
    if abs(F_y0) <= zero_tol:
        tag, dom = RegimeTag.GEOMETRIC_HALF_POWER, inv
    elif F_y0 > 0:
        tag, dom = RegimeTag.EXACT_GEOMETRIC, inv
    else:
        tag, dom = RegimeTag.GEOMETRIC_THREE_HALVES_POWER, y0
    slack = 1e-8 * y0
    if not (1.0 < inv and inv <= y0 + slack):
        raise PrioqError(f"expected 1 < 1/eta1 <= y0, got 1/eta1={inv!r}, y0={y0!r}")
    return Regime(tag, F_y0, dom, y0, inv)


def _pf_bracket(params, gf, y):
    u = params.q * y + params.qbar
    return gf.pf_a / (u * (1.0 - gf.eta1 * y)) + gf.pf_b / (u * (1.0 - gf.eta2 * y))


def _boundary_constant(params, regime, gf):
    """(constant, literal closed-form constant) for pi_{0,j}."""
    p, q = params, params.q
    y0, y1 = branch_points(p)
    if regime.tag is RegimeTag.EXACT_GEOMETRIC:
        Y = regime.inv_eta1
        c = 2.0 * gf.pf_a * gf.F_at(Y) / (q * Y + p.qbar)
        return c, c
    root = math.sqrt(y0 * (y1 - y0))
    if regime.tag is RegimeTag.GEOMETRIC_HALF_POWER:
        c = gf.pf_a * (p.pbar - p.mu_h) * q * y0 * root / ((q * y0 + p.qbar) * math.sqrt(math.pi))
        return c, c
    # the derivative singularity lim sqrt(1 - y/y0) psi0'(y) = L gives
    # j pi_{0,j} ~ L j^{-1/2} y0^{-(j-1)} / Gamma(1/2), hence the extra y0
    literal = _pf_bracket(p, gf, y0) * (p.mu_h - p.pbar) * q * root / (2.0 * math.sqrt(math.pi))
    return y0 * literal, literal


def low_boundary_asym(params: ModelParams, regime: Regime | None = None) -> TailAsymptotics:
    regime = regime or classify_regime(params)
    gf = boundary_gf(params)
    const, literal = _boundary_constant(params, regime, gf)
    rate = 1.0 / regime.dominant
    return TailAsymptotics(
        Direction.LOW, 0, rate, regime.tag.power, const, regime.tag,
        literal_constant=None if literal == const else literal,
    )


def _x1_at_inv_eta1(params, gf):
    # sqrt(Delta(1/eta1)) = eta1 F(1/eta1) because T vanishes there
    Y = 1.0 / gf.eta1
    a, b, _ = kernel_coeffs(params, Y)
    return (-b + gf.eta1 * gf.F_at(Y)) / (2.0 * a)


def _literal_joint_factor(params, Y):
    """Literal i >= 1 prefactor of the regimes with a simple root at Y."""
    p = params
    u = p.q * Y + p.qbar
    first = (1.0 - (p.p * p.mu_h + p.pbar * p.mubar_l) * u - p.pbar * p.mu_l * (p.q + p.qbar / Y)) / (
        p.pbar * p.mu_h * u
    )
    ratio = p.p * p.mubar_h / (p.pbar * p.mu_h - p.pbar * p.mu_l * (1.0 - 1.0 / Y))
    return first, ratio


def low_joint_asym(params: ModelParams, i: int, regime: Regime | None = None) -> TailAsymptotics:
    """Tail of pi_{i,j} as j grows, for a fixed high-priority count i."""
    i = int(i)
    if i < 0:
        raise PrioqError(f"i must be nonnegative, got {i}")
    base = low_boundary_asym(params, regime)
    if i == 0:
        return base
    regime = regime or classify_regime(params)
    gf = boundary_gf(params)
    c_l = base.constant

    if regime.tag is RegimeTag.EXACT_GEOMETRIC:
        Y = regime.inv_eta1
        _, _, c = kernel_coeffs(params, Y)
        x1 = _x1_at_inv_eta1(params, gf)
        A1 = -gf.eta1 * b2_coeff(params, Y) / c * c_l
        const = A1 * x1 ** -(i - 1)
        first, ratio = _literal_joint_factor(params, Y)
        alt = first * ratio ** (i - 1) * c_l
        return replace(base, fixed_index=i, constant=const, alt_constant=alt, literal_constant=None)

    # at y0 the kernel has a double root x*, so C_i = (A + B (i-1)) / x*^(i-1)
    y0 = regime.y0
    a, b, c = kernel_coeffs(params, y0)
    xs = -b / (2.0 * a)
    A = -b2_coeff(params, y0) / (y0 * c) * c_l
    B = A - c_l / xs
    const = (A + B * (i - 1)) * xs ** -(i - 1)
    if regime.tag is RegimeTag.GEOMETRIC_HALF_POWER:
        first, ratio = _literal_joint_factor(params, y0)
        alt = first * ratio ** (i - 1) * c_l
        return replace(base, fixed_index=i, constant=const, alt_constant=alt, literal_constant=None)
    h2 = y0 * a * xs + b2_coeff(params, y0)
    lit = -(b2_coeff(params, y0) / (y0 * c) + h2 / (y0 * c) * (i - 1))
    lit *= (2.0 * params.p * params.mubar_h * (params.q * y0 + params.qbar) / -b) ** (i - 1)
    return replace(
        base, fixed_index=i, constant=const, alt_constant=lit * c_l,
        literal_constant=lit * base.literal_constant,
    )


def high_C(params: ModelParams) -> tuple[float, float]:
    """C of the high-direction law, by the r0 closed form and by the x-root limit."""
    p = params
    sd = spectral_data(p)
    r0, x0, x1 = sd.r0, sd.x0_at0, sd.x1_at0
    num = p.pbar * p.mu_h * r0 * r0 + (p.p * p.mu_h + p.pbar * p.mubar_h) * r0 + p.p * p.mubar_h
    c61 = p.q / p.qbar * num / (p.p * p.mubar_h - p.pbar * p.mu_h * r0 * r0)
    lim = p.q * (p.p * x1 + p.pbar) * (p.mubar_h * x1 + p.mu_h) / (p.p * p.qbar * p.mubar_h * (x1 - x0) * x1)
    return c61, lim


def high_joint_asym(params: ModelParams, j: int) -> TailAsymptotics:
    """pi_{i,j} ~ C^j pi00 / j! * i^j * r0^i as i grows, for fixed j."""
    params.require_stable()
    j = int(j)
    if j < 0:
        raise PrioqError(f"j must be nonnegative, got {j}")
    c61, lim = high_C(params)
    pi00 = (1.0 - params.rho) / (params.pbar * params.qbar)
    fact = math.factorial(j)
    return TailAsymptotics(
        Direction.HIGH, j, spectral_data(params).r0, float(j),
        c61**j * pi00 / fact, alt_constant=lim**j * pi00 / fact,
    )


def marginal_asym(params: ModelParams, direction) -> TailAsymptotics:
    direction = Direction(direction)
    if direction is Direction.HIGH:
        params.require_stable()
        w = params.p * params.mubar_h / (params.pbar * params.mu_h)
        return TailAsymptotics(
            Direction.HIGH, MARGINAL, w, 0.0, psi0_at_one(params),
            literal_constant=(1.0 - params.rho) / params.pbar,
        )
    base = low_boundary_asym(params)
    scale = params.pbar * params.mu_l
    const = scale * (params.qbar / params.q * base.rate + 1.0) * base.constant
    return replace(base, fixed_index=MARGINAL, constant=const, literal_constant=scale * base.constant)


def all_asymptotics(params: ModelParams, i_max: int = 3, j_max: int = 2) -> dict:
    """Regime plus every tail law with small fixed indices."""
    out = {"high": [high_joint_asym(params, j) for j in range(j_max + 1)]}
    out["high_marginal"] = marginal_asym(params, Direction.HIGH)
    if params.asymptotics_supported:
        regime = classify_regime(params)
        out["regime"] = regime
        out["low"] = [low_joint_asym(params, i, regime) for i in range(i_max + 1)]
        out["low_marginal"] = marginal_asym(params, Direction.LOW)
    return out


@dataclass(frozen=True)
class ScanPath:
    """Straight path in one parameter; mu_l absorbs the change.

    ``start`` defaults to the anchor's value and ``stop`` to one percent
    of it.
    """

    vary: str = "q"
    start: float | None = None
    stop: float | None = None


def _on_path(anchor, vary, t):
    vals = anchor.as_dict()
    vals[vary] = t
    vals["mu_l"] = 1.0 - vals["p"] - vals["q"] - vals["mu_h"]
    return new_params(vals["p"], vals["q"], vals["mu_h"], vals["mu_l"])


def _F_y0(params):
    gf = boundary_gf(params)
    return gf.F_at(branch_points(params)[0])


def find_critical_params(anchor: ModelParams, scan: ScanPath | None = None,
                         tol: float = 1e-12, max_iter: int = 200) -> ModelParams:
    """Bisect along ``scan`` for parameters on the surface F(y0) = 0."""
    scan = scan or ScanPath()
    if scan.vary not in ("p", "q", "mu_h"):
        raise PrioqError(f"cannot vary {scan.vary!r}; choose p, q or mu_h")
    lo = getattr(anchor, scan.vary) if scan.start is None else float(scan.start)
    hi = 0.01 * getattr(anchor, scan.vary) if scan.stop is None else float(scan.stop)

    def value(t):
        try:
            pt = _on_path(anchor, scan.vary, t)
        except SimplexViolation as exc:
            raise InstabilityOnPath(f"path leaves the simplex at {scan.vary}={t}: {exc}") from exc
        if not (pt.stable and pt.asymptotics_supported):
            raise InstabilityOnPath(f"path leaves the supported stable region at {scan.vary}={t}")
        return pt, _F_y0(pt)

    p_lo, f_lo = value(lo)
    p_hi, f_hi = value(hi)
    if f_lo == 0.0:
        return p_lo
    if f_hi == 0.0:
        return p_hi
    if (f_lo > 0) == (f_hi > 0):
        raise NoBracket(f"F(y0) has the same sign at both ends ({f_lo:.3g}, {f_hi:.3g})")
    best = (abs(f_lo), p_lo) if abs(f_lo) < abs(f_hi) else (abs(f_hi), p_hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        p_mid, f_mid = value(mid)
        if abs(f_mid) < best[0]:
            best = (abs(f_mid), p_mid)
        if abs(f_mid) < tol or mid in (lo, hi):
            break
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return best[1]
