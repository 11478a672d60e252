"""Model parameters, region transition tables and balance residuals.

The chain lives on the quarter plane: ``i`` counts high-priority customers
and ``j`` low-priority customers at slot division points of an early
arrival system.  One-step moves are in {-1, 0, 1}^2 and depend only on
which of four regions the current state occupies.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DimensionMismatch, SimplexViolation, Unstable, UnsupportedRegime

SIMPLEX_TOL = 1e-12


class Region(enum.Enum):
    ORIGIN = "origin"          # (0, 0)
    HBOUNDARY = "hboundary"    # i >= 1, j = 0
    VBOUNDARY = "vboundary"    # i = 0, j >= 1
    INTERIOR = "interior"      # i >= 1, j >= 1

    @classmethod
    def of(cls, i: int, j: int) -> "Region":
        if i == 0:
            return cls.ORIGIN if j == 0 else cls.VBOUNDARY
        return cls.HBOUNDARY if j == 0 else cls.INTERIOR


@dataclass(frozen=True)
class ModelParams:
    """Arrival and service-completion probabilities of the two classes.

    Build instances through :func:`new_params`, which validates the
    simplex constraint ``p + q + mu_h + mu_l = 1``.
    """

    p: float
    q: float
    mu_h: float
    mu_l: float

    @property
    def pbar(self) -> float:
        return 1.0 - self.p

    @property
    def qbar(self) -> float:
        return 1.0 - self.q

    @property
    def mubar_h(self) -> float:
        return 1.0 - self.mu_h

    @property
    def mubar_l(self) -> float:
        return 1.0 - self.mu_l

    @property
    def rho_h(self) -> float:
        return self.p / self.mu_h

    @property
    def rho_l(self) -> float:
        return self.q / self.mu_l

    @property
    def rho(self) -> float:
        return self.rho_h + self.rho_l

    @property
    def stable(self) -> bool:
        return self.rho < 1.0

    @property
    def asymptotics_supported(self) -> bool:
        return self.mu_l <= self.mu_h

    def as_dict(self) -> dict:
        return {"p": self.p, "q": self.q, "mu_h": self.mu_h, "mu_l": self.mu_l}

    def require_stable(self) -> None:
        if not self.stable:
            raise Unstable(f"unstable parameters: rho = {self.rho:.6g} >= 1")

    def require_supported(self) -> None:
        self.require_stable()
        if not self.asymptotics_supported:
            raise UnsupportedRegime(
                f"low-priority asymptotics need mu_l <= mu_h (got mu_l={self.mu_l}, mu_h={self.mu_h})"
            )


def new_params(p, q, mu_h, mu_l) -> ModelParams:
    """Validate four probabilities and return a :class:`ModelParams`.

    Strings are accepted and parsed as decimal literals.  Instability is
    not an error here; it is reported by ``ModelParams.stable``.
    """
    vals = [float(v) for v in (p, q, mu_h, mu_l)]
    names = ("p", "q", "mu_h", "mu_l")
    for name, v in zip(names, vals):
        if not math.isfinite(v) or not 0.0 < v < 1.0:
            raise SimplexViolation(f"{name}={v!r} must lie strictly inside (0, 1)")
    total = math.fsum(vals)
    if abs(total - 1.0) > SIMPLEX_TOL:
        raise SimplexViolation(f"p + q + mu_h + mu_l = {total!r}, expected 1")
    return ModelParams(*vals)


def load_params(path) -> ModelParams:
    """Read a flat ``key = value`` (or ``key: value``) parameter file."""
    found = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        for sep in ("=", ":"):
            if sep in line:
                key, value = line.split(sep, 1)
                break
        else:
            raise SimplexViolation(f"cannot parse config line {raw!r}")
        found[key.strip().replace("-", "_")] = value.strip()
    missing = {"p", "q", "mu_h", "mu_l"} - set(found)
    if missing:
        raise SimplexViolation(f"config file lacks {sorted(missing)}")
    return new_params(found["p"], found["q"], found["mu_h"], found["mu_l"])


@dataclass(frozen=True)
class TransitionTable:
    region: Region
    entries: tuple = field(default_factory=tuple)   # ((di, dj, prob), ...)

    def __getitem__(self, move):
        for di, dj, prob in self.entries:
            if (di, dj) == tuple(move):
                return prob
        return 0.0

    def as_dict(self) -> dict:
        return {(di, dj): prob for di, dj, prob in self.entries}

    def total(self) -> float:
        return math.fsum(prob for _, _, prob in self.entries)


def transition_table(params: ModelParams, region: Region) -> TransitionTable:
    p, q, mh, ml = params.p, params.q, params.mu_h, params.mu_l
    pb, qb, mhb, mlb = params.pbar, params.qbar, params.mubar_h, params.mubar_l
    region = Region(region)

    # high-priority arrival that is not served this slot
    up = {(1, 0): p * qb * mhb, (1, 1): p * q * mhb}
    if region in (Region.INTERIOR, Region.HBOUNDARY):
        moves = {
            **up,
            (0, 1): p * q * mh + pb * q * mhb,
            (-1, 1): pb * q * mh,
            (-1, 0): pb * qb * mh,
            (0, 0): pb * qb * mhb + p * qb * mh,
        }
    elif region is Region.VBOUNDARY:
        moves = {
            **up,
            (0, 1): p * q * mh + pb * q * mlb,
            (0, 0): pb * qb * mlb + p * qb * mh + pb * q * ml,
            (0, -1): pb * qb * ml,
        }
    else:
        moves = {
            **up,
            (0, 1): p * q * mh + pb * q * mlb,
            (0, 0): pb * qb + p * qb * mh + pb * q * ml,
        }
    return TransitionTable(region, tuple((di, dj, pr) for (di, dj), pr in sorted(moves.items())))


def all_tables(params: ModelParams) -> dict:
    return {r: transition_table(params, r) for r in Region}


def _region_masks(shape):
    ii, jj = np.indices(shape)
    return {
        Region.ORIGIN: (ii == 0) & (jj == 0),
        Region.HBOUNDARY: (ii >= 1) & (jj == 0),
        Region.VBOUNDARY: (ii == 0) & (jj >= 1),
        Region.INTERIOR: (ii >= 1) & (jj >= 1),
    }


def balance_residual(grid, params: ModelParams) -> float:
    """Largest violation of the global balance equations on the grid.

    ``grid`` is a StationaryGrid or a 2-D array indexed ``[i, j]``.  Only
    cells whose complete inflow stencil lies inside the grid are checked,
    i.e. ``i < Nh`` and ``j < Nl``.
    """
    pi = np.asarray(getattr(grid, "values", grid), dtype=float)
    if pi.ndim != 2 or pi.shape[0] < 3 or pi.shape[1] < 3:
        raise DimensionMismatch(f"grid of shape {pi.shape} is smaller than the 3x3 stencil")
    n_i, n_j = pi.shape
    inflow = np.zeros_like(pi)
    for region, mask in _region_masks(pi.shape).items():
        src = np.where(mask, pi, 0.0)
        for di, dj, prob in transition_table(params, region).entries:
            # target (i+di, j+dj) receives src[i, j] * prob
            ti = slice(max(di, 0), n_i + min(di, 0))
            tj = slice(max(dj, 0), n_j + min(dj, 0))
            si = slice(max(-di, 0), n_i + min(-di, 0))
            sj = slice(max(-dj, 0), n_j + min(-dj, 0))
            inflow[ti, tj] += prob * src[si, sj]
    resid = np.abs(inflow - pi)[: n_i - 1, : n_j - 1]
    return float(resid.max())
