"""Slot-level simulation of the early arrival system.

Each slot: draw the arrivals of both classes, then let the customer at the
head of the highest nonempty class complete service, then record the
state.  Three independent uniform streams drive high arrivals, low
arrivals and service completions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .exceptions import PrioqError, SimplexViolation
from .model import SIMPLEX_TOL, ModelParams, Region, transition_table

N_BATCHES = 30
_CHUNK = 1 << 20
_REPRESENTATIVE = {
    Region.ORIGIN: (0, 0),
    Region.HBOUNDARY: (1, 0),
    Region.VBOUNDARY: (0, 1),
    Region.INTERIOR: (1, 1),
}


def relaxed_params(p, q, mu_h, mu_l) -> ModelParams:
    """Like ``new_params`` but lets any probability sit on 0 or 1."""
    vals = [float(v) for v in (p, q, mu_h, mu_l)]
    for name, v in zip(("p", "q", "mu_h", "mu_l"), vals):
        if not math.isfinite(v) or not 0.0 <= v <= 1.0:
            raise SimplexViolation(f"{name}={v!r} must lie in [0, 1]")
    total = math.fsum(vals)
    if abs(total - 1.0) > SIMPLEX_TOL:
        raise SimplexViolation(f"p + q + mu_h + mu_l = {total!r}, expected 1")
    return ModelParams(*vals)


def default_warmup(params: ModelParams) -> int:
    if params.rho >= 1.0:
        return 100_000
    return int(max(1e5, math.ceil(100.0 / (1.0 - params.rho))))


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    n_slots: int
    seed: int = 0
    warmup_slots: int | None = None
    Nh: int = 40
    Nl: int = 40

    def __post_init__(self):
        if self.warmup_slots is None:
            object.__setattr__(self, "warmup_slots", default_warmup(self.params))
        if not self.n_slots > self.warmup_slots >= 0:
            raise PrioqError(f"need n_slots > warmup_slots >= 0, got {self.n_slots}, {self.warmup_slots}")
        if self.n_slots - self.warmup_slots < N_BATCHES:
            raise PrioqError(f"need at least {N_BATCHES} recorded slots")
        if self.Nh < 0 or self.Nl < 0:
            raise PrioqError("tally extents must be nonnegative")


@dataclass
class SimEstimate:
    """Occupation frequencies over the recorded slots, ``freq[i, j]``.

    ``overflow`` is the frequency of states outside the tally window, so
    ``freq.sum() + overflow == 1``.
    """

    freq: np.ndarray
    stderr: np.ndarray
    overflow: float
    n_slots: int
    warmup_slots: int
    seed: int
    final_state: tuple = field(default=(0, 0))

    def high_marginal(self) -> np.ndarray:
        return self.freq.sum(axis=1)

    def low_marginal(self) -> np.ndarray:
        return self.freq.sum(axis=0)

    def to_csv(self, path) -> None:
        n_i, n_j = self.freq.shape
        ii, jj = np.indices((n_i, n_j))
        table = np.column_stack([ii.ravel(), jj.ravel(), self.freq.ravel()])
        np.savetxt(path, table, fmt=["%d", "%d", "%.17g"], delimiter=",",
                   header="i,j,pi", comments="", newline="\n")

    def summary(self, reference=None) -> dict:
        out = {"slots": self.n_slots, "seed": self.seed, "warmup": self.warmup_slots,
               "overflow": self.overflow, "tv_distance": None}
        if reference is not None:
            out["tv_distance"] = tv_distance(self, reference)
        return out


@numba.njit(cache=True, inline="always")
def _slot(i, j, ua, ub, us, p, q, mh, ml):
    if ua < p:
        i += 1
    if ub < q:
        j += 1
    if i >= 1:
        if us < mh:
            i -= 1
    elif j >= 1:
        if us < ml:
            j -= 1
    return i, j


@numba.njit(cache=True)
def _run(i, j, ua, ub, us, p, q, mh, ml, start, warmup, per_batch, counts, overflow):
    n_i, n_j = counts.shape[1], counts.shape[2]
    last = counts.shape[0] - 1
    for k in range(ua.shape[0]):
        i, j = _slot(i, j, ua[k], ub[k], us[k], p, q, mh, ml)
        t = start + k
        if t < warmup:
            continue
        b = (t - warmup) // per_batch
        if b > last:
            b = last
        if i < n_i and j < n_j:
            counts[b, i, j] += 1
        else:
            overflow[b] += 1
    return i, j


def _streams(seed: int):
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(3)]


def simulate(config: SimConfig) -> SimEstimate:
    pm = config.params
    ga, gb, gs = _streams(config.seed)
    recorded = config.n_slots - config.warmup_slots
    per_batch = recorded // N_BATCHES
    counts = np.zeros((N_BATCHES, config.Nh + 1, config.Nl + 1), dtype=np.int64)
    overflow = np.zeros(N_BATCHES, dtype=np.int64)
    i = j = 0
    done = 0
    while done < config.n_slots:
        n = min(_CHUNK, config.n_slots - done)
        i, j = _run(i, j, ga.random(n), gb.random(n), gs.random(n), pm.p, pm.q, pm.mu_h, pm.mu_l,
                    done, config.warmup_slots, per_batch, counts, overflow)
        done += n

    sizes = np.full(N_BATCHES, per_batch, dtype=float)
    sizes[-1] = recorded - per_batch * (N_BATCHES - 1)
    batch_freq = counts / sizes[:, None, None]
    freq = counts.sum(axis=0) / recorded
    stderr = batch_freq.std(axis=0, ddof=1) / math.sqrt(N_BATCHES)
    return SimEstimate(freq, stderr, overflow.sum() / recorded, config.n_slots,
                       config.warmup_slots, config.seed, (int(i), int(j)))


@numba.njit(cache=True)
def _one_step(i0, j0, ua, ub, us, p, q, mh, ml, tally):
    for k in range(ua.shape[0]):
        i, j = _slot(i0, j0, ua[k], ub[k], us[k], p, q, mh, ml)
        tally[i - i0 + 1, j - j0 + 1] += 1


def empirical_transitions(params: ModelParams, region, n_trials: int, seed: int = 0) -> dict:
    """Monte-Carlo one-step move frequencies from a representative state."""
    region = Region(region)
    i0, j0 = _REPRESENTATIVE[region]
    ga, gb, gs = _streams(seed)
    tally = np.zeros((3, 3), dtype=np.int64)
    _one_step(i0, j0, ga.random(n_trials), gb.random(n_trials), gs.random(n_trials),
              params.p, params.q, params.mu_h, params.mu_l, tally)
    return {(di - 1, dj - 1): tally[di, dj] / n_trials
            for di in range(3) for dj in range(3) if tally[di, dj]}


def empirical_transition_check(params: ModelParams, region, n_trials: int = 10**6, seed: int = 0) -> float:
    """Largest |empirical - table| over all moves out of ``region``."""
    if n_trials < 10**5:
        raise PrioqError(f"n_trials must be at least 1e5, got {n_trials}")
    emp = empirical_transitions(params, region, n_trials, seed)
    table = transition_table(params, region).as_dict()
    moves = set(emp) | set(table)
    return max(abs(emp.get(m, 0.0) - table.get(m, 0.0)) for m in moves)


def tv_distance(estimate: SimEstimate, reference) -> float:
    """Total variation between the estimate and a grid on window + overflow."""
    ref = np.asarray(getattr(reference, "values", reference), dtype=float)
    n_i, n_j = estimate.freq.shape
    if ref.shape[0] < n_i or ref.shape[1] < n_j:
        raise PrioqError(f"reference grid {ref.shape} is smaller than the tally window {(n_i, n_j)}")
    window = ref[:n_i, :n_j]
    ref_over = max(0.0, ref.sum() - window.sum())
    return 0.5 * (np.abs(estimate.freq - window).sum() + abs(estimate.overflow - ref_over))
