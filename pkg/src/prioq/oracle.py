"""Truncated-chain stationary solver and tail fitting.

The chain is truncated to ``0 <= i <= Nh``, ``0 <= j <= Nl``; a move that
would leave the box is redirected to the departing state, so the operator
stays stochastic.

``Direct`` runs a Grassmann-Taksar-Heyman elimination level by level.  GTH
never subtracts, so every entry of the solution carries a small relative
error, including tail entries many orders of magnitude below pi_00.  A
plain LU solve only controls the error relative to the largest entry and
is useless for tail fits.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy import sparse

from .exceptions import BudgetExceeded, DimensionMismatch, WindowTooSmall
from .model import ModelParams, Region, balance_residual, transition_table

DIRECT_MAX_STATES = 4_000_000
ITERATIVE_MAX_STATES = 4_000_000
# bytes of level blocks kept in memory during back substitution
_BLOCK_BUDGET = 256 * 2**20


class Method(enum.Enum):
    DIRECT = "direct"
    ITERATIVE = "iterative"


class Direction(enum.Enum):
    LOW = "low"      # j -> infinity, i frozen
    HIGH = "high"    # i -> infinity, j frozen


MARGINAL = "marginal"


@dataclass
class StationaryGrid:
    """Stationary distribution of the truncated chain, ``values[i, j]``."""

    Nh: int
    Nl: int
    values: np.ndarray
    residual: float
    edge_mass: float
    method: Method = Method.DIRECT
    converged: bool = True
    sweeps: int = 0

    @property
    def suspect(self) -> bool:
        return self.edge_mass > 1e-8

    def column(self, i: int) -> np.ndarray:
        """pi_{i, j} for j = 0..Nl (i.e. the low-direction series at fixed i)."""
        return self.values[i, :]

    def row(self, j: int) -> np.ndarray:
        return self.values[:, j]

    def high_marginal(self) -> np.ndarray:
        return self.values.sum(axis=1)

    def low_marginal(self) -> np.ndarray:
        return self.values.sum(axis=0)

    def to_csv(self, path) -> None:
        ii, jj = np.indices(self.values.shape)
        with open(path, "w", newline="\n") as fh:
            fh.write("i,j,pi\n")
            for i, j, v in zip(ii.ravel(), jj.ravel(), self.values.ravel()):
                fh.write(f"{i},{j},{v:.17g}\n")

    def to_binary(self, path) -> None:
        """Two little-endian uint32 extents (rows, cols), then row-major float64."""
        rows, cols = self.values.shape
        with open(path, "wb") as fh:
            fh.write(np.array([rows, cols], dtype="<u4").tobytes())
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())

    @classmethod
    def from_csv(cls, path, params: ModelParams | None = None) -> "StationaryGrid":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        i = data[:, 0].astype(int)
        j = data[:, 1].astype(int)
        values = np.zeros((i.max() + 1, j.max() + 1))
        values[i, j] = data[:, 2]
        return _wrap(values, params, Method.DIRECT)

    @classmethod
    def from_binary(cls, path, params: ModelParams | None = None) -> "StationaryGrid":
        raw = open(path, "rb").read()
        rows, cols = np.frombuffer(raw[:8], dtype="<u4")
        values = np.frombuffer(raw[8:], dtype="<f8").reshape(int(rows), int(cols)).copy()
        return _wrap(values, params, Method.DIRECT)


def _wrap(values, params, method, converged=True, sweeps=0):
    Nh, Nl = values.shape[0] - 1, values.shape[1] - 1
    resid = balance_residual(values, params) if params is not None and min(values.shape) >= 3 else float("nan")
    edge = float(values[Nh, :].sum() + values[:, Nl].sum() - values[Nh, Nl])
    return StationaryGrid(Nh, Nl, values, resid, edge, method, converged, sweeps)


def transition_coo(params: ModelParams, Nh: int, Nl: int):
    """One-step transitions of the reflected truncation as COO arrays.

    Returns ``(src_i, src_j, dst_i, dst_j, prob)``.
    """
    ii, jj = np.indices((Nh + 1, Nl + 1))
    ii, jj = ii.ravel(), jj.ravel()
    parts = []
    for region in Region:
        if region is Region.ORIGIN:
            mask = (ii == 0) & (jj == 0)
        elif region is Region.HBOUNDARY:
            mask = (ii >= 1) & (jj == 0)
        elif region is Region.VBOUNDARY:
            mask = (ii == 0) & (jj >= 1)
        else:
            mask = (ii >= 1) & (jj >= 1)
        si, sj = ii[mask], jj[mask]
        for di, dj, prob in transition_table(params, region).entries:
            ti, tj = si + di, sj + dj
            out = (ti < 0) | (ti > Nh) | (tj < 0) | (tj > Nl)
            ti = np.where(out, si, ti)
            tj = np.where(out, sj, tj)
            parts.append((si, sj, ti, tj, np.full(si.shape, prob)))
    return tuple(np.concatenate(col) for col in zip(*parts))


def transition_matrix(params: ModelParams, Nh: int, Nl: int) -> sparse.csr_matrix:
    """Row-stochastic operator, state (i, j) at index ``i * (Nl + 1) + j``."""
    si, sj, ti, tj, pr = transition_coo(params, Nh, Nl)
    n = (Nh + 1) * (Nl + 1)
    return sparse.csr_matrix((pr, (si * (Nl + 1) + sj, ti * (Nl + 1) + tj)), shape=(n, n))


# --- level-blocked GTH ------------------------------------------------------


@numba.njit(cache=True)
def _assemble(Z, U, n, m, ptr, ph_src, lv_dst, ph_dst, prob):
    """Load the pair (level n-1, level n) into the 2m x 2m work matrix."""
    Z[:, :] = 0.0
    Z[m:, m:] = U
    for e in range(ptr[n - 1], ptr[n]):
        if lv_dst[e] == n - 1:
            Z[ph_src[e], ph_dst[e]] += prob[e]
        elif lv_dst[e] == n:
            Z[ph_src[e], m + ph_dst[e]] += prob[e]
    for e in range(ptr[n], ptr[n + 1]):
        if lv_dst[e] == n - 1:
            Z[m + ph_src[e], ph_dst[e]] += prob[e]


@numba.njit(cache=True)
def _local_block(U, n, ptr, ph_src, lv_dst, ph_dst, prob):
    U[:, :] = 0.0
    for e in range(ptr[n], ptr[n + 1]):
        if lv_dst[e] == n:
            U[ph_src[e], ph_dst[e]] += prob[e]


@numba.njit(cache=True)
def _gth_eliminate(Z, lo, hi):
    """Censor out states hi-1, ..., lo of the stochastic matrix Z[:hi, :hi].

    Column k is left holding P[i, k] / s_k for i < k, which is what the
    back substitution consumes.
    """
    nz = np.empty(hi, dtype=np.int64)
    for k in range(hi - 1, lo - 1, -1):
        s = 0.0
        cnt = 0
        for j in range(k):
            v = Z[k, j]
            if v != 0.0:
                s += v
                nz[cnt] = j
                cnt += 1
        if s <= 0.0:
            continue
        inv = 1.0 / s
        for i in range(k):
            a = Z[i, k]
            if a != 0.0:
                a *= inv
                Z[i, k] = a
                for t in range(cnt):
                    j = nz[t]
                    Z[i, j] += a * Z[k, j]


@numba.njit(cache=True)
def _sweep_down(U, top, bottom, m, ptr, ph_src, lv_dst, ph_dst, prob, B, W, keep):
    """Eliminate levels top, top-1, ..., bottom+1; return the censored block of ``bottom``.

    With ``keep`` the normalized column blocks of level n go to
    ``B[n - bottom - 1]`` (from level n-1) and ``W[n - bottom - 1]`` (within n).
    """
    Z = np.empty((2 * m, 2 * m))
    U = U.copy()
    for n in range(top, bottom, -1):
        _assemble(Z, U, n, m, ptr, ph_src, lv_dst, ph_dst, prob)
        _gth_eliminate(Z, m, 2 * m)
        if keep:
            B[n - bottom - 1, :, :] = Z[:m, m:]
            W[n - bottom - 1, :, :] = Z[m:, m:]
        U = Z[:m, :m].copy()
    return U


@numba.njit(cache=True)
def _back_substitute(x_prev, Bn, Wn, m):
    x = np.zeros(m)
    for k in range(m):
        t = 0.0
        for i in range(m):
            t += x_prev[i] * Bn[i, k]
        for i in range(k):
            t += x[i] * Wn[i, k]
        x[k] = t
    return x


@numba.njit(cache=True)
def _gth_vector(U):
    m = U.shape[0]
    P = U.copy()
    _gth_eliminate(P, 1, m)
    x = np.zeros(m)
    x[0] = 1.0
    for k in range(1, m):
        t = 0.0
        for i in range(k):
            t += x[i] * P[i, k]
        x[k] = t
    return x


def _solve_gth(params: ModelParams, Nh: int, Nl: int) -> np.ndarray:
    si, sj, ti, tj, pr = transition_coo(params, Nh, Nl)
    # levels along the longer axis keep the dense blocks small
    if Nl >= Nh:
        lv_s, ph_s, lv_d, ph_d, n_lv, m = sj, si, tj, ti, Nl + 1, Nh + 1
    else:
        lv_s, ph_s, lv_d, ph_d, n_lv, m = si, sj, ti, tj, Nh + 1, Nl + 1
    order = np.argsort(lv_s, kind="stable")
    lv_s, ph_s, lv_d, ph_d, pr = lv_s[order], ph_s[order], lv_d[order], ph_d[order], pr[order]
    ptr = np.searchsorted(lv_s, np.arange(n_lv + 1)).astype(np.int64)
    args = (m, ptr, ph_s.astype(np.int64), lv_d.astype(np.int64), ph_d.astype(np.int64), pr)

    top = n_lv - 1
    seg = max(1, int(_BLOCK_BUDGET // (16 * m * m)))
    bounds = list(range(0, top, seg)) + [top]
    empty = np.zeros((0, m, m))

    U = np.zeros((m, m))
    _local_block(U, top, ptr, args[2], args[3], args[4], pr)
    checkpoints = {top: U.copy()}
    for lo, hi in zip(bounds[-2::-1], bounds[:0:-1]):
        U = _sweep_down(U, hi, lo, *args, empty, empty, False)
        checkpoints[lo] = U.copy()

    x = np.zeros((n_lv, m))
    x[0] = _gth_vector(checkpoints[0])
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        B = np.empty((hi - lo, m, m))
        W = np.empty((hi - lo, m, m))
        _sweep_down(checkpoints[hi], hi, lo, *args, B, W, True)
        for n in range(lo + 1, hi + 1):
            x[n] = _back_substitute(x[n - 1], B[n - lo - 1], W[n - lo - 1], m)
    x /= x.sum()
    return x.T if Nl >= Nh else x


def _solve_power(params: ModelParams, Nh: int, Nl: int, tol: float, max_sweeps: int):
    PT = transition_matrix(params, Nh, Nl).T.tocsr()
    n = PT.shape[0]
    x = np.full(n, 1.0 / n)
    for sweep in range(1, max_sweeps + 1):
        y = PT @ x
        if sweep % 100 == 0:
            y /= y.sum()
        diff = np.max(np.abs(y - x))
        x = y
        if diff < tol:
            return x / x.sum(), True, sweep
    return x / x.sum(), False, max_sweeps


def solve_truncated(
    params: ModelParams,
    Nh: int,
    Nl: int,
    method: Method | str = Method.DIRECT,
    tol: float = 1e-13,
    max_sweeps: int = 1_000_000,
) -> StationaryGrid:
    """Stationary distribution of the chain truncated to ``[0, Nh] x [0, Nl]``.

    Raises ``BudgetExceeded`` (with ``.grid`` holding the last iterate) when
    the iterative method hits ``max_sweeps``.
    """
    params.require_stable()
    method = Method(method)
    if Nh < 2 or Nl < 2:
        raise DimensionMismatch("truncation extents must be at least 2")
    n_states = (Nh + 1) * (Nl + 1)
    if method is Method.DIRECT:
        if n_states > DIRECT_MAX_STATES:
            raise DimensionMismatch(f"{n_states} states exceed the direct-solver limit")
        values = _solve_gth(params, Nh, Nl)
        return _wrap(values, params, method)
    if n_states > ITERATIVE_MAX_STATES:
        raise DimensionMismatch(f"{n_states} states exceed the iterative-solver limit")
    x, ok, sweeps = _solve_power(params, Nh, Nl, tol, max_sweeps)
    grid = _wrap(x.reshape(Nh + 1, Nl + 1), params, method, ok, sweeps)
    if not ok:
        raise BudgetExceeded(f"power iteration did not converge in {max_sweeps} sweeps", grid)
    return grid


# --- tail fitting ------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    rate: float
    power: float
    constant: float
    window: tuple
    max_deviation: float


def _series(grid: StationaryGrid, direction, fixed_index):
    direction = Direction(direction)
    if direction is Direction.LOW:
        s = grid.low_marginal() if fixed_index == MARGINAL else grid.values[fixed_index, :]
        n_max = grid.Nl
    else:
        s = grid.high_marginal() if fixed_index == MARGINAL else grid.values[:, fixed_index]
        n_max = grid.Nh
    return np.asarray(s, dtype=float), n_max


def fit_sequence(values, indices, power: float = 0.0, rate: float | None = None) -> FitResult:
    """Fit ``value ~ constant * index**power * rate**index`` with medians.

    The rate comes from power-corrected consecutive ratios unless given.
    """
    values = np.asarray(values, dtype=float)
    idx = np.asarray(indices, dtype=float)
    if values.size < 10:
        raise WindowTooSmall(f"fit window has {values.size} points, need at least 10")
    if rate is None:
        ratios = values[1:] / values[:-1] * (idx[:-1] / idx[1:]) ** power if power else values[1:] / values[:-1]
        rate = float(np.median(ratios))
    with np.errstate(divide="ignore"):
        log_model = power * np.log(idx) + idx * math.log(rate)
    scaled = values / np.exp(log_model)
    constant = float(np.median(scaled))
    dev = float(np.max(np.abs(scaled / constant - 1.0)))
    return FitResult(rate, float(power), constant, (int(idx[0]), int(idx[-1])), dev)


def tail_fit(
    grid: StationaryGrid,
    direction,
    fixed_index,
    assumed_power: float = 0.0,
    window: tuple | None = None,
    rate: float | None = None,
) -> FitResult:
    """Estimate rate and prefactor of a grid row, column or marginal.

    Usable indices hold normal (non-underflowed) values and sit at most 80 %
    of the way to the truncation edge.  ``window`` is an inclusive index
    range; by default the upper half of the usable range is fitted.
    """
    series, n_max = _series(grid, direction, fixed_index)
    usable_floor = 1e3 * np.finfo(float).tiny
    limit = int(math.floor(0.8 * n_max))
    usable = [k for k in range(min(limit, len(series) - 1) + 1) if series[k] > usable_floor]
    if len(usable) < 20:
        raise WindowTooSmall(f"only {len(usable)} usable indices before the truncation edge")
    if window is None:
        lo = max(1, usable[len(usable) // 2])
        hi = usable[-1]
    else:
        lo, hi = int(window[0]), int(window[1])
    chosen = [k for k in usable if lo <= k <= hi and k >= (1 if assumed_power else 0)]
    if len(chosen) < 10 or chosen != list(range(chosen[0], chosen[-1] + 1)):
        raise WindowTooSmall(f"window {lo}..{hi} has {len(chosen)} contiguous usable indices, need 10")
    return fit_sequence(series[chosen], chosen, assumed_power, rate)
