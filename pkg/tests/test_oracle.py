import numpy as np
import pytest

from prioq import Method, StationaryGrid, balance_residual, new_params, solve_truncated, tail_fit
from prioq.exceptions import BudgetExceeded, DimensionMismatch, Unstable, WindowTooSmall
from prioq.oracle import fit_sequence, transition_matrix


def test_transition_matrix_is_stochastic(ref):
    P = transition_matrix(ref, 6, 5)
    assert P.shape == (42, 42)
    np.testing.assert_allclose(np.asarray(P.sum(axis=1)).ravel(), 1.0, atol=1e-14)
    assert P.min() >= 0


def test_direct_and_power_agree(ref):
    g1 = solve_truncated(ref, 30, 30, Method.DIRECT)
    g2 = solve_truncated(ref, 30, 30, "iterative", tol=1e-15)
    assert g2.converged
    np.testing.assert_allclose(g2.values, g1.values, rtol=1e-8, atol=1e-16)


def test_grid_is_distribution(ref_grid, ref):
    assert ref_grid.values.sum() == pytest.approx(1.0, abs=1e-13)
    assert ref_grid.values.min() >= 0
    assert balance_residual(ref_grid, ref) < 1e-14


def test_pi00_reference(ref_grid):
    assert ref_grid.values[0, 0] == pytest.approx(0.6074857926709777, rel=1e-10)


def test_boundary_row_ratio_at_one():
    # a chain with only high-priority traffic behaves like Geo/Geo/1
    pm = new_params(0.2, 0.0 + 1e-9, 0.5, 0.3 - 1e-9)
    g = solve_truncated(pm, 60, 4)
    r = pm.p * pm.mubar_h / (pm.pbar * pm.mu_h)
    col = g.high_marginal()
    np.testing.assert_allclose(col[2:20] / col[1:19], r, rtol=1e-6)


def test_csv_and_binary_round_trip(tmp_path, ref):
    g = solve_truncated(ref, 12, 9)
    g.to_csv(tmp_path / "g.csv")
    g.to_binary(tmp_path / "g.bin")
    np.testing.assert_array_equal(StationaryGrid.from_csv(tmp_path / "g.csv").values, g.values)
    np.testing.assert_array_equal(StationaryGrid.from_binary(tmp_path / "g.bin").values, g.values)


def test_errors(ref):
    with pytest.raises(Unstable):
        solve_truncated(new_params(0.3, 0.3, 0.2, 0.2), 10, 10)
    with pytest.raises(DimensionMismatch):
        solve_truncated(ref, 1, 10)
    with pytest.raises(DimensionMismatch):
        solve_truncated(ref, 3000, 3000)
    with pytest.raises(BudgetExceeded) as info:
        solve_truncated(ref, 20, 20, "iterative", max_sweeps=3)
    assert info.value.grid is not None


def test_tail_fit_boundary_row(ref_grid):
    fit = tail_fit(ref_grid, "low", 0, window=(40, 80))
    # the branch-point term still contributes a few 1e-6 to the ratios here
    assert fit.rate == pytest.approx(0.36971210761255835, abs=1e-5)
    assert fit.constant == pytest.approx(0.31218354200606724, rel=2e-3)


def test_fit_sequence_exact():
    n = np.arange(5, 40)
    v = 2.5 * n**-1.5 * 0.7**n
    fit = fit_sequence(v, n, -1.5)
    assert fit.rate == pytest.approx(0.7, rel=1e-12)
    assert fit.constant == pytest.approx(2.5, rel=1e-12)
    with pytest.raises(WindowTooSmall):
        fit_sequence(v[:5], n[:5])


def test_tail_fit_window_too_small(ref_grid):
    with pytest.raises(WindowTooSmall):
        tail_fit(ref_grid, "low", 0, window=(40, 45))
