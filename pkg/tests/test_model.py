import numpy as np
import pytest

from prioq import Region, balance_residual, load_params, new_params, transition_table
from prioq.exceptions import DimensionMismatch, SimplexViolation, Unstable, UnsupportedRegime
from prioq.model import all_tables


def test_reference_rates(ref):
    assert ref.rho_h == pytest.approx(0.22222, abs=1e-5)
    assert ref.rho_l == pytest.approx(0.28571, abs=1e-5)
    assert ref.rho == pytest.approx(0.50794, abs=1e-5)
    assert ref.stable and ref.asymptotics_supported
    assert ref.pbar == pytest.approx(0.9) and ref.mubar_l == pytest.approx(0.65)


def test_unstable_is_a_flag_not_an_error():
    params = new_params(0.25, 0.25, 0.25, 0.25)
    assert params.rho == pytest.approx(2.0)
    assert not params.stable
    with pytest.raises(Unstable, match="unstable"):
        params.require_stable()


@pytest.mark.parametrize("vals", [(0.3, 0.3, 0.3, 0.3), (0.0, 0.1, 0.45, 0.45), (0.5, 0.5, 0.0, 0.0),
                                  (-0.1, 0.3, 0.4, 0.4), (float("nan"), 0.1, 0.45, 0.35)])
def test_simplex_violations(vals):
    with pytest.raises(SimplexViolation):
        new_params(*vals)


def test_strings_parse_as_decimals():
    params = new_params("0.1", "0.1", "0.45", "0.35")
    assert params.p == 0.1 and params.mu_l == 0.35


def test_unsupported_gate():
    params = new_params(0.1, 0.1, 0.35, 0.45)
    with pytest.raises(UnsupportedRegime, match="mu_l <= mu_h"):
        params.require_supported()


def test_load_params(tmp_path):
    path = tmp_path / "p.cfg"
    path.write_text("# reference\np = 0.1\nq: 0.1\nmu-h = 0.45\nmu_l = 0.35  # trailing\n")
    assert load_params(path) == new_params(0.1, 0.1, 0.45, 0.35)
    path.write_text("p = 0.1\nq = 0.1\n")
    with pytest.raises(SimplexViolation, match="lacks"):
        load_params(path)


def test_table_entries(ref):
    interior = transition_table(ref, Region.INTERIOR)
    assert interior[(-1, 1)] == pytest.approx(0.0405)
    origin = transition_table(ref, Region.ORIGIN)
    assert origin[(0, 0)] == pytest.approx(0.882)
    assert transition_table(ref, Region.VBOUNDARY)[(0, -1)] == pytest.approx(0.9 * 0.9 * 0.35)
    assert origin[(-1, 0)] == 0.0


def test_tables_sum_to_one_and_respect_quadrant(rng):
    for _ in range(1000):
        p, q, mh, _ = rng.dirichlet([1, 1, 1, 1])
        params = new_params(p, q, mh, 1.0 - p - q - mh)
        for region, table in all_tables(params).items():
            assert abs(table.total() - 1.0) <= 1e-12
            assert all(pr >= 0 for _, _, pr in table.entries)
            moves = table.as_dict()
            if region in (Region.ORIGIN, Region.VBOUNDARY):
                assert all(di >= 0 for di, _ in moves)
            if region in (Region.ORIGIN, Region.HBOUNDARY):
                assert all(dj >= 0 for _, dj in moves)


def test_hboundary_equals_interior(ref):
    assert transition_table(ref, "hboundary").as_dict() == transition_table(ref, "interior").as_dict()


def test_region_of():
    assert Region.of(0, 0) is Region.ORIGIN
    assert Region.of(3, 0) is Region.HBOUNDARY
    assert Region.of(0, 2) is Region.VBOUNDARY
    assert Region.of(1, 1) is Region.INTERIOR


def test_residual_of_uniform_grid(ref):
    for n in (3, 4, 5):
        assert balance_residual(np.full((n, n), 1.0 / n**2), ref) > 0.01


def test_residual_of_point_mass(ref):
    grid = np.zeros((10, 10))
    grid[0, 0] = 1.0
    expected = 1.0 - transition_table(ref, Region.ORIGIN)[(0, 0)]
    assert balance_residual(grid, ref) == pytest.approx(expected, rel=1e-12)


def test_residual_rejects_small_grid(ref):
    with pytest.raises(DimensionMismatch):
        balance_residual(np.ones((2, 5)), ref)
