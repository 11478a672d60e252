import numpy as np
import pytest

from prioq import HorizontalGF, boundary_gf, eval_P, new_params, phi_j, psi0, psi0_series, spectral_data, tt_star
from prioq.exceptions import PoleAtX, PrioqError, UnsupportedRegime
from prioq.genfunc import contour_radius, dT_dy, dominant_singularity, psi0_at_one, psi0_forms

from .conftest import random_params

PI00 = 0.6074857926709777


def test_reference_boundary_gf(ref):
    gf = boundary_gf(ref)
    assert gf.pi00 == pytest.approx(PI00, rel=1e-14)
    assert gf.eta1 == pytest.approx(0.36971210761255835, rel=1e-14)
    assert gf.eta2 == pytest.approx(-0.23920064376776154, rel=1e-13)
    assert 1 / gf.eta1 == pytest.approx(2.704807279, rel=1e-9)
    assert gf.F_at(1.0) == pytest.approx(ref.mu_h - ref.p, abs=1e-14)
    assert gf.pf_a + gf.pf_b == pytest.approx(gf.pi00 / (2 * ref.pbar * ref.mu_l), rel=1e-14)


def test_eta_are_zeros_of_f_reversed(ref, rng):
    for pm in [ref, *random_params(rng, 30)]:
        gf = boundary_gf(pm)
        for eta in (gf.eta1, gf.eta2):
            # f(1/eta) = 0 written without the division
            c2, c1, c0 = gf.f
            assert abs(c2 + c1 * eta + c0 * eta * eta) < 1e-13 * (abs(c2) + abs(c1) + abs(c0))


def test_unsupported_gate():
    with pytest.raises(UnsupportedRegime):
        boundary_gf(new_params(0.1, 0.1, 0.35, 0.45))


def test_tt_star_factorization(ref, rng):
    ys = np.linspace(-1, 1.5, 60)
    for pm in [ref, *random_params(rng, 20)]:
        gf = boundary_gf(pm)
        t, ts = tt_star(pm, ys, gf)
        quartic = (4 * pm.pbar**2 * pm.qbar * pm.mu_l**2 * (pm.q * ys + pm.qbar) * (1 - ys)
                   * (1 - gf.eta1 * ys) * (1 - gf.eta2 * ys))
        np.testing.assert_allclose(t * ts, quartic, rtol=1e-10, atol=1e-12)


def test_dT_at_one(ref):
    expected = -2 * ref.pbar * ref.mu_l * (1 - ref.rho) / (1 - ref.rho_h)
    assert dT_dy(ref, 1.0) == pytest.approx(expected, rel=1e-10)
    h = 1e-5
    t_plus, _ = tt_star(ref, 1 + h)
    t_minus, _ = tt_star(ref, 1 - h)
    assert (t_plus - t_minus) / (2 * h) == pytest.approx(expected, rel=1e-8)


def test_psi0_values(ref):
    assert psi0(ref, 0.0) == pytest.approx(PI00, rel=1e-14)
    assert psi0(ref, 1.0) == pytest.approx(0.8641975308641975, rel=1e-12)
    assert psi0_at_one(ref) == pytest.approx(ref.q / (ref.pbar * ref.mu_l) + ref.qbar * PI00, rel=1e-14)
    with pytest.raises(PrioqError):
        psi0(ref, 1.5)


def test_psi0_forms_agree(ref, rng):
    ys = np.linspace(-0.9, 0.9, 101)
    for pm in [ref, *random_params(rng, 20)]:
        for y in ys:
            pf, root = psi0_forms(pm, y)
            assert pf == pytest.approx(root, rel=1e-10)


def test_psi0_series_matches_oracle(ref, ref_grid):
    s = psi0_series(ref, 100)
    assert s[0] == PI00 or s[0] == pytest.approx(PI00, rel=1e-15)
    np.testing.assert_allclose(s, ref_grid.values[0, :101], rtol=0, atol=1e-12)
    partial = np.cumsum(psi0_series(ref, 2000))
    assert np.all(np.diff(partial) >= 0)
    assert partial[-1] <= psi0_at_one(ref) * (1 + 1e-12)
    assert partial[-1] == pytest.approx(psi0_at_one(ref), rel=1e-12)


def test_series_regime3_positive(regime3):
    assert dominant_singularity(regime3) == pytest.approx(spectral_data(regime3).y0)
    s = psi0_series(regime3, 300)
    assert (s[:200] > 0).all()     # later terms underflow
    assert contour_radius(regime3) == pytest.approx(0.9 * spectral_data(regime3).y0)


def test_series_bounds(ref):
    with pytest.raises(PrioqError):
        psi0_series(ref, 10_001)


def test_phi0_closed_form(ref):
    assert phi_j(ref, 0, 0.5) == pytest.approx(0.6407973333866498, rel=1e-14)
    r0 = spectral_data(ref).r0
    assert phi_j(ref, 0, 0.5) == pytest.approx(PI00 / (1 - 0.5 * r0), rel=1e-14)


def test_phi_at_zero_is_boundary(ref):
    rows = HorizontalGF(ref, 5)
    s = psi0_series(ref, 6)
    for j in range(6):
        assert rows(j, 0.0) == pytest.approx(s[j], rel=1e-10)


def test_phi_taylor_matches_oracle(ref, ref_grid):
    rows = HorizontalGF(ref, 2)
    m, r = 64, 0.8
    nodes = r * np.exp(2j * np.pi * np.arange(m) / m)
    for j in (0, 1, 2):
        vals = np.array([rows(j, x) for x in nodes])
        coef = (np.fft.fft(vals) / m).real / r ** np.arange(m)
        np.testing.assert_allclose(coef[:20], ref_grid.values[:20, j], atol=1e-10)


def test_phi_near_x0_is_smooth(ref, ref_grid):
    rows = HorizontalGF(ref, 6)
    x0 = rows.x0
    i = np.arange(ref_grid.Nh + 1)
    for j in range(7):
        for d in (1e-9, 0.99e-6, 1.01e-6, 1e-4, 0.49 * rows.radius, 0.51 * rows.radius):
            direct = (ref_grid.values[:, j] * (x0 + d) ** i).sum()
            assert rows(j, x0 + d) == pytest.approx(direct, rel=1e-9)


def test_phi_pole(ref):
    rows = HorizontalGF(ref, 1)
    with pytest.raises(PoleAtX):
        rows(1, rows.x1)
    with pytest.raises(PrioqError):
        rows(2, 0.3)


def test_eval_P_identities(ref, ref_grid):
    assert eval_P(ref, 1.0, 1.0) == pytest.approx(1.0, abs=1e-10)
    assert eval_P(ref, 0.0, 0.0) == pytest.approx(PI00, rel=1e-12)
    w = spectral_data(ref).w
    for x in (0.2, 0.5, 0.9):
        assert eval_P(ref, x, 1.0) == pytest.approx(psi0_at_one(ref) / (1 - w * x), abs=1e-10)
    v = ref_grid.values
    i, j = np.indices(v.shape)
    for x, y in [(0.3, 0.7), (-0.5, 0.2), (0.9, -0.8), (0.4 + 0.3j, 0.5)]:
        assert eval_P(ref, x, y) == pytest.approx((v * x**i * y**j).sum(), abs=1e-10)


def test_eval_P_at_removable_point(ref):
    from prioq.kernel import root_x0
    y = 0.6
    x0 = root_x0(ref, y)
    mid = eval_P(ref, x0, y)
    assert mid == pytest.approx(eval_P(ref, x0 + 1e-4, y), rel=1e-3)
    assert mid == pytest.approx(eval_P(ref, x0 - 1e-4, y), rel=1e-3)
