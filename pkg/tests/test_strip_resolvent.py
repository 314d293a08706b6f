import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from softguide.bs_core import free_bs_matrix
from softguide.errors import AccuracyError, ConfigError
from softguide.measure import Disk, area_measure, place_at_distance
from softguide.specfun import free_kernel
from softguide.strip_resolvent import (SheetConfig, cos_tail, cos_tail_table, cosine_kernel,
                                       fourier_route_kernel, g_matrix, hs_norm_squared,
                                       momentum_grid, rc_kernel, rd_kernel, strip_minus_free)
from softguide.transverse import TransverseProfile, solve_modes


@pytest.fixture(scope="module")
def disk_above():
    return place_at_distance(area_measure(Disk((0, 0), 1.0), 4), 1.5, 2.0)


@pytest.mark.parametrize("x,y", [((0.0, 0.5), (0.7, 1.9)), ((-1.0, 3.0), (0.4, -0.5)),
                                 ((0.2, 4.0), (1.5, 3.5))])
def test_mode_plus_continuum_equals_fourier_route(profile5, modes5, x, y):
    z = -5.0
    dual = rd_kernel(modes5, z, None, x, y) + rc_kernel(profile5, z, x, y)
    assert abs(dual - fourier_route_kernel(profile5, z, x, y)) < 1e-8


def test_single_route_rejections(profile5):
    with pytest.raises(AccuracyError):
        rc_kernel(profile5, -5.0, (0.0, 0.5), (0.0, 1.0))
    with pytest.raises(AccuracyError):
        fourier_route_kernel(profile5, -5.0, (0.0, 0.5), (0.0, 0.5))


def test_free_profile_gives_free_kernel():
    prof = TransverseProfile.constant(2.0, 0.0)
    x, y = (0.0, 1.0), (0.8, 3.0)
    z = -1.7 + 0.2j
    r = np.hypot(0.8, 2.0)
    assert fourier_route_kernel(prof, z, x, y) == pytest.approx(free_kernel(z, r), abs=1e-10)


@pytest.mark.parametrize("z", [-5.0, -2.0 + 0.3j, -4.5 + 0.01j])
def test_remainder_matches_fourier_minus_free(profile5, modes5, disk_above, z):
    sheet = SheetConfig(len(modes5), 0)
    D = strip_minus_free(disk_above, profile5, modes5, z, sheet, rho=1.5)
    pts = disk_above.nodes
    for i, j in ((0, 5), (3, 20), (17, 30)):
        r = np.hypot(*(pts[i] - pts[j]))
        ref = fourier_route_kernel(profile5, z, pts[i], pts[j]) - free_kernel(z, r)
        assert abs(D[i, j] - ref) < 1e-9


def test_free_strip_has_zero_remainder(disk_above):
    prof = TransverseProfile.constant(2.0, 0.0)
    D = strip_minus_free(disk_above, prof, [], -1.3 + 0.1j, SheetConfig(0, 0), rho=1.5)
    assert np.abs(D).max() < 1e-15


def test_real_below_spectrum(profile5, modes5, disk_above):
    g = g_matrix(disk_above, profile5, modes5, 4.0, -4.5, SheetConfig(len(modes5), 0))
    assert np.abs(g.imag_part).max() < 1e-13
    assert np.allclose(g.hat, g.hat.T)


def test_g_linear_in_beta(profile5, modes5, disk_above):
    sh = SheetConfig(len(modes5), 1)
    a = g_matrix(disk_above, profile5, modes5, 1.0, -1.6 - 0.01j, sh)
    b = g_matrix(disk_above, profile5, modes5, 2.5, -1.6 - 0.01j, sh)
    assert np.allclose(b.hat, 2.5 * a.hat, rtol=1e-14, atol=0)


def test_continuation_is_continuous_across_the_cut(profile5, modes5, disk_above):
    """First-sheet values just above the cut meet second-sheet values just below it."""
    E = -1.66
    up = strip_minus_free(disk_above, profile5, modes5, E + 1e-9j, SheetConfig(len(modes5), 0), rho=1.5)
    dn = strip_minus_free(disk_above, profile5, modes5, E - 1e-9j, SheetConfig(len(modes5), 1), rho=1.5)
    assert np.abs(up - dn).max() < 1e-7 * np.abs(up).max()
    first_dn = strip_minus_free(disk_above, profile5, modes5, E - 1e-3j, SheetConfig(len(modes5), 0), rho=1.5)
    assert np.abs(first_dn - dn).max() > 1e-4 * np.abs(dn).max()


def test_imaginary_part_is_cosine_kernel(profile5, modes5, disk_above):
    E = -1.66
    j = 1
    D = strip_minus_free(disk_above, profile5, modes5, E, SheetConfig(len(modes5), j), rho=1.5)
    pts = disk_above.nodes
    ck = cosine_kernel(modes5, E, j, pts[:, None, :], pts[None, :, :])
    assert np.allclose(D.imag, ck, atol=1e-12)


def test_upper_half_plane_second_sheet_below_threshold_rejected(profile5, modes5, disk_above):
    with pytest.raises(ConfigError):
        g_matrix(disk_above, profile5, modes5, 1.0, -4.0 + 0.1j, SheetConfig(len(modes5), 1))


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 30.0), st.floats(0.05, 4.0))
def test_cos_tail_matches_quadrature(delta, c):
    import mpmath
    P = 5.0
    # full half-line integral in closed form minus the finite part on [0, P]
    f = lambda p: mpmath.cos(p * delta) / (p * p + c)
    r = mpmath.sqrt(c)
    ref = mpmath.pi * mpmath.exp(-r * delta) / (2 * r) - mpmath.quad(f, mpmath.linspace(0, P, 6))
    assert cos_tail(np.array([delta]), c, P)[0] == pytest.approx(float(ref), abs=1e-13)


def test_cos_tail_table_matches_direct():
    d = np.linspace(0, 7, 2000)
    c = 0.7 - 0.01j
    assert np.allclose(cos_tail_table(d, c, 12.0), cos_tail(d, c, 12.0), atol=1e-14)


def test_momentum_grid_symmetric_about_open_channel(modes5):
    g = momentum_grid(modes5, -1.66, 2.0)
    p0 = np.sqrt(-1.66 - modes5[0].energy)
    # polynomials integrate exactly; panels are split at p0 +- h
    assert np.sum(g.w) == pytest.approx(g.P, rel=1e-14)
    assert np.sum(g.w * g.p ** 5) == pytest.approx(g.P ** 6 / 6, rel=1e-12)
    assert np.min(np.abs(g.p - p0)) > 1e-3


def test_hs_norm_tail_and_monotone_decay():
    d = 2.0
    base = area_measure(Disk((0, 0), 1.0), 6)
    vals = []
    for rho in (1.0, 2.0, 3.0):
        v, tail = hs_norm_squared(place_at_distance(base, rho, d), d)
        assert tail < 1e-7 * v
        vals.append(v)
    assert vals[0] > vals[1] > vals[2]


def test_hs_norm_point_mass_against_double_integral():
    from scipy.integrate import dblquad
    from softguide.measure import KatoMeasure
    x2 = 3.0
    ref = 2 * dblquad(lambda t, y: abs(free_kernel(-1.0, np.hypot(t, x2 - y))) ** 2, 0, 2, 0, 60)[0]
    point = KatoMeasure("area", np.array([[0.0, x2]]), np.array([1.0]), 1.0, (0, 0, x2, x2), None)
    assert hs_norm_squared(point, 2.0)[0] == pytest.approx(ref, rel=1e-10)
