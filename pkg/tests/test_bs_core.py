import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import i0, i1, k0, k1

from oracles import circle_delta_energy, disk_well_energy
from softguide.bs_core import (BSExpansion, bs_hat_derivative, deflated_inverse,
                               eigenfunction_on_nodes, free_bs_matrix, trap_eigenfunction,
                               trap_eigenvalues)
from softguide.errors import CancellationError, ConfigError, MultiplicityError
from softguide.measure import Circle, Disk, Rectangle, Segment, area_measure, curve_measure

# ground state of a beta=4 unit disk well (radial matching, scipy brentq)
E_DISK4 = -1.664653570619889


@pytest.fixture(scope="module")
def disk8():
    return area_measure(Disk((0.0, 0.0), 1.0), 8)


@pytest.fixture(scope="module")
def loop8():
    return curve_measure(Circle((0.0, 0.0), 1.0), 8)


def test_frozen_disk_oracle():
    assert disk_well_energy(4.0) == pytest.approx(E_DISK4, rel=1e-12)


def test_area_rows_integrate_constant_exactly(disk8):
    """Singularity subtraction: each row of K applied to 1 equals the exact disk integral."""
    E = -2.0
    K = free_bs_matrix(disk8, E).matrix
    kap = math.sqrt(-E)
    # at the centre int_disk K0(kap|x|) dx / 2pi = (1 - kap K1(kap)) / kap^2
    centre_val = (1 - kap * k1(kap)) / kap ** 2
    # nodes closest to the centre approach this value
    r = np.hypot(*disk8.nodes.T)
    i = np.argmin(r)
    assert K[i].sum() == pytest.approx(centre_val, rel=2e-2)
    # rotational symmetry: equal radius -> equal row sums
    rows = K.sum(axis=1)
    same = np.isclose(r, r[i])
    assert np.ptp(rows[same]) < 1e-12


def test_hat_is_symmetric_and_positive(disk8, loop8):
    for m in (disk8, loop8):
        H = free_bs_matrix(m, -1.5).hat
        assert np.allclose(H, H.T, atol=1e-13)
        assert np.linalg.eigvalsh(H)[-1] > 0


def test_circle_bs_spectrum_matches_bessel_products(loop8):
    """On a unit circle the operator's eigenvalues are I_l(kappa) K_l(kappa)."""
    for E in (-0.3, -2.0, -9.0):
        kap = math.sqrt(-E)
        ev = np.sort(np.linalg.eigvalsh(free_bs_matrix(loop8, E).hat))[::-1]
        assert ev[0] == pytest.approx(i0(kap) * k0(kap), rel=1e-7)
        assert ev[1] == pytest.approx(i1(kap) * k1(kap), rel=1e-7)
        assert ev[2] == pytest.approx(i1(kap) * k1(kap), rel=1e-7)


@settings(max_examples=20, deadline=None)
@given(st.floats(-8, -0.05), st.floats(0.01, 2))
def test_spectrum_increases_with_energy(E, dE):
    m = curve_measure(Segment((0, 0), (1.5, 0.5)), 3)
    lo = np.linalg.eigvalsh(free_bs_matrix(m, E).hat)[-3:]
    hi = np.linalg.eigvalsh(free_bs_matrix(m, min(E + dE, -0.01)).hat)[-3:]
    assert np.all(hi >= lo - 1e-12)


def test_complex_step_derivative_matches_difference(disk8):
    E, h = -1.7, 1e-5
    d = bs_hat_derivative(disk8, E)
    fd = (free_bs_matrix(disk8, E + h).hat - free_bs_matrix(disk8, E - h).hat) / (2 * h)
    assert np.allclose(d, fd, atol=1e-8)


def test_disk_trap_converges_to_radial_oracle():
    errs = []
    for order in (6, 12):
        st_ = trap_eigenvalues(area_measure(Disk((0, 0), 1.0), order), 4.0)
        assert len(st_) == 1
        errs.append(abs(st_[0].energy - E_DISK4) / abs(E_DISK4))
    assert errs[1] < 1e-5
    assert errs[0] / errs[1] > 4


@pytest.mark.parametrize("beta", [0.5, 1.0, 1.8])
def test_circle_trap_matches_closed_form(beta):
    states = trap_eigenvalues(curve_measure(Circle((0, 0), 1.0), 8), beta)
    assert len(states) == 1
    assert states[0].energy == pytest.approx(circle_delta_energy(beta), rel=1e-8)


def test_degenerate_circle_level_is_reported():
    # beta = 3 binds the doubly degenerate l = 1 pair as well
    with pytest.raises(MultiplicityError):
        trap_eigenvalues(curve_measure(Circle((0, 0), 1.0), 8), 3.0)


def test_curve_with_positive_beta_always_binds():
    for beta in (1.5, 4.0):
        assert trap_eigenvalues(curve_measure(Segment((0, 0), (1, 0)), 4), beta)


def test_trap_input_validation(disk8):
    with pytest.raises(ConfigError):
        trap_eigenvalues(disk8, -1.0)
    # binding energy far below the counting cutoff: reported as no state
    assert trap_eigenvalues(area_measure(Disk((0, 0), 0.2), 4), 1e-3) == []


def test_weak_area_well_binds_once():
    st_ = trap_eigenvalues(area_measure(Rectangle(0, 1, 0, 1), 8), 2.0)
    assert len(st_) == 1 and -2.0 < st_[0].energy < 0


def _exact_disk_state(E, beta=4.0):
    """Normalized radial ground state: ``A J0(k r)`` inside, ``B K0(kappa r)`` outside."""
    from scipy.integrate import quad
    from scipy.special import j0
    k, kap = math.sqrt(beta + E), math.sqrt(-E)
    ratio = j0(k) / k0(kap)
    inner = quad(lambda r: j0(k * r) ** 2 * 2 * np.pi * r, 0, 1, epsabs=1e-14)[0]
    outer = quad(lambda r: (ratio * k0(kap * r)) ** 2 * 2 * np.pi * r, 1, np.inf, epsabs=1e-14)[0]
    A = 1 / math.sqrt(inner + outer)
    return lambda r: A * ratio * k0(kap * r)


def test_eigenvector_normalization_gives_unit_eigenfunction(disk8):
    """``w . Khat'(E) w = 1`` makes the generated eigenfunction a unit vector."""
    s = trap_eigenvalues(disk8, 4.0)[0]
    dK = bs_hat_derivative(disk8, s.energy)
    assert s.vector @ dK @ s.vector == pytest.approx(1.0, rel=1e-12)
    exact = _exact_disk_state(E_DISK4)
    r = np.array([1.5, 3.0, 6.0])
    om = trap_eigenfunction(s, disk8, np.column_stack([r, np.zeros_like(r)]))
    assert np.allclose(om, exact(r), rtol=1e-4)


def test_eigenfunction_symmetry_and_decay(disk8):
    s = trap_eigenvalues(disk8, 4.0)[0]
    ang = np.linspace(0, 2 * np.pi, 7)
    for R in (3.0, 5.0):
        vals = trap_eigenfunction(s, disk8, np.column_stack([R * np.cos(ang), R * np.sin(ang)]))
        assert np.ptp(vals) < 1e-6 * abs(vals).max()
    kap = math.sqrt(-s.energy)
    far = trap_eigenfunction(s, disk8, np.array([[6.0, 0.0], [9.0, 0.0]]))
    assert far[1] / far[0] == pytest.approx(k0(9 * kap) / k0(6 * kap), rel=1e-6)
    assert np.allclose(eigenfunction_on_nodes(s), trap_eigenfunction(s, disk8, disk8.nodes))


def test_deflated_inverse_is_regular(disk8):
    s = trap_eigenvalues(disk8, 4.0)[0]
    a1 = deflated_inverse(disk8, 4.0, s, s.energy + 1e-4)
    a2 = deflated_inverse(disk8, 4.0, s, s.energy + 2e-4)
    a3 = deflated_inverse(disk8, 4.0, s, s.energy - 1e-4 + 1e-4j)
    assert np.linalg.norm(a1 - a2) < 1e-3 * np.linalg.norm(a1)
    assert np.linalg.norm(a1 - a3) < 1e-3 * np.linalg.norm(a1)
    with pytest.raises(CancellationError):
        deflated_inverse(disk8, 4.0, s, s.energy)


def test_deflation_identity(disk8):
    """``(I - beta K)^-1 = A + w w^T / (beta (E - z))``."""
    s = trap_eigenvalues(disk8, 4.0)[0]
    z = s.energy + 0.05 - 0.02j
    K = free_bs_matrix(disk8, z).hat
    full = np.linalg.inv(np.eye(len(K)) - 4.0 * K)
    A = deflated_inverse(disk8, 4.0, s, z)
    assert np.allclose(A + np.outer(s.vector, s.vector) / (4.0 * (s.energy - z)), full)


def test_taylor_expansion_matches_direct_assembly(disk8):
    s = trap_eigenvalues(disk8, 4.0)[0]
    ex = BSExpansion(disk8, s.energy, 0.3)
    for z in (s.energy + 0.05, s.energy - 0.02 - 0.07j):
        assert np.allclose(ex.hat(z), free_bs_matrix(disk8, z).hat, atol=1e-13)


def test_translation_invariance(disk8):
    a = free_bs_matrix(disk8, -1.2 - 0.3j).hat
    b = free_bs_matrix(disk8.translated(3.0, -7.5), -1.2 - 0.3j).hat
    assert np.allclose(a, b, atol=1e-14)
