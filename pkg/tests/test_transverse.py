import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from oracles import square_well_energies
from softguide.errors import ConfigError, ThresholdError
from softguide.transverse import (TransverseProfile, continuum_basis, count_below, eval_mode,
                                  eval_mode_derivative, generalized_eigenfunction,
                                  jost_coefficients, propagate, reflection_coefficient,
                                  solve_modes, transfer_determinant, transverse_green)

# bound energies of alpha = 5, d = 2 from the even/odd matching equations (mpmath bisection)
E_ALPHA5 = (-3.8525046253695407, -0.9314261194176703)


def test_frozen_alpha5_energies(modes5):
    assert [m.energy for m in modes5] == pytest.approx(E_ALPHA5, abs=1e-12)


@pytest.mark.parametrize("alpha", [1.0, 5.0, 20.0])
def test_constant_well_matches_transcendental_oracle(alpha):
    modes = solve_modes(TransverseProfile.constant(2.0, alpha))
    ref = square_well_energies(alpha, 2.0)
    assert len(modes) == len(ref)
    assert np.allclose([m.energy for m in modes], ref, atol=1e-10, rtol=0)


def test_no_bound_state_warns():
    with pytest.warns(RuntimeWarning):
        assert solve_modes(TransverseProfile.constant(2.0, 0.0)) == []


def test_profile_validation():
    with pytest.raises(ConfigError):
        TransverseProfile(2.0, (((0.0, 1.0), 1.0), ((1.5, 2.0), 1.0)))
    with pytest.raises(ConfigError):
        TransverseProfile(-1.0, (((0.0, 1.0), 1.0),))


def _norm_and_overlaps(modes):
    gram = np.empty((len(modes), len(modes)))
    for i, a in enumerate(modes):
        for j, b in enumerate(modes):
            f = lambda x: eval_mode(a, x) * eval_mode(b, x)
            gram[i, j] = sum(quad(f, lo, hi, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
                             for lo, hi in ((-40, 0), (0, a.d), (a.d, a.d + 40)))
    return gram


def test_modes_orthonormal_for_step_profile():
    prof = TransverseProfile.steps(3.0, [6.0, 12.0, 2.0])
    modes = solve_modes(prof)
    assert len(modes) >= 2
    assert np.allclose(_norm_and_overlaps(modes), np.eye(len(modes)), atol=1e-10)


def test_mode_parity_on_symmetric_profile(modes5):
    x = np.linspace(-1.5, 1.0, 11)
    for m in modes5:
        sign = (-1) ** (m.index - 1)
        assert np.allclose(eval_mode(m, 2.0 - x), sign * eval_mode(m, x), atol=1e-13)
        assert m.M == pytest.approx(sign * m.M_right, rel=1e-12)


def test_mode_solves_equation_and_is_c1(modes5):
    for m in modes5:
        for xb in (0.0, 2.0):
            assert eval_mode(m, xb - 1e-12) == pytest.approx(eval_mode(m, xb + 1e-12), abs=1e-10)
            assert eval_mode_derivative(m, np.array([xb - 1e-12]))[0] == pytest.approx(
                eval_mode_derivative(m, np.array([xb + 1e-12]))[0], abs=1e-10)
        # -u'' - alpha u = E u inside, checked by a finite difference
        x, h = 0.7, 1e-4
        upp = (eval_mode(m, x + h) - 2 * eval_mode(m, x) + eval_mode(m, x - h)) / h ** 2
        assert -upp - 5.0 * eval_mode(m, x) == pytest.approx(m.energy * eval_mode(m, x), abs=1e-5)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.0, 15.0), min_size=1, max_size=4), st.floats(-20, -1e-3), st.floats(-20, -1e-3))
def test_count_below_is_monotone(alphas, e1, e2):
    prof = TransverseProfile.steps(1.5, alphas)
    lo, hi = sorted((e1, e2))
    assert count_below(prof, lo) <= count_below(prof, hi)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.0, 10.0), min_size=1, max_size=3), st.floats(-15, 15), st.floats(-5, 5))
def test_transfer_determinant_is_one(alphas, re, im):
    prof = TransverseProfile.steps(2.0, alphas)
    assert abs(transfer_determinant(prof, complex(re, im)) - 1) < 1e-8


def test_mirrored_profile_has_same_spectrum():
    prof = TransverseProfile.steps(2.0, [1.0, 6.0, 2.0, 9.0])
    a = [m.energy for m in solve_modes(prof)]
    b = [m.energy for m in solve_modes(prof.mirrored())]
    assert np.allclose(a, b, atol=1e-12)


def test_free_continuum_is_cos_and_sin():
    prof = TransverseProfile.constant(1.0, 0.0)
    x = np.linspace(-3, 4, 9)
    p = 1.7
    psi = continuum_basis(prof, p, x)
    ref = np.stack([np.cos(p * x), np.sin(p * x)]) / math.sqrt(math.pi)
    # the pair is unique up to an orthogonal rotation; compare projectors
    assert np.allclose(psi.T @ psi, ref.T @ ref, atol=1e-12)


def test_continuum_orthogonal_to_modes(profile5, modes5):
    for ch in (0, 1):
        for m in modes5:
            f = lambda x: generalized_eigenfunction(profile5, 1.3, ch, x) * eval_mode(m, x)
            val = sum(quad(f, a, b, limit=400, epsabs=1e-13)[0] for a, b in ((-40, 0), (0, 2), (2, 42)))
            assert abs(val) < 1e-9


def test_continuum_threshold_errors(profile5):
    with pytest.raises(ThresholdError):
        generalized_eigenfunction(profile5, 0.0, 0, 1.0)
    with pytest.raises(ConfigError):
        generalized_eigenfunction(profile5, 1.0, 2, 1.0)


def test_completeness_against_green_function(profile5, modes5):
    """Mode sum plus continuum integral reproduces the resolvent kernel."""
    zeta = -6.0
    for x in (0.4, 2.9):
        # on the diagonal the continuum integrand is positive and non-oscillatory
        bound = sum(eval_mode(m, x) ** 2 / (m.energy - zeta) for m in modes5)
        def cont(p):
            b = continuum_basis(profile5, p, np.array([x]))
            return float(np.sum(b[:, 0] ** 2)) / (p * p - zeta)
        integral = quad(cont, 0, np.inf, limit=400, epsabs=1e-12)[0]
        assert bound + integral == pytest.approx(transverse_green(profile5, zeta, x, x).real, abs=1e-8)


def test_green_free_case():
    prof = TransverseProfile.constant(2.0, 0.0)
    zeta = -1.3 + 0.4j
    k = np.sqrt(zeta)
    k = k if k.imag > 0 else -k
    for x, y in ((0.3, 1.1), (-2, 5), (3, 3)):
        ref = 1j * np.exp(1j * k * abs(x - y)) / (2 * k)
        assert transverse_green(prof, zeta, x, y) == pytest.approx(ref, rel=1e-13)


def test_green_symmetric_and_jump(profile5):
    zeta = -2.0 + 0.5j
    for x, y in ((0.2, 1.5), (-1.0, 2.5), (2.2, 0.5)):
        assert transverse_green(profile5, zeta, x, y) == pytest.approx(
            transverse_green(profile5, zeta, y, x), rel=1e-12)
    y, h = 0.8, 1e-6
    g = lambda x: transverse_green(profile5, zeta, x, y)
    left = (g(y - h) - g(y - 2 * h)) / h
    right = (g(y + 2 * h) - g(y + h)) / h
    assert right - left == pytest.approx(-1.0, abs=1e-4)


def test_green_residue_at_mode(profile5, modes5):
    m = modes5[0]
    x, y = 0.5, 1.7
    eps = 1e-7
    res = eps * transverse_green(profile5, m.energy + eps, x, y)
    assert res == pytest.approx(-eval_mode(m, x) * eval_mode(m, y), rel=1e-5)


def test_green_large_energy_no_overflow(profile5):
    val = transverse_green(profile5, -4000.0 + 1j, -3.0, 5.0)
    assert np.isfinite(val) and abs(val) < 1e-100


def test_jost_reflection_unitarity_on_real_axis(profile5):
    """For real zeta > 0 the reflection and transmission probabilities add to one."""
    zeta = 2.3
    k, c, e, a, b = jost_coefficients(profile5, zeta)
    _, R = reflection_coefficient(profile5, zeta, "above")
    assert abs(R) ** 2 + abs(1 / e) ** 2 == pytest.approx(1.0, abs=1e-12)


def test_propagate_scaled_matches_plain(profile5):
    zeta = -3.0 + 0.2j
    u, du = propagate(profile5, zeta, 0.0, 1.0, 0.5, 2.0)
    us, dus, logs = propagate(profile5, zeta, 0.0, 1.0, 0.5, 2.0, scaled=True)
    assert np.allclose([u, du], np.array([us, dus]) * np.exp(logs), rtol=1e-12)
