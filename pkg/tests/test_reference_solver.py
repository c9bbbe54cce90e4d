import numpy as np
import pytest

from effcond.errors import InadmissiblePair, NonConvergence, ValidationError
from effcond.field_space import AdmissiblePair, checkerboard, random_symmetric, stripes
from effcond.reference_solver import (
    duality_check,
    mendelson_residual,
    series_coefficients,
    sigma11_inverse_direct,
    solve_coupled_effective,
    solve_effective,
)

from conftest import random_pair


def test_uniform_medium_reproduced(cb8):
    s = np.array([[2.0 + 0.5j, 0.3], [-0.4, 1.5 - 0.2j]])
    out = solve_effective(cb8, AdmissiblePair(s, s)).sigma_star
    assert np.abs(out - s).max() < 1e-12


def test_stripes_harmonic_and_arithmetic_means():
    g = stripes(8, [0, 1, 7, 4])  # f = 1/2, symmetric under i -> -i
    out = solve_effective(g, AdmissiblePair(2 * np.eye(2), np.eye(2))).sigma_star
    assert out[0, 0] == pytest.approx(4 / 3, abs=1e-10)
    assert out[1, 1] == pytest.approx(3 / 2, abs=1e-10)
    assert sigma11_inverse_direct(g, AdmissiblePair(2 * np.eye(2), np.eye(2))) == pytest.approx(0.75, abs=1e-10)


def test_uniform_inverse_direct(cb8):
    assert sigma11_inverse_direct(cb8, AdmissiblePair(3 * np.eye(2), 3 * np.eye(2))) == pytest.approx(1 / 3)


def test_frozen_oracle_values():
    # regression values produced by this oracle at tol 1e-12
    g = random_symmetric(16, np.random.default_rng(7))
    pair = AdmissiblePair(np.diag([3.0, 2.0]), np.eye(2))
    out = solve_effective(g, pair, tol=1e-12).sigma_star
    assert out[0, 0].real == pytest.approx(1.7376463610017967, abs=1e-10)
    assert out[1, 1].real == pytest.approx(1.4101470024724803, abs=1e-10)
    assert abs(out[0, 1]) < 1e-9
    inv = sigma11_inverse_direct(g, pair, tol=1e-12)
    assert abs(inv - 1 / out[0, 0]) < 1e-8


def test_frozen_nonsymmetric_complex_value(rand8):
    s1 = np.array([[2 + 1j, 0.3], [-0.2, 1.5]])
    s2 = np.array([[1, 0.1j], [0, 1.2]])
    out = solve_effective(rand8[0], AdmissiblePair(s1, s2), tol=1e-13).sigma_star
    ref = np.array([[1.4654838241546375 + 0.3473595438041505j, 0.10775253352638464 + 0.04660952886149823j],
                    [-0.07537613347411601 + 0.01096731360239556j, 1.3453704613693407 - 0.00236707694383323j]])
    assert np.abs(out - ref).max() < 1e-10


def test_checkerboard_n32_value():
    out = solve_effective(checkerboard(32), AdmissiblePair(10 * np.eye(2), np.eye(2)), tol=1e-12).sigma_star
    assert out[0, 0].real == pytest.approx(3.1171236423107667, abs=1e-9)
    # the Nyquist convention breaks the x1 <-> x2 symmetry slightly at finite n
    assert out[1, 1].real == pytest.approx(3.208085769926936, abs=1e-9)


def test_homogeneity(rand8):
    rng = np.random.default_rng(3)
    s1, s2 = random_pair(rng)
    lam = 1.7 * np.exp(0.3j)
    a = solve_effective(rand8[1], AdmissiblePair(s1, s2), tol=1e-12).sigma_star
    b = solve_effective(rand8[1], AdmissiblePair(lam * s1, lam * s2), tol=1e-12).sigma_star
    assert np.abs(b - lam * a).max() < 1e-9


def test_herglotz_and_diagonal(rand8):
    rng = np.random.default_rng(4)
    for _ in range(10):
        s1, s2 = random_pair(rng)
        out = solve_effective(rand8[2], AdmissiblePair(s1, s2)).sigma_star
        assert np.linalg.eigvalsh(0.5 * (out + out.conj().T)).min() > 0
    out = solve_effective(rand8[2], AdmissiblePair(np.diag([3.0, 0.5]), 2 * np.eye(2))).sigma_star
    assert abs(out[0, 1]) < 1e-9 and abs(out[1, 0]) < 1e-9


def test_series_examples(rand8):
    g = rand8[3]
    c = series_coefficients(g, np.eye(2), np.zeros((2, 2)), 2).coeffs
    assert np.abs(c[0] - np.eye(2)).max() == 0
    assert np.abs(c[1] - g.f * np.eye(2)).max() < 1e-12
    assert -np.trace(c[2]).real == pytest.approx(g.f * (1 - g.f), abs=1e-12)
    with pytest.raises(ValidationError):
        series_coefficients(g, np.eye(2), np.eye(2), 0)


def test_series_matches_finite_differences(rand8):
    g = rand8[4]
    d1 = np.array([[1.0, 0.3], [-0.2, 0.5]])
    d2 = np.array([[-0.4, 0.1], [0.0, 0.7]])
    c = series_coefficients(g, d1, d2, 2).coeffs
    h = 1e-3
    f = lambda t: solve_effective(g, AdmissiblePair(np.eye(2) + t * d1, np.eye(2) + t * d2), tol=1e-13).sigma_star
    fp, fm, f0 = f(h), f(-h), f(0.0)
    assert np.abs((fp - fm) / (2 * h) - c[1]).max() < 1e-6
    assert np.abs((fp - 2 * f0 + fm) / (2 * h * h) - c[2]).max() < 1e-5


def test_duality_examples():
    assert duality_check(checkerboard(8), 2.0, 2.0) < 1e-10
    assert duality_check(stripes(8, [0, 1, 7, 4]), 3.0, 1.0) < 1e-10


def test_mendelson_on_random_geometry(rand8):
    assert mendelson_residual(rand8[0], (2.0 + 0.5j, 3.0, 1.5)) < 1e-9


def test_errors(cb8):
    with pytest.raises(InadmissiblePair):
        solve_effective(cb8, (np.eye(2), np.eye(2)))
    with pytest.raises(NonConvergence):
        solve_effective(cb8, AdmissiblePair(50 * np.eye(2), np.eye(2)), tol=1e-14, maxiter=2)


def test_coupled_reduces_to_uncoupled(rand8):
    a = np.diag([2.0, 3.0])
    b = np.array([[1.0, 0.2], [0.1, 1.5]])
    z = np.zeros((2, 2))
    L1 = np.block([[a, z], [z, b]])
    L2 = np.block([[np.eye(2), z], [z, 2 * np.eye(2)]])
    out = solve_coupled_effective(rand8[0], L1, L2, tol=1e-12).sigma_star
    ra = solve_effective(rand8[0], AdmissiblePair(a, np.eye(2)), tol=1e-12).sigma_star
    rb = solve_effective(rand8[0], AdmissiblePair(b, 2 * np.eye(2)), tol=1e-12).sigma_star
    assert np.abs(out[:2, :2] - ra).max() < 1e-9
    assert np.abs(out[2:, 2:] - rb).max() < 1e-9
    assert np.abs(out[:2, 2:]).max() < 1e-9
