import numpy as np
import pytest

from effcond.canonical_rep import build_eigenbasis, extract_rep
from effcond.effective_approx import (
    CoupledTensor,
    DiagonalTriple,
    admissible_rotation,
    hermitian_part_min,
    l_star_coupled,
    sigma11_theorem1,
    sigma_diag_theorem1,
    sigma_star_theorem2,
)
from effcond.errors import InadmissiblePair, SingularA, SingularResolvent
from effcond.field_space import AdmissiblePair
from effcond.reference_solver import solve_coupled_effective, solve_effective

from conftest import random_pair


def test_uniform_medium(full_reps):
    rep = full_reps[0]
    assert sigma11_theorem1(rep, (2.5, 2.5, 2.5)) == pytest.approx(2.5, abs=1e-12)
    s = np.array([[2.0 + 0.3j, 0.4], [-0.1, 1.7]])
    assert np.abs(sigma_star_theorem2(rep, s, s) - s).max() < 1e-10


def test_resolvent_form(full_reps):
    rep = full_reps[1]
    l1, l2, l3 = 2.0, 1.5 + 0.5j, 0.7
    M = np.diag((1 - rep.rho) * l2 + rep.rho * l3) + rep.Y1 * (l1 - l2)
    expect = 1 / (rep.beta @ np.linalg.solve(M, rep.beta))
    assert sigma11_theorem1(rep, (l1, l2, l3)) == pytest.approx(expect, rel=1e-13)


def test_stripes_means(stripes8):
    rep = extract_rep(build_eigenbasis(stripes8))
    f = stripes8.chi.mean()
    harmonic = 1 / (f / 2 + (1 - f))
    arithmetic = 2 * f + (1 - f)
    out = sigma_diag_theorem1(rep, None, (2, 2, 1))
    assert out[0, 0].real == pytest.approx(harmonic, abs=1e-8)
    assert out[1, 1].real == pytest.approx(arithmetic, abs=1e-8)
    full = sigma_star_theorem2(rep, 2 * np.eye(2), np.eye(2))
    assert np.abs(full - np.diag([harmonic, arithmetic])).max() < 1e-8


@pytest.mark.parametrize("idx", range(3))
def test_theorems_match_oracle(rand8, full_reps, idx):
    rng = np.random.default_rng(100 + idx)
    g, rep = rand8[idx], full_reps[idx]
    t = (2 + rng.random() + 0.5j * rng.random(), 1 + rng.random(), 0.5 + rng.random())
    s1, s2 = np.diag(t[:2]), t[2] * np.eye(2)
    ref = solve_effective(g, AdmissiblePair(s1, s2), tol=1e-13).sigma_star
    assert abs(sigma11_theorem1(rep, t) - ref[0, 0]) < 1e-9
    assert np.abs(sigma_diag_theorem1(rep, None, t) - np.diag(np.diag(ref))).max() < 1e-9
    a, b = random_pair(rng)
    ref = solve_effective(g, AdmissiblePair(a, b), tol=1e-13).sigma_star
    assert np.abs(sigma_star_theorem2(rep, a, b) - ref).max() < 1e-9


def test_theorem2_reduces_to_theorem1(full_reps):
    rep = full_reps[2]
    t = (3.0 + 0.2j, 1.2, 0.8 - 0.1j)
    out = sigma_star_theorem2(rep, np.diag(t[:2]), t[2] * np.eye(2))
    assert out[0, 0] == pytest.approx(sigma11_theorem1(rep, t), abs=1e-12)
    assert abs(out[0, 1]) < 1e-12 and abs(out[1, 0]) < 1e-12


def test_homogeneity(full_reps):
    rep = full_reps[3]
    rng = np.random.default_rng(5)
    a, b = random_pair(rng)
    c = 0.3 + 1.7j
    assert np.abs(sigma_star_theorem2(rep, c * a, c * b, check=False)
                  - c * sigma_star_theorem2(rep, a, b)).max() < 1e-11
    t = (2.0, 1.5, 0.5)
    assert sigma11_theorem1(rep, [c * x for x in t]) == pytest.approx(c * sigma11_theorem1(rep, t), rel=1e-12)


def test_herglotz(full_reps):
    rng = np.random.default_rng(6)
    for rep in full_reps:
        for _ in range(5):
            a, b = random_pair(rng, scale=0.8, shift=2.0)
            if min(hermitian_part_min(a), hermitian_part_min(b)) <= 0:
                continue
            assert hermitian_part_min(sigma_star_theorem2(rep, a, b)) > 0
        t = (1 + rng.random() + 1j * rng.random(), 1 + rng.random(), 1 + rng.random() + 1j)
        assert sigma11_theorem1(rep, t).real > 0


def test_admissible_rotation():
    assert admissible_rotation(np.eye(2), 2 * np.eye(2)) == 0.0
    theta = admissible_rotation(-1j * np.eye(2), (1 - 1j) * np.eye(2))
    assert hermitian_part_min(np.exp(1j * theta) * -1j * np.eye(2)) > 0
    assert hermitian_part_min(np.exp(1j * theta) * (1 - 1j) * np.eye(2)) > 0
    with pytest.raises(InadmissiblePair):
        admissible_rotation(np.eye(2), -np.eye(2))


def test_inadmissible_pair_rejected(full_reps):
    with pytest.raises(InadmissiblePair):
        sigma_star_theorem2(full_reps[0], np.eye(2), -np.eye(2))


def test_singular_cases(full_reps):
    rep = full_reps[0]
    with pytest.raises(SingularA):
        sigma_star_theorem2(rep, np.zeros((2, 2)), np.zeros((2, 2)), check=False)
    with pytest.raises(SingularResolvent):
        sigma11_theorem1(rep, (0, 0, 0))


def test_triple_inversion():
    t = DiagonalTriple(2, 4, 8).inverted()
    assert tuple(t) == (0.25, 0.5, 0.125)
    with pytest.raises(InadmissiblePair):
        DiagonalTriple(-1, 1, 1).check(0.1, 10)


def coupled(a, b, c, d):
    return CoupledTensor.from_blocks([[a, b], [c, d]])


def test_coupled_uniform(full_reps):
    rng = np.random.default_rng(8)
    a, b = random_pair(rng)
    L = coupled(a, 0.1 * b, 0.2 * b, a + b)
    out = l_star_coupled(full_reps[0], L, L)
    assert np.abs(out.matrix - L.matrix).max() < 1e-10


def test_coupled_decouples(full_reps):
    rng = np.random.default_rng(9)
    rep = full_reps[1]
    a1, a2 = random_pair(rng)
    b1, b2 = random_pair(rng)
    Z = np.zeros((2, 2))
    out = l_star_coupled(rep, coupled(a1, Z, Z, b1), coupled(a2, Z, Z, b2))
    assert np.abs(out.block(0, 0) - sigma_star_theorem2(rep, a1, a2)).max() < 1e-11
    assert np.abs(out.block(1, 1) - sigma_star_theorem2(rep, b1, b2)).max() < 1e-11
    assert np.abs(out.block(0, 1)).max() < 1e-12


def test_coupled_matches_oracle(rand8, full_reps):
    rng = np.random.default_rng(10)
    a1, a2 = random_pair(rng)
    b1, b2 = random_pair(rng)
    L1 = coupled(a1, 0.3 * np.eye(2), 0.2 * np.eye(2), b1)
    L2 = coupled(a2, 0.1 * np.eye(2), -0.1 * np.eye(2), b2)
    out = l_star_coupled(full_reps[4], L1, L2)
    ref = solve_coupled_effective(rand8[4], L1.matrix, L2.matrix, tol=1e-13).sigma_star
    assert np.abs(out.matrix - ref).max() < 1e-9


def test_coupled_tensor_index_maps():
    L = np.arange(16.0).reshape(2, 2, 2, 2)
    T = CoupledTensor.from_L(L)
    assert np.array_equal(T.to_L(), L)
    # block (i, j) entry (p, q) is L[p, i, q, j]
    assert T.block(1, 0)[0, 1] == L[0, 1, 1, 0]
    with pytest.raises(InadmissiblePair):
        CoupledTensor(np.eye(3))
