import numpy as np
import pytest

from effcond.canonical_rep import build_eigenbasis, extract_rep
from effcond.errors import ConstraintViolated, SingularStep, ValidationError
from effcond.field_space import AdmissiblePair, checkerboard, stripes
from effcond.laminate_models import (
    R_PERP,
    LaminateProgram,
    MatrixRationalRep,
    RationalDiagRep,
    SStarRep,
    check_sum_rules,
    diag_rep_from_canonical,
    eval_rational_diag,
    eval_rational_matrix,
    eval_sstar,
    phase_interchange_residual,
    polycrystal_laminate,
    program_from_json,
    program_to_json,
    rank1_laminate,
    rotation,
    sigma_from_sstar,
)
from effcond.reference_solver import solve_effective

CRYSTAL = np.array([[3.0, 0.4], [0.4, 1.0]])


def test_rational_diag_examples():
    assert eval_rational_diag(RationalDiagRep([1, 0.5, 0], [0, 1, 0]), 2, 1) == pytest.approx(4 / 3)
    two = RationalDiagRep([1, 0], [0.3, 0.7])
    assert eval_rational_diag(two, 5, 2) == pytest.approx(0.3 * 5 + 0.7 * 2)


@pytest.mark.parametrize("q,a", [
    ([1, 0.5, 0.5, 0], [0, 0.5, 0.5, 0]),
    ([0.9, 0.5, 0], [0, 1, 0]),
    ([1, 0.5, 0], [0.5, 0.6, -0.1]),
    ([1, 0.5, 0], [0.2, 0.2, 0.2]),
])
def test_rational_diag_constraints(q, a):
    with pytest.raises(ConstraintViolated):
        RationalDiagRep(q, a)


def test_matrix_rep_and_trivial_sum_rules():
    f = 0.3
    rep = MatrixRationalRep([1, 0], [f * np.eye(2), (1 - f) * np.eye(2)])
    first, second = check_sum_rules(rep, f)
    assert first == pytest.approx(0, abs=1e-15)
    assert second == pytest.approx(f * (1 - f), abs=1e-15)
    assert np.allclose(eval_rational_matrix(rep, 2, 1), (2 * f + 1 - f) * np.eye(2))
    with pytest.raises(ConstraintViolated):
        MatrixRationalRep([1, 0], [np.diag([1.0, -0.1]), np.diag([0.0, 1.1])])
    with pytest.raises(ConstraintViolated):
        MatrixRationalRep([1, 0], [np.eye(2), np.eye(2)])


def test_sum_rules_from_checkerboard_rep():
    g = checkerboard(16)
    rep = extract_rep(build_eigenbasis(g))
    d = diag_rep_from_canonical(rep)
    first, second = check_sum_rules(MatrixRationalRep.from_diagonal([d, d]), g.chi.mean())
    assert first < 1e-9
    assert second < 1e-9


def test_diag_rep_reproduces_sigma22(stripes8):
    rep = extract_rep(build_eigenbasis(stripes8))
    d = diag_rep_from_canonical(rep)
    f = stripes8.chi.mean()
    assert eval_rational_diag(d, 2, 1) == pytest.approx(2 * f + (1 - f), abs=1e-8)


def random_sstar(rng, m=3):
    s = np.sort(rng.uniform(0.05, 0.95, m))
    S = []
    for _ in range(m):
        v = rng.standard_normal((2, 2))
        S.append(v @ v.T)
    bound = sum(Si / si + R_PERP.T @ Si @ R_PERP / (1 - si) for si, Si in zip(s, S))
    v = rng.standard_normal((2, 2))
    return SStarRep(s, np.array(S), bound + v @ v.T)


def test_sstar_functional_equation():
    rng = np.random.default_rng(0)
    for _ in range(5):
        assert phase_interchange_residual(random_sstar(rng)) < 1e-12
    empty = SStarRep([], np.zeros((0, 2, 2)), np.zeros((2, 2)))
    assert np.allclose(eval_sstar(empty, 0.3 + 1j), (0.3 + 1j) * np.eye(2))
    assert phase_interchange_residual(empty) < 1e-15


def test_sigma_from_sstar_uniform():
    # no poles and A = 0 gives S* = s I, i.e. sigma* = sigma1 I
    empty = SStarRep([], np.zeros((0, 2, 2)), np.zeros((2, 2)))
    assert np.allclose(sigma_from_sstar(empty, 2.5 + 0.5j), (2.5 + 0.5j) * np.eye(2))


def test_sstar_constraints():
    S = np.eye(2)[None]
    with pytest.raises(ConstraintViolated):
        SStarRep([1.2], S, 10 * np.eye(2))
    with pytest.raises(ConstraintViolated):
        SStarRep([0.5], -S, 10 * np.eye(2))
    with pytest.raises(ConstraintViolated):
        SStarRep([0.5], S, np.eye(2))
    with pytest.raises(ConstraintViolated):
        eval_sstar(SStarRep([0.5], S, 10 * np.eye(2)), 0.3)


def test_rank1_isotropic_means_and_duality():
    p, s1, s2 = 0.3, 4.0, 1.5
    out = rank1_laminate(s1 * np.eye(2), s2 * np.eye(2), p, [1, 0])
    harm = 1 / (p / s1 + (1 - p) / s2)
    arith = p * s1 + (1 - p) * s2
    assert np.abs(out - np.diag([harm, arith])).max() < 1e-13
    swapped = rank1_laminate(s2 * np.eye(2), s1 * np.eye(2), p, [1, 0])
    dual = s1 * s2 * R_PERP @ np.linalg.inv(out) @ R_PERP.T
    assert np.abs(swapped - dual).max() < 1e-12


def program(fracs, angles, n0=(1.0, 0.0), sigma_ref=None, sigma0=CRYSTAL):
    return LaminateProgram(sigma0, np.array(n0), np.array([rotation(a) for a in angles]),
                           fracs, sigma_ref=sigma_ref)


def test_limits():
    R1 = rotation(70)
    n0 = (np.cos(0.3), np.sin(0.3))
    assert np.abs(polycrystal_laminate(program([1.0], [0, 70], n0)) - R1.T @ CRYSTAL @ R1).max() < 1e-10
    assert np.abs(polycrystal_laminate(program([1e-12], [0, 70], n0)) - CRYSTAL).max() < 1e-10


def test_self_lamination():
    out = polycrystal_laminate(program([0.5], [0, 0], sigma0=np.diag([3.0, 1.0])))
    assert np.abs(out - np.diag([3.0, 1.0])).max() < 1e-13


def test_reference_independence_and_homogeneity():
    a = polycrystal_laminate(program([0.3, 0.6], [0, 70, 20], (0.6, 0.8)))
    b = polycrystal_laminate(program([0.3, 0.6], [0, 70, 20], (0.6, 0.8), sigma_ref=17.0))
    assert np.abs(a - b).max() < 1e-9
    c = polycrystal_laminate(program([0.3, 0.6], [0, 70, 20], (0.6, 0.8), sigma0=2.5 * CRYSTAL))
    assert np.abs(c - 2.5 * a).max() < 1e-12


def test_matches_oracle_on_stripes():
    # rows {0, 1, 2, 6, 7} hold the rotated crystal, so the layer normal is e1
    R1 = rotation(70)
    n0 = R1 @ np.array([1.0, 0.0])
    lam = polycrystal_laminate(program([5 / 8], [0, 70], n0))
    g = stripes(8, [0, 1, 2, 6, 7])
    ref = solve_effective(g, AdmissiblePair(R1.T @ CRYSTAL @ R1, CRYSTAL), tol=1e-13).sigma_star
    assert np.abs(lam - ref).max() < 1e-8


def test_singular_step():
    with pytest.raises(SingularStep):
        polycrystal_laminate(program([0.5], [0, 30], sigma_ref=3.0, sigma0=np.diag([3.0, 1.0])))


def test_program_validation_and_json():
    prog = program([0.3, 0.6], [10, 70, 20], (0.6, 0.8))
    again = program_from_json(program_to_json(prog))
    assert np.abs(polycrystal_laminate(again) - polycrystal_laminate(prog)).max() < 1e-12
    with pytest.raises(ValidationError):
        program([0.5], [0, 30], n0=(1.0, 1.0))
    with pytest.raises(ValidationError):
        program([1.5], [0, 30])
    with pytest.raises(ValidationError):
        program_from_json({"sigma0": [[1, 0], [0, 1]]})
