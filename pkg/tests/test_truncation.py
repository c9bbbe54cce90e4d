import numpy as np
import pytest

from effcond.errors import BudgetExceeded, ValidationError
from effcond.field_space import checkerboard, project_lambda, random_symmetric, stripes
from effcond.truncation import (
    MultiIndex,
    build_truncated_space,
    compare_expansions,
    contrast_scaling,
    generate_fields,
    raw_count,
    sigma_star_full,
    sigma_star_truncated,
)


@pytest.fixture(scope="module")
def geom16():
    return random_symmetric(16, np.random.default_rng(3))


@pytest.fixture(scope="module")
def space16(geom16):
    return build_truncated_space(geom16, 3)


def directions(seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((2, 2)), rng.standard_normal((2, 2))


def test_multi_index():
    a = MultiIndex((1, 3, 4, 2))
    assert a.order == 4
    assert a.complement().indices == (2, 4, 3, 1)
    with pytest.raises(ValidationError):
        MultiIndex((5,))
    with pytest.raises(ValidationError):
        MultiIndex(())


def test_raw_counts():
    assert raw_count(1) == 16
    assert raw_count(2) == 80
    assert generate_fields(checkerboard(8), 1).count == 16


def test_zero_fields_flagged():
    raw = generate_fields(stripes(8, [0, 1, 7]), 1)
    zero = {(a.indices, j) for a, j in raw.zero}
    # P_2 and P_4 of U_1 vanish identically; layering in x1 kills U_2 terms
    assert {((2,), 1), ((4,), 1), ((1,), 2), ((3,), 2)} <= zero


def test_budget():
    with pytest.raises(BudgetExceeded):
        generate_fields(checkerboard(8), 6, budget=1000)
    with pytest.raises(ValidationError):
        generate_fields(checkerboard(8), 0)


def test_closure_and_orthonormality(space16):
    assert max(space16.closure.values()) < 1e-9
    Q = space16.Q
    assert np.abs(Q.T @ Q - np.eye(space16.dim)).max() < 1e-10
    assert space16.overlap < 1e-8
    obj = space16.to_json()
    assert obj["dim"] == space16.dim and obj["raw_count"] == raw_count(3)


def test_generated_blocks(space16, geom16):
    # Et and Jt hold gradients and rotated gradients; R and R_perp need not
    Et = space16.basis[space16.blocks["Et"]]
    Jt = space16.basis[space16.blocks["Jt"]]
    assert np.abs(project_lambda(1, Et, geom16.mirror).real - Et).max() < 1e-10
    assert np.abs(project_lambda(2, Jt, geom16.mirror).real - Jt).max() < 1e-10
    QE, QJ, QU = (space16.Q_block(k) for k in ("E", "J", "U"))
    assert np.abs(QE.T @ QJ).max() < 1e-10
    assert np.abs(QU.T @ QE).max() < 1e-10


def test_dimension_grows_then_saturates():
    g = checkerboard(8)
    dims = [build_truncated_space(g, M).dim for M in (1, 2, 3, 4)]
    assert dims == sorted(dims)
    assert dims[-1] <= 2 * g.n ** 2


@pytest.mark.parametrize("M", [1, 2, 3])
def test_expansions_agree(geom16, M):
    d1, d2 = directions()
    out = compare_expansions(geom16, M, d1, d2)
    assert out["max"] < 1e-9
    assert len(out["by_order"]) == M + 1


def test_contrast_scaling(space16):
    d1, d2 = directions()
    out = contrast_scaling(space16, d1, d2, [0.1, 0.2, 0.4])
    assert out["slope"] >= space16.M + 0.7


def test_truncated_sigma_close_at_low_contrast(space16, geom16):
    a = np.eye(2) * 1.05
    b = np.eye(2) * 0.95
    assert np.abs(sigma_star_truncated(space16, a, b) - sigma_star_full(geom16, a, b)).max() < 1e-10
