import numpy as np
import pytest

from effcond.errors import (
    DegeneratePhase,
    DimensionMismatch,
    InadmissiblePair,
    ReflectionSymmetryViolated,
)
from effcond.field_space import (
    AdmissiblePair,
    checkerboard,
    constant_field,
    geometry_to_json,
    inner,
    load_geometry,
    project_lambda,
    project_phase,
    random_field,
    random_symmetric,
    read_geometry,
    reflect,
    rotate_perp,
)

RNG = np.random.default_rng(11)


def test_load_accepts_symmetric_stripes():
    chi = np.zeros((4, 4))
    chi[[0, 1, 3], :] = 1
    g = load_geometry(chi)
    assert g.f == pytest.approx(0.75)


def test_load_rejects_asymmetric_and_reports_cell():
    chi = np.zeros((4, 4))
    chi[1, :] = 1
    with pytest.raises(ReflectionSymmetryViolated) as exc:
        load_geometry(chi)
    assert exc.value.cell == (1, 0)


def test_load_rejects_single_phase():
    with pytest.raises(DegeneratePhase):
        load_geometry(np.ones((4, 4)))


def test_checkerboard_fraction_and_auto_mirror():
    g = checkerboard(8)
    assert g.f == 0.5
    g2 = load_geometry(g.chi, mirror="auto")
    assert np.array_equal(g2.chi, g.chi)


def test_geometry_json_and_ascii_roundtrip(tmp_path):
    g = random_symmetric(8, np.random.default_rng(2))
    p = tmp_path / "g.json"
    import json
    p.write_text(json.dumps(geometry_to_json(g)))
    assert np.array_equal(read_geometry(p).chi, g.chi)
    a = tmp_path / "g.txt"
    a.write_text("\n".join("".join(str(int(v)) for v in row) for row in g.chi))
    assert np.array_equal(read_geometry(a).chi, g.chi)


def test_inner_examples():
    n = 4
    e1 = constant_field(n, (1, 0))
    e2 = constant_field(n, (0, 1))
    assert inner(e1, e1) == pytest.approx(1)
    assert inner(e1, e2) == pytest.approx(0)
    assert inner(constant_field(n, (1j, 0)), e1) == pytest.approx(-1j)
    with pytest.raises(DimensionMismatch):
        inner(e1, constant_field(8, (1, 0)))


def test_phase_projections_partition(cb8):
    h = random_field(8, RNG)
    parts = [project_phase(i, h, cb8) for i in (1, 2, 3, 4)]
    assert np.abs(sum(parts) - h).max() < 1e-14
    for i in range(4):
        for j in range(4):
            if i != j:
                assert np.abs(project_phase(j + 1, parts[i], cb8)).max() == 0
    p1 = project_phase(1, constant_field(8, (1, 1)), cb8)
    assert np.array_equal(p1[0].real, cb8.chi) and not p1[1].any()


def test_lambda_examples():
    n = 8
    assert np.abs(project_lambda(1, constant_field(n, (1, 0))) - constant_field(n, (1, 0))).max() < 1e-14
    assert np.abs(project_lambda(1, constant_field(n, (0, 1)))).max() < 1e-14
    # gradient of a random smooth periodic potential (no Nyquist content)
    k = np.fft.fftfreq(n, 1 / n)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    phi = RNG.standard_normal((n, n)) + 1j * RNG.standard_normal((n, n))
    phi[(np.abs(k1) == n // 2) | (np.abs(k2) == n // 2)] = 0
    grad = np.fft.ifft2(np.stack([1j * k1 * phi, 1j * k2 * phi]), axes=(-2, -1))
    assert np.abs(project_lambda(1, grad) - grad).max() < 1e-12


@pytest.mark.parametrize("n", [8, 12, 16])
def test_operator_identities(n):
    g = random_symmetric(n, np.random.default_rng(n))
    s = g.mirror
    h = random_field(n, RNG)
    L1 = project_lambda(1, h, s)
    assert np.abs(project_lambda(1, L1, s) - L1).max() < 1e-12
    assert np.abs(L1 + project_lambda(2, h, s) - h).max() < 1e-12
    a = random_field(n, RNG)
    assert abs(inner(a, L1) - inner(project_lambda(1, a, s), h)) < 1e-12
    # rotation
    assert np.abs(rotate_perp(rotate_perp(h)) + h).max() == 0
    assert abs(inner(rotate_perp(a), rotate_perp(h)) - inner(a, h)) < 1e-12
    assert np.abs(rotate_perp(L1) - project_lambda(2, rotate_perp(h), s)).max() < 1e-12
    assert np.abs(rotate_perp(project_phase(1, h, g)) - project_phase(2, rotate_perp(h), g)).max() < 1e-14
    assert np.abs(rotate_perp(project_phase(3, h, g)) - project_phase(4, rotate_perp(h), g)).max() < 1e-14
    # reflection
    assert np.abs(reflect(reflect(h, s), s) - h).max() == 0
    assert np.abs(reflect(rotate_perp(h), s) + rotate_perp(reflect(h, s))).max() < 1e-14
    for i in (1, 2, 3, 4):
        assert np.abs(reflect(project_phase(i, h, g), s) - project_phase(i, reflect(h, s), g)).max() < 1e-12
    assert np.abs(reflect(L1, s) - project_lambda(1, reflect(h, s), s)).max() < 1e-12


def test_symmetric_split_is_complementary(cb8):
    h = random_field(8, RNG)
    s = cb8.mirror
    hs = 0.5 * (h + reflect(h, s))
    ha = 0.5 * (h - reflect(h, s))
    assert np.abs(hs + ha - h).max() < 1e-15
    assert abs(inner(hs, ha)) < 1e-14


def test_admissible_pair_bounds():
    p = AdmissiblePair(np.diag([2.0, 3.0]), np.eye(2))
    assert p.c1 == pytest.approx(1.0) and p.c2 == pytest.approx(3.0)
    with pytest.raises(InadmissiblePair):
        AdmissiblePair(np.diag([-1.0, 1.0]), np.eye(2))
    with pytest.raises(InadmissiblePair):
        AdmissiblePair(np.eye(2), np.eye(2), c1=2.0, c2=3.0)
