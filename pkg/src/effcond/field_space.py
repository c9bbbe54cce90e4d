"""Discrete Hilbert space of periodic two-component fields on an n x n grid.

A field is a complex array of shape ``(..., 2, n, n)``; the leading axes are
batch axes so every operator below acts on stacks of fields at once.  Index
``i`` (axis -2) is the x1 sample index and ``j`` (axis -1) the x2 index.

The projections Lambda_1, Lambda_2 act on the trigonometric interpolant.  At
the Nyquist wavenumbers, where k and -k alias, the gradient direction is
replaced by a coordinate axis (see :func:`gradient_directions`) so that
Lambda_1 stays a real orthogonal projection that commutes with the
reflection and satisfies R_perp Lambda_1 = Lambda_2 R_perp exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .errors import (
    DegeneratePhase,
    DimensionMismatch,
    InadmissiblePair,
    ReflectionSymmetryViolated,
    ValidationError,
)

__all__ = [
    "GridGeometry",
    "AdmissiblePair",
    "load_geometry",
    "read_geometry",
    "geometry_to_json",
    "checkerboard",
    "stripes",
    "random_symmetric",
    "inner",
    "project_phase",
    "project_lambda",
    "rotate_perp",
    "reflect",
    "gradient_directions",
    "constant_field",
    "random_field",
    "as_tensor",
]


# ---------------------------------------------------------------------------
# geometry


@dataclass(frozen=True, eq=False)
class GridGeometry:
    """Binary indicator of phase 1 on an n x n periodic grid.

    Attributes
    ----------
    chi : ndarray of float, shape (n, n)
        1 in phase 1, 0 in phase 2.
    mirror : int
        Offset s of the mirror map i -> (s - i) mod n under which chi is
        invariant.  The default s = 0 puts the mirror line through column 0.
    """

    chi: np.ndarray
    mirror: int = 0

    @property
    def n(self) -> int:
        return self.chi.shape[0]

    @property
    def f(self) -> float:
        return float(self.chi.mean())

    def swapped(self) -> "GridGeometry":
        """Same geometry with the two phases interchanged."""
        return GridGeometry(_frozen(1.0 - self.chi), self.mirror)

    def key(self) -> bytes:
        return self.chi.astype(np.uint8).tobytes() + bytes([self.mirror % 256])


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _mirror_index(n: int, s: int) -> np.ndarray:
    return (s - np.arange(n)) % n


def _first_asymmetry(chi: np.ndarray, s: int):
    bad = np.argwhere(chi != chi[_mirror_index(chi.shape[0], s), :])
    return None if len(bad) == 0 else tuple(int(v) for v in bad[0])


def load_geometry(raw, mirror: int | str = 0) -> GridGeometry:
    """Validate a binary array and wrap it as a :class:`GridGeometry`.

    Parameters
    ----------
    raw : array_like, shape (n, n)
        Entries in {0, 1}; row index is the x1 sample index.
    mirror : int or "auto"
        Mirror offset s.  With "auto" the smallest s that makes ``raw``
        symmetric is used, preferring even offsets.

    Raises
    ------
    ReflectionSymmetryViolated
        If chi[(s - i) mod n][j] != chi[i][j] somewhere; the first such cell
        is reported.
    DegeneratePhase
        If only one phase is present.
    """
    chi = np.asarray(raw)
    if chi.ndim != 2 or chi.shape[0] != chi.shape[1]:
        raise DimensionMismatch(f"geometry must be square, got shape {chi.shape}")
    n = chi.shape[0]
    if n < 4 or n % 2:
        raise ValidationError(f"grid size must be even and >= 4, got {n}")
    if not np.all((chi == 0) | (chi == 1)):
        raise ValidationError("geometry entries must be 0 or 1")
    chi = chi.astype(float)
    if mirror == "auto":
        candidates = [s for s in range(0, n, 2)] + [s for s in range(1, n, 2)]
        for s in candidates:
            if _first_asymmetry(chi, s) is None:
                mirror = s
                break
        else:
            raise ReflectionSymmetryViolated(_first_asymmetry(chi, 0), 0)
    s = int(mirror) % n
    bad = _first_asymmetry(chi, s)
    if bad is not None:
        raise ReflectionSymmetryViolated(bad, s)
    f = chi.mean()
    if f == 0.0 or f == 1.0:
        raise DegeneratePhase(f"volume fraction {f} leaves only one phase")
    return GridGeometry(_frozen(chi), s)


def checkerboard(n: int) -> GridGeometry:
    """Checkerboard chi = (floor(2i/n) + floor(2j/n)) mod 2.

    This pattern is mirror symmetric about the centre of its first block,
    i.e. under i -> (n/2 - 1 - i) mod n, so that offset is attached.
    """
    i, j = np.indices((n, n))
    chi = ((2 * i) // n + (2 * j) // n) % 2
    return load_geometry(chi, mirror=n // 2 - 1)


def stripes(n: int, columns) -> GridGeometry:
    """Laminate whose indicator depends on x1 only: chi[i, :] = 1 for i in columns."""
    chi = np.zeros((n, n))
    chi[list(columns), :] = 1.0
    return load_geometry(chi, mirror=0)


def random_symmetric(n: int, rng: np.random.Generator, f: float = 0.5,
                     exact: bool = True) -> GridGeometry:
    """Random mirror-symmetric geometry (offset 0).

    With ``exact`` the number of phase-1 cells is as close to f*n^2 as the
    symmetry allows; otherwise cells are Bernoulli(f).
    """
    idx = _mirror_index(n, 0)
    # orbits of the mirror map in the x1 index
    orbits = [[i] if idx[i] == i else [i, idx[i]] for i in range(n) if i <= idx[i]]
    cells = [(orb, j) for orb in orbits for j in range(n)]
    weights = np.array([len(orb) for orb, _ in cells])
    chi = np.zeros((n, n))
    if exact:
        target = int(round(f * n * n))
        order = rng.permutation(len(cells))
        total = 0
        for c in order:
            if total + weights[c] <= target:
                orb, j = cells[c]
                chi[orb, j] = 1.0
                total += weights[c]
    else:
        for orb, j in cells:
            if rng.random() < f:
                chi[orb, j] = 1.0
    return load_geometry(chi, mirror=0)


def read_geometry(path, mirror: int | str | None = None) -> GridGeometry:
    """Read a geometry from JSON ``{"n", "chi", ["mirror"]}`` or an ASCII grid."""
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        obj = json.loads(text)
        chi = np.asarray(obj["chi"])
        if "n" in obj and chi.shape != (obj["n"], obj["n"]):
            raise DimensionMismatch(f"declared n={obj['n']} but chi has shape {chi.shape}")
        if mirror is None:
            mirror = obj.get("mirror", 0)
    else:
        rows = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not all(set(r) <= {"0", "1"} for r in rows):
            raise ValidationError("ASCII geometry must contain only '0' and '1'")
        chi = np.array([[int(c) for c in r] for r in rows])
        if mirror is None:
            mirror = 0
    return load_geometry(chi, mirror=mirror)


def geometry_to_json(geom: GridGeometry) -> dict:
    out = {"n": geom.n, "chi": geom.chi.astype(int).tolist()}
    if geom.mirror:
        out["mirror"] = geom.mirror
    return out


# ---------------------------------------------------------------------------
# tensors


def as_tensor(a) -> np.ndarray:
    """Coerce to a finite complex 2x2 array."""
    t = np.asarray(a, dtype=complex)
    if t.shape == (4,):
        t = t.reshape(2, 2)
    if t.shape != (2, 2):
        raise DimensionMismatch(f"expected a 2x2 tensor, got shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise ValidationError("tensor entries must be finite")
    return t


def coercivity(t: np.ndarray) -> tuple[float, float]:
    """Smallest eigenvalue of the Hermitian part and largest singular value."""
    herm = 0.5 * (t + t.conj().T)
    return float(np.linalg.eigvalsh(herm)[0]), float(np.linalg.norm(t, 2))


@dataclass(frozen=True)
class AdmissiblePair:
    """Phase tensors with Re(conj(a).sigma a) >= c1|a|^2 and |sigma a| <= c2|a|."""

    sigma1: np.ndarray
    sigma2: np.ndarray
    c1: float = dc_field(default=None)
    c2: float = dc_field(default=None)

    def __post_init__(self):
        s1 = as_tensor(self.sigma1)
        s2 = as_tensor(self.sigma2)
        object.__setattr__(self, "sigma1", s1)
        object.__setattr__(self, "sigma2", s2)
        lo = min(coercivity(s1)[0], coercivity(s2)[0])
        hi = max(coercivity(s1)[1], coercivity(s2)[1])
        c1 = lo if self.c1 is None else self.c1
        c2 = hi if self.c2 is None else self.c2
        if not (c1 > 0 and c2 >= c1):
            raise InadmissiblePair(f"need 0 < c1 <= c2, got c1={c1:.3g}, c2={c2:.3g}")
        if lo < c1 * (1 - 1e-12) or hi > c2 * (1 + 1e-12):
            raise InadmissiblePair(
                f"coercivity {lo:.3g} / norm {hi:.3g} outside [c1, c2] = [{c1:.3g}, {c2:.3g}]"
            )
        object.__setattr__(self, "c1", float(c1))
        object.__setattr__(self, "c2", float(c2))


# ---------------------------------------------------------------------------
# fields and operators


def _check(a: np.ndarray, n: int | None = None) -> int:
    if a.ndim < 3 or a.shape[-3] != 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionMismatch(f"field must have shape (..., 2, n, n), got {a.shape}")
    if n is not None and a.shape[-1] != n:
        raise DimensionMismatch(f"field resolution {a.shape[-1]} does not match grid {n}")
    return a.shape[-1]


def constant_field(n: int, vec) -> np.ndarray:
    out = np.zeros((2, n, n), dtype=complex)
    out[0] = vec[0]
    out[1] = vec[1]
    return out


def random_field(n: int, rng: np.random.Generator, size=()) -> np.ndarray:
    shape = tuple(np.atleast_1d(size)) if size != () else ()
    shape = shape + (2, n, n)
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def inner(a: np.ndarray, b: np.ndarray) -> complex:
    """Grid mean of conj(a).b; conjugate-linear in the first slot."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    _check(a)
    n = a.shape[-1]
    return np.sum(np.conj(a) * b, axis=(-3, -2, -1)) / (n * n)


def project_phase(idx: int, h: np.ndarray, geom: GridGeometry) -> np.ndarray:
    """P_1..P_4: keep one component inside one phase.

    P_1 / P_2 keep component 1 / 2 where chi = 1, P_3 / P_4 where chi = 0.
    """
    if idx not in (1, 2, 3, 4):
        raise ValueError(f"phase projection index must be 1..4, got {idx}")
    h = np.asarray(h)
    _check(h, geom.n)
    mask = geom.chi if idx <= 2 else 1.0 - geom.chi
    comp = (idx - 1) % 2
    out = np.zeros_like(h, dtype=np.result_type(h, float))
    out[..., comp, :, :] = h[..., comp, :, :] * mask
    return out


_DIR_CACHE: dict = {}


def gradient_directions(n: int, mirror: int = 0) -> np.ndarray:
    """Unit vectors nhat(k), shape (2, n, n), on the FFT wavenumber grid.

    Away from the Nyquist lines nhat = k/|k|; at k = 0 it is e1.  Where
    |k1| or |k2| equals n/2 the axis with the larger |k_d| is used.  On the
    line k1 = n/2 the choice is fixed by the parity of the mirror offset so
    that the symmetric and antisymmetric parts of U1+E have equal dimension:
    even offsets use e1 there (e2 at the corner), odd offsets use e2 (e1 at
    k2 = 0).
    """
    key = (n, mirror % 2)
    if key in _DIR_CACHE:
        return _DIR_CACHE[key]
    k = np.fft.fftfreq(n, 1.0 / n)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    kk = np.hypot(k1, k2)
    kk[0, 0] = 1.0
    nh = np.stack([k1 / kk, k2 / kk])
    nh[:, 0, 0] = (1.0, 0.0)
    h = n // 2
    a1, a2 = np.abs(k1), np.abs(k2)
    nyq = (a1 == h) | (a2 == h)
    pick1 = a1 > a2
    if mirror % 2:
        pick1 = np.where(a1 == h, a2 == 0, pick1)
    nh[0][nyq] = pick1[nyq]
    nh[1][nyq] = ~pick1[nyq]
    nh.setflags(write=False)
    _DIR_CACHE[key] = nh
    return nh


def project_lambda(idx: int, h: np.ndarray, mirror: int = 0) -> np.ndarray:
    """Lambda_1 (projection onto U1+E) or Lambda_2 = I - Lambda_1."""
    if idx not in (1, 2):
        raise ValueError(f"Lambda index must be 1 or 2, got {idx}")
    h = np.asarray(h)
    n = _check(h)
    nh = gradient_directions(n, mirror)
    H = np.fft.fft2(h, axes=(-2, -1))
    c = nh[0] * H[..., 0, :, :] + nh[1] * H[..., 1, :, :]
    lam1 = np.fft.ifft2(nh * c[..., None, :, :], axes=(-2, -1))
    return lam1 if idx == 1 else h - lam1


def rotate_perp(h: np.ndarray) -> np.ndarray:
    """R_perp: (h1, h2) -> (-h2, h1) pointwise."""
    h = np.asarray(h)
    _check(h)
    return np.stack([-h[..., 1, :, :], h[..., 0, :, :]], axis=-3)


def reflect(h: np.ndarray, mirror: int = 0) -> np.ndarray:
    """Pi: g1(i, j) = h1((s - i) mod n, j), g2(i, j) = -h2((s - i) mod n, j)."""
    h = np.asarray(h)
    n = _check(h)
    g = h[..., _mirror_index(n, mirror), :].copy()
    g[..., 1, :, :] *= -1
    return g
