"""Finite-dimensional truncation of the field space that keeps sigma* series exact.

Multi-index fields E_{alpha j} = G1 P_{a1} G1 P_{a2} ... G1 P_{am} U_j (and the
J analogues with G2) span the subspaces Et and Jt.  Together with the
constants U they contain every field of the weak-contrast expansion up to
order M.  The residuals r = (I - Psi) P_i E_{alpha_M 1} of the top order and
their rotations R_perp r close the space under P_1..P_4, R_perp and Pi.

Fields generated here are real, so spans are represented by real orthonormal
column matrices over flattened (2, n, n) arrays.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceeded, ClosureFailure, ValidationError
from .field_space import GridGeometry, project_lambda, project_phase, reflect, rotate_perp
from .reference_solver import _apply, conductivity_field, series_coefficients

__all__ = [
    "MultiIndex",
    "RawFields",
    "TruncatedSpace",
    "generate_fields",
    "build_truncated_space",
    "compare_expansions",
    "sigma_star_truncated",
    "sigma_star_full",
    "contrast_scaling",
]

#: default cap on the number of raw generated fields
BUDGET = 40_000
COMPLEMENT = {1: 2, 2: 1, 3: 4, 4: 3}


@dataclass(frozen=True)
class MultiIndex:
    indices: tuple

    def __post_init__(self):
        if not self.indices or any(a not in (1, 2, 3, 4) for a in self.indices):
            raise ValidationError(f"multi-index entries must be in 1..4: {self.indices}")

    @property
    def order(self) -> int:
        return len(self.indices)

    def complement(self) -> "MultiIndex":
        return MultiIndex(tuple(COMPLEMENT[a] for a in self.indices))


def raw_count(M: int) -> int:
    return 4 * sum(4 ** m for m in range(1, M + 1))


def _gamma(idx: int, h: np.ndarray, mirror: int) -> np.ndarray:
    """Projection onto E (idx 1) or J (idx 2): Lambda_idx without the constant part."""
    out = project_lambda(idx, h, mirror).real
    out[..., idx - 1, :, :] -= out[..., idx - 1, :, :].mean(axis=(-2, -1), keepdims=True)
    return out


@dataclass
class RawFields:
    """Generated multi-index fields.

    ``E`` and ``J`` are arrays of shape (count, 2, n, n); ``labels``
    lists (MultiIndex, j) in the same order for both.  ``zero`` holds labels
    whose E field vanishes to rounding.
    """

    E: np.ndarray
    J: np.ndarray
    labels: list
    zero: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return 2 * len(self.labels)

    def top(self, M: int, j: int = 1) -> np.ndarray:
        sel = [k for k, (a, jj) in enumerate(self.labels) if a.order == M and jj == j]
        return self.E[sel]


def generate_fields(geom: GridGeometry, M: int, budget: int = BUDGET) -> RawFields:
    """E_{alpha j} and J_{alpha j} for every multi-index of order 1..M and j = 1, 2.

    Orders are built by prepending: E_{(a, alpha) j} = G1 P_a E_{alpha j}.

    Raises
    ------
    BudgetExceeded
        If 2 * 2 * sum_m 4^m exceeds ``budget``.
    """
    if M < 1:
        raise ValidationError("M must be at least 1")
    if raw_count(M) > budget:
        raise BudgetExceeded(f"{raw_count(M)} raw fields for M={M} exceed budget {budget}")
    n, s = geom.n, geom.mirror
    U = np.zeros((2, 2, n, n))
    U[0, 0] = 1.0
    U[1, 1] = 1.0
    Es, Js, labels = [], [], []
    prevE = {(): U}
    prevJ = {(): U}
    for m in range(1, M + 1):
        curE, curJ = {}, {}
        for alpha in itertools.product((1, 2, 3, 4), repeat=m - 1):
            for a in (1, 2, 3, 4):
                key = (a,) + alpha
                curE[key] = _gamma(1, project_phase(a, prevE[alpha], geom), s)
                curJ[key] = _gamma(2, project_phase(a, prevJ[alpha], geom), s)
        for key in sorted(curE):
            for j in (1, 2):
                Es.append(curE[key][j - 1])
                Js.append(curJ[key][j - 1])
                labels.append((MultiIndex(key), j))
        prevE, prevJ = curE, curJ
    E = np.array(Es)
    J = np.array(Js)
    norms = np.sqrt((E ** 2).mean(axis=(1, 2, 3)))
    zero = [labels[k] for k in np.flatnonzero(norms < 1e-13)]
    return RawFields(E, J, labels, zero)


def _orth_against(X: np.ndarray, Q: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis of the part of span(X) orthogonal to the columns of Q."""
    ref = np.linalg.norm(X, axis=0).max() if X.size else 1.0
    Y = X - Q @ (Q.T @ X)
    Y = Y - Q @ (Q.T @ Y)
    norms = np.linalg.norm(Y, axis=0)
    keep = norms > tol * ref
    if not keep.any():
        return X[:, :0]
    u, sv, _ = np.linalg.svd(Y[:, keep], full_matrices=False)
    B = u[:, sv > tol * ref]
    B = B - Q @ (Q.T @ B)
    q, _ = np.linalg.qr(B)
    return q


@dataclass
class TruncatedSpace:
    """Closed finite-dimensional space U + E + J.

    Attributes
    ----------
    geom : GridGeometry
    M : int
    basis : ndarray, shape (dim, 2, n, n)
        Orthonormal in the flattened Euclidean product; blocks are ordered
        U, Et, R, Jt, R_perp' (see ``blocks``).
    blocks : dict
        Slices of ``basis`` for each block.  ``E`` = Et + R and ``J`` = Jt + R_perp'.
    closure : dict
        Max leak ||(I - Psi) T b|| / ||b|| per operator name.
    raw_count : int
    overlap : float
        Largest cosine between R and R_perp R before orthogonalization.
    """

    geom: GridGeometry
    M: int
    basis: np.ndarray
    blocks: dict
    closure: dict
    raw_count: int
    overlap: float

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def Q(self) -> np.ndarray:
        return self.basis.reshape(self.dim, -1).T

    def Q_block(self, name: str) -> np.ndarray:
        return self.Q[:, self.blocks[name]]

    def project(self, h: np.ndarray) -> np.ndarray:
        """Psi_total h for a stack of real or complex fields."""
        shape = h.shape
        flat = h.reshape(-1, self.Q.shape[0])
        Q = self.Q
        return ((flat @ Q) @ Q.T).reshape(shape)

    def to_json(self) -> dict:
        return {
            "n": self.geom.n,
            "M": self.M,
            "dim": self.dim,
            "raw_count": self.raw_count,
            "blocks": {k: [v.start, v.stop] for k, v in self.blocks.items()},
            "closure_residuals": self.closure,
            "r_overlap": self.overlap,
        }


def _operators(geom: GridGeometry):
    ops = {f"P{i}": (lambda h, i=i: project_phase(i, h, geom)) for i in (1, 2, 3, 4)}
    ops["Rperp"] = rotate_perp
    ops["Pi"] = lambda h: reflect(h, geom.mirror)
    return ops


def build_truncated_space(geom: GridGeometry, M: int, rank_tol: float = 1e-10,
                          closure_tol: float = 1e-9, budget: int = BUDGET,
                          raw: RawFields | None = None) -> TruncatedSpace:
    """Assemble and verify the truncated space of order M.

    Et and Jt are orthonormalized with relative cutoff ``rank_tol``.  The
    residual space R is orthonormalized against U + Et + Jt; R_perp R is then
    orthonormalized against everything before it, so the final blocks are
    mutually orthogonal even where R and R_perp R overlap.

    Raises
    ------
    ClosureFailure
        If some basis field leaks more than ``closure_tol`` under P_i, R_perp or Pi.
    """
    n = geom.n
    N = 2 * n * n
    raw = generate_fields(geom, M, budget) if raw is None else raw
    U = np.zeros((N, 2))
    U[: n * n, 0] = 1.0 / n
    U[n * n:, 1] = 1.0 / n
    QE = _orth_against(raw.E.reshape(len(raw.labels), N).T, U, rank_tol)
    QJ = _orth_against(raw.J.reshape(len(raw.labels), N).T, np.hstack([U, QE]), rank_tol)
    Qt = np.hstack([U, QE, QJ])

    top = raw.top(M, 1)
    PE = np.concatenate([project_phase(i, top, geom) for i in (1, 2, 3, 4)])
    PE = PE.reshape(len(PE), N).T
    QR = _orth_against(PE, Qt, rank_tol)
    RpR = rotate_perp(QR.T.reshape(-1, 2, n, n)).reshape(QR.shape[1], N).T
    overlap = float(np.abs(QR.T @ RpR).max()) if QR.shape[1] else 0.0
    QRp = _orth_against(RpR, np.hstack([Qt, QR]), rank_tol)

    cols = [U, QE, QR, QJ, QRp]
    Q = np.hstack(cols)
    edges = np.cumsum([0] + [c.shape[1] for c in cols])
    blocks = {
        "U": slice(edges[0], edges[1]),
        "Et": slice(edges[1], edges[2]),
        "R": slice(edges[2], edges[3]),
        "Jt": slice(edges[3], edges[4]),
        "Rperp": slice(edges[4], edges[5]),
        "E": slice(edges[1], edges[3]),
        "J": slice(edges[3], edges[5]),
    }
    basis = Q.T.reshape(-1, 2, n, n)

    closure = {}
    for name, op in _operators(geom).items():
        img = op(basis).reshape(len(basis), N).T.real
        leak = img - Q @ (Q.T @ img)
        per = np.linalg.norm(leak, axis=0)
        worst = int(np.argmax(per)) if per.size else 0
        closure[name] = float(per.max()) if per.size else 0.0
        if closure[name] > closure_tol:
            raise ClosureFailure(name, worst, closure[name])
    return TruncatedSpace(geom, M, basis, blocks, closure, raw.count, overlap)


def _series_in_space(space: TruncatedSpace, dir1, dir2, M: int) -> list:
    n = space.geom.n
    N = 2 * n * n
    delta = conductivity_field(space.geom, dir1, dir2)
    QE = space.Q_block("E")
    e = np.zeros((2, 2, n, n), complex)
    e[0, 0] = 1.0
    e[1, 1] = 1.0
    coeffs = [np.eye(2, dtype=complex)]
    for _ in range(M):
        j = _apply(delta, e)
        coeffs.append(j.mean(axis=(-2, -1)).T)
        flat = j.reshape(2, N)
        e = -((flat @ QE) @ QE.T).reshape(2, 2, n, n)
    return coeffs


def compare_expansions(geom: GridGeometry, M: int, dir1, dir2, space: TruncatedSpace | None = None,
                       orders: int | None = None) -> dict:
    """Series coefficients of sigma*(I + t dir1, I + t dir2) on the full grid vs in the space.

    Returns
    -------
    dict
        ``max`` (max entrywise difference over orders 0..orders) and
        ``by_order`` (list of per-order maxima).  ``orders`` defaults to M.
    """
    space = build_truncated_space(geom, M) if space is None else space
    orders = M if orders is None else orders
    full = series_coefficients(geom, dir1, dir2, orders).coeffs
    trunc = _series_in_space(space, dir1, dir2, orders)
    by_order = [float(np.abs(a - b).max()) for a, b in zip(full, trunc)]
    return {"max": max(by_order), "by_order": by_order}


def _galerkin(geom: GridGeometry, QE: np.ndarray, sigma1, sigma2) -> np.ndarray:
    n = geom.n
    N = 2 * n * n
    sig = conductivity_field(geom, sigma1, sigma2)
    basis = QE.T.reshape(-1, 2, n, n)
    SQ = _apply(sig, basis).reshape(len(basis), N).T
    A = QE.T @ SQ
    out = np.zeros((2, 2), complex)
    for col in range(2):
        e0 = np.zeros((2, n, n), complex)
        e0[col] = 1.0
        s0 = _apply(sig, e0).reshape(N)
        c = np.linalg.solve(A, -(QE.T @ s0))
        out[:, col] = (s0 + SQ @ c).reshape(2, n, n).mean(axis=(-2, -1))
    return out


def sigma_star_truncated(space: TruncatedSpace, sigma1, sigma2) -> np.ndarray:
    """sigma* with fluctuations restricted to the truncated E block."""
    return _galerkin(space.geom, space.Q_block("E"), sigma1, sigma2)


def sigma_star_full(geom: GridGeometry, sigma1, sigma2) -> np.ndarray:
    """sigma* with fluctuations in all of E, by the same dense Galerkin solve."""
    n = geom.n
    eye = np.eye(2 * n * n).reshape(-1, 2, n, n)
    G = _gamma(1, eye, geom.mirror).reshape(len(eye), -1).T
    w, v = np.linalg.eigh(0.5 * (G + G.T))
    return _galerkin(geom, v[:, w > 0.5], sigma1, sigma2)


def contrast_scaling(space: TruncatedSpace, delta1, delta2, ts) -> dict:
    """Difference of truncated and full sigma* for sigma_i = I + t delta_i.

    Returns the differences and the least-squares slope of log(diff) vs log(t).
    """
    ts = np.asarray(ts, dtype=float)
    I = np.eye(2)
    diffs = []
    for t in ts:
        a = sigma_star_truncated(space, I + t * np.asarray(delta1), I + t * np.asarray(delta2))
        b = sigma_star_full(space.geom, I + t * np.asarray(delta1), I + t * np.asarray(delta2))
        diffs.append(float(np.abs(a - b).max()))
    diffs = np.array(diffs)
    slope = float(np.polyfit(np.log(ts), np.log(diffs), 1)[0])
    return {"t": ts.tolist(), "diff": diffs.tolist(), "slope": slope}
