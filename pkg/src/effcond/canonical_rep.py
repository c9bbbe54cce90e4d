"""Canonical finite representation extracted from a symmetric geometry.

The symmetric part of U1+E is spanned by an orthonormal real basis built
with the projector Lambda_1 (I + Pi)/2.  Compressing S = P_3 + P_4 onto it
gives the eigenfields u_i and eigenvalues rho_i; the couplings
beta_i = (u_i, U1) and the compressions of P_1 and P_3 then fix the
representation (rho, beta, H1, H2).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .errors import AssumptionViolated, EigSolverFailure, RepInvalid, SubspaceTooSmall
from .field_space import (
    GridGeometry,
    project_lambda,
    project_phase,
    reflect,
    rotate_perp,
)

__all__ = [
    "SymmetricEigenbasis",
    "CanonicalRep",
    "sector_basis",
    "sector_spectrum",
    "build_eigenbasis",
    "extract_rep",
    "validate_rep",
    "sampled_blocks",
    "block_matrices",
]

#: seed of the Gaussian block used to span a symmetry sector
BASIS_SEED = 20240607


def sector_basis(geom: GridGeometry, parity: int = 1) -> np.ndarray:
    """Orthonormal real basis of the symmetric (+1) or antisymmetric (-1) part of U1+E.

    Returns
    -------
    ndarray, shape (d, 2, n, n)
        Fields with unit grid-mean norm; d = n^2 / 2 for either parity.
    """
    n = geom.n
    d = n * n // 2
    g = np.random.default_rng(BASIS_SEED + (parity < 0)).standard_normal((d, 2, n, n))
    g = 0.5 * (g + parity * reflect(g, geom.mirror))
    g = project_lambda(1, g, geom.mirror).real
    q, r = np.linalg.qr(g.reshape(d, -1).T)
    if np.abs(np.diag(r)).min() < 1e-8 * np.abs(np.diag(r)).max():
        raise EigSolverFailure("sector basis is rank deficient")
    return (q.T * n).reshape(d, 2, n, n)


def _compress_diag(basis: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """Matrix (b_i, diag(weight) b_j) for real fields under the grid-mean inner product."""
    d = basis.shape[0]
    n2 = basis[0, 0].size
    flat = basis.reshape(d, -1)
    return (flat * weight.ravel()) @ flat.T / n2


def sector_spectrum(geom: GridGeometry, parity: int = 1) -> np.ndarray:
    """Unclamped eigenvalues of Lambda_1 (P_3 + P_4) Lambda_1 on one sector of U1+E."""
    basis = sector_basis(geom, parity)
    s = np.broadcast_to(1.0 - geom.chi, (2,) + geom.chi.shape)
    return np.linalg.eigvalsh(_compress_diag(basis, s))


@dataclass
class SymmetricEigenbasis:
    """Retained symmetric eigenfields and their antisymmetric partners.

    Attributes
    ----------
    u_fields : ndarray, shape (2 * half_m, 2, n, n)
        Symmetric fields first, then their partners in the same order.
    rho : ndarray
        Clamped eigenvalues of the retained symmetric fields.
    rho_raw : ndarray
        Eigenvalues before clamping.
    beta : ndarray
        Couplings (u_i, U1), all non-negative.
    paired : ndarray of bool
        False where the partner is undefined (raw rho equal to 0 or 1).
    remainder : bool
        True when the last symmetric field is the normalized part of U1 not
        captured by the retained eigenfields.  It carries the missing
        spectral weight so that U1 lies in the span; its rho is a Rayleigh
        quotient and it is not an eigenfield.
    full_dim : int
        Dimension of the symmetric part of U1+E.
    """

    geom: GridGeometry
    half_m: int
    u_fields: np.ndarray
    rho: np.ndarray
    rho_raw: np.ndarray
    beta: np.ndarray
    paired: np.ndarray
    remainder: bool
    full_dim: int
    indices: np.ndarray
    clamped: np.ndarray = field(default=None)
    eps: float = 1e-10

    @property
    def symmetric(self) -> np.ndarray:
        return self.u_fields[: self.half_m]

    @property
    def partners(self) -> np.ndarray:
        return self.u_fields[self.half_m:]


def _rotate_clusters(rho, vecs, beta, tol):
    """Fix the basis inside each cluster of (numerically) equal rho.

    The U1 coupling is concentrated in the first vector of the cluster.  The
    uncoupled remainder is turned by a fixed pseudo-random rotation: any
    basis of a repeated eigenspace is admissible, and a generic one avoids
    accidental alignments that would break the index-ordering assumptions.
    """
    rng = np.random.default_rng(BASIS_SEED)
    m = len(rho)
    start = 0
    while start < m:
        stop = start + 1
        while stop < m and rho[stop] - rho[stop - 1] <= tol:
            stop += 1
        k = stop - start
        if k > 1:
            b = beta[start:stop]
            nb = np.linalg.norm(b)
            lead = b / nb if nb > 0 else np.eye(k)[0]
            q, _ = np.linalg.qr(np.column_stack([lead, np.eye(k)]))
            q = q[:, :k]
            if q[:, 0] @ lead < 0:
                q[:, 0] *= -1
            turn, _ = np.linalg.qr(rng.standard_normal((k - 1, k - 1)))
            q[:, 1:] = q[:, 1:] @ turn
            vecs[:, start:stop] = vecs[:, start:stop] @ q
            beta[start:stop] = 0.0
            beta[start] = nb
        start = stop
    return vecs, beta


def build_eigenbasis(geom: GridGeometry, half_m: int | None = None, eps: float = 1e-10,
                     cluster_tol: float = 1e-9) -> SymmetricEigenbasis:
    """Eigenfields of Lambda_1 (P_3 + P_4) Lambda_1 on the symmetric part of U1+E.

    Parameters
    ----------
    geom : GridGeometry
    half_m : int, optional
        Number of symmetric fields to keep (default: all).  Fields are
        ranked by beta_i^2, then larger rho, then lower eigen-index.  If the
        kept eigenfields miss part of U1, the last slot holds the normalized
        remainder of U1 instead of the last-ranked eigenfield.
    eps : float
        Eigenvalues are clamped into [eps, 1 - eps].
    cluster_tol : float
        Eigenvalues closer than this are treated as one cluster, within which
        the basis is rotated so at most one field couples to U1.
    """
    if not 0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 0.5)")
    n = geom.n
    basis = sector_basis(geom, 1)
    d = basis.shape[0]
    half_m = d if half_m is None else int(half_m)
    if half_m < 1 or half_m > d:
        raise SubspaceTooSmall(f"half_m={half_m} outside 1..{d}")
    s_weight = np.broadcast_to(1.0 - geom.chi, (2, n, n))
    try:
        rho_all, vecs = np.linalg.eigh(_compress_diag(basis, s_weight))
    except np.linalg.LinAlgError as exc:
        raise EigSolverFailure(str(exc)) from exc
    flat = basis.reshape(d, -1)
    beta_all = vecs.T @ flat[:, : n * n].sum(axis=1) / (n * n)
    vecs, beta_all = _rotate_clusters(rho_all, vecs.copy(), beta_all.copy(), cluster_tol)
    sign = np.where(beta_all < 0, -1.0, 1.0)
    vecs = vecs * sign
    beta_all = beta_all * sign

    weight = np.where(beta_all ** 2 < 1e-24, 0.0, beta_all ** 2)
    order = np.lexsort((np.arange(d), -rho_all, -weight))
    remainder = half_m < d and 1.0 - weight[order[:half_m]].sum() > 1e-14
    keep = order[: half_m - 1] if remainder else order[:half_m]
    missing = 1.0 - weight[keep].sum()

    coeffs = vecs[:, keep]
    rho_raw = rho_all[keep]
    beta = beta_all[keep]
    if remainder:
        # eigen-coordinates of the part of U1 not captured by the kept fields
        c = beta_all.copy()
        c[keep] = 0.0
        c /= np.linalg.norm(c)
        coeffs = np.column_stack([coeffs, vecs @ c])
        rho_raw = np.append(rho_raw, c @ (rho_all * c))
        beta = np.append(beta, np.sqrt(max(missing, 0.0)))
        keep = np.append(keep, -1)
    u = np.tensordot(coeffs.T, basis, axes=1)

    clamped = (rho_raw < eps) | (rho_raw > 1 - eps)
    if np.any((rho_raw < -eps) | (rho_raw > 1 + eps)):
        raise AssumptionViolated(1, "eigenvalue outside [0, 1] by more than eps")
    rho = np.clip(rho_raw, eps, 1 - eps)

    sfield = project_phase(3, u, geom) + project_phase(4, u, geom)
    partner = project_lambda(1, rotate_perp(sfield), geom.mirror).real
    norms = np.sqrt(np.mean(partner ** 2, axis=(-3, -2, -1)) * 2)
    paired = norms > 1e-7
    partner[paired] /= norms[paired, None, None, None]
    partner[~paired] = 0.0
    return SymmetricEigenbasis(
        geom=geom, half_m=half_m, u_fields=np.concatenate([u, partner]), rho=rho,
        rho_raw=rho_raw, beta=beta, paired=paired, remainder=bool(remainder), full_dim=d,
        indices=keep, clamped=clamped, eps=eps,
    )


# ---------------------------------------------------------------------------
# representation


def _as_H(H, m: int) -> np.ndarray:
    H = np.asarray(H, dtype=float)
    if H.ndim != 2:
        raise RepInvalid(f"H must be a 2-D array, got shape {H.shape}")
    return H


@dataclass
class CanonicalRep:
    """Parameters (rho, beta, H1, H2) of the canonical representation.

    Everything else (Z1, Z2, Q, K1, K2, Y1..Y4) is derived.  ``diagnostics``
    records how the rep was extracted and is not serialized.

    ``perm2`` is only needed when no single index order puts invertible
    blocks in front of both Upsilon_1 and Upsilon_3 (geometries with modes
    lying entirely in one phase).  K2 = (I H2) then refers to the indices
    in the order ``perm2``; ``None`` means the common order.
    """

    rho: np.ndarray
    beta: np.ndarray
    H1: np.ndarray
    H2: np.ndarray
    perm2: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float).ravel()
        self.beta = np.asarray(self.beta, dtype=float).ravel()
        m = self.rho.size
        self.H1 = _as_H(self.H1, m)
        self.H2 = _as_H(self.H2, m)
        if self.beta.size != m:
            raise RepInvalid("rho and beta lengths differ")
        if np.any(self.rho <= 0) or np.any(self.rho >= 1):
            raise RepInvalid("every rho must lie strictly inside (0, 1)")
        if np.any(self.beta < 0):
            raise RepInvalid("beta entries must be non-negative")
        if abs(np.sum(self.beta ** 2) - 1.0) > 1e-9:
            raise RepInvalid(f"sum of beta^2 is {np.sum(self.beta ** 2):.12g}, not 1")
        if self.perm2 is not None:
            self.perm2 = np.asarray(self.perm2, dtype=int).ravel()
            if sorted(self.perm2.tolist()) != list(range(m)):
                raise RepInvalid("perm2 is not a permutation of the eigen-indices")
            if np.array_equal(self.perm2, np.arange(m)):
                self.perm2 = None
        for name, H in (("H1", self.H1), ("H2", self.H2)):
            if H.shape[0] < 1 or H.shape[0] > m or H.shape[0] + H.shape[1] != m:
                raise RepInvalid(f"{name} has shape {H.shape}, incompatible with half_m={m}")

    @property
    def half_m(self) -> int:
        return self.rho.size

    @property
    def n1(self) -> int:
        return self.H1.shape[0]

    @property
    def n2(self) -> int:
        return self.H2.shape[0]

    @cached_property
    def Z1(self):
        return np.diag(self.rho)

    @cached_property
    def Z2(self):
        return np.diag(1.0 - self.rho)

    @cached_property
    def Q(self):
        return np.diag(np.sqrt(self.rho / (1.0 - self.rho)))

    @cached_property
    def Qinv(self):
        return np.diag(np.sqrt((1.0 - self.rho) / self.rho))

    @cached_property
    def K1(self):
        return np.hstack([np.eye(self.n1), self.H1])

    @cached_property
    def K2(self):
        """(I H2) with columns moved back to the common index order."""
        K = np.hstack([np.eye(self.n2), self.H2])
        if self.perm2 is None:
            return K
        out = np.empty_like(K)
        out[:, self.perm2] = K
        return out

    @staticmethod
    def _weighted_projection(K, z):
        # K^T (K Z^{-1} K^T)^{-1} K = Z^{1/2} Pi Z^{1/2}, Pi the orthogonal
        # projection onto range(Z^{-1/2} K^T); QR avoids squaring the
        # conditioning when some z are tiny
        sq = np.sqrt(z)
        q, _ = np.linalg.qr(K.T / sq[:, None])
        w = sq[:, None] * q
        return w @ w.T

    @cached_property
    def Y1(self):
        return self._weighted_projection(self.K1, 1.0 - self.rho)

    @cached_property
    def Y3(self):
        return self._weighted_projection(self.K2, self.rho)

    @cached_property
    def Y2(self):
        return self.Z1 - self.Q @ self.Y1 @ self.Q

    @cached_property
    def Y4(self):
        return self.Z2 - self.Qinv @ self.Y3 @ self.Qinv

    def to_json(self) -> dict:
        return {
            "half_m": self.half_m,
            "n1": self.n1,
            "n2": self.n2,
            "rho": self.rho.tolist(),
            "beta": self.beta.tolist(),
            "H1": self.H1.tolist(),
            "H2": self.H2.tolist(),
            **({} if self.perm2 is None else {"perm2": self.perm2.tolist()}),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CanonicalRep":
        m = int(obj["half_m"])
        n1, n2 = int(obj["n1"]), int(obj["n2"])
        H1 = np.array(obj["H1"], dtype=float).reshape(n1, m - n1)
        H2 = np.array(obj["H2"], dtype=float).reshape(n2, m - n2)
        rep = cls(obj["rho"], obj["beta"], H1, H2, obj.get("perm2"))
        if rep.half_m != m:
            raise RepInvalid("half_m does not match the length of rho")
        return rep


def _nearest_range(Y: np.ndarray, z: np.ndarray, beta: np.ndarray):
    """Range of the valid Y closest to the sampled compression Y.

    A valid Y satisfies Y = Y diag(1/z) Y, i.e. T = Z^{-1/2} Y Z^{-1/2} is an
    orthogonal projection.  T is rounded to the projection onto its
    eigenvectors with eigenvalue above 1/2, then rotated so that it contains
    Z^{1/2} beta (the condition Y beta = Z beta).  For an exact compression
    this changes nothing.  Returns an orthonormal basis of range(Y) and the
    largest distance of an eigenvalue of T from {0, 1}.
    """
    sq = np.sqrt(z)
    T = Y / np.outer(sq, sq)
    T = 0.5 * (T + T.T)
    w, V = np.linalg.eigh(T)
    defect = float(np.max(np.minimum(np.abs(w), np.abs(1.0 - w)))) if w.size else 0.0
    R = V[:, w > 0.5]
    k = max(R.shape[1], 1)
    t = sq * beta
    t /= np.linalg.norm(t)
    Rp = R - np.outer(t, t @ R)
    if k > 1:
        ww, VV = np.linalg.eigh(Rp @ Rp.T)
        span = np.column_stack([t, VV[:, ::-1][:, : k - 1]])
    else:
        span = t[:, None]
    # range(Y) = Z^{1/2} span
    r, _ = np.linalg.qr(sq[:, None] * span)
    return r, defect


def _lead(A: np.ndarray, k: int, first=()) -> list:
    """Indices of k well-conditioned columns of A, starting with ``first``.

    Column-pivoted QR is run on the columns of A after removing the span of
    the forced ones.
    """
    first = [int(i) for i in first]
    if k <= len(first):
        return first[:k]
    rest = np.setdiff1d(np.arange(A.shape[1]), first)
    B = A[:, rest]
    if first:
        q, _ = np.linalg.qr(A[:, first])
        B = B - q @ (q.T @ B)
    _, piv = sla.qr(B, mode="r", pivoting=True)
    return first + [int(i) for i in rest[piv[: k - len(first)]]]


def _leading_cond(R: np.ndarray, idx) -> float:
    """Reciprocal condition of the rows idx of an orthonormal range basis."""
    if R.shape[1] == 0:
        return 1.0
    sv = np.linalg.svd(R[list(idx)], compute_uv=False)
    return float(sv[-1] / max(sv[0], 1e-300))


def _ordering(R1, R3, rank_tol):
    """Eigen-index order making the leading n1 (n2) rows of R1 (R3) invertible.

    Leading blocks of a common order are nested, so the smaller range must
    be pivoted inside the pivot set of the larger one, or the larger one
    grown around the pivots of the smaller one; the better conditioned of
    the two is used.  If neither works the second range gets its own order.

    Returns
    -------
    perm, perm2
        perm2 is None when the common order serves both ranges.
    """
    m = R1.shape[0]
    n1, n2 = R1.shape[1], R3.shape[1]
    (Rs, ks), (Rb, kb) = sorted([(R1, n1), (R3, n2)], key=lambda t: t[1])
    outer = _lead(Rb.T, kb)
    inner = [outer[i] for i in _lead(Rs[outer].T, ks)]
    cand1 = inner + [i for i in outer if i not in set(inner)]
    cand2 = _lead(Rb.T, kb, first=_lead(Rs.T, ks))
    best, best_cond = None, -1.0
    for lead in (cand1, cand2):
        cond = min(_leading_cond(R1, lead[:n1]), _leading_cond(R3, lead[:n2]))
        if cond > best_cond:
            best, best_cond = lead, cond
    if best_cond >= rank_tol:
        perm = np.array(best + [i for i in range(m) if i not in set(best)], dtype=int)
        return perm, None
    lead1 = _lead(R1.T, n1)
    perm = np.array(lead1 + [i for i in range(m) if i not in set(lead1)], dtype=int)
    lead3 = _lead(R3[perm].T, n2)
    perm2 = np.array(lead3 + [i for i in range(m) if i not in set(lead3)], dtype=int)
    for R, lead, which in ((R1[perm], range(n1), 2), (R3[perm][perm2], range(n2), 3)):
        if _leading_cond(R, lead) < rank_tol:
            raise AssumptionViolated(which, "leading Upsilon block is singular for every ordering")
    return perm, perm2


def _K_from_range(R: np.ndarray, k: int) -> np.ndarray:
    """K = (I H) whose rows span the columns of R (leading k rows invertible)."""
    return np.linalg.solve(R[:k].T, R.T)


def _dilate(T: np.ndarray, tol: float):
    """Split a compressed projection into its rounded part and a dilation.

    T is symmetric with spectrum in [0, 1].  Eigenvalues within ``tol`` of 0
    or 1 are rounded; the fractional ones (t) are kept and returned with the
    coupling C = V_f sqrt(t (1 - t)) and the block diag(1 - t), so that
    [[T, C], [C^T, diag(1 - t)]] is an orthogonal projection.
    """
    w, V = np.linalg.eigh(0.5 * (T + T.T))
    frac = (w > tol) & (w < 1.0 - tol)
    w = np.where(frac, np.clip(w, 0.0, 1.0), np.round(np.clip(w, 0.0, 1.0)))
    Vf, wf = V[:, frac], w[frac]
    return (V * w) @ V.T, Vf * np.sqrt(wf * (1.0 - wf)), 1.0 - wf


def extract_rep(basis: SymmetricEigenbasis, rank_tol: float = 1e-8,
                dilate: bool = True) -> CanonicalRep:
    """Canonical representation from a symmetric eigenbasis.

    The compressions G1 = (u_i, P_1 u_j) and G3 = (u_i, P_3 u_j) are sampled
    from the fields.  A valid rep needs T1 = Z2^{-1/2} G1 Z2^{-1/2} (and T3
    with Z1) to be an orthogonal projection.  That holds when the full
    spectrum of a geometry without exactly degenerate modes is kept; for a
    truncated basis or a degenerate geometry T has fractional eigenvalues.

    With ``dilate`` (default) each fractional eigenvalue gets an auxiliary
    slot with beta = 0 and rho at the clamp bound (1 - eps for T1, eps for
    T3), and T is completed to a projection on the larger index set.  The
    sampled compressions are then reproduced exactly and the auxiliary slots
    change Theorem-1 values by O(eps) only.  Without ``dilate`` T is rounded
    to the nearest projection containing Z^{1/2} beta (see
    :func:`_nearest_range`) and the rep has exactly ``basis.half_m`` slots.

    n1 and n2 are the dimensions of the ranges of Y1 and Y3.  A pivoted
    greedy choice puts independent Upsilon columns in the leading blocks,
    K = (I H) follows from the leading rows, and the reconstruction
    Y1 = K1^T (K1 Z2^{-1} K1^T)^{-1} K1 is compared with the sampled G1.

    Returns
    -------
    CanonicalRep
        ``diagnostics`` holds the permutation, the reconstruction residuals
        on the eigen slots, the projection defects of the sampled T1 and T3
        and the number of auxiliary slots.
    """
    geom = basis.geom
    u = basis.symmetric
    rho = basis.rho
    m = basis.half_m
    scale = geom.n ** 2
    flat = u.reshape(m, -1)
    G1 = flat @ project_phase(1, u, geom).reshape(m, -1).T / scale
    G3 = flat @ project_phase(3, u, geom).reshape(m, -1).T / scale
    G1 = 0.5 * (G1 + G1.T)
    G3 = 0.5 * (G3 + G3.T)
    # |(u_i, P_1 u_j)|^2 <= (1 - rho_i)(1 - rho_j), so for a clamped rho near
    # 1 the sampled row is rounding noise that Z2 = eps would amplify
    top = basis.clamped & (basis.rho_raw > 0.5)
    bottom = basis.clamped & (basis.rho_raw < 0.5)
    G1[top, :] = 0.0
    G1[:, top] = 0.0
    G3[bottom, :] = 0.0
    G3[:, bottom] = 0.0
    beta = basis.beta / np.linalg.norm(basis.beta)
    G1s, G3s = G1, G3
    n_top = n_bottom = 0
    if dilate:
        eps = basis.eps
        sq2, sq1 = np.sqrt(1.0 - rho), np.sqrt(rho)
        T1, C1, D1 = _dilate(G1 / np.outer(sq2, sq2), rank_tol)
        T3, C3, D3 = _dilate(G3 / np.outer(sq1, sq1), rank_tol)
        n_top, n_bottom = D1.size, D3.size
        size = m + n_top + n_bottom
        aux1 = slice(m, m + n_top)
        aux3 = slice(m + n_top, size)
        T1f = np.zeros((size, size))
        T1f[:m, :m] = T1
        T1f[:m, aux1] = C1
        T1f[aux1, :m] = C1.T
        T1f[aux1, aux1] = np.diag(D1)
        T1f[aux3, aux3] = np.eye(n_bottom)
        T3f = np.zeros((size, size))
        T3f[:m, :m] = T3
        T3f[:m, aux3] = C3
        T3f[aux3, :m] = C3.T
        T3f[aux3, aux3] = np.diag(D3)
        T3f[aux1, aux1] = np.eye(n_top)
        rho = np.concatenate([rho, np.full(n_top, 1.0 - eps), np.full(n_bottom, eps)])
        beta = np.concatenate([beta, np.zeros(n_top + n_bottom)])
        sq2, sq1 = np.sqrt(1.0 - rho), np.sqrt(rho)
        G1 = T1f * np.outer(sq2, sq2)
        G3 = T3f * np.outer(sq1, sq1)
        m = size

    R1, defect1 = _nearest_range(G1, 1.0 - rho, beta)
    R3, defect3 = _nearest_range(G3, rho, beta)
    if dilate:
        defect1 = _nearest_range(G1s, 1.0 - basis.rho, basis.beta / np.linalg.norm(basis.beta))[1]
        defect3 = _nearest_range(G3s, basis.rho, basis.beta / np.linalg.norm(basis.beta))[1]
    n1, n2 = R1.shape[1], R3.shape[1]
    perm, perm2 = _ordering(R1, R3, rank_tol)
    R1p, R3p = R1[perm], R3[perm]
    K1 = _K_from_range(R1p, n1)
    K2 = _K_from_range(R3p if perm2 is None else R3p[perm2], n2)
    rep = CanonicalRep(rho[perm], beta[perm], K1[:, n1:], K2[:, n2:], perm2)
    # slot k of the rep holds eigen slot perm[k]; auxiliary slots are >= half_m
    eig = perm < basis.half_m
    inv = np.argsort(perm)[: basis.half_m]
    Y1e = rep.Y1[np.ix_(inv, inv)]
    Y3e = rep.Y3[np.ix_(inv, inv)]
    rep.diagnostics.update(
        permutation=perm,
        eigen_slots=eig,
        mode_indices=np.where(eig, basis.indices[np.minimum(perm, basis.half_m - 1)], -2),
        reconstruction_Y1=float(np.abs(Y1e - G1s).max()),
        reconstruction_Y3=float(np.abs(Y3e - G3s).max()),
        projection_defect_Y1=defect1,
        projection_defect_Y3=defect3,
        auxiliary=(n_top, n_bottom),
        clamped=int(np.sum(basis.clamped)),
        remainder=basis.remainder,
    )
    rep.diagnostics["G1"] = G1[np.ix_(perm, perm)]
    rep.diagnostics["G3"] = G3[np.ix_(perm, perm)]
    return rep


def _rank(a: np.ndarray, tol: float) -> int:
    if a.size == 0:
        return 0
    sv = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(sv > tol * max(sv[0], 1.0)))


def validate_rep(rep: CanonicalRep, rank_tol: float = 1e-8) -> dict:
    """Maximum residual of every algebraic identity of a rep.

    Keys
    ----
    Y_symmetry, idempotent_Y1..Y4, complement (Y1 + Q^-1 Y2 Q^-1 = Z2),
    orthogonal_Y1Y2 / orthogonal_Y3Y4 (Y(Q + Q^-1)Y' = 0), rank_Y2 / rank_Y4
    (|rank - (m/2 - n)|), beta_Y1 / beta_Y3 (Y1 beta = Z2 beta, Y3 beta = Z1 beta),
    constraint_H1 / constraint_H2 (linear conditions on H), block_sum.
    """
    Q, Qi = rep.Q, rep.Qinv
    Z1, Z2 = rep.Z1, rep.Z2
    Y1, Y2, Y3, Y4 = rep.Y1, rep.Y2, rep.Y3, rep.Y4
    I = np.eye(rep.half_m)
    b = rep.beta
    n1, n2 = rep.n1, rep.n2
    v1 = ((1 - rep.rho) * b)
    v2 = rep.rho * b
    if rep.perm2 is not None:
        v2 = v2[rep.perm2]
    sz1, sz2 = np.sqrt(rep.rho), np.sqrt(1 - rep.rho)
    amax = lambda a: float(np.abs(a).max()) if np.size(a) else 0.0
    return {
        "Y_symmetry": max(amax(Y1 - Y1.T), amax(Y3 - Y3.T)),
        "idempotent_Y1": amax(Y1 - Y1 @ (I + Q @ Q) @ Y1),
        "idempotent_Y2": amax(Y2 - Y2 @ (I + Qi @ Qi) @ Y2),
        "idempotent_Y3": amax(Y3 - Y3 @ (I + Qi @ Qi) @ Y3),
        "idempotent_Y4": amax(Y4 - Y4 @ (I + Q @ Q) @ Y4),
        "complement": max(amax(Y1 + Qi @ Y2 @ Qi - Z2), amax(Y3 + Q @ Y4 @ Q - Z1)),
        "orthogonal_Y1Y2": amax(Y1 @ (Q + Qi) @ Y2),
        "orthogonal_Y3Y4": amax(Y3 @ (Q + Qi) @ Y4),
        # ranks are counted on the congruent projections, whose singular
        # values are 0 or 1 even when a clamped rho is tiny
        "rank_Y2": float(abs(_rank(Y2 / np.outer(sz1, sz1), rank_tol) - (rep.half_m - n1))),
        "rank_Y4": float(abs(_rank(Y4 / np.outer(sz2, sz2), rank_tol) - (rep.half_m - n2))),
        "beta_Y1": amax(Y1 @ b - Z2 @ b),
        "beta_Y3": amax(Y3 @ b - Z1 @ b),
        "constraint_H1": amax(rep.H1.T @ v1[:n1] - v1[n1:]),
        "constraint_H2": amax(rep.H2.T @ v2[:n2] - v2[n2:]),
        "block_sum": amax(Y1 + (Z2 - Y1) + Z1 - I),
    }


# ---------------------------------------------------------------------------
# block matrices of the phase projections


def block_matrices(rep: CanonicalRep) -> dict:
    """P_1..P_4 in the basis (u, u', R_perp u, R_perp u').

    u' are the antisymmetric partners Lambda_1 R_perp S u / sqrt(rho (1 - rho)).
    With this single basis the P_3 and P_4 blocks coupling u to R_perp u'
    (and u' to R_perp u) carry the opposite sign to the P_1, P_2 pattern.
    """
    Y1, Y2, Y3, Y4 = rep.Y1, rep.Y2, rep.Y3, rep.Y4
    Q, Qi = rep.Q, rep.Qinv
    O = np.zeros_like(Y1)

    def blk(rows):
        return np.block(rows)

    P1 = blk([[Y1, O, O, Y1 @ Q], [O, Y2, -Y2 @ Qi, O],
              [O, -Qi @ Y2, Qi @ Y2 @ Qi, O], [Q @ Y1, O, O, Q @ Y1 @ Q]])
    P2 = blk([[Qi @ Y2 @ Qi, O, O, Qi @ Y2], [O, Q @ Y1 @ Q, -Q @ Y1, O],
              [O, -Y1 @ Q, Y1, O], [Y2 @ Qi, O, O, Y2]])
    P3 = blk([[Y3, O, O, -Y3 @ Qi], [O, Y4, Y4 @ Q, O],
              [O, Q @ Y4, Q @ Y4 @ Q, O], [-Qi @ Y3, O, O, Qi @ Y3 @ Qi]])
    P4 = blk([[Q @ Y4 @ Q, O, O, -Q @ Y4], [O, Qi @ Y3 @ Qi, Qi @ Y3, O],
              [O, Y3 @ Qi, Y3, O], [-Y4 @ Q, O, O, Y4]])
    return {1: P1, 2: P2, 3: P3, 4: P4}


def sampled_blocks(basis: SymmetricEigenbasis, perm=None) -> dict:
    """P_1..P_4 sampled directly on the fields (u, u', R_perp u, R_perp u')."""
    geom = basis.geom
    m = basis.half_m
    perm = np.arange(m) if perm is None else np.asarray(perm)
    u = basis.symmetric[perm]
    up = basis.partners[perm]
    fields = np.concatenate([u, up, rotate_perp(u), rotate_perp(up)])
    flat = fields.reshape(len(fields), -1)
    scale = geom.n ** 2
    return {k: flat @ project_phase(k, fields, geom).reshape(len(fields), -1).T / scale
            for k in (1, 2, 3, 4)}
