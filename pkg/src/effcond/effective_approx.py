"""Closed-form approximations of the effective tensor from a canonical rep.

Three evaluators share one rep:

* :func:`sigma11_theorem1` for sigma_1 = diag(l1, l2), sigma_2 = l3 I;
* :func:`sigma_star_theorem2` for arbitrary (possibly non-symmetric, complex)
  phase tensors, through the matrix A on U1 + E + U2 (size 2 half_m + 1);
* :func:`l_star_coupled` for two-potential coupled problems, through the
  2 x 2 block version of A.

All three are algebraic in the phase tensors, so a global phase rotation
exp(i theta) of the inputs rotates the output identically.  The rotation is
only used to decide whether a complex input pair is admissible.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize_scalar

from .canonical_rep import CanonicalRep
from .errors import InadmissiblePair, RepInvalid, SingularA, SingularResolvent
from .field_space import as_tensor

__all__ = [
    "DiagonalTriple",
    "CoupledTensor",
    "sigma11_theorem1",
    "sigma_diag_theorem1",
    "sigma_star_theorem2",
    "l_star_coupled",
    "xi_blocks",
    "admissible_rotation",
    "hermitian_part_min",
]

#: A is rejected as singular below this reciprocal condition number
RCOND_MIN = 1e-14


@dataclass(frozen=True)
class DiagonalTriple:
    """Phase-1 eigenvalues (lambda1, lambda2) and the isotropic phase-2 value lambda3."""

    lambda1: complex
    lambda2: complex
    lambda3: complex

    def __iter__(self):
        return iter((self.lambda1, self.lambda2, self.lambda3))

    def inverted(self) -> "DiagonalTriple":
        """The triple (1/lambda2, 1/lambda1, 1/lambda3) of the dual problem."""
        return DiagonalTriple(1 / self.lambda2, 1 / self.lambda1, 1 / self.lambda3)

    def check(self, c1: float, c2: float) -> None:
        """Raise InadmissiblePair unless c1 <= Re(lambda_i) and |lambda_i| <= c2."""
        for lam in self:
            if lam.real < c1 or abs(lam) > c2:
                raise InadmissiblePair(f"lambda={lam} outside c1={c1}, c2={c2}")


def _triple(t) -> DiagonalTriple:
    if isinstance(t, DiagonalTriple):
        return t
    l1, l2, l3 = t
    return DiagonalTriple(complex(l1), complex(l2), complex(l3))


@dataclass(frozen=True)
class CoupledTensor:
    """Two-potential constitutive tensor as a 4 x 4 matrix.

    Row (column) 2 i + p holds potential index i and spatial index p, so
    the 2 x 2 block (i, j) is sigma^(ij) with sigma^(ij)_pq = L_{piqj}.
    """

    matrix: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=complex)
        if M.shape != (4, 4):
            raise InadmissiblePair(f"coupled tensor must be 4 x 4, got {M.shape}")
        object.__setattr__(self, "matrix", M)

    @classmethod
    def from_blocks(cls, blocks) -> "CoupledTensor":
        """From blocks[i][j] = sigma^(ij), each 2 x 2."""
        b = np.asarray(blocks, dtype=complex)
        return cls(np.block([[b[0, 0], b[0, 1]], [b[1, 0], b[1, 1]]]))

    @classmethod
    def from_L(cls, L) -> "CoupledTensor":
        """From the four-index array L[p, i, q, j]."""
        L = np.asarray(L, dtype=complex)
        return cls(L.transpose(1, 0, 3, 2).reshape(4, 4))

    def block(self, i: int, j: int) -> np.ndarray:
        return self.matrix[2 * i:2 * i + 2, 2 * j:2 * j + 2]

    def to_L(self) -> np.ndarray:
        return self.matrix.reshape(2, 2, 2, 2).transpose(1, 0, 3, 2)


def hermitian_part_min(t: np.ndarray) -> float:
    """Smallest eigenvalue of (t + t^H) / 2."""
    t = np.asarray(t)
    return float(np.linalg.eigvalsh(0.5 * (t + t.conj().T))[0])


def admissible_rotation(*tensors, grid: int = 720) -> float:
    """Angle theta in [0, 2 pi) making every exp(i theta) t coercive.

    Returns 0 when the inputs already are.  The worst Hermitian-part
    eigenvalue is maximized over a uniform grid and then refined locally.

    Raises
    ------
    InadmissiblePair
        If no rotation gives all tensors a positive definite Hermitian part.
    """
    mats = [np.asarray(t, dtype=complex) for t in tensors]

    def worst(theta):
        ph = np.exp(1j * theta)
        return min(hermitian_part_min(ph * M) for M in mats)

    if worst(0.0) > 0:
        return 0.0
    thetas = np.linspace(0.0, 2 * np.pi, grid, endpoint=False)
    vals = np.array([worst(t) for t in thetas])
    k = int(np.argmax(vals))
    step = thetas[1] - thetas[0]
    res = minimize_scalar(lambda t: -worst(t), bounds=(thetas[k] - step, thetas[k] + step),
                          method="bounded", options={"xatol": 1e-12})
    theta, best = (res.x, -res.fun) if -res.fun > vals[k] else (thetas[k], vals[k])
    if best <= 0:
        raise InadmissiblePair("no global phase rotation makes both phases coercive")
    return float(theta % (2 * np.pi))


# ---------------------------------------------------------------------------
# Theorem 1


def _resolvent_quadratic(M: np.ndarray, beta: np.ndarray, err) -> complex:
    try:
        lu = _lu(M)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise err(str(exc)) from exc
    if _rcond(lu, M) < RCOND_MIN:
        raise err("matrix is numerically singular")
    return complex(beta @ sla.lu_solve(lu, beta.astype(M.dtype)))


def _lu(M: np.ndarray):
    # singularity is judged by the condition estimate, not by the warning
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        return sla.lu_factor(M, check_finite=True)


def _rcond(lu, M: np.ndarray) -> float:
    gecon, = sla.get_lapack_funcs(("gecon",), (lu[0],))
    anorm = np.abs(M).sum(axis=0).max()
    if anorm == 0:
        return 0.0
    rc, info = gecon(lu[0], anorm, norm="1")
    return float(rc) if info == 0 else 0.0


def sigma11_theorem1(rep: CanonicalRep, t) -> complex:
    """sigma*_11 for sigma_1 = diag(lambda1, lambda2), sigma_2 = lambda3 I.

    Evaluates 1 / (beta . (Z2 l2 + Z1 l3 + Y1 (l1 - l2))^{-1} beta).

    Parameters
    ----------
    rep : CanonicalRep
    t : DiagonalTriple or 3-sequence

    Raises
    ------
    SingularResolvent
        If the resolvent matrix or the quadratic form is singular.
    """
    l1, l2, l3 = _triple(t)
    rho = rep.rho
    M = np.diag((1 - rho) * l2 + rho * l3).astype(complex) + rep.Y1 * (l1 - l2)
    q = _resolvent_quadratic(M, rep.beta, SingularResolvent)
    if q == 0:
        raise SingularResolvent("beta . M^{-1} beta vanishes")
    return 1.0 / q


def sigma_diag_theorem1(rep_primal: CanonicalRep, rep_dual: CanonicalRep | None, t) -> np.ndarray:
    """Diagonal sigma* from Theorem 1 and the Mendelson relation.

    sigma*_22(l1, l2, l3) = 1 / sigma*_11(1/l2, 1/l1, 1/l3), both from
    ``rep_primal``.  ``rep_dual`` is accepted for cross-validation only and
    does not enter the result.
    """
    t = _triple(t)
    s11 = sigma11_theorem1(rep_primal, t)
    s22 = 1.0 / sigma11_theorem1(rep_primal, t.inverted())
    return np.diag([s11, s22])


# ---------------------------------------------------------------------------
# Theorem 2


def xi_blocks(rep: CanonicalRep) -> dict:
    """The eight matrices Xi P_i Xi and Xi P_i R_perp Xi on U1 + E + U2.

    Keys are 'P1'..'P4' and 'P1R'..'P4R'.  The P3, P4 blocks coupling E to
    U1 and U2 use the signs that match one common basis (u, u', R_perp u,
    R_perp u'); see :func:`effcond.canonical_rep.block_matrices`.
    """
    cache = rep.__dict__.get("_xi_blocks")
    if cache is not None:
        return cache
    m = rep.half_m
    Y1, Y2, Y3, Y4 = rep.Y1, rep.Y2, rep.Y3, rep.Y4
    Q, Qi = rep.Q, rep.Qinv
    b = rep.beta[:, None]
    O = np.zeros((m, m))
    o = np.zeros((m, 1))

    def blk(a11, a12, a13, a21, a22, a23, a31, a32, a33):
        return np.block([[a11, a12, a13], [a21, a22, a23],
                         [a31, a32, np.atleast_2d(a33)]])

    out = {
        "P1": blk(Y1, O, o, O, Y2, -Y2 @ Qi @ b,
                  o.T, -b.T @ Qi @ Y2, b.T @ Qi @ Y2 @ Qi @ b),
        "P2": blk(Qi @ Y2 @ Qi, O, o, O, Q @ Y1 @ Q, -Q @ Y1 @ b,
                  o.T, -b.T @ Y1 @ Q, b.T @ Y1 @ b),
        "P1R": blk(O, Y1 @ Q, -Y1 @ b, -Y2 @ Qi, O, o,
                   b.T @ Qi @ Y2 @ Qi, o.T, 0.0),
        "P2R": blk(O, Qi @ Y2, -Qi @ Y2 @ Qi @ b, -Q @ Y1, O, o,
                   b.T @ Y1, o.T, 0.0),
        "P3": blk(Y3, O, o, O, Y4, Y4 @ Q @ b,
                  o.T, b.T @ Q @ Y4, b.T @ Q @ Y4 @ Q @ b),
        "P4": blk(Q @ Y4 @ Q, O, o, O, Qi @ Y3 @ Qi, Qi @ Y3 @ b,
                  o.T, b.T @ Y3 @ Qi, b.T @ Y3 @ b),
        "P3R": blk(O, -Y3 @ Qi, -Y3 @ b, Y4 @ Q, O, o,
                   b.T @ Q @ Y4 @ Q, o.T, 0.0),
        "P4R": blk(O, -Q @ Y4, -Q @ Y4 @ Q @ b, Qi @ Y3, O, o,
                   b.T @ Y3, o.T, 0.0),
    }
    rep.__dict__["_xi_blocks"] = out
    return out


def _weighted(blocks: dict, s1: np.ndarray, s2: np.ndarray) -> np.ndarray:
    """Xi sigma Xi for phase tensors s1, s2 (R_perp = [[0, -1], [1, 0]])."""
    return (s1[0, 0] * blocks["P1"] + s1[1, 1] * blocks["P2"]
            - s1[0, 1] * blocks["P1R"] + s1[1, 0] * blocks["P2R"]
            + s2[0, 0] * blocks["P3"] + s2[1, 1] * blocks["P4"]
            - s2[0, 1] * blocks["P3R"] + s2[1, 0] * blocks["P4R"])


def _gamma0(rep: CanonicalRep, k: int) -> np.ndarray:
    """Gamma_0 from U1 + U2 into k copies of U1 + E + U2, shape (k (2 h + 1), 2 k) with h = half_m."""
    h = rep.half_m
    size = 2 * h + 1
    G = np.zeros((k * size, 2 * k))
    for i in range(k):
        G[i * size:i * size + h, 2 * i] = rep.beta
        G[i * size + 2 * h, 2 * i + 1] = 1.0
    return G


def _effective(rep: CanonicalRep, s1_blocks, s2_blocks) -> np.ndarray:
    """Effective tensor for k x k blocks of phase tensors (k = 1 or 2)."""
    if rep.half_m < 1:
        raise RepInvalid("empty representation")
    k = len(s1_blocks)
    blocks = xi_blocks(rep)
    A = np.block([[_weighted(blocks, s1_blocks[i][j], s2_blocks[i][j]) for j in range(k)]
                  for i in range(k)]).astype(complex)
    if not np.all(np.isfinite(A)):
        raise SingularA("A has non-finite entries")
    G = _gamma0(rep, k)
    try:
        lu = _lu(A)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SingularA(str(exc)) from exc
    rc = _rcond(lu, A)
    if rc < RCOND_MIN:
        raise SingularA(f"reciprocal condition {rc:.2e} of A below {RCOND_MIN:g}")
    inv_eff = G.T @ sla.lu_solve(lu, G.astype(complex))
    try:
        return np.linalg.inv(inv_eff)
    except np.linalg.LinAlgError as exc:
        raise SingularA("effective resistivity block is singular") from exc


def sigma_star_theorem2(rep: CanonicalRep, sigma1, sigma2, check: bool = True) -> np.ndarray:
    """Effective tensor for arbitrary 2 x 2 phase tensors.

    A = Xi sigma Xi is assembled from the eight block matrices, the 2 x 2
    inverse effective tensor is Gamma_0^T A^{-1} Gamma_0, and it is inverted.

    Parameters
    ----------
    rep : CanonicalRep
    sigma1, sigma2 : array_like, shape (2, 2)
        May be complex and non-symmetric.
    check : bool
        Require that some global phase rotation makes both phases coercive.

    Raises
    ------
    InadmissiblePair, SingularA
    """
    s1, s2 = as_tensor(sigma1), as_tensor(sigma2)
    if check:
        admissible_rotation(s1, s2)
    return _effective(rep, [[s1]], [[s2]])


def l_star_coupled(rep: CanonicalRep, L1: CoupledTensor, L2: CoupledTensor,
                   check: bool = True) -> CoupledTensor:
    """Effective tensor of a two-potential coupled problem.

    Each block sigma^(ij) of L1 and L2 weights the same eight Xi matrices;
    the 2 x 2 block matrix A is inverted once and (L*)^{-1} is read off
    with Gamma_0 on both potentials.

    Raises
    ------
    InadmissiblePair, SingularA
    """
    L1 = L1 if isinstance(L1, CoupledTensor) else CoupledTensor(L1)
    L2 = L2 if isinstance(L2, CoupledTensor) else CoupledTensor(L2)
    if check:
        admissible_rotation(L1.matrix, L2.matrix)
    b1 = [[L1.block(i, j) for j in range(2)] for i in range(2)]
    b2 = [[L2.block(i, j) for j in range(2)] for i in range(2)]
    return CoupledTensor(_effective(rep, b1, b2))
