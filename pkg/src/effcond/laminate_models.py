"""Rational representation formulas and laminate constructions.

Covers the one-variable diagonal form sum_a a_a / (q_a/s1 + (1-q_a)/s2), its
matrix-valued analogue with sum rules, the pole/residue form of
S*(s) = [I - sigma*(1 - 1/s, 1)]^{-1}, and hierarchical polycrystal laminates
expressed through S = sigma_ref (sigma_ref I - sigma_0)^{-1}.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintViolated, SingularStep, ValidationError

__all__ = [
    "R_PERP",
    "RationalDiagRep",
    "MatrixRationalRep",
    "SStarRep",
    "LaminateProgram",
    "eval_rational_diag",
    "eval_rational_matrix",
    "check_sum_rules",
    "diag_rep_from_canonical",
    "eval_sstar",
    "phase_interchange_residual",
    "sigma_from_sstar",
    "rotation",
    "rank1_laminate",
    "polycrystal_laminate",
    "program_from_json",
    "program_to_json",
]

R_PERP = np.array([[0.0, -1.0], [1.0, 0.0]])

#: tolerance on the simplex and ordering constraints of the rational forms
CONSTRAINT_TOL = 1e-12


def _check_q(q: np.ndarray) -> None:
    if q.ndim != 1 or q.size < 2:
        raise ConstraintViolated("q needs at least the two endpoints q_0 = 1 and q_last = 0")
    if abs(q[0] - 1) > CONSTRAINT_TOL or abs(q[-1]) > CONSTRAINT_TOL:
        raise ConstraintViolated("q must start at 1 and end at 0")
    if np.any(np.diff(q) >= 0):
        raise ConstraintViolated("q must be strictly decreasing")


@dataclass(frozen=True)
class RationalDiagRep:
    """sigma*_ii(s1, s2) = sum_a a_a / (q_a/s1 + (1 - q_a)/s2).

    Parameters
    ----------
    q : array, shape (m+2,)
        1 = q_0 > q_1 > ... > q_{m+1} = 0.
    a : array, shape (m+2,)
        Non-negative weights summing to 1.
    """

    q: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        a = np.asarray(self.a, dtype=float)
        _check_q(q)
        if a.shape != q.shape:
            raise ConstraintViolated(f"a has shape {a.shape}, q has {q.shape}")
        if np.any(a < -CONSTRAINT_TOL):
            raise ConstraintViolated("weights a must be non-negative")
        if abs(a.sum() - 1) > 1e-10:
            raise ConstraintViolated(f"weights sum to {a.sum()}, not 1")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "a", a)


def eval_rational_diag(rep: RationalDiagRep, s1: complex, s2: complex) -> complex:
    """Evaluate the diagonal rational form at the phase values (s1, s2)."""
    if s1 == 0 or s2 == 0:
        raise ConstraintViolated("phase values must be nonzero")
    den = rep.q / s1 + (1 - rep.q) / s2
    return complex(np.sum(rep.a / den))


@dataclass(frozen=True)
class MatrixRationalRep:
    """sigma*(s1, s2) = sum_a A_a / (q_a/s1 + (1 - q_a)/s2) with PSD A_a summing to I."""

    q: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        A = np.asarray(self.A, dtype=float)
        _check_q(q)
        d = A.shape[-1]
        if A.shape != (q.size, d, d) or d not in (2, 3):
            raise ConstraintViolated(f"A must have shape ({q.size}, d, d), d = 2 or 3")
        if not np.allclose(A, A.transpose(0, 2, 1), atol=CONSTRAINT_TOL):
            raise ConstraintViolated("each A_a must be symmetric")
        if np.linalg.eigvalsh(A).min() < -1e-12:
            raise ConstraintViolated("each A_a must be positive semidefinite")
        if np.abs(A.sum(axis=0) - np.eye(d)).max() > 1e-10:
            raise ConstraintViolated("the A_a must sum to the identity")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "A", A)

    @classmethod
    def from_diagonal(cls, reps) -> "MatrixRationalRep":
        """Diagonal matrix rep from one RationalDiagRep per diagonal entry.

        The pole sets are merged; a pole missing from an entry gets weight 0.
        """
        qs = np.unique(np.concatenate([r.q for r in reps]))[::-1]
        A = np.zeros((qs.size, len(reps), len(reps)))
        for d, r in enumerate(reps):
            for qa, aa in zip(r.q, r.a):
                A[np.argmin(np.abs(qs - qa)), d, d] += aa
        return cls(qs, A)


def eval_rational_matrix(rep: MatrixRationalRep, s1: complex, s2: complex) -> np.ndarray:
    if s1 == 0 or s2 == 0:
        raise ConstraintViolated("phase values must be nonzero")
    den = rep.q / s1 + (1 - rep.q) / s2
    return np.einsum("a,aij->ij", 1.0 / den, rep.A)


def check_sum_rules(rep: MatrixRationalRep, f: float) -> tuple[float, float]:
    """Residuals of the first- and second-order sum rules.

    Returns
    -------
    first : float
        ||sum_a q_a A_a - f I||.
    second : float
        |sum_a q_a (1 - q_a) Tr A_a - f (1 - f)|.
    """
    d = rep.A.shape[-1]
    first = np.linalg.norm(np.einsum("a,aij->ij", rep.q, rep.A) - f * np.eye(d))
    tr = np.trace(rep.A, axis1=1, axis2=2)
    second = abs(np.sum(rep.q * (1 - rep.q) * tr) - f * (1 - f))
    return float(first), float(second)


def diag_rep_from_canonical(rep, tol: float = 1e-13) -> RationalDiagRep:
    """sigma*_22(s1, s2) as a diagonal rational form, read off a canonical rep.

    With lambda1 = lambda2 = 1/s1 and lambda3 = 1/s2 the resolvent in
    Theorem 1 is diagonal, so through the Mendelson relation
    sigma*_22 = sum_i beta_i^2 / ((1 - rho_i)/s1 + rho_i/s2), i.e. q = 1 - rho
    and a = beta^2.  Coincident poles are merged and the endpoints added.
    """
    q = np.clip(1.0 - np.asarray(rep.rho), 0.0, 1.0)
    a = np.asarray(rep.beta) ** 2
    keep = a > tol
    q, a = q[keep], a[keep]
    q = np.concatenate([[1.0], q, [0.0]])
    a = np.concatenate([[0.0], a, [0.0]])
    order = np.argsort(-q, kind="stable")
    q, a = q[order], a[order]
    # merge poles closer than the ordering tolerance
    qs, as_ = [q[0]], [a[0]]
    for qi, ai in zip(q[1:], a[1:]):
        if qs[-1] - qi < 1e-12:
            as_[-1] += ai
        else:
            qs.append(qi)
            as_.append(ai)
    qs[0], qs[-1] = 1.0, 0.0
    a = np.array(as_)
    return RationalDiagRep(np.array(qs), a / a.sum())


# ---------------------------------------------------------------------------
# S*(s)


@dataclass(frozen=True)
class SStarRep:
    """Poles s_i in (0, 1), PSD residues S_i and symmetric A, validated on creation."""

    poles: np.ndarray
    residues: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.poles, dtype=float))
        S = np.asarray(self.residues, dtype=float).reshape(s.size, 2, 2)
        A = np.asarray(self.A, dtype=float)
        if np.any((s <= 0) | (s >= 1)):
            raise ConstraintViolated("poles must lie in (0, 1)")
        if not np.allclose(S, S.transpose(0, 2, 1), atol=CONSTRAINT_TOL):
            raise ConstraintViolated("residues must be symmetric")
        if s.size and np.linalg.eigvalsh(S).min() < -1e-12:
            raise ConstraintViolated("residues must be positive semidefinite")
        if A.shape != (2, 2) or not np.allclose(A, A.T, atol=CONSTRAINT_TOL):
            raise ConstraintViolated("A must be a symmetric 2 x 2 matrix")
        bound = sum(Si / si + R_PERP.T @ Si @ R_PERP / (1 - si) for si, Si in zip(s, S))
        if s.size and np.linalg.eigvalsh(A - bound).min() < -1e-12:
            raise ConstraintViolated("A must dominate sum S_i/s_i + R^T S_i R/(1 - s_i)")
        object.__setattr__(self, "poles", s)
        object.__setattr__(self, "residues", S)
        object.__setattr__(self, "A", A)


def eval_sstar(rep: SStarRep, s: complex) -> np.ndarray:
    """S*(s) = s (1 + Tr A) I - A + sum_i S_i/(s_i - s) + R^T S_i R/(1 - s_i - s)."""
    if np.imag(s) == 0 and 0 <= np.real(s) <= 1:
        raise ConstraintViolated("s must avoid the real segment [0, 1]")
    out = s * (1 + np.trace(rep.A)) * np.eye(2, dtype=complex) - rep.A
    for si, Si in zip(rep.poles, rep.residues):
        out = out + Si / (si - s) + R_PERP.T @ Si @ R_PERP / (1 - si - s)
    return out


def phase_interchange_residual(rep: SStarRep, samples: int = 50, seed: int = 0) -> float:
    """max ||S*(s) + R S*(1 - s) R^T - I|| over random s off the real axis.

    Also checks Im S*(s) >= 0 for Im s > 0 and raises ConstraintViolated if not.
    """
    rng = np.random.default_rng(seed)
    s = rng.uniform(-3, 4, samples) + 1j * rng.uniform(0.01, 3, samples)
    worst = 0.0
    for sk in s:
        a = eval_sstar(rep, sk)
        b = eval_sstar(rep, 1 - sk)
        worst = max(worst, np.abs(a + R_PERP @ b @ R_PERP.T - np.eye(2)).max())
        im = (a - a.conj().T) / 2j
        if np.linalg.eigvalsh(im).min() < -1e-12 * max(1.0, np.abs(a).max()):
            raise ConstraintViolated(f"Im S*(s) not positive semidefinite at s={sk}")
    return float(worst)


def sigma_from_sstar(rep: SStarRep, sigma1: complex) -> np.ndarray:
    """sigma*(sigma1, 1) = I - S*(s)^{-1} with s = 1/(1 - sigma1)."""
    s = 1.0 / (1.0 - sigma1)
    return np.eye(2) - np.linalg.inv(eval_sstar(rep, s))


# ---------------------------------------------------------------------------
# laminates


def rotation(theta_deg: float) -> np.ndarray:
    t = np.deg2rad(theta_deg)
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s], [s, c]])


def _inv(M: np.ndarray, step: int) -> np.ndarray:
    if np.linalg.cond(M) > 1e14:
        raise SingularStep(step)
    return np.linalg.inv(M)


def rank1_laminate(sig_a, sig_b, p: float, normal, sigma_ref: float | None = None) -> np.ndarray:
    """Laminate of sig_a (fraction p) and sig_b with layer normal ``normal``.

    Uses [S* - n n^T]^{-1} = p [S_a - n n^T]^{-1} + (1 - p) [S_b - n n^T]^{-1}
    with S = sigma_ref (sigma_ref I - sigma)^{-1}.
    """
    sig_a = np.asarray(sig_a, dtype=complex)
    sig_b = np.asarray(sig_b, dtype=complex)
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    if sigma_ref is None:
        sigma_ref = 2 * max(np.linalg.norm(sig_a, 2), np.linalg.norm(sig_b, 2))
    I = np.eye(2)
    nn = np.outer(n, n)
    Sa = sigma_ref * _inv(sigma_ref * I - sig_a, 0)
    Sb = sigma_ref * _inv(sigma_ref * I - sig_b, 0)
    W = p * _inv(Sa - nn, 1) + (1 - p) * _inv(Sb - nn, 1)
    S = _inv(W, 1) + nn
    return sigma_ref * I - sigma_ref * _inv(S, 1)


@dataclass(frozen=True)
class LaminateProgram:
    """Hierarchical polycrystal laminate.

    Attributes
    ----------
    sigma0 : (2, 2) crystal tensor
    n0 : unit 2-vector
    rotations : (n+1, 2, 2) orthogonal matrices R_0..R_n
    fractions : (n,) volume fractions p_1..p_n in (0, 1]
    sigma_ref : reference constant; defaults to twice the largest singular value of sigma0
    """

    sigma0: np.ndarray
    n0: np.ndarray
    rotations: np.ndarray
    fractions: np.ndarray
    sigma_ref: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        s0 = np.asarray(self.sigma0, dtype=complex)
        n0 = np.asarray(self.n0, dtype=float)
        R = np.asarray(self.rotations, dtype=float)
        p = np.atleast_1d(np.asarray(self.fractions, dtype=float))
        if s0.shape != (2, 2):
            raise ValidationError("sigma0 must be 2 x 2")
        if n0.shape != (2,) or abs(np.linalg.norm(n0) - 1) > 1e-12:
            raise ValidationError("n0 must be a unit 2-vector")
        if R.ndim != 3 or R.shape[1:] != (2, 2) or R.shape[0] != p.size + 1:
            raise ValidationError("need n+1 rotations for n fractions")
        if np.abs(np.einsum("kji,kjl->kil", R, R) - np.eye(2)).max() > 1e-12:
            raise ValidationError("rotations must be orthogonal")
        if np.any((p < 0) | (p > 1)):
            raise ValidationError("fractions must lie in [0, 1]")
        ref = self.sigma_ref
        if ref is None:
            ref = 2 * np.linalg.norm(s0, 2)
        object.__setattr__(self, "sigma0", s0)
        object.__setattr__(self, "n0", n0)
        object.__setattr__(self, "rotations", R)
        object.__setattr__(self, "fractions", p)
        object.__setattr__(self, "sigma_ref", float(ref))


def polycrystal_laminate(prog: LaminateProgram) -> np.ndarray:
    """sigma*_n of the hierarchical polycrystal laminate.

    Starts from S*_0 = R_0^T S R_0 and for j = 1..n applies
    [S*_j - n_j n_j^T]^{-1} = p_j [R_j^T S R_j - n_j n_j^T]^{-1}
    + (1 - p_j) [S*_{j-1} - n_j n_j^T]^{-1} with n_j = R_j^T n_0,
    then returns sigma_ref (I - S*_n^{-1}).

    Raises
    ------
    SingularStep
        If a bracket is singular; no pseudo-inverse is attempted.
    """
    I = np.eye(2)
    s0 = prog.sigma_ref
    S = s0 * _inv(s0 * I - prog.sigma0, 0)
    R = prog.rotations
    Sj = R[0].T @ S @ R[0]
    for j in range(1, len(R)):
        nj = R[j].T @ prog.n0
        nn = np.outer(nj, nj)
        p = prog.fractions[j - 1]
        Sr = R[j].T @ S @ R[j]
        if p == 1:
            Sj = Sr
            continue
        W = p * _inv(Sr - nn, j) + (1 - p) * _inv(Sj - nn, j)
        Sj = _inv(W, j) + nn
    return s0 * I - s0 * _inv(Sj, len(R))


def program_from_json(obj: dict) -> LaminateProgram:
    """Parse {sigma0, sigma_ref, n0, rotation0_deg, steps: [{rotation_deg, fraction}]}."""
    try:
        steps = obj["steps"]
        rots = [rotation(obj.get("rotation0_deg", 0.0))]
        rots += [rotation(s["rotation_deg"]) for s in steps]
        return LaminateProgram(
            sigma0=np.asarray(obj["sigma0"], dtype=float),
            n0=np.asarray(obj.get("n0", [1.0, 0.0]), dtype=float),
            rotations=np.array(rots),
            fractions=np.array([s["fraction"] for s in steps], dtype=float),
            sigma_ref=obj.get("sigma_ref"),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed laminate program: {exc}") from exc


def program_to_json(prog: LaminateProgram) -> dict:
    ang = [float(np.rad2deg(np.arctan2(R[1, 0], R[0, 0]))) for R in prog.rotations]
    return {
        "sigma0": prog.sigma0.real.tolist(),
        "sigma_ref": prog.sigma_ref,
        "n0": prog.n0.tolist(),
        "rotation0_deg": ang[0],
        "steps": [{"rotation_deg": a, "fraction": float(p)}
                  for a, p in zip(ang[1:], prog.fractions)],
    }
