"""Recovery of the spectral weights (rho_i, beta_i^2) from sigma*_11(1, 1, lambda).

With lambda1 = lambda2 = 1 the resolvent of Theorem 1 is diagonal and

    1/sigma*_11 = sum_i beta_i^2 / (lambda rho_i + 1 - rho_i).

In w = 1/(lambda - 1) this reads w sum_i beta_i^2 / (w + rho_i), a Stieltjes
function with poles on [-1, 0].  The fit is seeded by a linearized rational
least-squares problem and refined by variable projection: for fixed poles
the residues solve a bound-constrained linear least-squares problem, and the
poles are optimized over (0, 1).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares, lsq_linear

from .errors import IllConditionedFit, ModeCountMismatch, ValidationError

__all__ = [
    "SpectralSample",
    "RecoveryResult",
    "forward_model",
    "sample_grid",
    "recover_spectrum",
]

#: fits whose Jacobian condition number exceeds this are rejected
COND_MAX = 1e12


@dataclass(frozen=True)
class SpectralSample:
    lam: complex
    value: complex

    def __post_init__(self):
        if not (np.isfinite(self.lam) and np.isfinite(self.value)):
            raise ValidationError("spectral samples must be finite")


@dataclass
class RecoveryResult:
    """Recovered weights sorted by rho descending.

    Attributes
    ----------
    rho, beta_sq : ndarray
    misfit : float
        Max relative misfit of 1/sigma*_11 over the samples.
    sum_defect : float
        |sum beta_sq - 1|.
    cond : float
        Condition number of the final Jacobian.
    """

    rho: np.ndarray
    beta_sq: np.ndarray
    misfit: float
    sum_defect: float
    cond: float

    def to_json(self) -> dict:
        return {"rho": self.rho.tolist(), "beta_sq": self.beta_sq.tolist(),
                "misfit": self.misfit, "sum_defect": self.sum_defect, "cond": self.cond}


def forward_model(rho, beta_sq, lam) -> np.ndarray:
    """sigma*_11(1, 1, lambda) = 1 / sum_i beta_i^2 / (lambda rho_i + 1 - rho_i)."""
    rho = np.asarray(rho, dtype=float)
    b2 = np.asarray(beta_sq, dtype=float)
    lam = np.asarray(lam, dtype=complex)
    inv = (b2 / (lam[..., None] * rho + 1 - rho)).sum(axis=-1)
    return 1.0 / inv


def sample_grid(k: int, c1: float = 0.1, c2: float = 10.0, count: int | None = None) -> np.ndarray:
    """Default sample points: log-spaced real lambda on [c1, c2] plus a complex probe line.

    Half of the points (rounded up) are real; the rest lie on the line
    lambda = sqrt(c1 c2) exp(i theta), theta in (0, pi), which passes on both
    sides of the pole segment and keeps the fit well conditioned.
    """
    count = 2 * k + 3 if count is None else count
    nreal = (count + 1) // 2
    real = np.geomspace(c1, c2, nreal)
    theta = np.linspace(0, np.pi, count - nreal + 2)[1:-1]
    probe = np.sqrt(c1 * c2) * np.exp(1j * theta)
    return np.concatenate([real, probe]).astype(complex)


def _seed_poles(w: np.ndarray, g: np.ndarray, k: int) -> np.ndarray:
    """Poles of g(w) ~ N(w)/D(w), deg N = deg D = k, by linearized least squares."""
    # g D - N = 0 with D monic in the Chebyshev-like variable x = 2 w + 1
    x = 2 * w + 1
    V = np.vander(x, k + 1, increasing=True)
    A = np.hstack([g[:, None] * V[:, :k], -V])
    b = -g * V[:, k]
    A = np.vstack([A.real, A.imag])
    b = np.concatenate([b.real, b.imag])
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    d = np.concatenate([coef[:k], [1.0]])
    roots = np.roots(d[::-1])
    rho = -(roots.real - 1) / 2
    return np.clip(np.sort(rho)[::-1], 1e-6, 1 - 1e-6)


def _design(w: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return w[:, None] / (w[:, None] + rho)


def _residues(w, g, rho):
    B = _design(w, rho)
    A = np.vstack([B.real, B.imag])
    b = np.concatenate([g.real, g.imag])
    sol = lsq_linear(A, b, bounds=(0, np.inf), method="bvls")
    return sol.x, A @ sol.x - b


def recover_spectrum(samples, k: int, noise_floor: float = 1e-10) -> RecoveryResult:
    """Fit k visible modes to samples of sigma*_11(1, 1, lambda).

    Parameters
    ----------
    samples : sequence of SpectralSample
        At least 2 k + 1 distinct sample points, none at a pole.
    k : int
        Expected number of modes with nonzero beta.
    noise_floor : float
        Residues below this are treated as absent.

    Returns
    -------
    RecoveryResult

    Raises
    ------
    IllConditionedFit
        If the final Jacobian condition number exceeds ``COND_MAX``.
    ModeCountMismatch
        If fewer than k residues exceed the noise floor.
    """
    if k < 1:
        raise ValidationError("k must be at least 1")
    lam = np.array([s.lam for s in samples], dtype=complex)
    val = np.array([s.value for s in samples], dtype=complex)
    if lam.size < 2 * k + 1:
        raise ValidationError(f"need at least {2 * k + 1} samples for k={k}, got {lam.size}")
    if np.unique(lam).size != lam.size:
        raise ValidationError("sample points must be distinct")
    if np.any(np.abs(lam - 1) < 1e-14):
        # w is singular at lambda = 1; the value there is 1 for every spectrum
        keep = np.abs(lam - 1) >= 1e-14
        lam, val = lam[keep], val[keep]
    w = 1.0 / (lam - 1.0)
    g = 1.0 / val
    scale = np.abs(g)

    rho0 = _seed_poles(w, g, k)

    def resid(r):
        _, res = _residues(w, g, r)
        return res / np.concatenate([scale, scale])

    fit = least_squares(resid, rho0, bounds=(0.0, 1.0), x_scale=0.1,
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    rho = fit.x
    b2, _ = _residues(w, g, rho)
    sv = np.linalg.svd(fit.jac, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    if np.sum(b2 > noise_floor) < k:
        raise ModeCountMismatch(f"only {np.sum(b2 > noise_floor)} of {k} residues above noise floor")
    if cond > COND_MAX:
        raise IllConditionedFit(f"Jacobian condition number {cond:.3e} exceeds {COND_MAX:.0e}")
    order = np.argsort(-rho)
    rho, b2 = rho[order], b2[order]
    pred = forward_model(rho, b2, lam)
    misfit = float(np.max(np.abs(1 / pred - g) / scale))
    return RecoveryResult(rho, b2, misfit, float(abs(b2.sum() - 1)), cond)
