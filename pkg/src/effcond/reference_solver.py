"""Spectral cell-problem oracle for the discretized composite.

The unknown of each cell problem is the Fourier coefficient c(k), k != 0, of
the fluctuating field e - <e> = IFFT(c * nhat).  The constraint that
sigma e has no component in E reads nhat(k).FFT(sigma e)(k) = 0 for all
k != 0; this scalar system is solved with GMRES, preconditioned by the
symbol nhat.sigma_ref.nhat of the constant reference medium.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import InadmissiblePair, NonConvergence, ValidationError
from .field_space import (
    AdmissiblePair,
    GridGeometry,
    as_tensor,
    gradient_directions,
    rotate_perp,
)

__all__ = [
    "SolveReport",
    "SeriesCoefficients",
    "solve_effective",
    "sigma11_inverse_direct",
    "series_coefficients",
    "duality_check",
    "mendelson_residual",
    "conductivity_field",
    "solve_coupled_effective",
]

R_PERP = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass
class SolveReport:
    sigma_star: np.ndarray
    iterations: int
    residual: float


@dataclass
class SeriesCoefficients:
    order: int
    coeffs: list = field(default_factory=list)


def conductivity_field(geom: GridGeometry, sigma1, sigma2) -> np.ndarray:
    """Pointwise tensor field sigma(x), shape (2, 2, n, n)."""
    s1 = as_tensor(sigma1)
    s2 = as_tensor(sigma2)
    chi = geom.chi
    return s1[:, :, None, None] * chi + s2[:, :, None, None] * (1.0 - chi)


def _apply(sig: np.ndarray, e: np.ndarray) -> np.ndarray:
    return np.einsum("pqij,...qij->...pij", sig, e)


class _CellProblem:
    """Linear map c -> nhat.FFT(sigma (IFFT(nhat c))) on the k != 0 modes."""

    def __init__(self, geom: GridGeometry, sig: np.ndarray, sig_ref: np.ndarray):
        self.n = geom.n
        self.sig = sig
        self.nh = gradient_directions(geom.n, geom.mirror)
        self.mask = np.ones((self.n, self.n), bool)
        self.mask[0, 0] = False
        sym = np.einsum("pij,pq,qij->ij", self.nh, sig_ref, self.nh)
        self.inv_sym = 1.0 / sym[self.mask]
        self.size = self.n * self.n - 1

    def field(self, c: np.ndarray) -> np.ndarray:
        C = np.zeros((self.n, self.n), complex)
        C[self.mask] = c
        return np.fft.ifft2(self.nh * C, axes=(-2, -1))

    def project(self, j: np.ndarray) -> np.ndarray:
        J = np.fft.fft2(j, axes=(-2, -1))
        return (self.nh[0] * J[0] + self.nh[1] * J[1])[self.mask]

    def matvec(self, c):
        return self.project(_apply(self.sig, self.field(np.ravel(c))))

    def operators(self):
        A = LinearOperator((self.size, self.size), matvec=self.matvec, dtype=complex)
        M = LinearOperator((self.size, self.size), matvec=lambda r: self.inv_sym * np.ravel(r),
                           dtype=complex)
        return A, M


def _krylov(prob: _CellProblem, rhs: np.ndarray, tol: float, maxiter: int):
    A, M = prob.operators()
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return np.zeros_like(rhs), 0, 0.0
    count = [0]

    def cb(_):
        count[0] += 1

    restart = max(1, min(60, prob.size, maxiter))
    cycles = max(1, -(-maxiter // restart))
    x, _ = gmres(A, rhs, rtol=tol, atol=0.0, restart=restart,
                 maxiter=cycles, M=M, callback=cb,
                 callback_type="pr_norm")
    res = np.linalg.norm(A.matvec(x) - rhs) / bnorm
    if res > tol:
        # gmres tests the preconditioned residual; polish once on the true one
        dx, _ = gmres(A, rhs - A.matvec(x), rtol=tol * bnorm / max(res * bnorm, 1e-300),
                      atol=0.0, restart=restart, maxiter=cycles,
                      M=M, callback=cb, callback_type="pr_norm")
        x = x + dx
        res = np.linalg.norm(A.matvec(x) - rhs) / bnorm
    if res > tol or not np.isfinite(res):
        raise NonConvergence(res, count[0])
    return x, count[0], res


def solve_effective(geom: GridGeometry, pair: AdmissiblePair, tol: float = 1e-10,
                    maxiter: int | None = None) -> SolveReport:
    """Effective tensor of the discretized composite.

    For <e> = e1 and <e> = e2 the fluctuation in E is found so that sigma e
    is orthogonal to E; the columns of sigma* are the averages <sigma e>.

    Parameters
    ----------
    geom : GridGeometry
    pair : AdmissiblePair
    tol : float
        Relative residual target of each Krylov solve.
    maxiter : int, optional
        Iteration cap, default 10 n^2.

    Returns
    -------
    SolveReport
    """
    if not isinstance(pair, AdmissiblePair):
        raise InadmissiblePair("solve_effective needs an AdmissiblePair")
    n = geom.n
    maxiter = 10 * n * n if maxiter is None else maxiter
    sig = conductivity_field(geom, pair.sigma1, pair.sigma2)
    prob = _CellProblem(geom, sig, 0.5 * (pair.sigma1 + pair.sigma2))
    sigma_star = np.zeros((2, 2), complex)
    iters = 0
    worst = 0.0
    for col in range(2):
        e0 = np.zeros((2, n, n), complex)
        e0[col] = 1.0
        rhs = -prob.project(_apply(sig, e0))
        c, it, res = _krylov(prob, rhs, tol, maxiter)
        e = e0 + prob.field(c)
        sigma_star[:, col] = _apply(sig, e).mean(axis=(-2, -1))
        iters += it
        worst = max(worst, res)
    return SolveReport(sigma_star, iters, worst)


def solve_coupled_effective(geom: GridGeometry, L1, L2, tol: float = 1e-10,
                            maxiter: int | None = None) -> SolveReport:
    """Effective 4 x 4 tensor of a two-potential coupled problem.

    ``L1`` and ``L2`` are 4 x 4 matrices whose 2 x 2 block (i, j) is
    sigma^(ij), acting from the gradient of potential j into flux i.  Both
    potentials share the spectral discretization of :func:`solve_effective`;
    the preconditioner inverts the 2 x 2 symbol of the mean tensor.
    """
    n = geom.n
    maxiter = 10 * n * n if maxiter is None else maxiter
    M1 = np.asarray(L1, dtype=complex).reshape(2, 2, 2, 2)  # [i, p, j, q]
    M2 = np.asarray(L2, dtype=complex).reshape(2, 2, 2, 2)
    chi = geom.chi
    Lx = M1[..., None, None] * chi + M2[..., None, None] * (1.0 - chi)
    nh = gradient_directions(n, geom.mirror)
    mask = np.ones((n, n), bool)
    mask[0, 0] = False
    ref = 0.5 * (M1 + M2)
    sym = np.einsum("pk,ipjq,qk->kij", nh[:, mask], ref, nh[:, mask])
    inv_sym = np.linalg.inv(sym)
    size = mask.sum()

    def field(c):
        C = np.zeros((2, n, n), complex)
        C[:, mask] = c.reshape(2, size)
        return np.fft.ifft2(nh[None] * C[:, None], axes=(-2, -1))  # [j, q, x, y]

    def project(j):
        J = np.fft.fft2(j, axes=(-2, -1))
        return np.einsum("pxy,ipxy->ixy", nh, J)[:, mask].ravel()

    def flux(e):
        return np.einsum("ipjqxy,jqxy->ipxy", Lx, e)

    A = LinearOperator((2 * size, 2 * size), matvec=lambda c: project(flux(field(np.ravel(c)))),
                       dtype=complex)
    M = LinearOperator((2 * size, 2 * size), dtype=complex,
                       matvec=lambda r: np.einsum("kij,jk->ik", inv_sym,
                                                  np.ravel(r).reshape(2, size)).ravel())
    Lstar = np.zeros((4, 4), complex)
    iters = 0
    worst = 0.0
    restart = min(60, 2 * size)
    for col in range(4):
        e0 = np.zeros((2, 2, n, n), complex)
        e0[col // 2, col % 2] = 1.0
        rhs = -project(flux(e0))
        bnorm = np.linalg.norm(rhs)
        if bnorm == 0:
            c = np.zeros(2 * size, complex)
            res = 0.0
        else:
            count = [0]
            c, _ = gmres(A, rhs, rtol=tol, atol=0.0, restart=restart,
                         maxiter=max(1, maxiter // restart + 1), M=M,
                         callback=lambda _: count.__setitem__(0, count[0] + 1),
                         callback_type="pr_norm")
            res = np.linalg.norm(A.matvec(c) - rhs) / bnorm
            iters += count[0]
            if res > 10 * tol or not np.isfinite(res):
                raise NonConvergence(res, count[0])
        e = e0 + field(c)
        Lstar[:, col] = flux(e).mean(axis=(-2, -1)).ravel()
        worst = max(worst, res)
    return SolveReport(Lstar, iters, worst)


def sigma11_inverse_direct(geom: GridGeometry, pair: AdmissiblePair, tol: float = 1e-10,
                           maxiter: int | None = None) -> complex:
    """U1.(Lambda_1 sigma Lambda_1)^{-1} U1 computed on U1+E.

    Only valid when sigma* is diagonal, i.e. for diagonal phase tensors on a
    mirror-symmetric geometry.
    """
    for s in (pair.sigma1, pair.sigma2):
        if abs(s[0, 1]) > 0 or abs(s[1, 0]) > 0:
            raise ValidationError("sigma11_inverse_direct needs diagonal phase tensors")
    n = geom.n
    maxiter = 10 * n * n if maxiter is None else maxiter
    sig = conductivity_field(geom, pair.sigma1, pair.sigma2)
    # U1 is the k = 0 mode of Lambda_1, so include that coefficient as unknown 0
    nh = gradient_directions(n, geom.mirror)
    ref = 0.5 * (pair.sigma1 + pair.sigma2)
    sym = np.einsum("pij,pq,qij->ij", nh, ref, nh).ravel()
    size = n * n

    def field(c):
        return np.fft.ifft2(nh * c.reshape(n, n), axes=(-2, -1)) * n

    def matvec(c):
        J = np.fft.fft2(_apply(sig, field(np.ravel(c))), axes=(-2, -1)) / n
        return (nh[0] * J[0] + nh[1] * J[1]).ravel()

    A = LinearOperator((size, size), matvec=matvec, dtype=complex)
    M = LinearOperator((size, size), matvec=lambda r: np.ravel(r) / sym, dtype=complex)
    rhs = np.zeros(size, complex)
    rhs[0] = 1.0  # unit-norm coefficient of U1 under the scaled transform
    restart = min(60, size)
    x, _ = gmres(A, rhs, rtol=tol, atol=0.0, restart=restart,
                 maxiter=max(1, maxiter // restart + 1), M=M)
    res = np.linalg.norm(matvec(x) - rhs)
    if res > tol:
        raise NonConvergence(res)
    return complex(x[0])


def series_coefficients(geom: GridGeometry, dir1, dir2, M: int) -> SeriesCoefficients:
    """Taylor coefficients of sigma*(I + t dir1, I + t dir2) in t.

    With Delta = dir1 chi + dir2 (1 - chi) and Gamma_E the projection onto
    zero-mean gradients, e_p = (-Gamma_E Delta)^p <e>; coefficient p >= 1 is
    <Delta e_{p-1}>.  Coefficient p therefore costs p operator applications.
    """
    if M < 1:
        raise ValidationError("series order M must be at least 1")
    n = geom.n
    delta = conductivity_field(geom, dir1, dir2)
    nh = gradient_directions(n, geom.mirror)
    e = np.zeros((2, 2, n, n), complex)  # batch over the two average fields
    e[0, 0] = 1.0
    e[1, 1] = 1.0
    coeffs = [np.eye(2, dtype=complex)]
    for _ in range(M):
        j = _apply(delta, e)
        coeffs.append(j.mean(axis=(-2, -1)).T)
        J = np.fft.fft2(j, axes=(-2, -1))
        c = nh[0] * J[:, 0] + nh[1] * J[:, 1]
        c[:, 0, 0] = 0.0
        e = -np.fft.ifft2(nh[None] * c[:, None], axes=(-2, -1))
    return SeriesCoefficients(M, coeffs)


def duality_check(geom: GridGeometry, s1: complex, s2: complex, tol: float = 1e-10) -> float:
    """Relative residual of the phase-interchange relation for isotropic phases.

    Returns ||sigma*(s2, s1) - s1 s2 R_perp sigma*(s1, s2)^{-1} R_perp^T|| / ||sigma*(s1, s2)||.
    """
    I = np.eye(2)
    a = solve_effective(geom, AdmissiblePair(s1 * I, s2 * I), tol).sigma_star
    b = solve_effective(geom, AdmissiblePair(s2 * I, s1 * I), tol).sigma_star
    pred = s1 * s2 * R_PERP @ np.linalg.inv(a) @ R_PERP.T
    return float(np.linalg.norm(b - pred) / np.linalg.norm(a))


def mendelson_residual(geom: GridGeometry, lam, tol: float = 1e-10) -> float:
    """|sigma*_22(l1, l2, l3) sigma*_11(1/l2, 1/l1, 1/l3) - 1| for sigma1 = diag(l1, l2), sigma2 = l3 I."""
    l1, l2, l3 = lam
    a = solve_effective(geom, AdmissiblePair(np.diag([l1, l2]), l3 * np.eye(2)), tol).sigma_star
    b = solve_effective(geom, AdmissiblePair(np.diag([1 / l2, 1 / l1]), np.eye(2) / l3),
                        tol).sigma_star
    return float(abs(a[1, 1] * b[0, 0] - 1.0))
