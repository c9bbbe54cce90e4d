"""Fast end-to-end checks run by ``effcond selftest``."""
from __future__ import annotations

import time

import numpy as np

__all__ = ["run_selftest"]


def _operators():
    from .field_space import checkerboard, project_lambda, random_field, reflect, rotate_perp
    g = checkerboard(8)
    h = random_field(8, np.random.default_rng(0))
    L1 = project_lambda(1, h, g.mirror)
    a = np.abs(project_lambda(1, L1, g.mirror) - L1).max()
    b = np.abs(rotate_perp(L1) - project_lambda(2, rotate_perp(h), g.mirror)).max()
    c = np.abs(reflect(L1, g.mirror) - project_lambda(1, reflect(h, g.mirror), g.mirror)).max()
    r = max(a, b, c)
    return r < 1e-12, f"max identity residual {r:.2e}"


def _theorem1():
    from .canonical_rep import build_eigenbasis, extract_rep
    from .effective_approx import sigma11_theorem1
    from .field_space import AdmissiblePair, random_symmetric
    from .reference_solver import solve_effective
    g = random_symmetric(8, np.random.default_rng(1))
    rep = extract_rep(build_eigenbasis(g))
    lam = (3.0, 2.0, 1.0)
    pair = AdmissiblePair(np.diag(lam[:2]), lam[2] * np.eye(2))
    ref = solve_effective(g, pair, tol=1e-12).sigma_star[0, 0]
    err = abs(sigma11_theorem1(rep, lam) - ref)
    return err < 1e-7, f"|Theorem 1 - oracle| = {err:.2e}"


def _duality():
    from .field_space import checkerboard
    from .reference_solver import duality_check
    r = duality_check(checkerboard(16), 10.0, 1.0)
    return r < 1e-8, f"phase-interchange residual {r:.2e}"


def _recovery():
    from .recovery import SpectralSample, forward_model, recover_spectrum, sample_grid
    rho, b2 = np.array([0.75, 0.25]), np.array([0.5, 0.5])
    lam = sample_grid(2)
    res = recover_spectrum([SpectralSample(x, v) for x, v in zip(lam, forward_model(rho, b2, lam))], 2)
    err = max(np.abs(res.rho - rho).max(), np.abs(res.beta_sq - b2).max())
    return err < 1e-6, f"parameter error {err:.2e}"


def _laminate():
    from .laminate_models import LaminateProgram, polycrystal_laminate, rotation
    s0 = np.array([[3.0, 0.4], [0.4, 1.0]])
    R = np.array([rotation(0), rotation(40)])
    out = polycrystal_laminate(LaminateProgram(s0, np.array([1.0, 0.0]), R, [1.0]))
    err = np.abs(out - R[1].T @ s0 @ R[1]).max()
    return err < 1e-10, f"p = 1 limit error {err:.2e}"


def _truncation():
    from .field_space import checkerboard
    from .truncation import compare_expansions
    d = compare_expansions(checkerboard(8), 2, np.diag([1.0, 0.5]), np.array([[0.2, 0.1], [0.1, -0.3]]))
    return d["max"] < 1e-9, f"max series discrepancy {d['max']:.2e}"


CHECKS = [
    ("operator identities", _operators),
    ("Theorem 1 vs oracle", _theorem1),
    ("checkerboard duality", _duality),
    ("spectral recovery", _recovery),
    ("laminate p=1 limit", _laminate),
    ("truncated expansion", _truncation),
]


def run_selftest() -> list:
    """Run every check; failures are reported, not raised."""
    out = []
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # report and continue
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append({"name": name, "passed": bool(ok), "detail": detail,
                    "seconds": round(time.perf_counter() - t0, 3)})
    return out
