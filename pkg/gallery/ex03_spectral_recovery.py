"""
Recovering spectral weights from a few measurements
===================================================

sigma*_11(1, 1, lambda) is a rational function of lambda whose poles and
residues are the spectral weights (rho_i, beta_i^2).  A handful of samples,
some of them at complex lambda, determine them.
"""

import numpy as np

from effcond.recovery import SpectralSample, forward_model, recover_spectrum, sample_grid

rho = np.array([0.9, 0.6, 0.35, 0.1])
beta_sq = np.array([0.1, 0.4, 0.3, 0.2])
lam = sample_grid(len(rho))
print("sample points:", np.round(lam, 3))

samples = [SpectralSample(x, v) for x, v in zip(lam, forward_model(rho, beta_sq, lam))]
fit = recover_spectrum(samples, k=len(rho))
print("rho     true", rho, " fit", np.round(fit.rho, 10))
print("beta^2  true", beta_sq, " fit", np.round(fit.beta_sq, 10))
print("misfit", fit.misfit, " Jacobian condition", round(fit.cond, 1))
