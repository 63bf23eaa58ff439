"""Pure numpy implementations of the hot kernels.

Fallback for when the compiled extension is unavailable; the accumulation
order over access points matches the compiled path so both backends agree
to float rounding.
"""

from __future__ import annotations

import math

import numpy as np


def gaussian_loglik(obs: np.ndarray, means: np.ndarray, stds: np.ndarray) -> np.ndarray:
    """Sum of Gaussian log-densities per cell.

    obs: (n_ap,) observed RSS; means/stds: (n_ap, n_cells) surfaces.
    Returns (n_cells,) log-likelihoods.
    """
    n_ap, n_cells = means.shape
    out = np.zeros(n_cells)
    for a in range(n_ap):
        s = stds[a]
        d = obs[a] - means[a]
        out += -0.5 * np.log(2.0 * math.pi * s * s) - d * d / (2.0 * s * s)
    return out


def se_kernel(a: np.ndarray, b: np.ndarray, sigma_f: float, ell: float) -> np.ndarray:
    """Squared-exponential kernel matrix between 2-D point sets a (n,2) and b (m,2)."""
    diff = a[:, None, :] - b[None, :, :]
    sqdist = (diff * diff).sum(axis=-1)
    return sigma_f * sigma_f * np.exp(-sqdist / (2.0 * ell * ell))
