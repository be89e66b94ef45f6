"""Polar quadrature over annuli in the spectral (lambda) plane."""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss

__all__ = ["annulus_quadrature", "lp_norm"]


def annulus_quadrature(r_inner: float, r_outer: float, n_r: int, n_theta: int):
    """Tensor rule on ``r_inner < |lam| < r_outer``.

    ``n_r`` Gauss-Legendre radii times ``n_theta`` uniform angles (starting at
    angle 0), weights ``r dr dtheta``.  Nodes are ordered radius-major.  The
    weights integrate any polynomial of degree < 2 n_r in ``r`` times a
    trigonometric polynomial of degree < n_theta exactly; in particular they
    sum to the annulus area.

    Returns
    -------
    nodes : ndarray of complex, shape (n_r * n_theta,)
    weights : ndarray of float, same shape
    """
    if not 0 < r_inner < r_outer:
        raise ValueError(f"need 0 < r_inner < r_outer, got {r_inner}, {r_outer}")
    if n_r < 1 or n_theta < 1:
        raise ValueError("n_r and n_theta must be positive")
    t, wt = leggauss(n_r)
    half = 0.5 * (r_outer - r_inner)
    r = r_inner + half * (t + 1.0)
    wr = half * wt * r
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    nodes = (r[:, None] * np.exp(1j * theta[None, :])).ravel()
    weights = np.repeat(wr * (2.0 * np.pi / n_theta), n_theta)
    return nodes, weights


def lp_norm(values: np.ndarray, weights: np.ndarray, p: float, axis: int = 0) -> np.ndarray:
    """Discrete ``(sum w |f|^p)^(1/p)`` along ``axis``."""
    values = np.abs(np.asarray(values))
    shape = [1] * values.ndim
    shape[axis] = -1
    w = np.asarray(weights).reshape(shape)
    return (w * values ** p).sum(axis=axis) ** (1.0 / p)
