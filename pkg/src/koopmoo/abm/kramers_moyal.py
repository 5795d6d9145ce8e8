"""Pointwise drift/diffusion estimates and ensemble statistics from simulators.

A simulator is any callable ``sim(x0, u, t, n, rng)`` taking start states
``(P, D)`` and controls ``(P, d_u)`` (or ``None``) and returning the states
``(P, n, D)`` reached after time ``t`` by ``n`` independent runs each.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from ._rng import make_rng

Z_999 = 3.2905267314918945  # two-sided 99.9 % normal quantile


@dataclass(frozen=True)
class KmEstimate:
    x: np.ndarray
    u: np.ndarray | None
    b: np.ndarray
    a: np.ndarray
    n: int
    tau: float
    b_se: np.ndarray
    a_se: np.ndarray


def km_moments(increments, tau: float):
    """Drift, diffusion and their standard errors from increments ``(..., n, D)``."""
    dX = np.asarray(increments, dtype=float)
    n = dX.shape[-2]
    if n < 2:
        raise ConfigurationError("at least two runs are needed")
    first = dX / tau
    second = dX[..., :, None] * dX[..., None, :] / tau
    b = first.mean(axis=-2)
    a = second.mean(axis=-3)
    a = 0.5 * (a + np.swapaxes(a, -1, -2))
    b_se = first.std(axis=-2, ddof=1) / np.sqrt(n)
    a_se = second.std(axis=-3, ddof=1) / np.sqrt(n)
    return b, a, b_se, a_se


def km_estimate(simulator, x, u, tau: float, n: int, seed=None) -> KmEstimate:
    """Kramers-Moyal estimates ``E[dX]/tau`` and ``E[dX dX^T]/tau`` at one state."""
    if tau <= 0:
        raise ConfigurationError("tau must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    uu = None if u is None else np.atleast_1d(np.asarray(u, dtype=float))[None]
    end = simulator(x[None], uu, tau, n, make_rng(seed))[0]
    b, a, b_se, a_se = km_moments(end - x, tau)
    return KmEstimate(x, None if u is None else uu[0], b, a, n, tau, b_se, a_se)


def km_batch(simulator, X, U, tau: float, n: int, seed=None):
    """Estimates at many ``(state, control)`` pairs in one simulator call.

    Returns ``(b, a, b_se, a_se)`` with shapes ``(m, D)``, ``(m, D, D)``, ...
    """
    if tau <= 0:
        raise ConfigurationError("tau must be positive")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    end = simulator(X, U, tau, n, make_rng(seed))
    return km_moments(end - X[:, None, :], tau)


def ensemble_mean(simulator, x0, u, t: float, n: int, seed=None, z: float = Z_999):
    """Monte Carlo mean after time ``t`` with normal-approximation halfwidth ``z s / sqrt(n)``."""
    if n < 2:
        raise ConfigurationError("at least two runs are needed")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    uu = None if u is None else np.atleast_1d(np.asarray(u, dtype=float))[None]
    end = simulator(x0[None], uu, t, n, make_rng(seed))[0]
    return end.mean(axis=0), z * end.std(axis=0, ddof=1) / np.sqrt(n)
