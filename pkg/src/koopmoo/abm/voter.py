"""Two-opinion voter model simulated with Gillespie's algorithm.

``X1`` counts agents holding opinion 1; ``X2 = N - X1``.  Propensities:

- 1 -> 2 by imitation: ``(g12 + u_push) X1 X2 / N``
- 2 -> 1 by imitation: ``(g21 + u_pull) X1 X2 / N``
- 1 -> 2 spontaneously: ``g12' X1``
- 2 -> 1 spontaneously: ``g21' X2``

The ``1/N`` pair scaling makes ``X1/N`` converge to the Kurtz diffusion.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from ._rng import make_rng


@dataclass(frozen=True)
class VoterParams:
    N: int = 500
    gamma12: float = 1.0
    gamma21: float = 2.0
    gamma12_prime: float = 0.1
    gamma21_prime: float = 0.1
    u_push: float = 0.0
    u_pull: float = 0.0

    def with_control(self, u) -> "VoterParams":
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return replace(self, u_push=float(u[0]), u_pull=float(u[1]))

    @property
    def rates(self) -> tuple[float, float]:
        """Effective imitation rates, clamped at zero."""
        r12 = self.gamma12 + self.u_push
        r21 = self.gamma21 + self.u_pull
        if r12 < 0 or r21 < 0:
            warnings.warn(f"negative effective rate ({r12}, {r21}) clamped to 0", stacklevel=2)
        return max(r12, 0.0), max(r21, 0.0)


def kurtz_drift(params: VoterParams, c):
    r12, r21 = params.rates
    c = np.asarray(c, dtype=float)
    return (r21 - r12) * c * (1 - c) - params.gamma12_prime * c + params.gamma21_prime * (1 - c)


def kurtz_diffusion(params: VoterParams, c):
    r12, r21 = params.rates
    c = np.asarray(c, dtype=float)
    return ((r12 + r21) * c * (1 - c) + params.gamma12_prime * c + params.gamma21_prime * (1 - c)) / params.N


def _rate_arrays(params, u, size):
    """Per-run imitation rates for controls ``u`` broadcast to ``size`` runs."""
    if u is None:
        r12, r21 = params.rates
        return np.full(size, r12), np.full(size, r21)
    u = np.asarray(u, dtype=float).reshape(-1, 2)
    r12 = params.gamma12 + u[:, 0]
    r21 = params.gamma21 + u[:, 1]
    if np.any(r12 < 0) or np.any(r21 < 0):
        warnings.warn("negative effective rates clamped to 0", stacklevel=3)
    reps = size // len(u)
    return np.repeat(np.maximum(r12, 0), reps), np.repeat(np.maximum(r21, 0), reps)


def gillespie_voter(params: VoterParams, x1_0: int, T: float, seed=None):
    """Exact realisation of ``X1`` on ``[0, T]`` as event times and states.

    Returns ``(times, states)``; the state is ``states[k]`` on
    ``[times[k], times[k+1])`` and the last entry holds until ``T``.
    """
    N = params.N
    if not 0 <= x1_0 <= N:
        raise ValueError("x1_0 must lie in [0, N]")
    rng = make_rng(seed)
    r12, r21 = params.rates
    g12p, g21p = params.gamma12_prime, params.gamma21_prime
    t, x = 0.0, int(x1_0)
    times, states = [0.0], [x]
    while True:
        pair = x * (N - x) / N
        down = r12 * pair + g12p * x
        up = r21 * pair + g21p * (N - x)
        total = down + up
        if total <= 0:
            break
        t += rng.exponential(1.0 / total)
        if t > T:
            break
        x += -1 if rng.random() * total < down else 1
        times.append(t)
        states.append(x)
    return np.array(times), np.array(states)


def simulate_counts(params: VoterParams, x1_0, times, rng, u=None):
    """Vectorised Gillespie over a batch of runs, recorded on a time grid.

    ``x1_0`` is an integer array (one entry per run); ``u`` is ``None`` or
    controls of shape ``(P, 2)`` with runs grouped by control.  Returns
    ``(len(times), runs)`` counts.
    """
    N = params.N
    x = np.array(x1_0, dtype=np.int64).ravel()
    runs = x.size
    times = np.asarray(times, dtype=float)
    r12, r21 = _rate_arrays(params, u, runs)
    g12p, g21p = params.gamma12_prime, params.gamma21_prime
    out = np.empty((len(times), runs), dtype=np.int64)
    t = np.zeros(runs)
    slot = np.zeros(runs, dtype=np.int64)  # next grid index to record
    # grid points at t = 0 record the initial state
    active = np.ones(runs, dtype=bool)
    t_end = times[-1] if len(times) else 0.0
    while active.any():
        idx = np.flatnonzero(active)
        xa = x[idx]
        pair = xa * (N - xa) / N
        down = r12[idx] * pair + g12p * xa
        up = r21[idx] * pair + g21p * (N - xa)
        total = down + up
        with np.errstate(divide="ignore"):
            dt = rng.exponential(1.0, size=idx.size) / total
        coin = rng.random(idx.size) * total
        t_new = t[idx] + dt
        # record the pre-jump state on every grid point in [t, t_new)
        while True:
            s = slot[idx]
            pending = s < len(times)
            pending[pending] = times[s[pending]] < t_new[pending]
            if not pending.any():
                break
            j = idx[pending]
            out[slot[j], j] = x[j]
            slot[j] += 1
        jump = t_new <= t_end
        j = idx[jump]
        x[j] += np.where(coin[jump] < down[jump], -1, 1)
        t[j] = t_new[jump]
        active[idx[~jump]] = False
    return out


class VoterSimulator:
    """Batch simulator of the opinion-1 fraction ``c = X1 / N``.

    Calling it with states ``(P, 1)``, controls ``(P, 2)`` and a horizon
    returns ``(P, n, 1)`` fractions at that horizon.
    """

    state_dim = 1
    control_dim = 2

    def __init__(self, params: VoterParams = VoterParams()):
        self.params = params

    def counts(self, c):
        return np.rint(np.asarray(c, dtype=float) * self.params.N).astype(np.int64)

    def __call__(self, x0, u, t, n, rng):
        x0 = np.asarray(x0, dtype=float).reshape(-1, 1)
        P = len(x0)
        u = np.zeros((P, 2)) if u is None else np.asarray(u, dtype=float).reshape(P, 2)
        start = np.repeat(self.counts(x0[:, 0]), n)
        final = simulate_counts(self.params, start, [t], make_rng(rng), u=u)[-1]
        return (final / self.params.N).reshape(P, n, 1)

    def trajectories(self, x0, u, times, n, rng):
        """Fractions on ``times`` for ``n`` runs from one state: ``(len(times), n, 1)``."""
        start = np.full(n, self.counts(np.ravel(x0)[0]))
        u = np.zeros((1, 2)) if u is None else np.asarray(u, dtype=float).reshape(1, 2)
        counts = simulate_counts(self.params, start, times, make_rng(rng), u=u)
        return (counts / self.params.N)[..., None]
