"""Controlled stochastic SIR in one or two groups, Euler-Maruyama in fractions.

States are fractions of the total population ``N``, laid out as
``[S_1 .. S_G, I_1 .. I_G]``; ``R_g`` is carried alongside so that
``S_g + I_g + R_g`` stays equal to the group share.  Infection pressure on
group ``g`` is ``s_g * sum_h beta * C_gh * m_g(u) m_h(u) * i_h`` with
``m_g(u) = (1 - u_{k(g)})^(p/2)`` for the control channel ``k(g)`` acting on
the group; one group with ``p = 2`` gives ``beta (1 - u)^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, StabilityError
from ._rng import make_rng
from .schedule import ControlSchedule


@dataclass(frozen=True)
class SirParams:
    N: int = 1000
    beta: float = 0.5
    gamma: float = 0.05
    exponent: float = 2.0
    group_fractions: tuple = (1.0,)
    contact: tuple = ((1.0,),)
    group_controls: tuple = (0,)

    def __post_init__(self):
        G = len(self.group_fractions)
        C = np.asarray(self.contact, dtype=float)
        if C.shape != (G, G):
            raise ConfigurationError("contact table must be G x G")
        if len(self.group_controls) != G:
            raise ConfigurationError("one control channel per group is required")
        if self.beta < 0 or self.gamma < 0 or np.any(C < 0):
            raise ConfigurationError("rates must be non-negative")
        if abs(sum(self.group_fractions) - 1.0) > 1e-12:
            raise ConfigurationError("group fractions must sum to 1")
        object.__setattr__(self, "contact", tuple(tuple(float(v) for v in row) for row in C))
        object.__setattr__(self, "group_fractions", tuple(float(v) for v in self.group_fractions))

    @property
    def groups(self) -> int:
        return len(self.group_fractions)

    @property
    def state_dim(self) -> int:
        return 2 * self.groups

    @property
    def control_dim(self) -> int:
        return max(self.group_controls) + 1

    def transmission(self, u) -> np.ndarray:
        """Effective ``beta_gh(u)`` for controls of shape ``(..., control_dim)``."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        base = np.clip(1.0 - u[..., list(self.group_controls)], 0.0, None)
        m = base ** (0.5 * self.exponent)
        return self.beta * np.asarray(self.contact) * m[..., :, None] * m[..., None, :]

    def drift(self, x, u) -> np.ndarray:
        """Mean-field right-hand side for states ``(..., 2G)``."""
        G = self.groups
        x = np.asarray(x, dtype=float)
        s, i = x[..., :G], x[..., G:]
        beta = self.transmission(u)
        inf = s * np.einsum("...gh,...h->...g", beta, i)
        rec = self.gamma * i
        return np.concatenate([-inf, inf - rec], axis=-1)

    def diffusion(self, x, u) -> np.ndarray:
        """``a = sigma sigma^T`` for states ``(..., 2G)``."""
        G = self.groups
        x = np.asarray(x, dtype=float)
        s, i = x[..., :G], x[..., G:]
        inf = s * np.einsum("...gh,...h->...g", self.transmission(u), i)
        rec = self.gamma * i
        a = np.zeros(x.shape[:-1] + (2 * G, 2 * G))
        for g in range(G):
            a[..., g, g] = inf[..., g]
            a[..., g, G + g] = -inf[..., g]
            a[..., G + g, g] = -inf[..., g]
            a[..., G + g, G + g] = inf[..., g] + rec[..., g]
        return a / self.N


def two_group_params(
    N: int = 1045,
    beta: float = 0.0186,
    gamma: float = 1.0 / 168.0,
    child_fraction: float = 0.2,
    contact=((1.0, 0.8), (0.8, 1.6)),
    exponent: float = 2.0,
) -> SirParams:
    """Adults (group 0, work channel ``u_w``) and children (group 1, school channel ``u_s``).

    Controls are ordered ``(u_s, u_w)``.  Rates are per hour.
    """
    return SirParams(
        N=N,
        beta=beta,
        gamma=gamma,
        exponent=exponent,
        group_fractions=(1.0 - child_fraction, child_fraction),
        contact=contact,
        group_controls=(1, 0),
    )


@dataclass
class SirTrajectory:
    times: np.ndarray
    states: np.ndarray  # (n_t, n, 2G)
    recovered: np.ndarray  # (n_t, n, G)
    controls: np.ndarray  # (n_t, d_u)
    clamp_events: int = 0
    max_conservation_error: float = 0.0
    groups: int = field(default=1)

    def mean(self) -> np.ndarray:
        return self.states.mean(axis=1)


def _clamp(s, i, r, share):
    """Project onto ``s, i, r >= 0`` with ``s + i + r = share``.

    Returns the clamped arrays and the number of entries that were negative.
    """
    bad = (s < 0) | (i < 0) | (r < 0)
    if not bad.any():
        return s, i, r, 0
    s = np.clip(s, 0.0, share)
    i = np.clip(i, 0.0, share)
    r = share - s - i
    neg = r < 0
    if neg.any():
        # overshoot is returned by I first, the compartment R exchanges with
        i[neg] += r[neg]
        short = i < 0
        s[short] += i[short]
        i[short] = 0.0
        r[neg] = 0.0
    return s, i, r, int(bad.sum())


def simulate_sir(
    params: SirParams,
    schedule: ControlSchedule | None,
    x0,
    T: float,
    dt: float,
    seed=None,
    n: int = 1,
    noise: bool = True,
) -> SirTrajectory:
    """Euler-Maruyama ensemble of ``n`` paths from ``x0`` on ``[0, T]``."""
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    G = params.groups
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (2 * G,):
        raise ConfigurationError(f"initial state must have {2 * G} components")
    share = np.asarray(params.group_fractions)
    if np.any(x0 < 0) or np.any(x0[:G] + x0[G:] > share + 1e-12):
        raise ConfigurationError("initial fractions must lie in the group simplex")
    schedule = schedule or ControlSchedule.constant(np.zeros(params.control_dim))
    rng = make_rng(seed)
    steps = int(round(T / dt))
    times = np.arange(steps + 1) * dt
    s = np.tile(x0[:G], (n, 1))
    i = np.tile(x0[G:], (n, 1))
    r = np.maximum(share - s - i, 0.0)
    states = np.empty((steps + 1, n, 2 * G))
    rec_out = np.empty((steps + 1, n, G))
    ctrl = np.empty((steps + 1, params.control_dim))
    states[0] = np.hstack([s, i])
    rec_out[0] = r
    ctrl[0] = schedule(0.0)
    clamps = 0
    cons = 0.0
    sq = np.sqrt(dt / params.N)
    for k in range(steps):
        u = schedule(times[k])
        beta = params.transmission(u)
        inf = s * (i @ beta.T)
        rec = params.gamma * i
        d_inf = inf * dt
        d_rec = rec * dt
        if noise:
            d_inf = d_inf + np.sqrt(inf) * sq * rng.standard_normal(s.shape)
            d_rec = d_rec + np.sqrt(rec) * sq * rng.standard_normal(s.shape)
        if max(np.abs(d_inf).max(), np.abs(d_rec).max()) > 0.5:
            raise StabilityError(f"step {k} moves a fraction by more than 0.5; reduce dt")
        s_new = s - d_inf
        i_new = i + d_inf - d_rec
        r_new = r + d_rec
        cons = max(cons, float(np.abs((s_new + i_new + r_new) - (s + i + r)).max()))
        s, i, r, hit = _clamp(s_new, i_new, r_new, np.broadcast_to(share, s_new.shape).copy())
        clamps += hit
        states[k + 1] = np.hstack([s, i])
        rec_out[k + 1] = r
        ctrl[k + 1] = schedule(times[k + 1])
    return SirTrajectory(times, states, rec_out, ctrl, clamps, cons, G)


class SirSimulator:
    """Batch simulator for Kramers-Moyal sampling and ensemble means.

    The horizon is rounded to a whole number of ``dt`` steps.
    """

    def __init__(self, params: SirParams, dt: float = 1.0, noise: bool = True):
        self.params = params
        self.dt = dt
        self.noise = noise

    @property
    def state_dim(self) -> int:
        return self.params.state_dim

    @property
    def control_dim(self) -> int:
        return self.params.control_dim

    def __call__(self, x0, u, t, n, rng):
        p = self.params
        G = p.groups
        rng = make_rng(rng)
        x0 = np.asarray(x0, dtype=float).reshape(-1, 2 * G)
        P = len(x0)
        u = np.zeros((P, p.control_dim)) if u is None else np.asarray(u, dtype=float).reshape(P, -1)
        share = np.asarray(p.group_fractions)
        s = np.repeat(x0[:, :G], n, axis=0)
        i = np.repeat(x0[:, G:], n, axis=0)
        r = np.maximum(share - s - i, 0.0)
        beta = np.repeat(p.transmission(u), n, axis=0)  # (P*n, G, G)
        steps = max(1, int(round(t / self.dt)))
        sq = np.sqrt(self.dt / p.N)
        full = np.broadcast_to(share, s.shape)
        for _ in range(steps):
            inf = s * np.einsum("kgh,kh->kg", beta, i)
            rec = p.gamma * i
            d_inf = inf * self.dt
            d_rec = rec * self.dt
            if self.noise:
                d_inf = d_inf + np.sqrt(inf) * sq * rng.standard_normal(s.shape)
                d_rec = d_rec + np.sqrt(rec) * sq * rng.standard_normal(s.shape)
            s, i, r, _ = _clamp(s - d_inf, i + d_inf - d_rec, r + d_rec, full.copy())
        return np.hstack([s, i]).reshape(P, n, 2 * G)

    def trajectories(self, x0, u, times, n, rng):
        times = np.asarray(times, dtype=float)
        u = np.zeros(self.params.control_dim) if u is None else np.atleast_1d(u)
        T = float(times[-1])
        traj = simulate_sir(self.params, ControlSchedule.constant(u), x0, T, self.dt, rng, n=n, noise=self.noise)
        idx = np.rint(times / self.dt).astype(int)
        return traj.states[idx]
