"""Objective evaluation through reduced models.

Observables are propagated with the matrix exponential of the generator;
trajectories come from mean-field (drift-only RK4) or Euler-Maruyama
integration of an identified SDE.  Controls are constant over the horizon, so
every model kind is first reduced to per-control coefficient tables and many
controls are integrated side by side.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .control_models import AffineGeneratorFamily, AugmentedModel
from .dictionary import Dictionary, monomials
from .errors import ConfigurationError, HorizonError
from .gedmd import GeneratorMatrix, PSD_FLOOR, SdeModel

EXP_LIMIT = 700.0


# -- observable propagation ----------------------------------------------------


def propagate_observable(L, c, x0, t: float, dictionary: Dictionary | None = None) -> float:
    """``(exp(tL) c)^T psi(x0)``, the expected value of ``c^T psi`` at time ``t``."""
    if t < 0:
        raise ConfigurationError("t must be non-negative")
    if isinstance(L, GeneratorMatrix):
        dictionary = dictionary or L.dictionary
        L = L.L
    if dictionary is None:
        raise ConfigurationError("a dictionary is required to evaluate psi(x0)")
    L = np.asarray(L, dtype=float)
    c = np.asarray(c, dtype=float)
    psi = dictionary.evaluate(np.atleast_1d(np.asarray(x0, dtype=float)))
    if t == 0:
        return float(c @ psi)
    abscissa = float(np.max(np.linalg.eigvals(L).real))
    if abscissa * t > EXP_LIMIT:
        raise HorizonError(f"spectral abscissa {abscissa:.3g} times t = {t} overflows exp")
    return float((expm(t * L) @ c) @ psi)


# -- per-control coefficient tables --------------------------------------------


def _parts_cache(family: AffineGeneratorFamily):
    parts = getattr(family, "_sde_parts", None)
    if parts is None:
        parts = family.sde_parts()
        object.__setattr__(family, "_sde_parts", parts)
    return parts


def _collapse(model: AugmentedModel, U):
    """State dictionary, one-hot target map and control weights for substitution."""
    d = model.dictionary
    s = model.state_dim
    ds = monomials(s, d.max_degree)
    S = np.zeros((ds.size, d.size))
    for k, e in enumerate(d.exponents):
        S[ds.index_of(e[:s]), k] = 1.0
    W = np.prod(U[:, None, :] ** d.exponents[None, :, s:], axis=2)  # (P, size_aug)
    return ds, S, W


def coefficient_tables(model, U, diffusion: bool = False):
    """Reduce ``model`` at each control row of ``U`` to state-space coefficients.

    Returns ``(dictionary, drift (P, size, D), diffusion (P, D, D, size) or None)``.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    P = len(U)
    if isinstance(model, SdeModel):
        dr = np.broadcast_to(model.drift, (P,) + model.drift.shape)
        df = np.broadcast_to(model.diffusion, (P,) + model.diffusion.shape) if diffusion else None
        return model.dictionary, dr, df
    if isinstance(model, AffineGeneratorFamily):
        if U.shape[1] != model.control_dim:
            raise ConfigurationError(f"controls must have {model.control_dim} components")
        base, chans = _parts_cache(model)
        dr = base.drift + np.einsum("pi,ikd->pkd", U, np.array([c.drift for c in chans]))
        df = None
        if diffusion:
            df = base.diffusion + np.einsum("pi,iabk->pabk", U, np.array([c.diffusion for c in chans]))
        return model.dictionary, dr, df
    if isinstance(model, AugmentedModel):
        if U.shape[1] != model.control_dim:
            raise ConfigurationError(f"controls must have {model.control_dim} components")
        s = model.state_dim
        ds, S, W = _collapse(model, U)
        dr = np.einsum("tk,pk,kd->ptd", S, W, model.model.drift[:, :s])
        df = None
        if diffusion:
            df = np.einsum("tk,pk,abk->pabt", S, W, model.model.diffusion[:s, :s])
        return ds, dr, df
    raise ConfigurationError(f"unsupported model type {type(model).__name__}")


def model_at(model, u) -> SdeModel:
    """State-only SDE for one constant control."""
    d, dr, df = coefficient_tables(model, np.atleast_1d(np.asarray(u, dtype=float))[None], diffusion=True)
    return SdeModel(dr[0], df[0], d)


# -- integrators -----------------------------------------------------------------


def _grid(T: float, dt: float):
    if T <= 0 or dt <= 0:
        raise ConfigurationError("horizon and step must be positive")
    steps = max(1, int(np.ceil(T / dt - 1e-9)))
    return np.linspace(0.0, T, steps + 1)


def mean_field(dictionary: Dictionary, drift, X0, T: float, dt: float):
    """Classical RK4 of ``dx/dt = b(x)`` for a batch of coefficient tables.

    ``drift`` is ``(P, size, D)`` and ``X0`` is ``(P, D)`` or ``(D,)``.
    Returns ``(times, states (n_t, P, D))``; diverging rows become NaN.
    """
    drift = np.asarray(drift, dtype=float)
    P, _, D = drift.shape
    x = np.broadcast_to(np.asarray(X0, dtype=float), (P, D)).copy()
    times = _grid(T, dt)
    h = times[1] - times[0]
    out = np.empty((len(times), P, D))
    out[0] = x

    def f(y):
        return np.einsum("pk,pkd->pd", dictionary.evaluate(y), drift)

    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, len(times)):
            k1 = f(x)
            k2 = f(x + 0.5 * h * k1)
            k3 = f(x + 0.5 * h * k2)
            k4 = f(x + h * k3)
            x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            x[~np.all(np.isfinite(x), axis=1)] = np.nan
            out[k] = x
    return times, out


def _sqrt_psd(a):
    """Symmetric square roots of a batch; rows with eigenvalues below the floor are flagged."""
    lam, V = np.linalg.eigh(0.5 * (a + np.swapaxes(a, -1, -2)))
    bad = lam.min(axis=-1) < -PSD_FLOOR
    lam = np.clip(lam, 0.0, None)
    return V * np.sqrt(lam)[..., None, :] @ np.swapaxes(V, -1, -2), bad


def euler_maruyama(dictionary: Dictionary, drift, diffusion, x0, T: float, dt: float, n: int, rng):
    """Paths of the identified SDE for one control: ``(times, paths (n_t, n, D), fallbacks)``.

    At states where ``a(x)`` is indefinite the step is taken drift-only.
    """
    drift = np.asarray(drift, dtype=float)
    diffusion = np.asarray(diffusion, dtype=float)
    D = drift.shape[1]
    times = _grid(T, dt)
    h = times[1] - times[0]
    x = np.tile(np.asarray(x0, dtype=float).reshape(1, D), (n, 1))
    out = np.empty((len(times), n, D))
    out[0] = x
    fallbacks = 0
    sq = np.sqrt(h)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, len(times)):
            psi = dictionary.evaluate(x)
            b = psi @ drift
            a = np.einsum("ijk,nk->nij", diffusion, psi)
            finite = np.all(np.isfinite(a), axis=(1, 2))
            a[~finite] = 0.0
            sig, bad = _sqrt_psd(a)
            bad |= ~finite
            sig[bad] = 0.0
            fallbacks += int(bad.sum())
            x = x + b * h + sq * np.einsum("nij,nj->ni", sig, rng.standard_normal((n, D)))
            out[k] = x
    return times, out, fallbacks


@dataclass
class ReducedTrajectory:
    times: np.ndarray
    states: np.ndarray  # (n_t, D)
    provenance: str = "mean-field"
    model: object = None
    fallbacks: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ConfigurationError("time grid must be strictly increasing")

    def to_csv(self, path, names=None) -> None:
        write_trajectory_csv(path, self.times, self.states, names)


def write_trajectory_csv(path, times, states, names=None) -> None:
    states = np.asarray(states, dtype=float).reshape(len(times), -1)
    names = names or [f"x{i + 1}" for i in range(states.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time"] + list(names))
        for t, row in zip(times, states):
            w.writerow(["%.17g" % t] + ["%.17g" % v for v in row])


def read_trajectory_csv(path):
    data = np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1))
    return data[:, 0], data[:, 1:]


def simulate_reduced(model, u, x0, T: float, dt: float, n: int = 1, seed=None, noise: bool | None = None) -> ReducedTrajectory:
    """Mean trajectory of the reduced model at constant control ``u``.

    ``n = 1`` without noise integrates the mean-field ODE; otherwise the
    ensemble mean of ``n`` Euler-Maruyama paths is returned.
    """
    noise = n > 1 if noise is None else noise
    u = np.zeros(0) if u is None else np.atleast_1d(np.asarray(u, dtype=float))
    if isinstance(model, SdeModel):
        d, dr, df = model.dictionary, model.drift[None], model.diffusion[None]
    else:
        d, dr, df = coefficient_tables(model, u[None], diffusion=noise)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if not noise:
        times, states = mean_field(d, dr, x0[None], T, dt)
        return ReducedTrajectory(times, states[:, 0], "mean-field", model)
    rng = np.random.default_rng(seed)
    times, paths, fb = euler_maruyama(d, dr[0], df[0], x0, T, dt, n, rng)
    if fb:
        warnings.warn(f"{fb} Euler-Maruyama steps fell back to drift only", RuntimeWarning, stacklevel=2)
    return ReducedTrajectory(times, paths.mean(axis=1), "simulated-ensemble", model, fb, {"n": n})


# -- objectives ----------------------------------------------------------------------


@dataclass(frozen=True)
class ObjectiveSpec:
    """Running cost ``r(x, u)`` integrated over ``[t0, t1]`` plus terminal cost ``s(x, u)``.

    ``closed_form(U)`` short-circuits evaluation for control-only costs.
    Callables receive states ``(..., D)`` and controls ``(..., d_u)``.
    """

    name: str
    t1: float
    running: Callable | None = None
    terminal: Callable | None = None
    closed_form: Callable | None = None
    t0: float = 0.0
    dt: float = 0.01

    def __post_init__(self):
        if not self.t0 < self.t1:
            raise ConfigurationError("objective horizon needs t0 < t1")
        if self.t0 != 0.0 and self.closed_form is None:
            raise ConfigurationError("trajectory objectives start at t0 = 0")


def _cost_on_paths(spec: ObjectiveSpec, times, X, U):
    """Objective from states ``X (n_t, P, [n,] D)``; controls broadcast over paths."""
    Ub = U if X.ndim == 3 else U[:, None, :]
    val = np.zeros(X.shape[1:-1])
    if spec.running is not None:
        r = spec.running(X, np.broadcast_to(Ub, X.shape[:-1] + (U.shape[-1],)))
        val = val + np.trapezoid(r, times, axis=0)
    if spec.terminal is not None:
        val = val + spec.terminal(X[-1], np.broadcast_to(Ub, X.shape[1:-1] + (U.shape[-1],)))
    return val if X.ndim == 3 else val.mean(axis=-1)


def objective_evaluator(specs, model, x0, mode: str = "mean-field", n: int = 100, seed=0):
    """Batch evaluator ``U (P, d_u) -> F (P, k)`` for the solver.

    Failed integrations give NaN rows.  In ``ensemble`` mode each control gets
    its own fixed seed so repeated calls are deterministic.
    """
    if mode not in ("mean-field", "ensemble"):
        raise ConfigurationError(f"unknown evaluation mode {mode!r}")
    specs = list(specs)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))

    def batch(U):
        U = np.atleast_2d(np.asarray(U, dtype=float))
        F = np.empty((len(U), len(specs)))
        groups: dict = {}
        for j, spec in enumerate(specs):
            if spec.closed_form is not None:
                F[:, j] = spec.closed_form(U)
            else:
                groups.setdefault((spec.t1, spec.dt), []).append(j)
        for (T, dt), idx in groups.items():
            if mode == "mean-field":
                d, dr, _ = coefficient_tables(model, U)
                times, X = mean_field(d, dr, x0[None], T, dt)
                for j in idx:
                    F[:, j] = _cost_on_paths(specs[j], times, X, U)
            else:
                d, dr, df = coefficient_tables(model, U, diffusion=True)
                for p in range(len(U)):
                    rng = np.random.default_rng([int(seed), p])
                    times, paths, _ = euler_maruyama(d, dr[p], df[p], x0, T, dt, n, rng)
                    for j in idx:
                        F[p, j] = _cost_on_paths(specs[j], times, paths[:, None], U[p : p + 1])[0]
        F[~np.isfinite(F) & ~np.isposinf(F)] = np.nan
        return F

    return batch


def evaluate_objectives(specs, model, u, x0, mode: str = "mean-field", n: int = 100, seed=0) -> np.ndarray:
    u = np.atleast_1d(np.asarray(u, dtype=float))
    return objective_evaluator(specs, model, x0, mode, n, seed)(u[None])[0]


def trajectory_rmse(reference, candidate) -> float:
    """RMSE pooled over components and the reference times inside the candidate's range.

    Both arguments are ``ReducedTrajectory`` objects or ``(times, states)`` pairs.
    """
    rt, rs = (reference.times, reference.states) if isinstance(reference, ReducedTrajectory) else reference
    ct, cs = (candidate.times, candidate.states) if isinstance(candidate, ReducedTrajectory) else candidate
    rt, ct = np.asarray(rt, dtype=float), np.asarray(ct, dtype=float)
    rs = np.asarray(rs, dtype=float).reshape(len(rt), -1)
    cs = np.asarray(cs, dtype=float).reshape(len(ct), -1)
    if rs.shape[1] != cs.shape[1]:
        raise ConfigurationError("trajectories have different state dimensions")
    sel = (rt >= ct[0] - 1e-12) & (rt <= ct[-1] + 1e-12)
    if not sel.any():
        raise ConfigurationError("trajectories share no time range")
    interp = np.column_stack([np.interp(rt[sel], ct, cs[:, i]) for i in range(cs.shape[1])])
    return float(np.sqrt(np.mean((rs[sel] - interp) ** 2)))


# -- objective builders ----------------------------------------------------------------


def control_energy(U) -> np.ndarray:
    """``u_push^2 + u_pull^2``."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    return np.sum(U**2, axis=1)


def economic_cost(U, T: float = 1176.0, u_w_max: float = 0.81) -> np.ndarray:
    """``T (u_s^2 - log(u_w_max - u_w))`` for controls ``(u_s, u_w)``; ``+inf`` past the barrier."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    us, uw = U[:, 0], U[:, 1]
    gap = u_w_max - uw
    out = np.full(len(U), np.inf)
    ok = gap > 0
    out[ok] = T * (us[ok] ** 2 - np.log(gap[ok]))
    return out


def voter_objectives(t_eval: float = 10.0, dt: float = 0.01):
    """Opinion-1 share at ``t_eval`` and control energy."""
    share = ObjectiveSpec("share", t_eval, terminal=lambda x, u: x[..., 0], dt=dt)
    energy = ObjectiveSpec("energy", t_eval, closed_form=control_energy)
    return [share, energy]


def epidemic_objectives(T: float = 1176.0, i_max: float = 0.005, u_w_max: float = 0.81, groups: int = 2, dt: float = 4.0, weight: float = 10.0):
    """Infection burden ``int i + exp(w (i - i_max)) dt`` and economic cost.

    ``i`` is the total infected fraction, the sum of the trailing ``groups``
    state components.
    """

    def burden(x, u):
        i = x[..., groups : 2 * groups].sum(axis=-1)
        return i + np.exp(weight * (i - i_max))

    return [
        ObjectiveSpec("infection", T, running=burden, dt=dt),
        ObjectiveSpec("economic", T, closed_form=lambda U: economic_cost(U, T, u_w_max)),
    ]
