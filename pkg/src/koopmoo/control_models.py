"""Control-dependent generators.

Two routes: an affine family ``L(u) = L0 + sum_i u_i A_i`` fitted from
generators learned at a handful of constant controls (valid when drift and
``a = sigma sigma^T`` are affine in ``u``), and state augmentation, where the
control is appended to the state so that one generator captures any smooth
control dependence.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _jsonio
from .dictionary import Dictionary, monomials
from .errors import ConfigurationError, ExtrapolationWarning
from .gedmd import (
    PINV_RCOND,
    GeneratorMatrix,
    SdeModel,
    build_matrices,
    estimate_generator,
    identify,
    identify_diffusion,
    identify_drift,
)


@dataclass(frozen=True, eq=False)
class AffineGeneratorFamily:
    L0: np.ndarray
    channels: np.ndarray  # (d_u, size, size)
    dictionary: Dictionary
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        L0 = np.asarray(self.L0, dtype=float)
        ch = np.asarray(self.channels, dtype=float)
        n = self.dictionary.size
        if L0.shape != (n, n) or ch.ndim != 3 or ch.shape[1:] != (n, n):
            raise ConfigurationError("family matrices do not match the dictionary size")
        object.__setattr__(self, "L0", L0)
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))

    @property
    def control_dim(self) -> int:
        return self.channels.shape[0]

    def matrix(self, u) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if u.shape != (self.control_dim,):
            raise ConfigurationError(f"control must have {self.control_dim} components")
        if not np.any(u):
            return self.L0.copy()
        return self.L0 + np.tensordot(u, self.channels, axes=1)

    def sde_parts(self):
        """Drift and diffusion coefficients of ``L0`` and of each channel.

        Identification is linear in ``L``, so the model at ``u`` is
        ``base + sum_i u_i * channel_i`` for both coefficient tables.
        """
        d = self.dictionary
        base = identify(GeneratorMatrix(self.L0, d))
        chans = []
        for A in self.channels:
            g = GeneratorMatrix(A, d)
            drift = identify_drift(g)
            with warnings.catch_warnings():
                # the base model already reported representability
                warnings.simplefilter("ignore")
                chans.append(SdeModel(drift, identify_diffusion(g, drift), d))
        return base, chans

    def to_dict(self) -> dict:
        return {
            "kind": "affine-family",
            "dictionary": self.dictionary.to_dict(),
            "L0": self.L0,
            "channels": self.channels,
            "region": {"lower": self.lower, "upper": self.upper},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AffineGeneratorFamily":
        return cls(
            np.array(data["L0"], dtype=float),
            np.array(data["channels"], dtype=float),
            Dictionary.from_dict(data["dictionary"]),
            np.array(data["region"]["lower"], dtype=float),
            np.array(data["region"]["upper"], dtype=float),
        )

    def to_json(self) -> str:
        return _jsonio.dumps(self.to_dict())


def default_controls(lower, upper) -> np.ndarray:
    """Zero plus one unit offset per channel, scaled to the decision box."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    du = len(lower)
    scale = np.where(np.abs(upper) >= np.abs(lower), upper, lower)
    scale = np.where(scale == 0, 1.0, scale)
    return np.vstack([np.zeros(du), np.diag(scale)])


def assemble_family(controls, generators, dictionary: Dictionary, lower=None, upper=None) -> AffineGeneratorFamily:
    """Affine fit of ``L(u_c) - L(0)`` against ``u_c`` over the given controls.

    ``controls`` must contain the zero control and span ``R^{d_u}``; with
    exactly ``d_u`` offsets the fit is the finite difference
    ``(L(s e_i) - L0) / s``, extra controls are used in a least-squares sense.
    """
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    mats = np.array([g.L if isinstance(g, GeneratorMatrix) else np.asarray(g, dtype=float) for g in generators])
    zero = np.flatnonzero(np.all(controls == 0, axis=1))
    if zero.size == 0:
        raise ConfigurationError("the control set must contain u = 0")
    L0 = mats[zero[0]]
    others = np.array([c for c in range(len(controls)) if c != zero[0]], dtype=int)
    du = controls.shape[1]
    U = controls[others]
    if len(U) < du or np.linalg.matrix_rank(U) < du:
        raise ConfigurationError("control offsets are rank deficient")
    n = dictionary.size
    Y = (mats[others] - L0).reshape(len(others), n * n)
    A = np.linalg.lstsq(U, Y, rcond=None)[0].reshape(du, n, n)
    if lower is None:
        lower = controls.min(axis=0)
    if upper is None:
        upper = controls.max(axis=0)
    return AffineGeneratorFamily(L0, A, dictionary, lower, upper)


def learn_affine_family(dictionary: Dictionary, sampler, controls, ridge: float = 0.0, lower=None, upper=None) -> AffineGeneratorFamily:
    """Fit one generator per constant control, then the affine family.

    ``sampler(u)`` returns ``(X, B, A)`` arrays of states with pointwise drift
    and diffusion observed under control ``u``.
    """
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    gens = []
    for u in controls:
        X, B, A = sampler(u)
        PsiX, dPsiX = build_matrices(dictionary, X=X, B=B, A=A)
        gens.append(estimate_generator(PsiX, dPsiX, ridge, dictionary))
    return assemble_family(controls, gens, dictionary, lower, upper)


def fit_affine_family(dictionary: Dictionary, X, U, B, A=None, ridge: float = 0.0, lower=None, upper=None) -> AffineGeneratorFamily:
    """Pooled least-squares fit of ``L(u) = L0 + sum_i u_i A_i`` to samples at mixed controls.

    Every sample carries its own constant control, so the regression features
    are ``psi(x)``, ``u_1 psi(x)``, ..., ``u_du psi(x)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    U = np.asarray(U, dtype=float).reshape(len(X), -1)
    PsiX, dPsiX = build_matrices(dictionary, X=X, B=B, A=A)
    feats = np.vstack([PsiX] + [PsiX * U[:, i] for i in range(U.shape[1])])
    n = dictionary.size
    if ridge > 0:
        G = feats @ feats.T + ridge * np.eye(len(feats))
        M = np.linalg.solve(G, feats @ dPsiX.T).T
    else:
        M = np.linalg.lstsq(feats.T, dPsiX.T, rcond=PINV_RCOND)[0].T
    blocks = M.reshape(n, U.shape[1] + 1, n)
    L0 = blocks[:, 0, :].T
    channels = np.array([blocks[:, i + 1, :].T for i in range(U.shape[1])])
    lower = U.min(axis=0) if lower is None else lower
    upper = U.max(axis=0) if upper is None else upper
    return AffineGeneratorFamily(L0, channels, dictionary, lower, upper)


def interpolate(family: AffineGeneratorFamily, u) -> GeneratorMatrix:
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if np.any(u < family.lower - 1e-12) or np.any(u > family.upper + 1e-12):
        warnings.warn(
            f"control {u} lies outside the training region [{family.lower}, {family.upper}]",
            ExtrapolationWarning,
            stacklevel=2,
        )
    return GeneratorMatrix(family.matrix(u), family.dictionary)


def affinity_defect(L_mix, L_a, L_b, alpha: float) -> float:
    """Frobenius norm of ``L(alpha u_a + (1-alpha) u_b) - alpha L(u_a) - (1-alpha) L(u_b)``."""
    get = lambda g: g.L if isinstance(g, GeneratorMatrix) else np.asarray(g)
    return float(np.linalg.norm(get(L_mix) - alpha * get(L_a) - (1 - alpha) * get(L_b)))


@dataclass(frozen=True, eq=False)
class AugmentedModel:
    """Generator and identified SDE on the augmented space ``[x, u]``."""

    generator: GeneratorMatrix
    model: SdeModel
    state_dim: int

    @property
    def dictionary(self) -> Dictionary:
        return self.generator.dictionary

    @property
    def control_dim(self) -> int:
        return self.dictionary.dimension - self.state_dim

    @property
    def control_coordinates(self) -> np.ndarray:
        return np.arange(self.state_dim, self.dictionary.dimension)

    def substitute(self, u) -> SdeModel:
        """State-only SDE with the control coordinates frozen at ``u``.

        Monomials ``x^p u^q`` collapse to ``u^q`` times ``x^p``; the result
        lives on the state dictionary of the same maximal degree.
        """
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if u.shape != (self.control_dim,):
            raise ConfigurationError(f"control must have {self.control_dim} components")
        d = self.dictionary
        ds = monomials(self.state_dim, d.max_degree)
        P = np.zeros((ds.size, d.size))
        for k, e in enumerate(d.exponents):
            P[ds.index_of(e[: self.state_dim]), k] = np.prod(u ** e[self.state_dim :])
        s = self.state_dim
        drift = P @ self.model.drift[:, :s]
        diffusion = self.model.diffusion[:s, :s] @ P.T
        return SdeModel(drift, diffusion, ds)

    def to_dict(self) -> dict:
        return {
            "kind": "augmented",
            "state_dim": self.state_dim,
            "control_coordinates": self.control_coordinates,
            "generator": self.generator.to_dict(),
            "model": self.model.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AugmentedModel":
        return cls(
            GeneratorMatrix.from_dict(data["generator"]),
            SdeModel.from_dict(data["model"]),
            int(data["state_dim"]),
        )

    def to_json(self) -> str:
        return _jsonio.dumps(self.to_dict())


def augment_samples(X, U, B, udot=None, A=None, control_diffusion=None):
    """Stack ``[x, u]`` samples with drift ``[b, udot]`` and block diffusion.

    ``control_diffusion`` optionally supplies ``(a12, a22)`` blocks of the
    augmented ``a``; by default the control rows and columns are zero.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    U = np.asarray(U, dtype=float).reshape(len(X), -1)
    B = np.asarray(B, dtype=float).reshape(X.shape)
    m, d = X.shape
    du = U.shape[1]
    udot = np.zeros((m, du)) if udot is None else np.asarray(udot, dtype=float).reshape(m, du)
    Xa = np.hstack([X, U])
    Ba = np.hstack([B, udot])
    Aa = np.zeros((m, d + du, d + du))
    if A is not None:
        Aa[:, :d, :d] = np.asarray(A, dtype=float).reshape(m, d, d)
    if control_diffusion is not None:
        a12, a22 = control_diffusion
        a12 = np.asarray(a12, dtype=float).reshape(m, d, du)
        Aa[:, :d, d:] = a12
        Aa[:, d:, :d] = np.swapaxes(a12, 1, 2)
        Aa[:, d:, d:] = np.asarray(a22, dtype=float).reshape(m, du, du)
    return Xa, Ba, Aa


def learn_augmented(
    dictionary: Dictionary,
    X,
    U,
    B,
    udot=None,
    A=None,
    control_diffusion=None,
    ridge: float = 0.0,
    drop_control_columns: bool = False,
) -> AugmentedModel:
    """gEDMD on the augmented state, followed by drift/diffusion identification.

    ``drop_control_columns`` zeroes the generator columns belonging to the
    control coordinates, i.e. the control law is not identified.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    U = np.asarray(U, dtype=float).reshape(len(X), -1)
    d = X.shape[1]
    if dictionary.dimension != d + U.shape[1]:
        raise ConfigurationError(
            f"augmented dictionary has dimension {dictionary.dimension}, expected {d + U.shape[1]}"
        )
    Xa, Ba, Aa = augment_samples(X, U, B, udot, A, control_diffusion)
    PsiX, dPsiX = build_matrices(dictionary, X=Xa, B=Ba, A=Aa)
    gen = estimate_generator(PsiX, dPsiX, ridge, dictionary)
    if drop_control_columns:
        L = gen.L.copy()
        L[:, dictionary.coordinate_indices[d:]] = 0.0
        gen = GeneratorMatrix(L, dictionary, gen.m)
    return AugmentedModel(gen, identify(gen), d)
