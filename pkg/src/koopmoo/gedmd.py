"""Generator EDMD: data matrices, least-squares generator, system identification.

Layout conventions.  ``PsiX`` and ``dPsiX`` are ``(size, m)``.  The regression
``dPsiX ~ M PsiX`` gives ``M`` whose row ``k`` expands the generator applied to
basis function ``k``; the stored generator matrix is ``L = M.T``, so an
observable with coefficients ``c`` evolves as ``dc/dt = L c``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _jsonio
from .dictionary import Dictionary
from .errors import (
    ConfigurationError,
    DegenerateDataError,
    EmptyModelWarning,
    IndefiniteDiffusionError,
    RepresentabilityWarning,
)

PINV_RCOND = 1e-12
PSD_FLOOR = 1e-10


@dataclass(frozen=True)
class SamplePoint:
    x: np.ndarray
    b: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        a = np.asarray(self.a, dtype=float).reshape(len(x), len(x))
        if b.shape != x.shape:
            raise ConfigurationError("drift and state dimensions differ")
        if np.max(np.abs(a - a.T), initial=0.0) > 1e-12:
            raise ConfigurationError("diffusion sample must be symmetric")
        if len(x) and np.linalg.eigvalsh(a).min() < -PSD_FLOOR:
            raise IndefiniteDiffusionError("diffusion sample is not positive semidefinite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "a", a)


def stack_samples(samples):
    """Split a list of SamplePoints into arrays ``(X, B, A)``."""
    X = np.array([s.x for s in samples])
    B = np.array([s.b for s in samples])
    A = np.array([s.a for s in samples])
    return X, B, A


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    L: np.ndarray
    dictionary: Dictionary
    m: int = 0

    def __post_init__(self):
        L = np.asarray(self.L, dtype=float)
        n = self.dictionary.size
        if L.shape != (n, n):
            raise ConfigurationError(f"generator must be {n}x{n}, got {L.shape}")
        object.__setattr__(self, "L", L)

    @property
    def M(self) -> np.ndarray:
        return self.L.T

    def to_dict(self) -> dict:
        return {"dictionary": self.dictionary.to_dict(), "m": self.m, "L": self.L}

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorMatrix":
        return cls(np.array(data["L"], dtype=float), Dictionary.from_dict(data["dictionary"]), int(data.get("m", 0)))

    def to_json(self) -> str:
        return _jsonio.dumps(self.to_dict())


@dataclass(frozen=True, eq=False)
class SdeModel:
    """Drift and diffusion as expansions over a dictionary.

    ``drift`` has shape ``(size, D)`` with ``b_i(x) = psi(x) @ drift[:, i]``;
    ``diffusion`` has shape ``(D, D, size)`` with ``a_ij(x) = diffusion[i, j] @ psi(x)``.
    """

    drift: np.ndarray
    diffusion: np.ndarray
    dictionary: Dictionary

    def __post_init__(self):
        n, D = self.dictionary.size, self.dictionary.dimension
        drift = np.asarray(self.drift, dtype=float)
        diff = np.asarray(self.diffusion, dtype=float)
        if drift.shape != (n, D) or diff.shape != (D, D, n):
            raise ConfigurationError("coefficient shapes do not match the dictionary")
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "diffusion", diff)

    def b(self, x) -> np.ndarray:
        return self.dictionary.evaluate(x) @ self.drift

    def a(self, x) -> np.ndarray:
        psi = self.dictionary.evaluate(x)
        return np.einsum("ijk,...k->...ij", self.diffusion, psi)

    def sigma(self, x) -> np.ndarray:
        return sigma_pointwise(self, x)

    def to_dict(self) -> dict:
        return {
            "dictionary": self.dictionary.to_dict(),
            "drift": self.drift,
            "diffusion": self.diffusion,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SdeModel":
        return cls(
            np.array(data["drift"], dtype=float),
            np.array(data["diffusion"], dtype=float),
            Dictionary.from_dict(data["dictionary"]),
        )

    def to_json(self) -> str:
        return _jsonio.dumps(self.to_dict())


def build_matrices(dictionary: Dictionary, samples=None, *, X=None, B=None, A=None):
    """Assemble ``(PsiX, dPsiX)`` from sample points or from stacked arrays."""
    if samples is not None:
        if len(samples) == 0:
            raise ConfigurationError("at least one sample is required")
        X, B, A = stack_samples(samples)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m = X.shape[0]
    if m < 1:
        raise ConfigurationError("at least one sample is required")
    if X.shape[1] != dictionary.dimension:
        raise ConfigurationError(
            f"samples live in R^{X.shape[1]}, dictionary in R^{dictionary.dimension}"
        )
    B = np.zeros_like(X) if B is None else np.asarray(B, dtype=float).reshape(X.shape)
    D = X.shape[1]
    A = np.zeros((m, D, D)) if A is None else np.asarray(A, dtype=float).reshape(m, D, D)
    PsiX = dictionary.evaluate(X).T
    dPsiX = dictionary.generator_action(X, B, A).T
    return PsiX, dPsiX


def estimate_generator(PsiX, dPsiX, ridge: float = 0.0, dictionary: Dictionary | None = None) -> GeneratorMatrix:
    """Least-squares generator ``L = (dPsiX PsiX^+)^T``.

    With ``ridge > 0`` the Tikhonov-regularised normal equations are solved
    instead of the pseudoinverse.
    """
    PsiX = np.asarray(PsiX, dtype=float)
    dPsiX = np.asarray(dPsiX, dtype=float)
    if PsiX.shape != dPsiX.shape:
        raise ConfigurationError(f"matrix shapes differ: {PsiX.shape} vs {dPsiX.shape}")
    if ridge < 0:
        raise ConfigurationError("ridge must be non-negative")
    if dictionary is None:
        raise ConfigurationError("dictionary is required to build a GeneratorMatrix")
    if not np.any(PsiX):
        raise DegenerateDataError("PsiX is identically zero")
    n = PsiX.shape[0]
    if ridge > 0:
        G = PsiX @ PsiX.T + ridge * np.eye(n)
        M = np.linalg.solve(G, PsiX @ dPsiX.T).T
    else:
        # lstsq on the transposed system is the pseudoinverse solution
        M = np.linalg.lstsq(PsiX.T, dPsiX.T, rcond=PINV_RCOND)[0].T
    return GeneratorMatrix(M.T, dictionary, PsiX.shape[1])


def fit_generator(dictionary: Dictionary, X, B, A=None, ridge: float = 0.0) -> GeneratorMatrix:
    PsiX, dPsiX = build_matrices(dictionary, X=X, B=B, A=A)
    return estimate_generator(PsiX, dPsiX, ridge, dictionary)


def identify_drift(gen: GeneratorMatrix) -> np.ndarray:
    """Coefficients ``(size, D)`` of the drift, i.e. ``L B``."""
    return gen.L[:, gen.dictionary.coordinate_indices].copy()


def _support_degree(coeffs, degrees, rtol=1e-12) -> int:
    mags = np.abs(coeffs).reshape(len(degrees), -1).max(axis=1)
    scale = mags.max(initial=0.0)
    if scale == 0:
        return 0
    return int(degrees[mags > rtol * scale].max())


def identify_diffusion(gen: GeneratorMatrix, drift: np.ndarray | None = None) -> np.ndarray:
    """Coefficients ``(D, D, size)`` of ``a_ij = L(x_i x_j) - b_i x_j - b_j x_i``."""
    d = gen.dictionary
    D = d.dimension
    if drift is None:
        drift = identify_drift(gen)
    deg = _support_degree(drift, d.degrees())
    if deg + 1 > d.max_degree:
        warnings.warn(
            f"drift has degree {deg}; products b_i x_j exceed dictionary degree {d.max_degree} and are truncated",
            RepresentabilityWarning,
            stacklevel=2,
        )
    times = [d.multiply_by_coordinate(drift[:, i], j)[0] for i in range(D) for j in range(D)]
    bx = np.array(times).reshape(D, D, d.size)  # bx[i, j] = b_i * x_j
    table = np.zeros((D, D, d.size))
    for i in range(D):
        for j in range(D):
            e = np.zeros(D, dtype=np.int64)
            e[i] += 1
            e[j] += 1
            k = d.index_of(e)
            if k is None:
                raise ConfigurationError(f"dictionary lacks the product x{i + 1}*x{j + 1}")
            table[i, j] = gen.L[:, k] - bx[i, j] - bx[j, i]
    return 0.5 * (table + table.transpose(1, 0, 2))


def identify(gen: GeneratorMatrix) -> SdeModel:
    drift = identify_drift(gen)
    return SdeModel(drift, identify_diffusion(gen, drift), gen.dictionary)


def psd_factor(a, floor: float = PSD_FLOOR) -> np.ndarray:
    """Lower-triangular ``s`` with ``s s^T = a`` for a semidefinite ``a``.

    Eigenvalues in ``[-floor, 0)`` are clamped to zero; anything below raises.
    Zero pivots are skipped, which handles singular matrices.
    """
    a = np.asarray(a, dtype=float)
    a = 0.5 * (a + a.T)
    D = a.shape[0]
    lam, V = np.linalg.eigh(a)
    if lam.size and lam.min() < -floor:
        raise IndefiniteDiffusionError(f"diffusion has eigenvalue {lam.min():.3e}")
    if lam.size and lam.min() < 0:
        a = (V * np.maximum(lam, 0.0)) @ V.T
    scale = max(float(np.abs(a).max(initial=0.0)), 1.0)
    L = np.zeros((D, D))
    for j in range(D):
        piv = a[j, j] - L[j, :j] @ L[j, :j]
        if piv <= 1e-14 * scale:
            continue
        L[j, j] = np.sqrt(piv)
        L[j + 1 :, j] = (a[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L


def sigma_pointwise(model: SdeModel, x) -> np.ndarray:
    return psd_factor(model.a(np.asarray(x, dtype=float)))


def stlsq(library, targets, threshold: float, max_iter: int = 25):
    """Sequentially thresholded least squares: ``targets ~ library @ coeffs``.

    ``library`` is ``(m, p)``, ``targets`` ``(m, q)``; returns ``(p, q)``.
    """
    library = np.asarray(library, dtype=float)
    targets = np.asarray(targets, dtype=float)
    coeffs = np.linalg.lstsq(library, targets, rcond=PINV_RCOND)[0]
    return sparsify(coeffs, threshold, library, targets, max_iter=max_iter)


def sparsify(coefficients, threshold: float, library=None, targets=None, max_iter: int = 25):
    """Iterative hard thresholding with least-squares refits on the support.

    Without ``library``/``targets`` only a single thresholding pass is made.
    For a generator pass ``coefficients=L``, ``library=PsiX.T`` and
    ``targets=dPsiX.T``.
    """
    if threshold < 0:
        raise ConfigurationError("threshold must be non-negative")
    coeffs = np.array(coefficients, dtype=float)
    if threshold == 0:
        return coeffs
    squeeze = coeffs.ndim == 1
    if squeeze:
        coeffs = coeffs[:, None]
        if targets is not None:
            targets = np.asarray(targets, dtype=float)[:, None]
    support = np.abs(coeffs) >= threshold
    for _ in range(max_iter):
        coeffs[~support] = 0.0
        if library is None:
            break
        for q in range(coeffs.shape[1]):
            cols = support[:, q]
            if cols.any():
                coeffs[cols, q] = np.linalg.lstsq(library[:, cols], targets[:, q], rcond=PINV_RCOND)[0]
        new_support = support & (np.abs(coeffs) >= threshold)
        if np.array_equal(new_support, support):
            break
        support = new_support
    coeffs[~support] = 0.0
    if not support.any():
        warnings.warn("every coefficient fell below the threshold", EmptyModelWarning, stacklevel=2)
    return coeffs[:, 0] if squeeze else coeffs


def sparsify_generator(gen: GeneratorMatrix, threshold: float, PsiX, dPsiX) -> GeneratorMatrix:
    L = sparsify(gen.L, threshold, np.asarray(PsiX).T, np.asarray(dPsiX).T)
    return GeneratorMatrix(L, gen.dictionary, gen.m)
