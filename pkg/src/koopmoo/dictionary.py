"""Monomial dictionaries with exact derivatives and generator action.

Basis functions are monomials ``prod_i x_i**e_i`` indexed by their exponent
multi-index.  Ordering is by total degree, then descending lexicographic
multi-index, so for two variables and degree two the basis reads
``1, x1, x2, x1**2, x1*x2, x2**2``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Immutable set of monomials over ``R^dimension``."""

    exponents: np.ndarray
    max_degree: int
    _index: dict = field(init=False, repr=False, compare=False)
    _chain: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        exps = np.array(self.exponents, dtype=np.int64)
        if exps.ndim != 2:
            raise ConfigurationError("exponents must be a 2-D array")
        exps.setflags(write=False)
        object.__setattr__(self, "exponents", exps)
        index = {tuple(int(v) for v in e): k for k, e in enumerate(exps)}
        if len(index) != len(exps):
            raise ConfigurationError("exponent multi-indices must be distinct")
        object.__setattr__(self, "_index", index)
        D = exps.shape[1]
        object.__setattr__(self, "_chain", _build_chain(exps, index))
        if (0,) * D not in index:
            raise ConfigurationError("dictionary must contain the constant function")
        for i in range(D):
            if _unit(i, D) not in index:
                raise ConfigurationError(f"dictionary must contain coordinate x{i + 1}")

    @property
    def dimension(self) -> int:
        return self.exponents.shape[1]

    @property
    def size(self) -> int:
        return self.exponents.shape[0]

    def __len__(self) -> int:
        return self.size

    def __eq__(self, other):
        if not isinstance(other, Dictionary):
            return NotImplemented
        return self.max_degree == other.max_degree and np.array_equal(
            self.exponents, other.exponents
        )

    def __hash__(self):
        return hash((self.max_degree, self.exponents.tobytes()))

    def index_of(self, exponent) -> int | None:
        return self._index.get(tuple(int(v) for v in exponent))

    @property
    def constant_index(self) -> int:
        return self._index[(0,) * self.dimension]

    @property
    def coordinate_indices(self) -> np.ndarray:
        """Basis positions of ``x_1 .. x_D`` (the selection matrix ``B`` as indices)."""
        D = self.dimension
        return np.array([self._index[_unit(i, D)] for i in range(D)])

    @property
    def is_coordinate(self) -> np.ndarray:
        flags = np.zeros(self.size, dtype=bool)
        flags[self.coordinate_indices] = True
        return flags

    def degrees(self) -> np.ndarray:
        return self.exponents.sum(axis=1)

    def labels(self, names=None) -> list[str]:
        names = names or [f"x{i + 1}" for i in range(self.dimension)]
        out = []
        for e in self.exponents:
            parts = [n if p == 1 else f"{n}^{p}" for n, p in zip(names, e) if p]
            out.append("*".join(parts) or "1")
        return out

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, x) -> np.ndarray:
        """Basis values; ``x`` of shape ``(..., D)`` gives ``(..., size)``."""
        if self._chain is None:
            return self.partial(x, (0,) * self.dimension)
        x = self._check_points(x)
        out = np.empty(x.shape[:-1] + (self.size,))
        out[..., self.constant_index] = 1.0
        # each monomial is a lower-degree member times one coordinate
        for targets, parents, coords in self._chain:
            out[..., targets] = out[..., parents] * x[..., coords]
        return out

    def partial(self, x, orders) -> np.ndarray:
        """Mixed partial derivative ``d^orders psi_k`` of every basis function."""
        x = self._check_points(x)
        orders = np.asarray(orders, dtype=np.int64)
        shifted = self.exponents - orders
        alive = np.all(shifted >= 0, axis=1)
        shifted = np.where(shifted < 0, 0, shifted)
        # falling factorials e (e-1) ... (e-o+1)
        coef = np.ones(self.size)
        for i, o in enumerate(orders):
            for r in range(int(o)):
                coef = coef * np.maximum(self.exponents[:, i] - r, 0)
        coef = np.where(alive, coef, 0.0)
        powers = x[..., :, None] ** np.arange(self.max_degree + 1)
        vals = np.ones(x.shape[:-1] + (self.size,))
        for i in range(self.dimension):
            vals = vals * powers[..., i, shifted[:, i]]
        return vals * coef

    def gradient(self, x) -> np.ndarray:
        """Gradients, shape ``(..., size, D)``."""
        D = self.dimension
        return np.stack([self.partial(x, _unit(i, D)) for i in range(D)], axis=-1)

    def hessian(self, x) -> np.ndarray:
        """Hessians, shape ``(..., size, D, D)``."""
        D = self.dimension
        x = self._check_points(x)
        H = np.empty(x.shape[:-1] + (self.size, D, D))
        for i in range(D):
            for j in range(i, D):
                o = np.zeros(D, dtype=np.int64)
                o[i] += 1
                o[j] += 1
                H[..., i, j] = self.partial(x, o)
                H[..., j, i] = H[..., i, j]
        return H

    def generator_action(self, x, b, a) -> np.ndarray:
        """``sum_i b_i d_i psi + 1/2 sum_ij a_ij d_ij psi`` at each point.

        ``x``, ``b`` have shape ``(m, D)`` and ``a`` shape ``(m, D, D)``;
        returns ``(m, size)``.  Hessians are never materialised in full.
        """
        x = np.atleast_2d(self._check_points(x))
        b = np.atleast_2d(np.asarray(b, dtype=float))
        a = np.asarray(a, dtype=float)
        if a.ndim == 2:
            a = a[None]
        D = self.dimension
        m = x.shape[0]
        if b.shape != (m, D) or a.shape != (m, D, D):
            raise ConfigurationError(
                f"drift/diffusion shapes {b.shape}, {a.shape} do not match {m} points in R^{D}"
            )
        if np.max(np.abs(a - np.swapaxes(a, 1, 2)), initial=0.0) > SYMMETRY_TOL:
            raise ConfigurationError("diffusion matrix a must be symmetric")
        out = np.zeros((m, self.size))
        for i in range(D):
            if np.any(b[:, i]):
                out += b[:, i, None] * self.partial(x, _unit(i, D))
            for j in range(i, D):
                if not np.any(a[:, i, j]):
                    continue
                o = np.zeros(D, dtype=np.int64)
                o[i] += 1
                o[j] += 1
                # off-diagonal pairs appear twice in the double sum
                w = 0.5 if i == j else 1.0
                out += w * a[:, i, j, None] * self.partial(x, o)
        return out

    # -- coefficient algebra ------------------------------------------------

    def multiply_by_coordinate(self, coeffs, j: int):
        """Expansion of ``x_j * f`` for ``f = coeffs @ psi``.

        ``coeffs`` may carry trailing axes.  Returns ``(new_coeffs, dropped)``
        where ``dropped`` is the largest absolute coefficient that fell outside
        the dictionary.
        """
        coeffs = np.asarray(coeffs, dtype=float)
        out = np.zeros_like(coeffs)
        dropped = 0.0
        shift = np.array(_unit(j, self.dimension))
        for k, e in enumerate(self.exponents):
            target = self.index_of(e + shift)
            if target is None:
                dropped = max(dropped, float(np.max(np.abs(coeffs[k]), initial=0.0)))
            else:
                out[target] += coeffs[k]
        return out, dropped

    # -- serialisation ------------------------------------------------------

    def to_dict(self) -> dict:
        return {"dimension": self.dimension, "max_degree": self.max_degree, "ordering": "degree-lex"}

    @classmethod
    def from_dict(cls, data: dict) -> "Dictionary":
        if data.get("ordering", "degree-lex") != "degree-lex":
            raise ConfigurationError(f"unsupported ordering {data['ordering']!r}")
        return monomials(int(data["dimension"]), int(data["max_degree"]))

    def _check_points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dimension:
            raise ConfigurationError(
                f"points have dimension {x.shape[-1]}, dictionary expects {self.dimension}"
            )
        return x


def _build_chain(exps, index):
    """Per-degree (targets, parents, coordinates) or ``None`` if not closed downward."""
    degs = exps.sum(axis=1)
    chain = []
    for d in range(1, int(degs.max(initial=0)) + 1):
        targets, parents, coords = [], [], []
        for k in np.flatnonzero(degs == d):
            j = int(np.flatnonzero(exps[k])[0])
            e = exps[k].copy()
            e[j] -= 1
            parent = index.get(tuple(int(v) for v in e))
            if parent is None:
                return None
            targets.append(k)
            parents.append(parent)
            coords.append(j)
        chain.append((np.array(targets), np.array(parents), np.array(coords)))
    return chain


def _unit(i: int, D: int) -> tuple:
    return tuple(1 if j == i else 0 for j in range(D))


def monomials(dimension: int, max_degree: int) -> Dictionary:
    """All monomials in ``dimension`` variables of total degree ``<= max_degree``."""
    if dimension < 1 or max_degree < 1:
        raise ConfigurationError("dimension and max_degree must be >= 1")
    exps = []
    for deg in range(max_degree + 1):
        level = [
            e for e in itertools.product(range(deg, -1, -1), repeat=dimension) if sum(e) == deg
        ]
        exps.extend(level)
    return Dictionary(np.array(exps, dtype=np.int64), max_degree)


def eval_basis(dictionary: Dictionary, x) -> np.ndarray:
    return dictionary.evaluate(x)


def apply_generator(dictionary: Dictionary, k: int, b, a, x) -> float:
    """Generator applied to basis function ``k`` at a single point."""
    x = np.asarray(x, dtype=float)
    b = np.asarray(b, dtype=float)
    a = np.asarray(a, dtype=float)
    return float(dictionary.generator_action(x[None], b[None], a[None])[0, k])
