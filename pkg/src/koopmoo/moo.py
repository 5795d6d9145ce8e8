"""Set-oriented multi-objective solver.

Boxes of the current collection are leaves of a binary tree over the
decision box ``R``.  Every subdivision halves each leaf along the next
coordinate in turn, so after ``s`` subdivisions a leaf is fully described by
one integer cell index per coordinate.  Leaves are stored that way: memory is
linear in the leaf count and box geometry is recomputed on demand.

Selection is set-wise through a global archive of mutually non-dominated
sample evaluations.  A box survives when one of its test points enters the
archive or an archive member already lies inside it.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .errors import ConfigurationError, SamplingWarning

THETA = 0.5
_CHUNK = 2048


# -- dominance ---------------------------------------------------------------


def dominates(fa, fb) -> bool:
    """``fa <= fb`` componentwise and ``fa != fb``.

    A vector containing ``+inf`` is dominated by every all-finite vector.
    """
    fa = np.asarray(fa, dtype=float).ravel()
    fb = np.asarray(fb, dtype=float).ravel()
    if fa.shape != fb.shape:
        raise ConfigurationError(f"objective vectors differ in length: {fa.size} vs {fb.size}")
    fin_a, fin_b = np.all(np.isfinite(fa)), np.all(np.isfinite(fb))
    if fin_a and not fin_b:
        return True
    if fin_b and not fin_a:
        return False
    return bool(np.all(fa <= fb) and np.any(fa != fb))


def _nondominated_2d(F):
    order = np.lexsort((F[:, 1], F[:, 0]))
    f1, f2 = F[order, 0], F[order, 1]
    start = np.r_[True, f1[1:] != f1[:-1]]
    group = np.cumsum(start) - 1
    first = np.flatnonzero(start)
    # the head of each equal-f1 group carries the group's smallest f2
    group_min = f2[first][group]
    run = np.minimum.accumulate(f2)
    before = np.r_[np.inf, run[first[1:] - 1]] if len(first) > 1 else np.array([np.inf])
    prev_min = before[group]
    dominated = (prev_min <= f2) | (group_min < f2)
    keep = np.empty(len(F), dtype=bool)
    keep[order] = ~dominated
    return keep


def _nondominated_general(F):
    m = len(F)
    keep = np.ones(m, dtype=bool)
    for lo in range(0, m, _CHUNK):
        A = F[lo : lo + _CHUNK]
        dom = np.zeros(len(A), dtype=bool)
        for lo2 in range(0, m, _CHUNK):
            B = F[lo2 : lo2 + _CHUNK]
            le = np.all(B[None, :, :] <= A[:, None, :], axis=2)
            lt = np.any(B[None, :, :] < A[:, None, :], axis=2)
            dom |= np.any(le & lt, axis=1)
        keep[lo : lo + _CHUNK] = ~dom
    return keep


def nondominated_mask(F) -> np.ndarray:
    """Rows of ``F`` (m, k) not dominated by any other row.  Equal rows all survive."""
    F = np.asarray(F, dtype=float)
    if F.ndim != 2:
        raise ConfigurationError("objective table must be 2-D")
    m = len(F)
    if m == 0:
        return np.zeros(0, dtype=bool)
    finite = np.all(np.isfinite(F), axis=1)
    keep = np.zeros(m, dtype=bool)
    pool = np.flatnonzero(finite) if finite.any() else np.arange(m)
    sub = F[pool]
    keep[pool] = _nondominated_2d(sub) if F.shape[1] == 2 and finite.any() else _nondominated_general(sub)
    return keep


# -- boxes -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Box:
    center: np.ndarray
    radius: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        r = np.atleast_1d(np.asarray(self.radius, dtype=float))
        if c.shape != r.shape:
            raise ConfigurationError("center and radius must have the same length")
        if np.any(r <= 0):
            raise ConfigurationError("box radius must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", r)

    @classmethod
    def from_bounds(cls, lower, upper) -> "Box":
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        return cls(0.5 * (lower + upper), 0.5 * (upper - lower))

    @property
    def lower(self) -> np.ndarray:
        return self.center - self.radius

    @property
    def upper(self) -> np.ndarray:
        return self.center + self.radius

    @property
    def volume(self) -> float:
        return float(np.prod(2 * self.radius))

    @property
    def diameter(self) -> float:
        return float(2 * np.linalg.norm(self.radius))

    def contains(self, y, tol: float = 0.0) -> bool:
        y = np.asarray(y, dtype=float)
        return bool(np.all(np.abs(y - self.center) <= self.radius + tol))


class BoxTree:
    """Binary subdivision tree over ``R``; only the leaf level is kept.

    The split at depth ``k`` halves coordinate ``k mod n``.
    """

    theta = THETA

    def __init__(self, lower, upper):
        root = Box.from_bounds(lower, upper)
        self.root = root
        self.depth = 0
        self.cells = np.zeros((1, root.center.size), dtype=np.int64)
        self.history = [1]

    @classmethod
    def restore(cls, lower, upper, depth: int, cells, history=None) -> "BoxTree":
        tree = cls(lower, upper)
        tree.depth = int(depth)
        tree.cells = np.asarray(cells, dtype=np.int64).reshape(-1, tree.dim)
        tree.history = list(history) if history is not None else [len(tree.cells)]
        return tree

    @classmethod
    def from_centers(cls, lower, upper, depth: int, centers) -> "BoxTree":
        """Rebuild leaves from exported centers."""
        tree = cls.restore(lower, upper, depth, np.zeros((0, len(np.atleast_1d(lower)))))
        C = np.atleast_2d(np.asarray(centers, dtype=float))
        tree.cells = np.rint((C - tree.root.lower) / tree.width - 0.5).astype(np.int64)
        tree.history = [len(tree.cells)]
        return tree

    @property
    def dim(self) -> int:
        return self.root.center.size

    def __len__(self) -> int:
        return len(self.cells)

    def splits(self, depth: int | None = None) -> np.ndarray:
        """Number of halvings applied to each coordinate at ``depth``."""
        s = self.depth if depth is None else depth
        n = self.dim
        return s // n + (np.arange(n) < s % n)

    @property
    def width(self) -> np.ndarray:
        return 2 * self.root.radius / 2.0 ** self.splits()

    @property
    def radius(self) -> np.ndarray:
        return 0.5 * self.width

    def centers(self) -> np.ndarray:
        return self.root.lower + (self.cells + 0.5) * self.width

    def boxes(self) -> list[Box]:
        r = self.radius
        return [Box(c, r) for c in self.centers()]

    def subdivide(self) -> np.ndarray:
        """Halve every leaf along the cycling coordinate; returns the new centers."""
        j = self.depth % self.dim
        lo = self.cells.copy()
        lo[:, j] *= 2
        hi = lo.copy()
        hi[:, j] += 1
        # children interleaved so that leaf order stays lexicographic per parent
        self.cells = np.stack([lo, hi], axis=1).reshape(-1, self.dim)
        self.depth += 1
        return self.centers()

    def keep(self, mask) -> None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (len(self.cells),):
            raise ConfigurationError("mask length must equal the leaf count")
        self.cells = self.cells[mask]
        self.history.append(len(self.cells))

    def locate(self, Y) -> np.ndarray:
        """Leaf index containing each point of ``Y`` (m, n), or -1."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        w = self.width
        counts = 2 ** self.splits()
        idx = np.floor((Y - self.root.lower) / w).astype(np.int64)
        inside = np.all((idx >= -1) & (idx <= counts), axis=1)
        # points on the outer boundary belong to the last cell
        idx = np.clip(idx, 0, counts - 1)
        table = {tuple(c): k for k, c in enumerate(self.cells.tolist())}
        out = np.array([table.get(tuple(r), -1) for r in idx.tolist()], dtype=np.int64)
        out[~inside] = -1
        return out


# -- archive -----------------------------------------------------------------


class ParetoArchive:
    """Mutually non-dominated (decision, objective) pairs."""

    def __init__(self, dim: int, n_obj: int):
        self.X = np.empty((0, dim))
        self.F = np.empty((0, n_obj))

    @classmethod
    def restore(cls, X, F) -> "ParetoArchive":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        F = np.atleast_2d(np.asarray(F, dtype=float))
        ar = cls(X.shape[1], F.shape[1])
        ar.X, ar.F = X, F
        return ar

    def __len__(self) -> int:
        return len(self.X)

    def insert(self, X, F) -> np.ndarray:
        """Merge candidates and prune; returns a mask of candidates that were kept."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        F = np.atleast_2d(np.asarray(F, dtype=float))
        if len(X) != len(F) or F.shape[1] != self.F.shape[1]:
            raise ConfigurationError("candidate shapes do not match the archive")
        allF = np.vstack([self.F, F])
        keep = nondominated_mask(allF)
        old = len(self.F)
        self.X = np.vstack([self.X, X])[keep]
        self.F = allF[keep]
        return keep[old:]

    def check(self) -> bool:
        return bool(np.all(nondominated_mask(self.F)))


# -- evaluation helpers --------------------------------------------------------


def pointwise(fn):
    """Wrap ``y -> F(y)`` as a batch evaluator; exceptions become NaN rows."""

    def batch(Y):
        rows = []
        k = None
        for y in np.atleast_2d(Y):
            try:
                f = np.atleast_1d(np.asarray(fn(y), dtype=float))
                k = f.size
            except Exception:
                f = None
            rows.append(f)
        k = k or 1
        return np.array([np.full(k, np.nan) if f is None else f for f in rows])

    return batch


def _evaluate(evaluator, Y):
    F = np.asarray(evaluator(Y), dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    if len(F) != len(Y):
        raise ConfigurationError("evaluator returned the wrong number of rows")
    return F


def sample_offsets(dim: int, samples_per_box: int, seed, iteration: int) -> np.ndarray:
    """Box-relative test points in ``[-1, 1]^dim``; row 0 is the center."""
    if samples_per_box < 1:
        raise ConfigurationError("samples_per_box must be >= 1")
    extra = samples_per_box - 1
    if extra == 0:
        return np.zeros((1, dim))
    ss = np.random.SeedSequence([int(seed), int(iteration)])
    engine = qmc.Sobol(dim, scramble=True, seed=np.random.default_rng(ss))
    pts = engine.random_base2(int(np.ceil(np.log2(extra))))[:extra]
    return np.vstack([np.zeros(dim), 2 * pts - 1])


@dataclass
class FilterStats:
    iteration: int
    leaves_before: int
    leaves_after: int
    evaluations: int
    failures: int
    archive_size: int


def nondominance_filter(tree: BoxTree, evaluator, samples_per_box: int, archive: ParetoArchive, seed=0, iteration=None):
    """One selection pass; removes dominated leaves in place and returns stats."""
    it = tree.depth if iteration is None else iteration
    offsets = sample_offsets(tree.dim, samples_per_box, seed, it)
    centers = tree.centers()
    K, S = len(centers), len(offsets)
    Y = (centers[:, None, :] + offsets[None] * tree.radius).reshape(-1, tree.dim)
    F = _evaluate(evaluator, Y)
    ok = ~np.any(np.isnan(F), axis=1)
    failures = int((~ok).sum())
    kept = np.zeros(len(Y), dtype=bool)
    if ok.any():
        kept[ok] = archive.insert(Y[ok], F[ok])
    alive = kept.reshape(K, S).any(axis=1)
    # archive members keep their boxes alive, so no Pareto sample is orphaned
    host = tree.locate(archive.X)
    alive[host[host >= 0]] = True
    all_failed = ~ok.reshape(K, S).any(axis=1)
    if all_failed.any():
        warnings.warn(f"{int(all_failed.sum())} boxes had no successful evaluation and were kept", SamplingWarning, stacklevel=2)
        alive |= all_failed
    tree.keep(alive)
    assert len(tree) > 0, "selection removed every box"
    return FilterStats(it, K, int(alive.sum()), len(Y), failures, len(archive))


def sampling_algorithm(lower, upper, evaluator, iterations: int, samples_per_box: int = 20, seed=0, callback=None):
    """Alternate subdivision and selection; returns ``(tree, archive, stats)``."""
    if iterations < 1:
        raise ConfigurationError("iterations must be >= 1")
    tree = BoxTree(lower, upper)
    archive = None
    stats = []
    for s in range(1, iterations + 1):
        tree.subdivide()
        if archive is None:
            k = _evaluate(evaluator, tree.centers()[:1]).shape[1]
            archive = ParetoArchive(tree.dim, k)
        stats.append(nondominance_filter(tree, evaluator, samples_per_box, archive, seed, s))
        if callback is not None:
            callback(tree, archive, stats[-1])
    return tree, archive, stats


# -- front and exports ---------------------------------------------------------


@dataclass
class FrontPoint:
    decision: np.ndarray
    objectives: np.ndarray
    failed: bool = False
    extra: dict = field(default_factory=dict)


def pareto_front(tree: BoxTree, evaluator, sweep: bool = True) -> list[FrontPoint]:
    """Objective values at leaf centers, sorted by the first objective.

    Failed evaluations are flagged and left at the end; with ``sweep`` the
    remaining entries are reduced to a mutually non-dominated set.
    """
    C = tree.centers()
    F = _evaluate(evaluator, C)
    bad = np.any(np.isnan(F), axis=1)
    good = np.flatnonzero(~bad)
    if sweep and good.size:
        good = good[nondominated_mask(F[good])]
    good = good[np.lexsort(F[good].T[::-1])]
    out = [FrontPoint(C[k], F[k]) for k in good]
    out += [FrontPoint(C[k], F[k], failed=True) for k in np.flatnonzero(bad)]
    return out


def _fmt(v) -> str:
    return "%.17g" % v


def write_covering_csv(tree: BoxTree, path) -> None:
    n = tree.dim
    header = [f"c{i + 1}" for i in range(n)] + [f"r{i + 1}" for i in range(n)] + ["survived_iteration"]
    r = tree.radius
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for c in tree.centers():
            w.writerow([_fmt(v) for v in c] + [_fmt(v) for v in r] + [tree.depth])


def write_front_csv(front, path, names=None, objective_names=None) -> None:
    pts = [p for p in front if not p.failed]
    n = len(pts[0].decision) if pts else 0
    k = len(pts[0].objectives) if pts else 0
    names = names or [f"y{i + 1}" for i in range(n)]
    objective_names = objective_names or [f"f{i + 1}" for i in range(k)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(names) + list(objective_names))
        for p in pts:
            w.writerow([_fmt(v) for v in p.decision] + [_fmt(v) for v in p.objectives])


def read_front_csv(path, n_decision: int):
    data = np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1))
    return data[:, :n_decision], data[:, n_decision:]


def run_summary(tree: BoxTree, archive: ParetoArchive, stats) -> dict:
    return {
        "iterations": tree.depth,
        "leaf_counts": list(tree.history),
        "archive_size": len(archive),
        "evaluations": sum(s.evaluations for s in stats),
        "failures": sum(s.failures for s in stats),
        "box_width": tree.width,
    }
