"""Classify ABM-evaluated test points against a surrogate covering and front."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from ..moo import BoxTree


def z_value(confidence: float) -> float:
    return float(norm.ppf(0.5 + 0.5 * confidence))


def dominated_by_front(front_F, f, halfwidth=None) -> bool:
    """Whether some front vector dominates ``f``.

    With ``halfwidth`` every front vector is first shifted up by it, so a test
    point only counts as dominated when the gap exceeds its uncertainty.
    """
    f = np.asarray(f, dtype=float)
    G = np.asarray(front_F, dtype=float).reshape(-1, f.size)
    if len(G) == 0:
        return False
    if halfwidth is not None:
        G = G + np.asarray(halfwidth, dtype=float)
    le = np.all(G <= f, axis=1)
    lt = np.any(G < f, axis=1)
    return bool(np.any(le & lt))


@dataclass
class TestPoint:
    u: np.ndarray
    abm: np.ndarray
    halfwidth: np.ndarray
    surrogate: np.ndarray
    covered: bool
    dominated_ci: bool
    dominated: bool

    def to_dict(self) -> dict:
        return {
            "u": self.u,
            "abm": self.abm,
            "halfwidth": self.halfwidth,
            "surrogate": self.surrogate,
            "covered": self.covered,
            "dominated_ci": self.dominated_ci,
            "dominated": self.dominated,
        }


@dataclass
class ValidationReport:
    confidence: float
    points: list = field(default_factory=list)

    @property
    def inside(self):
        return [p for p in self.points if p.covered]

    @property
    def outside(self):
        return [p for p in self.points if not p.covered]

    def inside_ok(self) -> bool:
        return all(not p.dominated_ci for p in self.inside)

    def outside_fraction(self, ci: bool = False) -> float:
        out = self.outside
        if not out:
            return float("nan")
        return float(np.mean([p.dominated_ci if ci else p.dominated for p in out]))

    def summary(self) -> dict:
        return {
            "confidence": self.confidence,
            "test_points": len(self.points),
            "inside": len(self.inside),
            "outside": len(self.outside),
            "inside_dominated_ci": sum(p.dominated_ci for p in self.inside),
            "outside_dominated_fraction": self.outside_fraction(),
            "outside_dominated_fraction_ci": self.outside_fraction(ci=True),
            "surrogate_abm_gap_max": max((float(np.max(np.abs(p.surrogate - p.abm))) for p in self.points), default=0.0),
        }

    def to_dict(self) -> dict:
        return {"summary": self.summary(), "points": [p.to_dict() for p in self.points]}


def classify(tree: BoxTree, front_F, U, abm_F, halfwidths, surrogate_F, confidence: float) -> ValidationReport:
    """Build the report for test controls ``U`` with ABM estimates and halfwidths."""
    hosts = tree.locate(U)
    report = ValidationReport(confidence)
    for u, f, h, s, host in zip(np.atleast_2d(U), abm_F, halfwidths, surrogate_F, hosts):
        report.points.append(
            TestPoint(
                np.asarray(u, dtype=float),
                np.asarray(f, dtype=float),
                np.asarray(h, dtype=float),
                np.asarray(s, dtype=float),
                bool(host >= 0),
                dominated_by_front(front_F, f, h),
                dominated_by_front(front_F, f),
            )
        )
    return report
