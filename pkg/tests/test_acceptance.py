"""Acceptance criteria at their stated tolerances.

Each test prints one ``PASS``/``FAIL`` line.  Criteria that the method cannot
meet at desk scale fail here rather than being relaxed.
"""

import csv
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from koopmoo.dictionary import Dictionary, monomials
from koopmoo.experiments import default_config, execute
from koopmoo.experiments.analytic import (
    affinity_checks,
    example1_covering,
    example3_identification,
    kurtz_consistency,
)
from koopmoo.gedmd import fit_generator
from koopmoo.moo import read_front_csv

HERE = Path(__file__).parent


@pytest.fixture
def report(capsys):
    def emit(number, title, passed, detail, elapsed=None, limit=None):
        timing = "" if elapsed is None else f" [{elapsed:.1f}s / limit {limit:g}s]"
        with capsys.disabled():
            print(f"\n{'PASS' if passed else 'FAIL'} criterion {number}: {title}: {detail}{timing}")
        assert passed, detail

    return emit


def test_criterion_1_example2_exactness(report):
    t0 = time.perf_counter()
    d = Dictionary(np.array([[0, 0], [1, 0], [0, 1], [2, 0]]), 2)
    X = np.random.default_rng(1).uniform(-1, 1, (50, 2))
    idx = [d.index_of(e) for e in ((1, 0), (0, 1), (2, 0))]
    gamma, delta = 0.3, -1.0
    worst = 0.0
    for u in (0.0, 0.2, 1.0):
        B = np.column_stack([(gamma + u) * X[:, 0], delta * (X[:, 1] - X[:, 0] ** 2)])
        block = fit_generator(d, X, B).L.T[np.ix_(idx, idx)]
        k = gamma + u
        # rows: d/dt x1, d/dt x2, d/dt x1^2 in the basis (x1, x2, x1^2)
        expected = np.array([[k, 0.0, 0.0], [0.0, delta, -delta], [0.0, 0.0, 2 * k]])
        worst = max(worst, float(np.max(np.abs(block - expected))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and elapsed < 1.0
    report(1, "Example 2 block", ok, f"max entry error {worst:.2e} (tol 1e-8)", elapsed, 1)


def test_criterion_2_affinity(report):
    t0 = time.perf_counter()
    res = affinity_checks(seed=0)
    elapsed = time.perf_counter() - t0
    ok = res["synthetic_max"] <= 1e-8 and res["quadratic_ratio"] > 10 and elapsed < 10
    detail = (
        f"control-affine defect {res['synthetic_max']:.2e} (tol 1e-8); "
        f"quadratic SIR defect/noise floor {res['quadratic_ratio']:.1f} (need > 10)"
    )
    report(2, "generator affinity", ok, detail, elapsed, 10)


def test_criterion_3_example3_identification(report):
    t0 = time.perf_counter()
    res = example3_identification(samples=1000, degree=5, seed=0)
    elapsed = time.perf_counter() - t0
    err = max(res["drift_error"], res["diffusion_error"])
    ok = err <= 1e-6 and elapsed < 30
    report(3, "Example 3 identification", ok, f"drift {res['drift_error']:.2e}, diffusion {res['diffusion_error']:.2e} (tol 1e-6)", elapsed, 30)


def test_criterion_4_kurtz_consistency(report):
    t0 = time.perf_counter()
    res = kurtz_consistency(n=10_000, seed=0)
    elapsed = time.perf_counter() - t0
    zb = np.abs(res["drift_z"]).max()
    za = np.abs(res["diffusion_z"]).max()
    ok = zb <= 3 and za <= 3 and len(res["grid"]) == 5 and elapsed < 120
    report(4, "Kurtz consistency", ok, f"max |z| drift {zb:.2f}, diffusion {za:.2f} (limit 3) at 5 points, n = 10^4", elapsed, 120)


def test_criterion_5_example1_covering(report):
    t0 = time.perf_counter()
    res = example1_covering(iterations=12, grid=100_000, seed=0)
    elapsed = time.perf_counter() - t0
    w = res["box_width"]
    ok = (
        w == 3 * 2.0**-12
        and res["covers_interval"]
        and res["within_dilated_interval"]
        and res["center_to_grid_pareto_max"] <= w
        and elapsed < 30
    )
    detail = (
        f"w = {w:.3e}, covers [1.5, 2]: {res['covers_interval']}, inside dilated interval: "
        f"{res['within_dilated_interval']}, max center-to-grid distance {res['center_to_grid_pareto_max']:.2e}"
    )
    report(5, "Example 1 covering", ok, detail, elapsed, 30)


@pytest.mark.slow
def test_criterion_6_voter_validation(report, tmp_path):
    cfg = default_config("voter-moo", "desk", seed=0)
    region = cfg.voter.regions[cfg.voter.validate_region]
    assert region.lower == (0.25, -0.75) and region.upper == (0.75, -0.25)
    v = cfg.voter.validation
    assert v.ensemble == 100 and v.confidence == 0.999
    t0 = time.perf_counter()
    res = execute("voter-moo", cfg, tmp_path, resume=False)
    elapsed = time.perf_counter() - t0
    s = res["report"]["validation"]["summary"]
    inside_ok = s["inside_dominated_ci"] == 0
    frac = s["outside_dominated_fraction"]
    ok = inside_ok and frac >= 0.9 and elapsed < 900
    detail = (
        f"{s['inside']} inside, {s['inside_dominated_ci']} CI-dominated (need 0); "
        f"{s['outside']} outside, dominated fraction {frac:.3f} (need >= 0.90)"
    )
    report(6, "voter MOO validation", ok, detail, elapsed, 900)


@pytest.mark.slow
def test_criterion_7_epidemic_stand_in(report, tmp_path):
    cfg = default_config("epidemic-moo", "desk", seed=0)
    t0 = time.perf_counter()
    execute("epidemic-moo", cfg, tmp_path, resume=False)
    elapsed = time.perf_counter() - t0
    s = cfg.epidemic
    rmse = {}
    with open(tmp_path / "rmse.csv") as fh:
        for row in csv.DictReader(fh):
            rmse[(row["model"], float(row["u_s"]), float(row["u_w"]))] = float(row["rmse"])
    corners = [(a, b) for a in (s.lower[0], s.upper[0]) for b in (s.lower[1], s.upper[1])]
    pairs = [(rmse[("augmented-6", *c)], rmse[("interpolated-6", *c)]) for c in corners]
    rmse_ok = all(a < b for a, b in pairs)
    U, F = read_front_csv(tmp_path / "front.csv", 2)
    closed = np.array([s.T * (us * us - math.log(s.u_w_max - uw)) for us, uw in U])
    rel = float(np.max(np.abs(F[:, 1] - closed) / np.abs(closed))) if len(U) else math.inf
    ok = rmse_ok and rel <= 1e-12 and elapsed < 1800
    shown = ", ".join(f"{c}: {a:.2e} vs {b:.2e}" for c, (a, b) in zip(corners, pairs))
    detail = f"augmented-6 vs interpolated-6 RMSE {shown}; economic closed form max rel. error {rel:.1e} over {len(U)} front points"
    report(7, "epidemic stand-in", ok, detail, elapsed, 1800)


INVARIANT_TESTS = [
    "test_moo.py::test_archive_invariant",
    "test_moo.py::test_fast_mask_matches_pairwise_definition",
    "test_moo.py::test_volume_preserved_and_shrinkage",
    "test_moo.py::test_covering_is_deterministic",
    "test_abm.py::test_sir_conservation_and_clamps",
    "test_abm.py::test_gillespie_steps_are_unit_jumps",
    "test_abm.py::test_voter_seeded_determinism",
    "test_abm.py::test_sir_seeded_determinism",
    "test_surrogate.py::test_semigroup",
    "test_gedmd.py::test_diffusion_table_is_symmetric",
    "test_dictionary.py::test_finite_differences",
    "test_experiments.py::test_voter_rerun_is_byte_identical",
]


def test_criterion_8_invariants(report):
    t0 = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *INVARIANT_TESTS],
        cwd=HERE, capture_output=True, text=True,
    )
    suite_ok = proc.returncode == 0
    # finite differences of every basis function at 1e-6 relative, first and second order
    h = 1e-5
    worst = 0.0
    rng = np.random.default_rng(8)
    for D, p in ((1, 5), (2, 4), (3, 3), (4, 2)):
        d = monomials(D, p)
        for x in rng.uniform(-1.5, 1.5, (4, D)):
            G, H = d.gradient(x), d.hessian(x)
            for i in range(D):
                e = np.eye(D)[i] * h
                fd = (d.evaluate(x + e) - d.evaluate(x - e)) / (2 * h)
                fdh = (d.gradient(x + e) - d.gradient(x - e)) / (2 * h)
                worst = max(worst, np.max(np.abs(G[:, i] - fd)) / max(np.abs(G).max(), 1.0))
                worst = max(worst, np.max(np.abs(H[:, i, :] - fdh)) / max(np.abs(H).max(), 1.0))
    elapsed = time.perf_counter() - t0
    ok = suite_ok and worst <= 1e-6
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    report(8, "determinism and invariants", ok, f"invariant tests: {summary}; dictionary FD max rel. error {worst:.1e} (tol 1e-6)", elapsed, math.inf)
