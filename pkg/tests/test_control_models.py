import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from koopmoo.abm import SirParams, VoterParams, VoterSimulator, km_batch
from koopmoo.control_models import (
    AffineGeneratorFamily,
    AugmentedModel,
    affinity_defect,
    assemble_family,
    default_controls,
    fit_affine_family,
    interpolate,
    learn_affine_family,
    learn_augmented,
)
from koopmoo.dictionary import monomials
from koopmoo.errors import ConfigurationError, ExtrapolationWarning, RepresentabilityWarning
from koopmoo.gedmd import fit_generator, identify, identify_drift
from koopmoo.surrogate import coefficient_tables, mean_field, trajectory_rmse


def affine_sde(X, u):
    """Drift and ``a`` affine in a 2-D control."""
    x1, x2 = X[:, 0], X[:, 1]
    b = np.column_stack([-x1 + u[0] * x1 - 0.3 * u[1] * x2, 0.5 * x1 * x2 + u[1] * (1 - x1)])
    a = np.zeros((len(X), 2, 2))
    a[:, 0, 0] = 1 + x1**2 + u[0]
    a[:, 1, 1] = 0.5 + u[1]
    return b, a


def closed_sde(X, u):
    """Linear drift and state-independent ``a``: degree-2 monomials are closed under the generator."""
    x1, x2 = X[:, 0], X[:, 1]
    b = np.column_stack([-x1 + u[0] * x1 - 0.3 * u[1] * x2, 0.5 * x1 - x2 + u[1] * (1 - x1)])
    a = np.zeros((len(X), 2, 2))
    a[:, 0, 0] = 1 + u[0]
    a[:, 1, 1] = 0.5 + u[1]
    a[:, 0, 1] = a[:, 1, 0] = 0.2
    return b, a


def make_family(seed=0):
    X = np.random.default_rng(seed).uniform(-1, 1, (40, 2))
    return learn_affine_family(monomials(2, 2), lambda u: (X, *closed_sde(X, u)), [[0, 0], [1, 0], [0, 1]], lower=[0, 0], upper=[1, 1])


FAMILY = make_family()


@pytest.fixture
def family():
    return FAMILY


def test_zero_control_returns_L0(family):
    np.testing.assert_array_equal(family.matrix([0.0, 0.0]), family.L0)
    np.testing.assert_array_equal(interpolate(family, [0, 0]).L, family.L0)


def test_scalar_affine_channel(rng):
    d = monomials(1, 2)
    X = rng.uniform(-1, 1, (20, 1))
    fam = learn_affine_family(d, lambda u: (X, (0.3 + u[0]) * X, None), [[0.0], [1.0]])
    assert fam.channels[0].T[1, 1] == pytest.approx(1.0, abs=1e-8)
    assert fam.L0.T[1, 1] == pytest.approx(0.3, abs=1e-8)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_midpoint_and_linearity(a1, a2, b1, b2, s):
    family = FAMILY
    u1, u2 = np.array([a1, a2]), np.array([b1, b2])
    mid = family.matrix(0.5 * (u1 + u2))
    np.testing.assert_allclose(mid, 0.5 * (family.matrix(u1) + family.matrix(u2)), atol=1e-12)
    L0 = family.L0
    lhs = family.matrix(s * u1 + (1 - s) * u2) - L0
    rhs = s * (family.matrix(u1) - L0) + (1 - s) * (family.matrix(u2) - L0)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


@pytest.mark.parametrize("alpha", [0.0, 0.25, 0.5, 1.0])
def test_generator_affinity_on_control_affine_sde(alpha, rng):
    d = monomials(2, 3)
    X = rng.uniform(-1, 1, (80, 2))
    ua, ub = np.array([0.2, 0.0]), np.array([1.0, 0.7])
    L = lambda u: fit_generator(d, X, *affine_sde(X, u))
    assert affinity_defect(L(alpha * ua + (1 - alpha) * ub), L(ua), L(ub), alpha) <= 1e-8


def test_family_matches_direct_fit_at_unseen_control(family, rng):
    X = rng.uniform(-1, 1, (40, 2))
    u = np.array([0.4, 0.9])
    direct = fit_generator(family.dictionary, X, *closed_sde(X, u))
    np.testing.assert_allclose(interpolate(family, u).L, direct.L, atol=1e-8)


def test_voter_family_prediction_within_noise():
    """Predicted drift at an unseen control agrees with a direct fit up to Monte Carlo noise."""
    params = VoterParams()
    sim = VoterSimulator(params)
    d = monomials(1, 3)
    X = (np.rint(np.linspace(0.02, 0.98, 60) * params.N) / params.N)[:, None]
    controls = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=float)
    target = np.array([0.5, -0.4])
    pred, direct = [], []
    for r in range(8):
        seeds = np.random.SeedSequence([77, r]).spawn(len(controls) + 1)

        def sampler(u):
            k = int(np.flatnonzero(np.all(controls == u, axis=1))[0])
            b, a, _, _ = km_batch(sim, X, np.tile(u, (len(X), 1)), 0.05, 100, seeds[k])
            return X, b, a

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fam = learn_affine_family(d, sampler, controls, lower=[-1, -1], upper=[1, 1])
            b, a, _, _ = km_batch(sim, X, np.tile(target, (len(X), 1)), 0.05, 100, seeds[-1])
            pred.append(identify_drift(interpolate(fam, target))[:, 0])
            direct.append(identify_drift(fit_generator(d, X, b, a))[:, 0])
    pred, direct = np.array(pred), np.array(direct)
    se = np.sqrt(pred.var(axis=0, ddof=1) / len(pred) + direct.var(axis=0, ddof=1) / len(direct))
    rmse = np.sqrt(np.mean((pred.mean(axis=0) - direct.mean(axis=0)) ** 2))
    assert rmse <= 3 * np.sqrt(np.mean(se**2))


def test_extrapolation_warns(family):
    with pytest.warns(ExtrapolationWarning):
        interpolate(family, [2.0, 0.0])


def test_assemble_errors():
    d = monomials(1, 1)
    I = np.eye(2)
    with pytest.raises(ConfigurationError):
        assemble_family([[1.0], [2.0]], [I, I], d)
    with pytest.raises(ConfigurationError):
        assemble_family([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]], [I, I, I], d)
    with pytest.raises(ConfigurationError):
        AffineGeneratorFamily(np.eye(3), np.zeros((1, 2, 2)), d, [0], [1])


def test_default_controls():
    np.testing.assert_array_equal(default_controls([-1, -2], [5, 0.8]), [[0, 0], [5, 0], [0, -2]])


def test_pooled_fit_matches_per_control_fits(rng):
    d = monomials(2, 2)
    U = rng.uniform(0, 1, (300, 2))
    X = rng.uniform(-1, 1, (300, 2))
    B = np.empty((300, 2))
    A = np.empty((300, 2, 2))
    for k in range(300):
        b, a = closed_sde(X[k : k + 1], U[k])
        B[k], A[k] = b[0], a[0]
    pooled = fit_affine_family(d, X, U, B, A)
    Xg = rng.uniform(-1, 1, (40, 2))
    ref = learn_affine_family(d, lambda u: (Xg, *closed_sde(Xg, u)), [[0, 0], [1, 0], [0, 1]])
    np.testing.assert_allclose(pooled.L0, ref.L0, atol=1e-8)
    np.testing.assert_allclose(pooled.channels, ref.channels, atol=1e-8)


def test_family_serialization(family):
    back = AffineGeneratorFamily.from_dict(family.to_dict())
    np.testing.assert_array_equal(back.L0, family.L0)
    np.testing.assert_array_equal(back.channels, family.channels)
    np.testing.assert_array_equal(back.upper, family.upper)


def test_augmentation_is_inert_for_constant_controls(rng):
    X = rng.uniform(-1, 1, (80, 2))
    U = rng.uniform(0, 1, (80, 1))
    b, a = closed_sde(X, [0.0, 0.0])
    plain = identify(fit_generator(monomials(2, 2), X, b, a))
    aug = learn_augmented(monomials(3, 2), X, U, b, A=a)
    frozen = aug.substitute([0.37])
    np.testing.assert_allclose(frozen.drift, plain.drift, atol=1e-10)
    np.testing.assert_allclose(frozen.diffusion, plain.diffusion, atol=1e-10)


def test_augmented_control_rows_follow_the_law(rng):
    p = SirParams(N=1000, beta=0.5, gamma=0.05)
    X = rng.uniform(0, 1, (400, 2))
    U = rng.uniform(0, 0.5, (400, 1))
    B = 0.1
    udot = B * U * (1 - U / 0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RepresentabilityWarning)
        aug = learn_augmented(monomials(3, 4), X, U, p.drift(X, U), udot=udot, A=p.diffusion(X, U))
    d = aug.dictionary
    col = aug.model.drift[:, 2]
    expect = np.zeros(d.size)
    expect[d.index_of((0, 0, 1))] = B
    expect[d.index_of((0, 0, 2))] = -B / 0.5
    np.testing.assert_allclose(col, expect, atol=1e-8)
    dropped = learn_augmented(monomials(3, 4), X, U, p.drift(X, U), udot=udot, A=p.diffusion(X, U), drop_control_columns=True)
    assert not dropped.generator.L[:, d.coordinate_indices[2]].any()
    back = AugmentedModel.from_dict(aug.to_dict())
    np.testing.assert_array_equal(back.model.drift, aug.model.drift)


def test_augmented_beats_interpolation_for_quadratic_action(rng):
    p = SirParams(N=1000, beta=0.5, gamma=0.05)
    X = rng.uniform(0, 1, (400, 2))
    ds = monomials(2, 3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fam = learn_affine_family(ds, lambda u: (X, p.drift(X, u), p.diffusion(X, u)), [[0.0], [1.0]])
        U = rng.uniform(0, 1, (400, 1))
        aug = learn_augmented(monomials(3, 4), X, U, p.drift(X, U), A=p.diffusion(X, U))
    u = np.array([[0.5]])
    x0 = np.array([[0.99, 0.01]])
    T = 150.0
    sol = solve_ivp(lambda t, x: p.drift(x[None], u)[0], (0, T), x0[0], rtol=1e-10, atol=1e-12, dense_output=True)
    times = np.linspace(0, T, 151)
    ref = sol.sol(times).T
    errs = {}
    for name, model in [("interp", fam), ("aug", aug)]:
        d, drift, _ = coefficient_tables(model, u)
        t, Xt = mean_field(d, drift, x0, T, 0.1)
        errs[name] = trajectory_rmse((times, ref), (t, Xt[:, 0]))
    assert errs["aug"] < errs["interp"]
    assert errs["aug"] < 1e-6
