import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from koopmoo.abm import VoterParams, kurtz_diffusion, kurtz_drift
from koopmoo.dictionary import Dictionary, monomials
from koopmoo.errors import ConfigurationError, EmptyModelWarning, IndefiniteDiffusionError, RepresentabilityWarning
from koopmoo.gedmd import (
    GeneratorMatrix,
    SamplePoint,
    SdeModel,
    build_matrices,
    estimate_generator,
    fit_generator,
    identify,
    identify_diffusion,
    identify_drift,
    psd_factor,
    sigma_pointwise,
    sparsify,
    sparsify_generator,
)

EX2 = Dictionary(np.array([[0, 0], [1, 0], [0, 1], [2, 0]]), 2)


def ex2_drift(X, u=0.0, gamma=0.3, delta=-1.0):
    return np.column_stack([(gamma + u) * X[:, 0], delta * (X[:, 1] - X[:, 0] ** 2)])


def test_build_matrices_examples():
    d = monomials(1, 1)
    P, dP = build_matrices(d, [SamplePoint([2.0], [3.0], [[0.0]])])
    np.testing.assert_array_equal(P[:, 0], [1, 2])
    np.testing.assert_array_equal(dP[:, 0], [0, 3])

    X = np.array([[1.0, 1.0]])
    _, dP = build_matrices(EX2, X=X, B=ex2_drift(X))
    np.testing.assert_allclose(dP[:, 0], [0, 0.3, 0, 0.6])

    _, dP = build_matrices(monomials(1, 2), X=[[0.0]], B=[[0.0]], A=[[[1.0]]])
    np.testing.assert_array_equal(dP[:, 0], [0, 0, 1])


def test_sample_point_validation():
    with pytest.raises(IndefiniteDiffusionError):
        SamplePoint([0.0, 0.0], [0.0, 0.0], [[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises(ConfigurationError):
        SamplePoint([0.0, 0.0], [0.0, 0.0], [[1.0, 0.5], [0.0, 1.0]])


def test_scalar_linear_system():
    d = monomials(1, 1)
    X = np.array([[0.5], [-1.0], [2.0]])
    gen = fit_generator(d, X, -0.7 * X)
    assert gen.L.T[1, 1] == pytest.approx(-0.7, abs=1e-10)
    assert identify_drift(gen)[:, 0] == pytest.approx([0.0, -0.7], abs=1e-10)


def test_zero_data_gives_zero_generator():
    P = np.ones((3, 5))
    gen = estimate_generator(P, np.zeros((3, 5)), dictionary=monomials(1, 2))
    assert not gen.L.any()
    assert not identify_drift(gen).any()


@pytest.mark.parametrize("u", [0.0, 0.2, 1.0])
def test_example2_block(u, rng):
    X = rng.uniform(-1, 1, (50, 2))
    gen = fit_generator(EX2, X, ex2_drift(X, u))
    block = gen.L.T[1:, 1:]
    k = 0.3 + u
    np.testing.assert_allclose(block, [[k, 0, 0], [0, -1, 1], [0, 0, 2 * k]], atol=1e-8)
    drift = identify_drift(gen)
    if u == 0.2:
        np.testing.assert_allclose(drift[:, 0], [0, 0.5, 0, 0], atol=1e-8)


def test_voter_kurtz_drift_expansion():
    p = VoterParams()
    d = monomials(1, 3)
    c = np.linspace(0.05, 0.95, 30)[:, None]
    gen = fit_generator(d, c, kurtz_drift(p, c), kurtz_diffusion(p, c)[:, :, None])
    np.testing.assert_allclose(identify_drift(gen)[:, 0], [0.1, 0.8, -1.0, 0.0], atol=1e-10)


def test_deterministic_system_has_no_diffusion(rng):
    X = rng.uniform(-1, 1, (50, 2))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RepresentabilityWarning)
        model = identify(fit_generator(monomials(2, 3), X, ex2_drift(X)))
    assert np.abs(model.diffusion).max() < 1e-8


def test_brownian_motion_diffusion():
    d = monomials(1, 2)
    X = np.linspace(-1, 1, 7)[:, None]
    model = identify(fit_generator(d, X, np.zeros_like(X), np.ones((7, 1, 1))))
    np.testing.assert_allclose(model.diffusion[0, 0], [1, 0, 0], atol=1e-12)


def test_exact_recovery_of_polynomial_sde(rng):
    # linear drift and quadratic a: products b_i x_j stay within degree 2
    d = monomials(2, 2)
    drift = np.zeros((6, 2))
    drift[1, 0], drift[2, 0], drift[0, 1], drift[1, 1] = -1.0, 0.5, 0.2, -0.3
    diff = np.zeros((2, 2, 6))
    diff[0, 0, 0], diff[0, 0, 3] = 1.0, 0.5
    diff[1, 1, 0], diff[1, 1, 5] = 2.0, 1.0
    diff[0, 1, 4] = diff[1, 0, 4] = 0.3
    truth = SdeModel(drift, diff, d)
    X = rng.uniform(-1, 1, (40, 2))
    model = identify(fit_generator(d, X, truth.b(X), truth.a(X)))
    assert np.abs(model.drift - drift).max() <= 1e-8
    assert np.abs(model.diffusion - diff).max() <= 1e-8


def test_least_squares_optimality(rng):
    d = monomials(2, 3)
    X = rng.uniform(-1, 1, (60, 2))
    B = np.column_stack([np.sin(X[:, 0]), X[:, 0] * X[:, 1] ** 2])
    P, dP = build_matrices(d, X=X, B=B)
    M = estimate_generator(P, dP, dictionary=d).M
    base = np.linalg.norm(dP - M @ P)
    for _ in range(20):
        dM = rng.normal(size=M.shape)
        dM *= 1e-3 / np.linalg.norm(dM)
        assert np.linalg.norm(dP - (M + dM) @ P) >= base


def test_ridge_and_shape_errors(rng):
    d = monomials(1, 2)
    X = rng.uniform(-1, 1, (20, 1))
    P, dP = build_matrices(d, X=X, B=-X)
    L_ridge = estimate_generator(P, dP, ridge=1e-10, dictionary=d).L
    L_plain = estimate_generator(P, dP, dictionary=d).L
    np.testing.assert_allclose(L_ridge, L_plain, atol=1e-8)
    with pytest.raises(ConfigurationError):
        estimate_generator(P, dP[:, :3], dictionary=d)
    with pytest.raises(ConfigurationError):
        estimate_generator(P, dP, ridge=-1.0, dictionary=d)


def test_identify_diffusion_needs_pair_products():
    d = Dictionary(np.array([[0, 0], [1, 0], [0, 1]]), 1)
    gen = GeneratorMatrix(np.zeros((3, 3)), d)
    with pytest.raises(ConfigurationError):
        identify_diffusion(gen)


@given(st.integers(0, 10_000))
def test_diffusion_table_is_symmetric(seed):
    r = np.random.default_rng(seed)
    d = monomials(3, 2)
    gen = GeneratorMatrix(r.normal(size=(d.size, d.size)), d)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RepresentabilityWarning)
        t = identify_diffusion(gen)
    assert np.array_equal(t, t.transpose(1, 0, 2))


def test_sigma_examples():
    np.testing.assert_array_equal(psd_factor(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(psd_factor([[4.0, 2.0], [2.0, 2.0]]), [[2, 0], [1, 1]])
    np.testing.assert_array_equal(psd_factor(np.zeros((2, 2))), np.zeros((2, 2)))
    with pytest.raises(IndefiniteDiffusionError):
        psd_factor([[1.0, 0.0], [0.0, -1e-6]])
    # tiny negative eigenvalues are clamped
    s = psd_factor([[1.0, 1.0], [1.0, 1.0 - 1e-12]])
    np.testing.assert_allclose(s @ s.T, [[1, 1], [1, 1]], atol=1e-8)


@given(st.integers(0, 10_000), st.integers(1, 4))
def test_sigma_reconstructs_a(seed, rank):
    r = np.random.default_rng(seed)
    m = r.normal(size=(4, rank))
    a = m @ m.T
    s = psd_factor(a)
    assert np.allclose(np.triu(s, 1), 0)
    assert np.linalg.norm(s @ s.T - a) <= 1e-8 * max(1.0, np.linalg.norm(a))


def test_sigma_pointwise_on_model():
    d = monomials(1, 2)
    diff = np.zeros((1, 1, 3))
    diff[0, 0, 2] = 4.0
    model = SdeModel(np.zeros((3, 1)), diff, d)
    assert sigma_pointwise(model, [0.5])[0, 0] == pytest.approx(1.0)


def test_sparsify_examples(rng):
    c = rng.normal(size=(5, 2))
    np.testing.assert_array_equal(sparsify(c, 0.0), c)
    with pytest.warns(EmptyModelWarning):
        z = sparsify(np.full(4, 1e-4), 1e-3)
    assert not z.any()
    with pytest.raises(ConfigurationError):
        sparsify(c, -1.0)


def test_sparsify_recovers_example2_support(rng):
    X = rng.uniform(-1, 1, (60, 2))
    B = ex2_drift(X, 0.2) + 1e-6 * rng.normal(size=(60, 2))
    P, dP = build_matrices(EX2, X=X, B=B)
    gen = sparsify_generator(estimate_generator(P, dP, dictionary=EX2), 1e-3, P, dP)
    block = gen.L.T[1:, 1:]
    assert np.count_nonzero(block) == 4
    np.testing.assert_array_equal(block != 0, [[1, 0, 0], [0, 1, 1], [0, 0, 1]])
    assert not gen.L[0].any() and not gen.L[:, 0].any()


def test_model_serialization_roundtrip(rng):
    d = monomials(2, 2)
    m = SdeModel(rng.normal(size=(6, 2)), rng.normal(size=(2, 2, 6)), d)
    back = SdeModel.from_dict(m.to_dict())
    np.testing.assert_array_equal(back.drift, m.drift)
    g = GeneratorMatrix(rng.normal(size=(6, 6)), d, 7)
    back = GeneratorMatrix.from_dict(g.to_dict())
    np.testing.assert_array_equal(back.L, g.L)
    assert back.m == 7
