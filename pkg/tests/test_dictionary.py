import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from koopmoo.dictionary import Dictionary, apply_generator, eval_basis, monomials
from koopmoo.errors import ConfigurationError

finite = st.floats(-2, 2, allow_nan=False, allow_infinity=False)


def test_small_bases():
    assert monomials(1, 2).labels() == ["1", "x1", "x1^2"]
    d = monomials(2, 2)
    assert d.size == 6
    np.testing.assert_array_equal(d.exponents, [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]])
    assert monomials(3, 5).size == 56


def test_eval_examples():
    np.testing.assert_array_equal(eval_basis(monomials(1, 2), [2.0]), [1, 2, 4])
    np.testing.assert_array_equal(eval_basis(monomials(2, 2), [0.0, 0.0]), [1, 0, 0, 0, 0, 0])
    np.testing.assert_array_equal(eval_basis(monomials(2, 2), [2.0, 3.0]), [1, 2, 3, 4, 6, 9])


def test_generator_examples():
    d = monomials(2, 2)
    k = d.index_of((2, 0))
    assert apply_generator(d, k, [0.3, 0.0], np.zeros((2, 2)), [1.0, 1.0]) == pytest.approx(0.6)
    assert apply_generator(d, d.constant_index, [5.0, -1.0], np.eye(2), [0.3, 0.2]) == 0.0
    kx = d.index_of((1, 1))
    assert apply_generator(d, kx, [0, 0], np.eye(2), [0.4, -1.0]) == 0.0
    assert apply_generator(d, kx, [0, 0], [[1, 2], [2, 1]], [0.4, -1.0]) == pytest.approx(2.0)


def test_structure_invariants():
    for D, p in [(1, 1), (2, 3), (4, 4), (6, 4)]:
        d = monomials(D, p)
        exps = [tuple(e) for e in d.exponents]
        assert len(set(exps)) == len(exps)
        assert exps.count((0,) * D) == 1
        assert d.is_coordinate.sum() == D
        deg = d.degrees()
        assert np.all(np.diff(deg) >= 0)


def test_bad_dictionaries():
    with pytest.raises(ConfigurationError):
        Dictionary(np.array([[1], [2]]), 2)  # no constant
    with pytest.raises(ConfigurationError):
        Dictionary(np.array([[0, 0], [1, 0], [2, 0]]), 2)  # x2 missing
    with pytest.raises(ConfigurationError):
        Dictionary(np.array([[0], [1], [1]]), 1)
    with pytest.raises(ConfigurationError):
        monomials(2, 2).evaluate([1.0, 2.0, 3.0])


def test_fast_evaluation_matches_partial(rng):
    d = monomials(6, 4)
    X = rng.uniform(-2, 2, (50, 6))
    np.testing.assert_allclose(d.evaluate(X), d.partial(X, (0,) * 6), rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("D,p", [(1, 5), (2, 4), (3, 3)])
def test_finite_differences(D, p, rng):
    d = monomials(D, p)
    h = 1e-5
    for x in rng.uniform(-2, 2, (5, D)):
        G = d.gradient(x)
        H = d.hessian(x)
        for i in range(D):
            e = np.zeros(D)
            e[i] = h
            fd = (d.evaluate(x + e) - d.evaluate(x - e)) / (2 * h)
            np.testing.assert_allclose(G[:, i], fd, rtol=1e-6, atol=1e-6 * np.abs(G).max())
            fdh = (d.gradient(x + e) - d.gradient(x - e)) / (2 * h)
            np.testing.assert_allclose(H[:, i, :], fdh, rtol=1e-6, atol=1e-6 * np.abs(H).max())


@given(arrays(float, 2, elements=finite), arrays(float, 2, elements=finite))
def test_coordinate_observables_give_drift(x, b):
    d = monomials(2, 3)
    for i, k in enumerate(d.coordinate_indices):
        assert apply_generator(d, k, b, np.zeros((2, 2)), x) == b[i]


@given(arrays(float, 2, elements=finite), arrays(float, (2, 2), elements=finite))
def test_pair_products_give_diffusion(x, m):
    a = m @ m.T
    d = monomials(2, 2)
    for i in range(2):
        for j in range(2):
            e = [0, 0]
            e[i] += 1
            e[j] += 1
            k = d.index_of(e)
            assert apply_generator(d, k, np.zeros(2), a, x) == pytest.approx(a[i, j], abs=1e-12)


@given(
    arrays(float, 3, elements=finite),
    arrays(float, (2, 3), elements=finite),
    arrays(float, (2, 3, 3), elements=finite),
    st.floats(-3, 3),
)
def test_generator_linearity(x, b, m, s):
    d = monomials(3, 3)
    a = np.einsum("kij,klj->kil", m, m)
    one = d.generator_action(x[None], b[:1], a[:1])
    two = d.generator_action(x[None], b[1:], a[1:])
    both = d.generator_action(x[None], b[:1] + s * b[1:], a[:1] + s * a[1:])
    np.testing.assert_allclose(both, one + s * two, rtol=1e-12, atol=1e-10)


def test_serialization_roundtrip():
    d = monomials(4, 3)
    assert Dictionary.from_dict(d.to_dict()) == d
