import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from icsfree.eucspace import ConditioningError, GramBasis
from icsfree.scatter import (
    COV,
    COV4,
    CoordinateSample,
    WeightFunction,
    empirical_cov,
    empirical_cov_w,
    empirical_mean,
    mahalanobis_norms,
)


def test_mean_symmetric_examples():
    np.testing.assert_array_equal(empirical_mean(np.array([[0.0, 0.0], [2.0, 2.0]])), [1.0, 1.0])
    np.testing.assert_array_equal(
        empirical_mean(np.array([[1.0, 0], [0, 1], [-1, 0], [0, -1]])), [0.0, 0.0])


def test_mean_gaussian(rng):
    x = rng.standard_normal((1000, 3)) + [1.0, -2.0, 0.5]
    assert np.all(np.abs(empirical_mean(x) - [1.0, -2.0, 0.5]) < 0.1)


def test_mean_empty():
    with pytest.raises(ValueError):
        empirical_mean(np.empty((0, 2)))


def test_cov_divisor_n():
    c = empirical_cov(np.array([[-1.0], [1.0]]))
    assert c[0, 0] == 1.0
    assert not c.singular


def test_cov_degenerate_flag():
    c = empirical_cov(np.ones((5, 3)))
    np.testing.assert_array_equal(c, np.zeros((3, 3)))
    assert c.singular


def test_cov_gaussian(rng):
    c = empirical_cov(rng.standard_normal((5000, 3)))
    assert np.linalg.norm(c - np.eye(3)) < 0.1


def test_cov_needs_two_rows():
    with pytest.raises(ValueError):
        empirical_cov(np.zeros((1, 2)))


def test_identity_weight_is_cov_exactly(rng):
    x = rng.standard_normal((300, 4)) @ rng.standard_normal((4, 4))
    np.testing.assert_array_equal(empirical_cov_w(x, COV), empirical_cov(x))


def test_cov4_gaussian(rng):
    c4 = empirical_cov_w(rng.standard_normal((10000, 4)), COV4)
    assert np.linalg.norm(c4 - np.eye(4)) < 0.15


def test_cov4_outlier_spreads_spectrum(rng):
    x = rng.standard_normal((200, 3))
    x[0] = [15.0, 0.0, 0.0]
    e1 = np.linalg.eigvalsh(empirical_cov(x))
    e4 = np.linalg.eigvalsh(empirical_cov_w(x, COV4))
    assert e4[-1] / e4[0] > e1[-1] / e1[0]


def test_cov4_needs_dimension():
    with pytest.raises(ValueError):
        COV4(np.array([1.0]))


def test_singular_cov_w_raises():
    x = np.column_stack([np.arange(10.0), 2 * np.arange(10.0)])
    with pytest.raises(ConditioningError):
        empirical_cov_w(x, COV4)


def test_mahalanobis_oracle(rng):
    x = rng.standard_normal((100, 3)) @ np.array([[2.0, 0, 0], [0.5, 1, 0], [0, 0.3, 0.2]])
    xc = x - x.mean(axis=0)
    s = xc.T @ xc / len(x)
    d_ref = np.sqrt(np.einsum("ni,ij,nj->n", xc, np.linalg.inv(s), xc))
    np.testing.assert_allclose(mahalanobis_norms(x), d_ref, rtol=1e-10)


def test_custom_weight(rng):
    x = rng.standard_normal((200, 2))
    w = WeightFunction.custom(lambda d: np.ones_like(d), name="one")
    np.testing.assert_allclose(empirical_cov_w(x, w), empirical_cov(x), rtol=1e-12)
    assert w.label == "one"


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.integers(1, 5))
def test_affine_equivariance(seed, p):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((60, p)) ** 3
    a = rng.standard_normal((p, p)) + 2 * np.eye(p)
    b = rng.standard_normal(p)
    y = x @ a.T + b
    for w in (COV, COV4):
        lhs = empirical_cov_w(y, w)
        rhs = a @ empirical_cov_w(x, w) @ a.T
        assert np.linalg.norm(lhs - rhs) <= 1e-8 * np.linalg.norm(rhs)


def test_permutation_invariance_and_psd(rng):
    x = rng.standard_normal((3000, 3))
    perm = rng.permutation(3000)
    for w in (COV, COV4):
        c = empirical_cov_w(x, w)
        np.testing.assert_allclose(c, c.T, atol=0)
        assert np.linalg.eigvalsh(c)[0] >= 0
        # sums are chunked; a permutation changes the order only inside chunks
        np.testing.assert_allclose(empirical_cov_w(x[perm], w), c, rtol=1e-13)


def test_coordinate_sample_validation(rng):
    with pytest.raises(ValueError):
        CoordinateSample(rng.standard_normal((5, 3)), GramBasis.orthonormal(2))
    s = CoordinateSample.euclidean(rng.standard_normal((5, 2)))
    assert (s.n, s.dim) == (5, 2)
