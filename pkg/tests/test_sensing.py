import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cssd.bases import BasisSpec, build_basis
from cssd.errors import InputError
from cssd.rng import Stream
from cssd.sensing import (
    compress,
    empirical_ric,
    gaussian_operator,
    identity_operator,
    kron_operator,
    ms_signal_sampler,
    operator_from_json,
)
from cssd.tensor import vec


def c0(eps):
    return eps**2 / 4 - eps**3 / 6


@pytest.fixture(scope="module")
def scenario_bases():
    return build_basis(BasisSpec("bspline", 1000, 3, 6)), build_basis(BasisSpec("bspline", 1000, 2, 497))


def test_gaussian_deterministic():
    a = gaussian_operator(20, 50, 7).A
    b = gaussian_operator(20, 50, 7).A
    assert np.array_equal(a, b)
    assert not np.array_equal(a, gaussian_operator(20, 50, 8).A)


def test_gaussian_moments():
    A = gaussian_operator(100, 1000, 3).A
    N = A.size
    # mean within 3 standard errors of 0; variance within 3 standard errors of 1/p
    assert abs(A.mean()) <= 3 * math.sqrt(1 / 100 / N)
    var_se = math.sqrt(2 / N) / 100
    assert abs(A.var() - 1 / 100) <= 3 * var_se


def test_not_compressive_warns():
    with pytest.warns(UserWarning):
        gaussian_operator(6, 5, 0)


def test_expected_norm_preserved():
    y = Stream(1).normal(1000)
    y /= np.linalg.norm(y)
    sq = np.array([np.sum((gaussian_operator(100, 1000, 10_000 + k).A @ y) ** 2) for k in range(1000)])
    assert 0.97 <= sq.mean() <= 1.03


def test_kron_ratio_and_seeds():
    op = kron_operator(3, 10, 4, 8, seed=5)
    assert op.ratio == pytest.approx(12 / 80)
    A1, A2 = op.matrices
    np.testing.assert_array_equal(A1, gaussian_operator(3, 10, 5).A)
    np.testing.assert_array_equal(A2, gaussian_operator(4, 8, 6).A)
    B1, B2 = kron_operator(3, 10, 4, 8, seed=5).matrices
    assert np.array_equal(A1, B1) and np.array_equal(A2, B2)


def test_kron_apply_matches_explicit_kronecker(rng):
    op = kron_operator(3, 5, 2, 4, seed=9)
    Y = rng.standard_normal((5, 4))
    A1, A2 = op.matrices
    np.testing.assert_allclose(vec(op.apply(Y)), np.kron(A2, A1) @ vec(Y), atol=1e-12)


def test_compress_examples(rng):
    op = gaussian_operator(4, 6, 0)
    np.testing.assert_array_equal(compress(op, np.zeros(6)).data, np.zeros(4))
    y = rng.standard_normal(6)
    np.testing.assert_array_equal(compress(identity_operator(6), y).data, y)
    op2 = kron_operator(2, 4, 2, 3, seed=1)
    Y = rng.standard_normal((4, 3))
    A1, A2 = op2.matrices
    m = compress(op2, Y)
    np.testing.assert_allclose(vec(m.data), np.kron(A2, A1) @ vec(Y), atol=1e-12)
    assert m.operator_seed == 1 and m.ratio == pytest.approx(4 / 12)
    with pytest.raises(InputError):
        compress(op, np.zeros(5))
    with pytest.raises(InputError):
        compress(op2, np.zeros((3, 4)))


@given(st.floats(-10, 10), st.integers(0, 2**32))
def test_compress_linear(alpha, seed):
    g = Stream(seed)
    op = gaussian_operator(7, 11, seed)
    y1, y2 = g.normal(11), g.normal(11)
    lhs = compress(op, alpha * y1 + y2).data
    rhs = alpha * compress(op, y1).data + compress(op, y2).data
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(1.0, abs(alpha))


def test_json_stanza_regenerates(rng):
    for op in (gaussian_operator(5, 9, 2), kron_operator(2, 6, 3, 7, 4), identity_operator(4, 5)):
        again = operator_from_json(op.to_json())
        for a, b in zip(op.matrices, again.matrices):
            assert np.array_equal(a, b)
    with pytest.raises(InputError):
        operator_from_json({"form": "single", "dims": [[2, 3]], "seed": 1, "matrix": []})


def test_empirical_ric_exact_isometries(rng, scenario_bases):
    B, Ba = scenario_bases
    samp = ms_signal_sampler(B, Ba, 4, seed=0)
    assert empirical_ric(identity_operator(1000), samp, 20) <= 1e-12
    Q, _ = np.linalg.qr(rng.standard_normal((30, 30)))
    from cssd.sensing import SensingOperator

    op = SensingOperator("single", ((30, 30),), None, (Q,))
    draw = lambda: (lambda v: v / np.linalg.norm(v))(rng.standard_normal(30))
    assert empirical_ric(op, draw, 50) <= 1e-10


def test_empirical_ric_rejects_bad_samples():
    op = gaussian_operator(3, 5, 0)
    with pytest.raises(InputError):
        empirical_ric(op, lambda: np.zeros(5), 1)
    with pytest.raises(InputError):
        empirical_ric(op, lambda: np.ones(5), 1)


def test_empirical_ric_regression(scenario_bases):
    B, Ba = scenario_bases
    est = empirical_ric(gaussian_operator(200, 1000, 11), ms_signal_sampler(B, Ba, 4, 5), 500)
    assert est < 1
    assert est == pytest.approx(0.13408323073, rel=1e-8)


def test_empirical_ric_shrinks_with_p(scenario_bases):
    B, Ba = scenario_bases
    means = {}
    for p in (100, 400):
        est = [empirical_ric(gaussian_operator(p, 1000, 100 + k), ms_signal_sampler(B, Ba, 4, k), 50) for k in range(20)]
        means[p] = np.mean(est)
    assert means[400] <= means[100]
