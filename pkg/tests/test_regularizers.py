import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regmcts._kernels import KERNELS
from regmcts.regularizers import (
    RegularizerContext,
    RegularizerKind,
    conjugate_value,
    entropy_range,
    entropy_value,
    policy,
    regularizer_bounds,
    support_set,
)

from oracles import (
    lattice_max_bruteforce,
    lattice_max_greedy,
    mp_conjugate,
    project_simplex_bisect,
    project_simplex_sort,
    sparsemax_kkt_support,
)

MAX = RegularizerKind.MAXIMUM_ENTROPY
REL = RegularizerKind.RELATIVE_ENTROPY
TS = RegularizerKind.TSALLIS_ENTROPY


def ctx(kind, tau=1.0, prior=None):
    return RegularizerContext(kind, tau, prior)


# -- worked examples ------------------------------------------------------------

def test_conjugate_examples():
    assert conjugate_value([0, 0], ctx(MAX)) == pytest.approx(math.log(2), abs=1e-15)
    assert conjugate_value([0, 0], ctx(REL, prior=[0.8, 0.2])) == pytest.approx(0.0, abs=1e-15)
    assert conjugate_value([2, 0], ctx(TS)) == pytest.approx(2.0, abs=1e-15)
    # 10 + log(1 + e^-10) from mpmath
    assert conjugate_value([10, 0], ctx(MAX)) == pytest.approx(10.000045398899216, abs=1e-12)


def test_tsallis_example_matches_lattice_search():
    _, best = lattice_max_bruteforce([2.0, 0.0], 1.0)
    assert best == pytest.approx(conjugate_value([2, 0], ctx(TS)), abs=1e-12)


def test_policy_examples():
    np.testing.assert_allclose(policy([0, 0], ctx(MAX)), [0.5, 0.5], atol=1e-15)
    np.testing.assert_allclose(policy([0, 0], ctx(REL, prior=[0.8, 0.2])), [0.8, 0.2], atol=1e-15)
    np.testing.assert_array_equal(policy([2, 0], ctx(TS)), [1.0, 0.0])
    np.testing.assert_allclose(policy([math.log(2), 0], ctx(MAX)), [2 / 3, 1 / 3], atol=1e-15)
    np.testing.assert_allclose(policy([2, 0], ctx(TS)), project_simplex_sort([2, 0]), atol=1e-15)


@pytest.mark.parametrize(
    "f, expected",
    [((2, 0), [0]), ((0, 0), [0, 1]), ((0.5, 0.4, -3), [0, 1])],
)
def test_support_set_examples(f, expected):
    got = support_set(f)
    assert sorted(got.tolist()) == expected
    assert set(got.tolist()) == sparsemax_kkt_support(f)


def test_support_set_orders_ties_by_index():
    assert support_set([1.0, 3.0, 1.0]).tolist() == [1]
    assert support_set([0.2, 0.5, 0.2, 0.5]).tolist() == [1, 3, 0, 2]


def test_entropy_examples():
    assert entropy_value([0.5, 0.5], ctx(MAX)) == pytest.approx(-math.log(2), abs=1e-15)
    assert entropy_value([1.0, 0.0], ctx(TS)) == 0.0
    assert entropy_value([0.5, 0.5], ctx(REL, prior=[0.5, 0.5])) == pytest.approx(0.0, abs=1e-15)
    assert entropy_value([1.0, 0.0], ctx(MAX)) == 0.0


def test_bounds_examples():
    assert regularizer_bounds(4, ctx(MAX)) == (-math.log(4), 0.0)
    assert regularizer_bounds(2, ctx(TS)) == (-0.25, 0.0)
    lo, hi = regularizer_bounds(2, ctx(REL, prior=[0.5, 0.5]))
    assert lo == 0.0 and hi == pytest.approx(0.0, abs=1e-15)


def test_relative_bound_from_regularizer_bounds_is_not_a_range():
    # KL to a uniform prior reaches log|A| at a vertex, above the stated upper bound of 0
    c = ctx(REL, prior=[0.5, 0.5])
    assert entropy_value([1.0, 0.0], c) > regularizer_bounds(2, c)[1]
    assert entropy_value([1.0, 0.0], c) == pytest.approx(entropy_range(2, c)[1])


# -- errors ----------------------------------------------------------------------

@pytest.mark.parametrize("q", [[], [1.0, math.nan], [math.inf, 0.0]])
def test_conjugate_rejects_bad_vectors(q):
    with pytest.raises(ValueError):
        conjugate_value(q, ctx(MAX))
    with pytest.raises(ValueError):
        policy(q, ctx(TS))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(kind=MAX, tau=0.0),
        dict(kind=MAX, tau=-1.0),
        dict(kind=REL, tau=1.0),
        dict(kind=REL, tau=1.0, prior=[1.0, 0.0]),
        dict(kind=REL, tau=1.0, prior=[0.6, 0.6]),
        dict(kind=TS, tau=1.0, prior=[0.5, 0.5]),
    ],
)
def test_invalid_context(kwargs):
    with pytest.raises(ValueError):
        RegularizerContext(**kwargs)


def test_support_set_rejects_empty():
    with pytest.raises(ValueError):
        support_set([])


def test_entropy_rejects_non_simplex():
    with pytest.raises(ValueError):
        entropy_value([0.7, 0.7], ctx(MAX))


def test_bounds_need_matching_prior():
    with pytest.raises(ValueError):
        regularizer_bounds(3, ctx(REL, prior=[0.5, 0.5]))


# -- properties --------------------------------------------------------------------

values = st.lists(st.floats(-5, 5), min_size=1, max_size=16)
taus = st.sampled_from([0.01, 0.1, 1.0])


def _prior(n, seed):
    p = np.random.default_rng(seed).random(n) + 0.05
    return p / p.sum()


@settings(max_examples=300, deadline=None)
@given(q=values, tau=taus, seed=st.integers(0, 2**32 - 1))
def test_fenchel_young_equality(q, tau, seed):
    for kind, prior in ((MAX, None), (REL, _prior(len(q), seed)), (TS, None)):
        c = ctx(kind, tau, prior)
        pi = policy(q, c)
        assert abs(pi.sum() - 1.0) <= 1e-9
        lhs = conjugate_value(q, c)
        rhs = float(pi @ np.asarray(q)) - tau * entropy_value(pi, c)
        assert lhs == pytest.approx(rhs, abs=1e-8)


@settings(max_examples=300, deadline=None)
@given(q=values, tau=taus, seed=st.integers(0, 2**32 - 1))
def test_entropy_stays_in_range(q, tau, seed):
    for kind, prior in ((MAX, None), (REL, _prior(len(q), seed)), (TS, None)):
        c = ctx(kind, tau, prior)
        lo, hi = entropy_range(len(q), c)
        h = entropy_value(policy(q, c), c)
        assert lo - 1e-12 <= h <= hi + 1e-12


@settings(max_examples=200, deadline=None)
@given(q=st.lists(st.floats(-5, 5), min_size=1, max_size=8), tau=taus)
def test_sparsemax_equals_projection(q, tau):
    x = np.asarray(q) / tau
    pi = policy(q, ctx(TS, tau))
    np.testing.assert_allclose(pi, project_simplex_sort(x), atol=1e-9)
    np.testing.assert_allclose(pi, project_simplex_bisect(x), atol=1e-9)
    outside = np.setdiff1d(np.arange(len(q)), support_set(x))
    assert np.all(pi[outside] == 0.0)


@settings(max_examples=100, deadline=None)
@given(q=st.lists(st.floats(-5, 5), min_size=1, max_size=6), tau=taus, seed=st.integers(0, 2**32 - 1))
def test_conjugate_matches_extended_precision(q, tau, seed):
    prior = _prior(len(q), seed)
    for kind, name, p in ((MAX, "maximum", None), (REL, "relative", prior), (TS, "tsallis", None)):
        got = conjugate_value(q, ctx(kind, tau, p))
        want = float(mp_conjugate(name, q, tau, prior=p))
        assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_relative_with_uniform_prior_is_shifted_maximum():
    rng = np.random.default_rng(4)
    for n in (2, 5, 16):
        for tau in (0.01, 0.1, 1.0):
            q = rng.uniform(-5, 5, size=(200, n))
            rel = ctx(REL, tau, np.full(n, 1.0 / n))
            mx = ctx(MAX, tau)
            np.testing.assert_allclose(conjugate_value(q, mx) - conjugate_value(q, rel), tau * math.log(n), atol=1e-12)
            np.testing.assert_allclose(policy(q, mx), policy(q, rel), atol=1e-9)


def test_batched_rows_equal_single_calls():
    rng = np.random.default_rng(5)
    q = rng.uniform(-5, 5, size=(50, 7))
    for c in (ctx(MAX, 0.1), ctx(REL, 0.1, _prior(7, 1)), ctx(TS, 0.1)):
        batch_v, batch_p = conjugate_value(q, c), policy(q, c)
        for i in range(len(q)):
            assert batch_v[i] == conjugate_value(q[i], c)
            np.testing.assert_array_equal(batch_p[i], policy(q[i], c))


def test_large_values_do_not_overflow():
    q = np.array([1e3, 0.0, -1e3])
    for c in (ctx(MAX, 0.1), ctx(REL, 0.1, [0.2, 0.3, 0.5]), ctx(TS, 0.1)):
        assert math.isfinite(conjugate_value(q, c))
        assert np.all(np.isfinite(policy(q, c)))


def test_greedy_lattice_oracle_agrees_with_enumeration():
    rng = np.random.default_rng(6)
    for n in (2, 3):
        for _ in range(5):
            q = rng.uniform(-1, 1, n)
            tau = float(rng.choice([0.1, 1.0]))
            _, brute = lattice_max_bruteforce(q, tau, steps=200)
            _, greedy = lattice_max_greedy(q, tau, steps=200)
            assert greedy == pytest.approx(brute, abs=1e-12)


@pytest.mark.parametrize("kind", list(RegularizerKind))
def test_list_kernels_match_array_functions(kind):
    rng = np.random.default_rng(7)
    value_fn, policy_fn = KERNELS[kind]
    for _ in range(300):
        n = int(rng.integers(1, 17))
        tau = float(rng.choice([0.01, 0.1, 1.0]))
        q = rng.uniform(-5, 5, n)
        prior = _prior(n, int(rng.integers(1 << 30)))
        c = ctx(kind, tau, prior if kind is REL else None)
        p = prior.tolist() if kind is REL else [1.0 / n] * n
        assert value_fn(q.tolist(), tau, p) == pytest.approx(conjugate_value(q, c), abs=1e-10)
        np.testing.assert_allclose(policy_fn(q.tolist(), tau, p), policy(q, c), atol=1e-12)


def test_relative_kernel_tolerates_zero_prior_mass():
    value_fn, policy_fn = KERNELS[REL]
    assert value_fn([1.0, 5.0], 0.1, [1.0, 0.0]) == pytest.approx(1.0)
    assert policy_fn([1.0, 5.0], 0.1, [1.0, 0.0]) == [1.0, 0.0]


def test_sparsemax_single_support_is_exactly_one():
    # far from zero, f - (f - 1) rounds above 1 unless the values are shifted first
    q = np.array([[-4.788641214806288, -3.108152412218902], [-1.5926368568916827, -1.7151338905938127]])
    c = ctx(TS, 0.1)
    np.testing.assert_array_equal(policy(q, c), [[0.0, 1.0], [1.0, 0.0]])
    assert KERNELS[TS][1](q[0].tolist(), 0.1, None) == [0.0, 1.0]
