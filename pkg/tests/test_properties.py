"""Property-based checks of the algebraic invariants."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from amplify_dp.distributions import DiscreteDist
from amplify_dp.divergences import DpGuarantee, hockey_stick, hockey_stick_via_min, tv
from amplify_dp.iteration import IterationChain, winf_path_bound
from amplify_dp.mixing import AMPLIFY_CONDITIONS, amplify


def masses(min_size=2, max_size=8):
    return st.lists(st.floats(1e-6, 1.0), min_size=min_size, max_size=max_size)


def dist_pair():
    return st.integers(2, 8).flatmap(
        lambda n: st.tuples(
            st.lists(st.floats(1e-6, 1.0), min_size=n, max_size=n),
            st.lists(st.floats(1e-6, 1.0), min_size=n, max_size=n),
        )
    )


def normalize(weights):
    arr = np.asarray(weights, dtype=np.float64)
    return DiscreteDist.from_probs(arr / arr.sum())


@settings(max_examples=80, deadline=None)
@given(dist_pair(), st.floats(0.0, 5.0))
def test_hockey_stick_forms_agree(pair, eps):
    mu, nu = map(normalize, pair)
    assert abs(hockey_stick(mu, nu, eps) - hockey_stick_via_min(mu, nu, eps)) <= 1e-12


@settings(max_examples=80, deadline=None)
@given(dist_pair(), st.floats(0.0, 3.0), st.floats(0.0, 2.0))
def test_hockey_stick_monotone(pair, eps, bump):
    mu, nu = map(normalize, pair)
    assert hockey_stick(mu, nu, eps + bump) <= hockey_stick(mu, nu, eps) + 1e-12


@settings(max_examples=50, deadline=None)
@given(dist_pair())
def test_hockey_stick_at_zero_is_tv(pair):
    mu, nu = map(normalize, pair)
    assert hockey_stick(mu, nu, 0.0) == tv(mu, nu)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 20.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0),
       st.sampled_from(AMPLIFY_CONDITIONS))
def test_amplify_never_weakens(eps, delta, gamma, condition):
    out = amplify(DpGuarantee(eps, delta), condition, gamma)
    assert out.epsilon <= eps + 1e-12
    assert out.delta <= delta + 1e-9 or condition == "doeblin"
    assert 0.0 <= out.delta <= 1.0


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.floats(0.05, 1.0), st.floats(0.1, 3.0),
       st.floats(1.1, 64.0), st.floats(0.1, 2.0))
def test_path_bound_scaling(r, lipschitz, sigma, alpha, scale):
    # The bound is quadratic in the increments and linear in alpha.
    chain = IterationChain(r, lipschitz, sigma, 1.0)
    increments = [1.0 / (i + 1) for i in range(r)]
    base = winf_path_bound(chain, increments, alpha).epsilon
    scaled = winf_path_bound(chain, [scale * d for d in increments], alpha).epsilon
    assert math.isclose(scaled, scale**2 * base, rel_tol=1e-9, abs_tol=1e-15)
    doubled = winf_path_bound(chain, increments, 2 * alpha).epsilon
    assert math.isclose(doubled, 2 * base, rel_tol=1e-12, abs_tol=1e-15)
