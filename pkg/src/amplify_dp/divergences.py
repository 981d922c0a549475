"""Exact divergences on finite supports, closed-form Renyi divergences for the
noise families, a 1-D quadrature Renyi oracle, and infinity-Wasserstein
distance on finite supports.

Density-ratio convention throughout: 0/0 = 0, and p/0 = +infinity for p > 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import networkx as nx
import numpy as np
from scipy.special import logsumexp

from ._quadrature import QuadratureError, integrate
from .distributions import DiscreteDist

__all__ = [
    "RdpPoint",
    "DpGuarantee",
    "QuadratureError",
    "hockey_stick",
    "hockey_stick_via_min",
    "tv",
    "renyi_discrete",
    "renyi_gaussian",
    "renyi_laplace_g",
    "log_laplace_g",
    "renyi_numeric_1d",
    "w_inf_discrete",
    "w_inf_optimal_coupling",
    "aligned_masses",
]

# Feasibility margin for floating-point max-flow on probability capacities.
FLOW_ATOL = 1e-12


@dataclass(frozen=True)
class RdpPoint:
    """Renyi-DP point: divergence bound ``epsilon`` at order ``alpha``."""

    alpha: float
    epsilon: float

    def __post_init__(self):
        if not (self.alpha > 1 or math.isinf(self.alpha)):
            raise ValueError("alpha must be > 1 or +inf")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")


@dataclass(frozen=True)
class DpGuarantee:
    """Approximate-DP pair (epsilon, delta)."""

    epsilon: float
    delta: float

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")


def aligned_masses(mu: DiscreteDist, nu: DiscreteDist) -> tuple[tuple, np.ndarray, np.ndarray]:
    """Mass vectors of ``mu`` and ``nu`` over the union of their supports."""
    if mu.points == nu.points:
        return mu.points, mu.probs, nu.probs
    union = list(mu.points)
    seen = set(union)
    for q in nu.points:
        if q not in seen:
            union.append(q)
            seen.add(q)
    mu_map = dict(zip(mu.points, mu.probs))
    nu_map = dict(zip(nu.points, nu.probs))
    p = np.array([mu_map.get(pt, 0.0) for pt in union])
    q = np.array([nu_map.get(pt, 0.0) for pt in union])
    return tuple(union), p, q


def hockey_stick(mu: DiscreteDist, nu: DiscreteDist, eps: float) -> float:
    """Hockey-stick divergence: sum of [p_mu - e^eps * p_nu]_+ over the support.

    At eps = 0 this is the total variation distance; at eps = +inf it is the
    mass of mu outside nu's support.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    _, p, q = aligned_masses(mu, nu)
    zero_q = q == 0.0
    out = float(p[zero_q].sum())
    if not math.isinf(eps):
        out += float(np.maximum(p[~zero_q] - math.exp(eps) * q[~zero_q], 0.0).sum())
    return min(out, 1.0)


def hockey_stick_via_min(mu: DiscreteDist, nu: DiscreteDist, eps: float) -> float:
    """Same divergence computed as 1 - sum of min(p_mu, e^eps * p_nu)."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    _, p, q = aligned_masses(mu, nu)
    pos_q = q > 0.0
    if math.isinf(eps):
        overlap = float(p[pos_q].sum())
    else:
        overlap = float(np.minimum(p[pos_q], math.exp(eps) * q[pos_q]).sum())
    return 1.0 - overlap


def tv(mu: DiscreteDist, nu: DiscreteDist) -> float:
    """Total variation distance (hockey-stick at eps = 0)."""
    return hockey_stick(mu, nu, 0.0)


def renyi_discrete(mu: DiscreteDist, nu: DiscreteDist, alpha: float) -> float:
    """Renyi divergence of order ``alpha`` between finite distributions.

    Returns +inf when mu is not absolutely continuous w.r.t. nu; alpha = +inf
    gives the max divergence log max(p_mu / p_nu).
    """
    if not (alpha > 1 or math.isinf(alpha)):
        raise ValueError("alpha must be > 1 or +inf")
    _, p, q = aligned_masses(mu, nu)
    support = p > 0.0
    if np.any(q[support] == 0.0):
        return math.inf
    p, q = p[support], q[support]
    if math.isinf(alpha):
        return max(0.0, float(np.max(np.log(p) - np.log(q))))
    terms = alpha * np.log(p) + (1.0 - alpha) * np.log(q)
    return max(0.0, float(logsumexp(terms)) / (alpha - 1.0))


def renyi_gaussian(u, v, sigma2: float, alpha: float) -> float:
    """Closed-form Renyi divergence between N(u, sigma2*I) and N(v, sigma2*I)."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    if not (alpha > 1 and math.isfinite(alpha)):
        raise ValueError("alpha must be finite and > 1")
    uv = np.atleast_1d(np.asarray(u, dtype=np.float64))
    vv = np.atleast_1d(np.asarray(v, dtype=np.float64))
    if uv.shape != vv.shape:
        raise ValueError("u and v must have the same dimension")
    return alpha * float(np.sum((uv - vv) ** 2)) / (2.0 * sigma2)


def log_laplace_g(z: float, alpha: float) -> float:
    """log of the Laplace Renyi moment g_alpha(z), evaluated stably."""
    if z < 0:
        raise ValueError("z must be non-negative")
    if not (alpha > 1 and math.isfinite(alpha)):
        raise ValueError("alpha must be finite and > 1")
    a = math.log(alpha / (2.0 * alpha - 1.0)) + z * (alpha - 1.0)
    b = math.log((alpha - 1.0) / (2.0 * alpha - 1.0)) - z * alpha
    return float(np.logaddexp(a, b))


def renyi_laplace_g(z: float, alpha: float) -> float:
    """The moment g_alpha(z) itself; the caller composes log(g)/(alpha-1)."""
    return math.exp(log_laplace_g(z, alpha))


def renyi_numeric_1d(
    p: Callable[[float], float],
    q: Callable[[float], float],
    alpha: float,
    domain: tuple[float, float],
    tol: float = 1e-8,
    max_evals: int = 10**6,
    breakpoints: Sequence[float] = (),
) -> float:
    """Quadrature estimate of the order-``alpha`` Renyi divergence of densities.

    Integrates p^alpha * q^(1-alpha) by adaptive Simpson; ``tol`` is the
    absolute error target on the divergence itself, which translates into a
    relative target on the moment integral (the moment is >= 1 and can be
    astronomically large).  Raises :class:`QuadratureError` if the evaluation
    budget runs out.  Both densities must be positive almost everywhere on
    ``domain``; values of p below 1e-100 are treated as zero mass so that far
    tails may underflow, while q vanishing where p is non-negligible is
    rejected.
    """
    if not (alpha > 1 and math.isfinite(alpha)):
        raise ValueError("alpha must be finite and > 1")

    def integrand(x: float) -> float:
        pv = p(x)
        if pv <= 1e-100:
            return 0.0
        qv = q(x)
        if qv <= 0.0:
            raise ValueError(f"q vanishes at x={x} while p is positive")
        return math.exp(alpha * math.log(pv) + (1.0 - alpha) * math.log(qv))

    half = 0.5 * tol * (alpha - 1.0)
    moment = integrate(
        integrand, domain[0], domain[1], tol=half, rtol=half,
        max_evals=max_evals, breakpoints=breakpoints,
    )
    return max(0.0, math.log(moment) / (alpha - 1.0))


def _wasserstein_feasible(p: np.ndarray, q: np.ndarray, dist: np.ndarray, w: float) -> tuple[bool, np.ndarray | None]:
    """Max-flow test: can all mass move along pairs with distance <= w?"""
    g = nx.DiGraph()
    n, m = dist.shape
    for i in range(n):
        g.add_edge("s", ("a", i), capacity=float(p[i]))
    for j in range(m):
        g.add_edge(("b", j), "t", capacity=float(q[j]))
    for i in range(n):
        for j in range(m):
            if dist[i, j] <= w + FLOW_ATOL:
                g.add_edge(("a", i), ("b", j), capacity=float(min(p[i], q[j])))
    value, flow = nx.maximum_flow(g, "s", "t")
    if value < 1.0 - FLOW_ATOL:
        return False, None
    joint = np.zeros_like(dist)
    for i in range(n):
        for j, f in flow.get(("a", i), {}).items():
            if isinstance(j, tuple) and j[0] == "b":
                joint[i, j[1]] = f
    return True, joint


def _w_inf_search(mu: DiscreteDist, nu: DiscreteDist) -> tuple[float, np.ndarray]:
    x, y = mu.coords(), nu.coords()
    if x.shape[1] != y.shape[1]:
        raise ValueError("supports live in different dimensions")
    dist = np.sqrt(np.sum((x[:, None, :] - y[None, :, :]) ** 2, axis=2))
    thresholds = np.unique(dist)
    # Smallest feasible threshold via binary search; feasibility is monotone.
    lo, hi = 0, len(thresholds) - 1
    ok, joint = _wasserstein_feasible(mu.probs, nu.probs, dist, thresholds[hi])
    if not ok:
        raise RuntimeError("transport infeasible at the maximal distance")
    best = (float(thresholds[hi]), joint)
    while lo <= hi:
        mid = (lo + hi) // 2
        ok, joint = _wasserstein_feasible(mu.probs, nu.probs, dist, thresholds[mid])
        if ok:
            best = (float(thresholds[mid]), joint)
            hi = mid - 1
        else:
            lo = mid + 1
    return best


def w_inf_discrete(mu: DiscreteDist, nu: DiscreteDist) -> float:
    """Exact infinity-Wasserstein distance between coordinate-carrying supports.

    Binary search over the sorted pairwise distances, deciding feasibility at
    each threshold by max-flow with the probability masses as capacities.
    """
    return _w_inf_search(mu, nu)[0]


def w_inf_optimal_coupling(mu: DiscreteDist, nu: DiscreteDist) -> tuple[float, DiscreteDist]:
    """W-infinity value together with a witnessing coupling.

    The coupling is returned as a joint distribution on pairs of points,
    suitable for building a transport operator.
    """
    w, joint = _w_inf_search(mu, nu)
    points, probs = [], []
    for i, pi in enumerate(mu.points):
        for j, pj in enumerate(nu.points):
            if joint[i, j] > 0.0:
                points.append((pi, pj))
                probs.append(joint[i, j])
    total = sum(probs)
    probs = [p / total for p in probs]
    return w, DiscreteDist(points, probs)
