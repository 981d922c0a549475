"""Discrete Markov operators, uniform-mixing coefficients, the four
amplification rules they induce on (epsilon, delta) guarantees, and the
transport-operator / overlapping-mixture constructions as testable operations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ._rng import rng_from_seed, uniform_open
from .distributions import DiscreteDist, PROB_ATOL
from .divergences import DpGuarantee, aligned_masses

__all__ = [
    "DiscreteKernel",
    "MixingCoefficients",
    "MixtureDecomposition",
    "pushforward",
    "dobrushin_coeff",
    "eps_dobrushin_coeff",
    "doeblin_coeff",
    "ultra_coeff",
    "measure_coefficients",
    "eps_tilde",
    "amplify",
    "amplify_with_kernel",
    "transport_operator",
    "mixture_decompose",
    "independent_coupling",
    "identity_coupling",
    "greedy_coupling",
    "random_joint_coupling",
]

AMPLIFY_CONDITIONS = ("dobrushin", "eps_dobrushin", "doeblin", "ultra")


@dataclass(frozen=True)
class DiscreteKernel:
    """Row-stochastic matrix acting as a Markov operator on finite supports."""

    rows: np.ndarray
    input_points: tuple
    output_points: tuple

    def __init__(self, rows, input_points: Sequence, output_points: Sequence):
        mat = np.asarray(rows, dtype=np.float64)
        if mat.ndim != 2:
            raise ValueError("rows must be a 2-D matrix")
        in_pts, out_pts = tuple(input_points), tuple(output_points)
        if mat.shape != (len(in_pts), len(out_pts)):
            raise ValueError(
                f"matrix shape {mat.shape} does not match supports "
                f"({len(in_pts)}, {len(out_pts)})"
            )
        if np.any(mat < 0):
            raise ValueError("kernel entries must be non-negative")
        sums = mat.sum(axis=1)
        bad = np.nonzero(np.abs(sums - 1.0) > PROB_ATOL)[0]
        if bad.size:
            i = int(bad[0])
            raise ValueError(f"row {i} sums to {float(sums[i])!r}, not 1")
        mat = mat.copy()
        mat.flags.writeable = False
        object.__setattr__(self, "rows", mat)
        object.__setattr__(self, "input_points", in_pts)
        object.__setattr__(self, "output_points", out_pts)

    @classmethod
    def from_matrix(cls, rows) -> "DiscreteKernel":
        mat = np.asarray(rows, dtype=np.float64)
        return cls(
            mat,
            [f"x{i}" for i in range(mat.shape[0])],
            [f"y{j}" for j in range(mat.shape[1])],
        )

    @classmethod
    def identity(cls, points: Sequence) -> "DiscreteKernel":
        return cls(np.eye(len(points)), points, points)

    @classmethod
    def constant(cls, input_points: Sequence, omega: DiscreteDist) -> "DiscreteKernel":
        rows = np.tile(omega.probs, (len(input_points), 1))
        return cls(rows, input_points, omega.points)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows.shape

    def row_dist(self, i: int) -> DiscreteDist:
        return DiscreteDist(self.output_points, self.rows[i])

    def to_json(self) -> str:
        return json.dumps(
            {
                "input_points": list(self.input_points),
                "output_points": list(self.output_points),
                "rows": [[float(v) for v in row] for row in self.rows],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "DiscreteKernel":
        obj = json.loads(text)
        return cls(obj["rows"], obj["input_points"], obj["output_points"])


def pushforward(mu: DiscreteDist, kernel: DiscreteKernel) -> DiscreteDist:
    """Distribution of the kernel output when the input is drawn from ``mu``."""
    if mu.points != kernel.input_points:
        raise ValueError("support of mu does not match the kernel input support")
    out = mu.probs @ kernel.rows
    return DiscreteDist(kernel.output_points, out / out.sum())


def dobrushin_coeff(kernel: DiscreteKernel) -> float:
    """Worst-case total variation between two rows of the kernel."""
    r = kernel.rows
    diff = 0.5 * np.abs(r[:, None, :] - r[None, :, :]).sum(axis=2)
    return float(diff.max())


def eps_dobrushin_coeff(kernel: DiscreteKernel, eps: float) -> float:
    """Worst-case hockey-stick divergence over ordered row pairs.

    At eps = +inf the divergence degenerates to the mass of one row outside
    the other's support.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    r = kernel.rows
    p = r[:, None, :]
    q = r[None, :, :]
    if math.isinf(eps):
        contrib = np.where(q == 0.0, p, 0.0)
    else:
        contrib = np.where(q == 0.0, p, np.maximum(p - math.exp(eps) * q, 0.0))
    return float(min(contrib.sum(axis=2).max(), 1.0))


def doeblin_coeff(kernel: DiscreteKernel) -> tuple[float, DiscreteDist | None]:
    """Minimal Doeblin coefficient and its witness.

    The column-wise minimum attains the smallest gamma with
    ``K(x) >= (1 - gamma) * omega``; the witness is that minimum normalized,
    absent when the minimum vanishes everywhere (gamma = 1).
    """
    colmin = kernel.rows.min(axis=0)
    mass = float(colmin.sum())
    gamma = min(max(1.0 - mass, 0.0), 1.0)
    if mass <= 0.0:
        return 1.0, None
    return gamma, DiscreteDist(kernel.output_points, colmin / mass)


def ultra_coeff(kernel: DiscreteKernel) -> float:
    """Ultra-mixing coefficient: one minus the smallest pairwise row ratio.

    0/0 imposes no constraint; a positive mass over a zero entry breaks
    absolute continuity and forces gamma = 1.
    """
    r = kernel.rows
    n = r.shape[0]
    min_ratio = 1.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            pos = r[j] > 0.0
            if np.any(r[i][~pos] > 0.0):
                return 1.0
            if pos.any():
                min_ratio = min(min_ratio, float((r[i][pos] / r[j][pos]).min()))
    return min(max(1.0 - min_ratio, 0.0), 1.0)


@dataclass(frozen=True)
class MixingCoefficients:
    """The four uniform-mixing coefficients of one kernel.

    ``eps_dobrushin`` maps each requested eps to its coefficient.  The
    ordering dobrushin <= doeblin <= ultra and eps_dobrushin(eps) <= dobrushin
    is guaranteed by the implications between the conditions.
    """

    dobrushin: float
    eps_dobrushin: Mapping[float, float]
    doeblin: float
    doeblin_witness: DiscreteDist | None
    ultra: float

    def __post_init__(self):
        tol = PROB_ATOL
        if not (self.dobrushin <= self.doeblin + tol <= self.ultra + 2 * tol):
            raise ValueError("coefficient ordering violated")
        if any(v > self.dobrushin + tol for v in self.eps_dobrushin.values()):
            raise ValueError("eps-Dobrushin coefficient exceeds Dobrushin")


def measure_coefficients(
    kernel: DiscreteKernel, eps_grid: Sequence[float] = ()
) -> MixingCoefficients:
    gamma_doe, omega = doeblin_coeff(kernel)
    return MixingCoefficients(
        dobrushin=dobrushin_coeff(kernel),
        eps_dobrushin={float(e): eps_dobrushin_coeff(kernel, e) for e in eps_grid},
        doeblin=gamma_doe,
        doeblin_witness=omega,
        ultra=ultra_coeff(kernel),
    )


def eps_tilde(guarantee: DpGuarantee) -> float:
    """Divergence order at which the eps-Dobrushin coefficient must be read.

    Equals log(1 + (e^eps - 1) / delta); +inf when delta = 0, where the
    coefficient is measured with the support-based max divergence.
    """
    if guarantee.delta == 0.0:
        return math.inf
    return math.log1p(math.expm1(guarantee.epsilon) / guarantee.delta)


def _amplified_eps(eps: float, gamma: float) -> float:
    # log(1 + gamma*(e^eps - 1)), stable for eps past the overflow point.
    if gamma == 0.0:
        return 0.0
    if eps < 700.0:
        return math.log1p(gamma * math.expm1(eps))
    return eps + math.log(gamma + (1.0 - gamma) * math.exp(-eps))


def amplify(guarantee: DpGuarantee, condition: str, gamma: float) -> DpGuarantee:
    """Guarantee of the post-processed mechanism under a mixing condition.

    Dobrushin-type conditions shrink delta only; Doeblin and ultra-mixing also
    shrink epsilon to log(1 + gamma*(e^eps - 1)).  For ``eps_dobrushin`` the
    supplied gamma must be measured at ``eps_tilde(guarantee)``.
    """
    if condition not in AMPLIFY_CONDITIONS:
        raise ValueError(f"unknown condition {condition!r}")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    eps, delta = guarantee.epsilon, guarantee.delta
    if condition in ("dobrushin", "eps_dobrushin"):
        return DpGuarantee(eps, gamma * delta)
    eps_prime = _amplified_eps(eps, gamma)
    # beta = e^(eps' - eps) in closed form, immune to overflow.
    beta = gamma + (1.0 - gamma) * math.exp(-eps)
    if condition == "doeblin":
        delta_prime = gamma * (1.0 - beta * (1.0 - delta))
    else:
        delta_prime = gamma * delta * beta
    return DpGuarantee(eps_prime, min(max(delta_prime, 0.0), 1.0))


def amplify_with_kernel(
    kernel: DiscreteKernel, guarantee: DpGuarantee
) -> dict[str, tuple[float, DpGuarantee]]:
    """Measure each mixing coefficient of ``kernel`` and amplify ``guarantee``.

    The eps-Dobrushin coefficient is measured at exactly eps_tilde(guarantee).
    Returns ``{condition: (gamma, amplified guarantee)}``.
    """
    results: dict[str, tuple[float, DpGuarantee]] = {}
    g = dobrushin_coeff(kernel)
    results["dobrushin"] = (g, amplify(guarantee, "dobrushin", g))
    g = eps_dobrushin_coeff(kernel, eps_tilde(guarantee))
    results["eps_dobrushin"] = (g, amplify(guarantee, "eps_dobrushin", g))
    g, _ = doeblin_coeff(kernel)
    results["doeblin"] = (g, amplify(guarantee, "doeblin", g))
    g = ultra_coeff(kernel)
    results["ultra"] = (g, amplify(guarantee, "ultra", g))
    return results


def _joint_as_matrix(pi: DiscreteDist) -> tuple[list, list, np.ndarray]:
    xs: list = []
    ys: list = []
    x_idx: dict = {}
    y_idx: dict = {}
    for pt in pi.points:
        if not (isinstance(pt, tuple) and len(pt) == 2):
            raise ValueError("coupling points must be (x, y) pairs")
        x, y = pt
        if x not in x_idx:
            x_idx[x] = len(xs)
            xs.append(x)
        if y not in y_idx:
            y_idx[y] = len(ys)
            ys.append(y)
    mass = np.zeros((len(xs), len(ys)))
    for pt, pr in zip(pi.points, pi.probs):
        mass[x_idx[pt[0]], y_idx[pt[1]]] += pr
    return xs, ys, mass


def transport_operator(pi: DiscreteDist) -> DiscreteKernel:
    """Markov operator built from a coupling: rows are conditional laws.

    The kernel is defined on the support of the first marginal (zero-mass
    rows are omitted) and pushes that marginal to the second one.
    """
    xs, ys, mass = _joint_as_matrix(pi)
    row_mass = mass.sum(axis=1)
    keep = row_mass > 0.0
    rows = mass[keep] / row_mass[keep, None]
    return DiscreteKernel(rows, [x for x, k in zip(xs, keep) if k], ys)


@dataclass(frozen=True)
class MixtureDecomposition:
    """Overlapping mixture decomposition of a pair (mu, nu) at level eps.

    mu = (1 - theta) * omega + theta * mu_prime and
    nu = ((1 - theta)/e^eps) * omega + (1 - (1 - theta)/e^eps) * nu_prime,
    with mu_prime and nu_prime supported on the disjoint regions where the
    density ratio exceeds (respectively falls below) e^eps.
    """

    theta: float
    omega: DiscreteDist | None
    mu_prime: DiscreteDist | None
    nu_prime: DiscreteDist | None


def mixture_decompose(mu: DiscreteDist, nu: DiscreteDist, eps: float) -> MixtureDecomposition:
    if eps < 0 or math.isinf(eps):
        raise ValueError("eps must be finite and non-negative")
    points, p, q = aligned_masses(mu, nu)
    e = math.exp(eps)
    mask_mu = p > e * q
    if not np.any(mask_mu):
        # mu is dominated by e^eps * nu everywhere: theta = 0, nothing to split.
        return MixtureDecomposition(0.0, None, None, None)
    overlap = np.minimum(p, e * q)
    mu_res = np.where(mask_mu, p - e * q, 0.0)
    theta = 1.0 - float(overlap.sum())
    if theta <= 0.0:
        # Rounding pushed the min-sum past 1; the residual form is exact here.
        theta = float(mu_res.sum())

    omega = None
    if overlap.sum() > 0.0:
        omega = DiscreteDist(points, overlap / overlap.sum())

    mu_prime = DiscreteDist(points, mu_res / mu_res.sum())
    nu_res = np.where(p < e * q, q - p / e, 0.0)
    nu_prime = DiscreteDist(points, nu_res / nu_res.sum())
    return MixtureDecomposition(min(theta, 1.0), omega, mu_prime, nu_prime)


def independent_coupling(mu: DiscreteDist, nu: DiscreteDist) -> DiscreteDist:
    """Product coupling mu (x) nu."""
    points = [(x, y) for x in mu.points for y in nu.points]
    probs = np.outer(mu.probs, nu.probs).ravel()
    return DiscreteDist(points, probs / probs.sum())


def identity_coupling(mu: DiscreteDist) -> DiscreteDist:
    """Coupling of mu with itself along the diagonal."""
    return DiscreteDist([(x, x) for x in mu.points], mu.probs)


def greedy_coupling(mu: DiscreteDist, nu: DiscreteDist) -> DiscreteDist:
    """Northwest-corner coupling: match mass greedily in support order."""
    i = j = 0
    remain_p = mu.probs.copy()
    remain_q = nu.probs.copy()
    points, probs = [], []
    while i < len(remain_p) and j < len(remain_q):
        m = min(remain_p[i], remain_q[j])
        if m > 0:
            points.append((mu.points[i], nu.points[j]))
            probs.append(m)
        remain_p[i] -= m
        remain_q[j] -= m
        if remain_p[i] <= 0:
            i += 1
        if j < len(remain_q) and remain_q[j] <= 0:
            j += 1
    total = sum(probs)
    return DiscreteDist(points, [x / total for x in probs])


def random_joint_coupling(
    mu: DiscreteDist, nu: DiscreteDist, seed: int, iterations: int = 400
) -> DiscreteDist:
    """Random coupling with the given marginals, via Sinkhorn scaling.

    Starts from a strictly positive random matrix and alternately rescales
    rows and columns; marginals match to within a few ulps, which is enough
    for transport checks at the 1e-12 tolerance.
    """
    rng = rng_from_seed(seed)
    mass = -np.log(uniform_open(rng, (len(mu.points), len(nu.points))))
    for _ in range(iterations):
        mass *= (mu.probs / mass.sum(axis=1))[:, None]
        mass *= (nu.probs / mass.sum(axis=0))[None, :]
    mass /= mass.sum()
    points = [(x, y) for x in mu.points for y in nu.points]
    return DiscreteDist(points, mass.ravel())
