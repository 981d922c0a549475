"""Finite discrete distributions and the closed-form continuous noise families.

The discrete type is the substrate for all exact oracles; the continuous
families (isotropic Gaussian, Laplace, and the two-scale Laplace convolution)
are the noise models whose divergences the rest of the package bounds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.special import ndtri

from ._rng import rng_from_seed, uniform_open

PROB_ATOL = 1e-12

# Below this relative scale gap the two-scale Laplace density switches to the
# equal-scale branch: the 1/(lambda1 - lambda2) factors cancel catastrophically.
LAP2_EQUAL_SCALE_RTOL = 1e-8

Point = Union[str, int, tuple]


def _is_coordinate(point) -> bool:
    return isinstance(point, tuple) and len(point) > 0 and all(
        isinstance(c, (int, float)) and not isinstance(c, bool) for c in point
    )


def _canonical_point(point) -> Point:
    if isinstance(point, (list, tuple)) and not isinstance(point, str):
        return tuple(float(c) if isinstance(c, (int, float)) else _canonical_point(c) for c in point)
    return point


@dataclass(frozen=True)
class DiscreteDist:
    """Probability distribution on a finite set of labeled points.

    Points are opaque labels (str or int) or coordinate tuples in R^d; only
    geometric operations (W-infinity, projections) require coordinates.
    """

    points: tuple
    probs: np.ndarray

    def __init__(self, points: Sequence[Point], probs: Sequence[float]):
        pts = tuple(_canonical_point(p) for p in points)
        pr = np.asarray(probs, dtype=np.float64)
        if pr.ndim != 1 or len(pts) != pr.shape[0]:
            raise ValueError("points and probs must be 1-D of equal length")
        if len(set(pts)) != len(pts):
            raise ValueError("support points must be pairwise distinct")
        if np.any(pr < 0):
            raise ValueError("probabilities must be non-negative")
        if abs(float(pr.sum()) - 1.0) > PROB_ATOL:
            raise ValueError(f"probabilities sum to {pr.sum()!r}, not 1")
        pr.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "probs", pr)

    @classmethod
    def from_probs(cls, probs: Sequence[float], prefix: str = "s") -> "DiscreteDist":
        return cls([f"{prefix}{i}" for i in range(len(probs))], probs)

    @property
    def has_coords(self) -> bool:
        return all(_is_coordinate(p) for p in self.points)

    def coords(self) -> np.ndarray:
        """Support coordinates as an (n, d) array; rejects coordinate-free points."""
        if not self.has_coords:
            raise ValueError("distribution carries no coordinates")
        arr = np.array(self.points, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        return arr

    def prob_of(self, point: Point) -> float:
        key = _canonical_point(point)
        for p, pr in zip(self.points, self.probs):
            if p == key:
                return float(pr)
        return 0.0

    def to_json(self) -> str:
        pts = [list(p) if _is_coordinate(p) else p for p in self.points]
        return json.dumps({"points": pts, "probs": [float(x) for x in self.probs]})

    @classmethod
    def from_json(cls, text: str) -> "DiscreteDist":
        obj = json.loads(text)
        return cls(obj["points"], obj["probs"])


@dataclass(frozen=True)
class GaussianDist:
    """Isotropic Gaussian N(mean, variance * I) on R^d."""

    mean: tuple
    variance: float

    def __init__(self, mean, variance: float):
        m = np.atleast_1d(np.asarray(mean, dtype=np.float64))
        if m.ndim != 1:
            raise ValueError("mean must be a vector")
        if not variance > 0:
            raise ValueError("variance must be positive")
        object.__setattr__(self, "mean", tuple(float(x) for x in m))
        object.__setattr__(self, "variance", float(variance))

    @property
    def dim(self) -> int:
        return len(self.mean)


@dataclass(frozen=True)
class LaplaceDist:
    """Laplace distribution with location ``loc`` and scale ``scale``."""

    loc: float
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")


@dataclass(frozen=True)
class Lap2Dist:
    """Sum of two independent centered Laplace variables, shifted by ``loc``."""

    loc: float
    lambda1: float
    lambda2: float

    def __post_init__(self):
        if not (self.lambda1 > 0 and self.lambda2 > 0):
            raise ValueError("both scales must be positive")


NoiseFamily = Union[GaussianDist, LaplaceDist, Lap2Dist]


def lap2_density(x: float, d: Lap2Dist) -> float:
    """Density of the two-scale Laplace convolution at ``x``.

    Two branches: distinct scales use the partial-fraction form, (near-)equal
    scales the polynomial-times-exponential form.  Symmetric about ``loc``.
    """
    l1, l2 = d.lambda1, d.lambda2
    z = abs(x - d.loc)
    if abs(l1 - l2) < LAP2_EQUAL_SCALE_RTOL * max(l1, l2):
        lam = 0.5 * (l1 + l2)
        return math.exp(-z / lam) * (lam + z) / (4.0 * lam * lam)
    s, t = 1.0 / (l1 + l2), 1.0 / (l1 - l2)
    return 0.25 * ((s + t) * math.exp(-z / l1) + (s - t) * math.exp(-z / l2))


def _gaussian_density(d: GaussianDist, x) -> float:
    xv = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if xv.shape != (d.dim,):
        raise ValueError(f"x has dimension {xv.shape}, family expects ({d.dim},)")
    sq = float(np.sum((xv - np.asarray(d.mean)) ** 2))
    return math.exp(-sq / (2.0 * d.variance)) / (2.0 * math.pi * d.variance) ** (d.dim / 2.0)


def density(family: NoiseFamily, x) -> float:
    """Closed-form density of the family at ``x``."""
    if isinstance(family, GaussianDist):
        return _gaussian_density(family, x)
    if isinstance(family, LaplaceDist):
        z = abs(float(x) - family.loc)
        return math.exp(-z / family.scale) / (2.0 * family.scale)
    if isinstance(family, Lap2Dist):
        return lap2_density(float(x), family)
    raise TypeError(f"unsupported family {type(family).__name__}")


def _laplace_from_uniform(u: np.ndarray, loc: float, scale: float) -> np.ndarray:
    # Inverse CDF; u in (0, 1) keeps the log argument positive.
    c = u - 0.5
    return loc - scale * np.sign(c) * np.log1p(-2.0 * np.abs(c))


def sample(family: NoiseFamily, rng_seed: int, n: int) -> np.ndarray:
    """``n`` i.i.d. draws; identical seeds give bit-identical output.

    Gaussian draws invert the normal CDF on the shared uniform stream; Laplace
    and Lap2 use the Laplace inverse CDF (Lap2 consumes two uniform blocks,
    lambda1 first).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = rng_from_seed(rng_seed)
    if isinstance(family, GaussianDist):
        u = uniform_open(rng, (n, family.dim))
        z = ndtri(u) * math.sqrt(family.variance) + np.asarray(family.mean)
        return z if family.dim > 1 else z[:, 0]
    if isinstance(family, LaplaceDist):
        return _laplace_from_uniform(uniform_open(rng, n), family.loc, family.scale)
    if isinstance(family, Lap2Dist):
        a = _laplace_from_uniform(uniform_open(rng, n), 0.0, family.lambda1)
        b = _laplace_from_uniform(uniform_open(rng, n), 0.0, family.lambda2)
        return family.loc + a + b
    raise TypeError(f"unsupported family {type(family).__name__}")


def quadrature_domain(family: NoiseFamily, n_scales: float = 40.0) -> tuple[float, float]:
    """Interval carrying all but < 1e-300 of the family's mass (1-D only)."""
    if isinstance(family, GaussianDist):
        if family.dim != 1:
            raise ValueError("quadrature domain is 1-D only")
        s = math.sqrt(family.variance)
        return family.mean[0] - n_scales * s, family.mean[0] + n_scales * s
    if isinstance(family, LaplaceDist):
        return family.loc - n_scales * family.scale, family.loc + n_scales * family.scale
    if isinstance(family, Lap2Dist):
        s = max(family.lambda1, family.lambda2)
        return family.loc - n_scales * s, family.loc + n_scales * s
    raise TypeError(f"unsupported family {type(family).__name__}")
