"""Finite atomic measures with a declared growth profile ``mu(B(x,r)) <= C0 r^n``."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .geometry import Cube, DimensionError, contains_points


# exact ties such as mu(B(x, h)) = 3h on a grid pick up an ulp of roundoff
GROWTH_RTOL = 1e-12


class GrowthViolation(ValueError):
    """The declared growth constant does not hold for the measure."""


@dataclass(frozen=True)
class GrowthProfile:
    n: float
    C0: float
    r_min: float

    def __post_init__(self):
        if not self.n > 0:
            raise ValueError(f"growth exponent must be positive, got {self.n}")
        if not self.C0 > 0:
            raise ValueError(f"C0 must be positive, got {self.C0}")
        if not self.r_min > 0:
            raise ValueError(f"r_min must be positive, got {self.r_min}")

    def to_json(self):
        return {"n": self.n, "C0": self.C0, "r_min": self.r_min}


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """``mu = sum_j w_j delta_{x_j}`` on R^d.

    ``points`` is an ``(N, d)`` array, ``weights`` has length N.  Both are
    stored read-only.
    """

    points: np.ndarray
    weights: np.ndarray
    growth: GrowthProfile
    total_mass: float = field(init=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.ravel(np.array(self.weights, dtype=float))
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("a measure needs at least one atom")
        if w.shape[0] != pts.shape[0]:
            raise ValueError(f"{pts.shape[0]} atoms but {w.shape[0]} weights")
        if not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise ValueError("atom weights must be finite and strictly positive")
        if not np.all(np.isfinite(pts)):
            raise ValueError("atom positions must be finite")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise ValueError("atom positions must be pairwise distinct")
        if self.growth.n > pts.shape[1]:
            raise ValueError(f"growth exponent n={self.growth.n} exceeds dimension {pts.shape[1]}")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "total_mass", float(self.weights.sum()))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def diameter(self) -> float:
        """Side of the smallest axis-parallel box edge enclosing all atoms (sup-norm diameter)."""
        return float((self.points.max(axis=0) - self.points.min(axis=0)).max())

    def bounding_cube(self) -> Cube:
        lo, hi = self.points.min(axis=0), self.points.max(axis=0)
        side = float((hi - lo).max())
        return Cube((lo + hi) / 2.0, side if side > 0 else 1.0)

    def with_growth(self, growth: GrowthProfile) -> "AtomicMeasure":
        return AtomicMeasure(self.points, self.weights, growth)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "growth": self.growth.to_json(),
            "atoms": [{"x": list(map(float, x)), "w": float(w)}
                      for x, w in zip(self.points, self.weights)],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AtomicMeasure":
        atoms = obj["atoms"]
        pts = np.array([a["x"] for a in atoms], dtype=float).reshape(len(atoms), -1)
        if "dim" in obj and pts.shape[1] != obj["dim"]:
            raise DimensionError(f"declared dim {obj['dim']} but atoms have {pts.shape[1]} coordinates")
        g = obj["growth"]
        return cls(pts, [a["w"] for a in atoms], GrowthProfile(g["n"], g["C0"], g["r_min"]))


@dataclass(frozen=True, eq=False)
class DensityVector:
    """Values ``f(x_j)`` of a function on the atoms, real or complex."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ravel(np.array(self.values))
        if v.dtype.kind not in "fc":
            v = v.astype(float)
        if not np.all(np.isfinite(v)):
            raise ValueError("density values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]

    @property
    def is_complex(self) -> bool:
        return self.values.dtype.kind == "c"

    def abs(self) -> np.ndarray:
        return np.abs(self.values)

    def to_json(self) -> dict:
        return {"values": encode_values(self.values)}

    @classmethod
    def from_json(cls, obj: dict) -> "DensityVector":
        return cls(decode_values(obj["values"]))


def encode_values(v) -> list:
    """Reals stay reals, complex numbers become ``[re, im]`` pairs."""
    v = np.asarray(v)
    if v.dtype.kind == "c":
        return [[float(z.real), float(z.imag)] for z in v]
    return [float(z) for z in v]


def decode_values(raw) -> np.ndarray:
    if any(isinstance(z, (list, tuple)) for z in raw):
        return np.array([complex(z[0], z[1]) if isinstance(z, (list, tuple)) else complex(z)
                         for z in raw])
    return np.array(raw, dtype=float)


def _check_pair(mu: AtomicMeasure, f: DensityVector):
    if len(f) != mu.size:
        raise ValueError(f"density has {len(f)} values but measure has {mu.size} atoms")


def l1_norm(mu: AtomicMeasure, f: DensityVector) -> float:
    _check_pair(mu, f)
    return float((f.abs() * mu.weights).sum())


def cube_mass(mu: AtomicMeasure, Q: Cube) -> float:
    """``mu(Q)`` for the closed cube Q."""
    return float(mu.weights[contains_points(Q, mu.points)].sum())


def ball_mass(mu: AtomicMeasure, x, r: float) -> float:
    """``mu(B(x, r))`` for the closed Euclidean ball."""
    if not r > 0:
        raise ValueError("radius must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape[0] != mu.dim:
        raise DimensionError(f"point has dimension {x.shape[0]}, measure has {mu.dim}")
    r2 = np.zeros(mu.size)
    for k in range(mu.dim):
        t = mu.points[:, k] - x[k]
        r2 += t * t
    return float(mu.weights[np.sqrt(r2) <= r].sum())


def integrate_abs(mu: AtomicMeasure, f: DensityVector, Q: Cube) -> float:
    """``int_Q |f| dmu``."""
    _check_pair(mu, f)
    inside = contains_points(Q, mu.points)
    return float((f.abs()[inside] * mu.weights[inside]).sum())


@dataclass
class GrowthReport:
    passed: bool
    max_ratio: float
    worst_atom: int
    worst_radius: float
    n: float
    C0: float
    r_min: float
    violations: list

    def to_json(self) -> dict:
        return {
            "passed": self.passed, "max_ratio": self.max_ratio,
            "worst_atom": self.worst_atom, "worst_radius": self.worst_radius,
            "n": self.n, "C0": self.C0, "r_min": self.r_min,
            "violations": self.violations,
        }


def growth_ratios(points, weights, n: float, r_min: float):
    """Per-atom ``max_{r >= r_min} mu(B(x_j, r)) / r^n`` and the radius attaining it.

    Ball mass is a right-continuous step function of r jumping only at
    interatomic distances, and ``r^n`` increases, so the supremum is attained
    at ``r_min`` or at one of those distances.
    """
    return kernels.growth_scan(points, weights, n, r_min)


def verify_growth(mu: AtomicMeasure, max_listed: int = 20) -> GrowthReport:
    g = mu.growth
    ratio, radius = growth_ratios(mu.points, mu.weights, g.n, g.r_min)
    worst = int(np.argmax(ratio))
    bad = np.flatnonzero(ratio > g.C0 * (1.0 + GROWTH_RTOL))
    violations = [{"atom": int(j), "r": float(radius[j]), "ratio": float(ratio[j])}
                  for j in bad[np.argsort(-ratio[bad], kind="stable")][:max_listed]]
    return GrowthReport(
        passed=bad.size == 0, max_ratio=float(ratio[worst]), worst_atom=worst,
        worst_radius=float(radius[worst]), n=g.n, C0=g.C0, r_min=g.r_min,
        violations=violations)


def fit_growth_constant(points, weights, n: float, r_min: float) -> float:
    """Smallest C0 for which the growth bound holds at every atom for r >= r_min."""
    ratio, _ = growth_ratios(points, weights, n, r_min)
    return float(ratio.max())


def min_separation(points) -> float:
    """Smallest Euclidean distance between two distinct atoms (inf for one atom)."""
    points = np.asarray(points, dtype=float)
    if points.shape[0] < 2:
        return float("inf")
    d, _ = cKDTree(points).query(points, k=2)
    return float(d[:, 1].min())


def load_measure(path) -> AtomicMeasure:
    with open(path) as fh:
        return AtomicMeasure.from_json(json.load(fh))


def load_density(path) -> DensityVector:
    with open(path) as fh:
        return DensityVector.from_json(json.load(fh))
