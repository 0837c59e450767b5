"""Doubling cubes, the annulus kernel integral, and the explicit constants.

A cube Q is (alpha, beta)-doubling when ``mu(alpha Q) <= beta mu(Q)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Cube, contains_points, dilate, sup_dist
from .measure import AtomicMeasure, GrowthViolation, cube_mass


@dataclass(frozen=True)
class DoublingParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not self.alpha > 1:
            raise ValueError(f"alpha must exceed 1, got {self.alpha}")

    def check(self, n: float) -> None:
        if not self.beta > self.alpha ** n:
            raise ValueError(f"need beta > alpha^n ({self.beta} <= {self.alpha}^{n})")

    def small_scale_regime(self, d: int) -> bool:
        """True when beta > alpha^d, the regime with arbitrarily small doubling cubes."""
        return self.beta > self.alpha ** d

    @classmethod
    def standard(cls, d: int) -> "DoublingParams":
        return cls(2.0, 2.0 ** (d + 1))

    @classmethod
    def for_R(cls, n: float, base: float = 6.0) -> "DoublingParams":
        return cls(base, base ** (n + 1))


@dataclass(frozen=True)
class DerivedConstants:
    """Explicit versions of the constants left implicit in the estimates.

    C1 bounds the annulus integral over a non-doubling stack of (alpha, beta)
    dilations, C3 bounds ``|alpha_i| / lambda``, C2 is the truncation level
    used for the sets A_k and ``B = 2 C2 + C3`` bounds ``sum_i |phi_i| / lambda``.
    """

    C1: float
    C2: float
    C3: float
    B: float
    K_overlap: float

    @classmethod
    def compute(cls, d: int, n: float, C0: float, K_overlap: float,
                alpha: float = 6.0, beta: float | None = None) -> "DerivedConstants":
        if beta is None:
            beta = alpha ** (n + 1)
        C1 = C0 * (math.sqrt(d) * alpha) ** n * beta / (beta - alpha ** n)
        C3 = 2.0 ** (-d)
        C2 = K_overlap * 6.0 ** (n + 1) / 2.0 ** (d + 1)
        return cls(C1=C1, C2=C2, C3=C3, B=2.0 * C2 + C3, K_overlap=float(K_overlap))

    def to_json(self) -> dict:
        return {"C1": self.C1, "C2": self.C2, "C3": self.C3, "B": self.B,
                "K_overlap": self.K_overlap}


def is_doubling(mu: AtomicMeasure, Q: Cube, p: DoublingParams) -> bool:
    """Zero-mass cubes count as doubling only if their dilation is also empty."""
    m = cube_mass(mu, Q)
    big = cube_mass(mu, dilate(Q, p.alpha))
    if m == 0.0:
        return big == 0.0
    return big <= p.beta * m


def _atom_index(mu: AtomicMeasure, x) -> int:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    hits = np.flatnonzero(np.all(mu.points == x, axis=1))
    if hits.size == 0:
        raise ValueError(f"{x} is not an atom of the measure")
    return int(hits[0])


def _scan_cap(mu: AtomicMeasure, base_mass: float, p: DoublingParams, side: float,
              center) -> int:
    # each non-doubling step multiplies the mass by more than beta; mass <= ||mu||
    cap = math.floor(math.log(mu.total_mass / base_mass) / math.log(p.beta)) if p.beta > 1 else 10 ** 6
    g = mu.growth
    ratio = p.beta / p.alpha ** g.n
    radius = math.sqrt(mu.dim) * side / 2.0
    on_atom = bool(np.any(np.all(mu.points == np.asarray(center, dtype=float), axis=1)))
    # growth is only verified for balls centered at atoms
    if on_atom and ratio > 1 and radius >= g.r_min:
        # beta^k mu(Q) < mu(alpha^k Q) <= C0 (sqrt(d) side alpha^k / 2)^n
        lhs = g.C0 * radius ** g.n / base_mass
        if lhs > 1:
            cap = min(cap, math.floor(math.log(lhs) / math.log(ratio)))
        else:
            cap = 0
    return max(cap, 0) + 2


def doubling_cube_at_least(mu: AtomicMeasure, x, c: float, p: DoublingParams) -> Cube:
    """Cube centered at the atom x with side ``c alpha^k`` for the least doubling k >= 0."""
    if not c > 0:
        raise ValueError("side floor must be positive")
    p.check(mu.growth.n)
    j = _atom_index(mu, x)
    cap = _scan_cap(mu, float(mu.weights[j]), p, c, mu.points[j])
    for k in range(cap + 1):
        Q = Cube(mu.points[j], c * p.alpha ** k)
        if is_doubling(mu, Q, p):
            return Q
    raise GrowthViolation(
        f"no ({p.alpha:g},{p.beta:g})-doubling cube at atom {j} within {cap} dilations; "
        "the growth bound cannot hold")


def doubling_power(mu: AtomicMeasure, Q: Cube, base: float = 6.0,
                   p: DoublingParams | None = None, k_min: int = 1) -> int:
    """Least ``k >= k_min`` such that ``base^k Q`` is doubling."""
    if p is None:
        p = DoublingParams.for_R(mu.growth.n, base)
    p.check(mu.growth.n)
    m = cube_mass(mu, Q)
    if m == 0.0:
        raise ValueError("smallest_doubling_power needs a cube of positive mass")
    cap = k_min + _scan_cap(mu, m, p, Q.side * base ** k_min, Q.center)
    for k in range(k_min, cap + 1):
        if is_doubling(mu, dilate(Q, base ** k), p):
            return k
    raise GrowthViolation(f"no doubling dilation base^k Q with k <= {cap}")


def smallest_doubling_power(mu: AtomicMeasure, Q: Cube, base: float = 6.0,
                            p: DoublingParams | None = None, k_min: int = 1) -> Cube:
    k = doubling_power(mu, Q, base, p, k_min)
    return dilate(Q, base ** k)


def annulus_kernel_integral(mu: AtomicMeasure, Q: Cube, R: Cube, n: float | None = None) -> float:
    """``sum w_j / |x_j - x_Q|^n`` over atoms of ``R`` that are not in ``Q``."""
    if Q.center != R.center:
        raise ValueError("annulus integral needs concentric cubes")
    if R.side < Q.side:
        raise ValueError("outer cube must be at least as large as the inner one")
    if n is None:
        n = mu.growth.n
    sel = contains_points(R, mu.points) & ~contains_points(Q, mu.points)
    if not sel.any():
        return 0.0
    diff = mu.points[sel] - Q.as_array()
    dist = np.sqrt((diff * diff).sum(axis=1))
    return float((mu.weights[sel] / dist ** n).sum())


def small_doubling_side(mu: AtomicMeasure, j: int, alpha: float) -> float:
    """Sides below this value give cubes at atom j whose alpha-dilation holds no other atom.

    Such cubes are (alpha, beta)-doubling for every beta >= 1.
    """
    if mu.size == 1:
        return math.inf
    s = sup_dist(np.delete(mu.points, j, axis=0), mu.points[j]).min()
    return float(2.0 * s / alpha)
