"""Closed axis-parallel cubes and the handful of operations on them we need."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    """Inputs live in different ambient dimensions."""


@dataclass(frozen=True)
class Cube:
    """Closed cube ``{y : max_i |y_i - center_i| <= side / 2}``."""

    center: tuple
    side: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.ravel(self.center)))
        object.__setattr__(self, "side", float(self.side))
        if not self.side > 0:
            raise ValueError(f"cube side must be positive, got {self.side}")
        if not self.center:
            raise ValueError("cube center must have at least one coordinate")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def half(self) -> float:
        return self.side / 2.0

    def as_array(self) -> np.ndarray:
        return np.array(self.center)

    def lower(self) -> np.ndarray:
        return self.as_array() - self.half

    def upper(self) -> np.ndarray:
        return self.as_array() + self.half

    def to_json(self) -> dict:
        return {"center": list(self.center), "side": self.side}

    @classmethod
    def from_json(cls, obj: dict) -> "Cube":
        return cls(obj["center"], obj["side"])

    def __repr__(self):
        c = ", ".join(f"{v:g}" for v in self.center)
        return f"Cube(center=({c}), side={self.side:g})"


def _check_dim(a: int, b: int):
    if a != b:
        raise DimensionError(f"dimension mismatch: {a} vs {b}")


def dilate(Q: Cube, eta: float) -> Cube:
    """Concentric cube with side ``eta * side(Q)``."""
    if not eta > 0:
        raise ValueError(f"dilation factor must be positive, got {eta}")
    return Cube(Q.center, Q.side * eta)


def sup_dist(points: np.ndarray, center) -> np.ndarray:
    """Sup-norm distance from each row of ``points`` to ``center``."""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[None, :]
    return np.abs(points - np.asarray(center, dtype=float)).max(axis=1)


def contains_point(Q: Cube, x) -> bool:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _check_dim(Q.dim, x.shape[0])
    return bool(np.all(np.abs(x - Q.as_array()) <= Q.half))


def contains_points(Q: Cube, points: np.ndarray) -> np.ndarray:
    """Boolean membership mask for a ``(N, d)`` array of points."""
    points = np.asarray(points, dtype=float)
    _check_dim(Q.dim, points.shape[1])
    return np.all(np.abs(points - Q.as_array()) <= Q.half, axis=1)


def contains_cube(outer: Cube, inner: Cube) -> bool:
    _check_dim(outer.dim, inner.dim)
    return bool(np.all(outer.lower() <= inner.lower()) and np.all(inner.upper() <= outer.upper()))


def cubes_intersect(a: Cube, b: Cube) -> bool:
    _check_dim(a.dim, b.dim)
    return bool(np.all(np.abs(a.as_array() - b.as_array()) <= a.half + b.half))


def critical_dilations(points: np.ndarray, Q: Cube, eta_max: float) -> np.ndarray:
    """Dilation factors in ``[1, eta_max]`` at which an atom sits on the boundary of ``eta*Q``.

    ``eta -> mass(eta*Q)`` is a right-continuous step function whose jumps are
    exactly these values.  Duplicates are merged.
    """
    if eta_max < 1:
        raise ValueError("eta_max must be >= 1")
    points = np.asarray(points, dtype=float)
    _check_dim(Q.dim, points.shape[1])
    s = sup_dist(points, Q.center)
    eta = 2.0 * s / Q.side
    # round up by ulps until the atom really lies in dilate(Q, eta)
    for _ in range(4):
        short = Q.side * eta / 2.0 < s
        if not short.any():
            break
        eta[short] = np.nextafter(eta[short], np.inf)
    eta = eta[(eta >= 1.0) & (eta <= eta_max)]
    return np.unique(eta)
