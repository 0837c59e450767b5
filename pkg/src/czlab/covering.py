"""Besicovich-type selection of an almost disjoint subfamily of centered cubes.

The selection is the constructive greedy one: largest cubes first, and a cube
is kept only if its center is not already covered.  For cubes centered at the
candidate points this gives overlap at most ``2**d`` (two kept cubes whose
centers lie in the same closed orthant around a common point would contain
each other's centers).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Cube, contains_cube, contains_points, cubes_intersect, sup_dist
from .measure import AtomicMeasure, DensityVector, cube_mass, l1_norm

# derived bounds for the (5/4)-annulus strategy; see annulus_cover
ANNULUS_N = 14
ANNULUS_N_PRIME = 4


class OverlapError(RuntimeError):
    """Measured overlap of a selection exceeds the configured bound."""


@dataclass
class CandidateFamily:
    atoms: list
    cubes: list
    overlap_bound: int

    def __post_init__(self):
        if len(self.atoms) != len(self.cubes):
            raise ValueError("one cube per candidate atom")

    def __len__(self):
        return len(self.atoms)

    def check_centered(self, points) -> None:
        for j, Q in zip(self.atoms, self.cubes):
            if not np.array_equal(np.asarray(Q.center), np.asarray(points[j], dtype=float)):
                raise ValueError(f"candidate cube for atom {j} is not centered at it")


@dataclass
class Selection:
    atoms: list
    cubes: list
    overlap_counts: np.ndarray
    max_overlap: int
    overlap_bound: int
    N: int | None = None
    N_prime: int | None = None

    def to_json(self) -> dict:
        return {
            "cubes": [dict(Q.to_json(), atom=int(j)) for j, Q in zip(self.atoms, self.cubes)],
            "overlap_counts": [int(c) for c in self.overlap_counts],
            "max_overlap": int(self.max_overlap),
            "overlap_bound": int(self.overlap_bound),
            "N": self.N, "N_prime": self.N_prime,
        }


def overlap_counts(cubes, points) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    counts = np.zeros(points.shape[0], dtype=int)
    for Q in cubes:
        counts += contains_points(Q, points)
    return counts


def greedy_order(family: CandidateFamily) -> list:
    """Candidate positions sorted by side descending, then atom index ascending."""
    return sorted(range(len(family)), key=lambda i: (-family.cubes[i].side, family.atoms[i]))


def _greedy(family: CandidateFamily) -> list:
    if not len(family):
        return []
    d = family.cubes[0].dim
    kept = []
    kc = np.empty((0, d))
    kh = np.empty(0)
    for i in greedy_order(family):
        Q = family.cubes[i]
        c = Q.as_array()
        if kc.shape[0] and np.any(np.all(np.abs(kc - c) <= kh[:, None], axis=1)):
            continue
        kept.append(i)
        kc = np.vstack([kc, c])
        kh = np.append(kh, Q.half)
    return kept


def besicovich_select(family: CandidateFamily, points=None) -> Selection:
    """Greedy almost-disjoint subfamily covering every candidate center.

    ``points`` are where overlap is measured (defaults to the candidate
    centers); pass all atom positions to measure it over the whole support.
    Raises ``OverlapError`` if the measured overlap exceeds the bound.
    """
    kept = _greedy(family)
    atoms = [family.atoms[i] for i in kept]
    cubes = [family.cubes[i] for i in kept]
    if points is None:
        points = np.array([Q.center for Q in family.cubes]) if len(family) else np.empty((0, 1))
    counts = overlap_counts(cubes, points)
    sel = Selection(atoms, cubes, counts, int(counts.max()) if counts.size else 0,
                    family.overlap_bound)
    if sel.max_overlap > family.overlap_bound:
        raise OverlapError(f"measured overlap {sel.max_overlap} exceeds bound {family.overlap_bound}")
    return sel


# --------------------------------------------------------------------------
# annulus strategy
# --------------------------------------------------------------------------

@dataclass
class AnnulusConfig:
    ratio: float = 1.25
    N: int | None = None
    N_prime: int | None = None
    Q0: Cube | None = None
    center: tuple | None = None


@dataclass
class AnnulusResult:
    Q0: Cube
    groups: dict
    selection: Selection
    N: int
    N_prime: int
    confined: bool
    violations: list = field(default_factory=list)

    def to_json(self) -> dict:
        out = self.selection.to_json()
        out.update({
            "Q0": self.Q0.to_json(), "confined": self.confined,
            "groups": {str(m): [int(a) for a in atoms] for m, atoms in self.groups.items()},
            "violations": self.violations,
        })
        return out


def choose_Q0(mu: AtomicMeasure, f: DensityVector, lam: float, center=None) -> Cube:
    """Smallest cube at ``center`` with ``2^{d+1} ||f||_1 / mu(Q0) < lam``."""
    d = mu.dim
    c = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    need = 2.0 ** (d + 1) * l1_norm(mu, f) / lam
    if not mu.total_mass > need:
        raise ValueError("lambda too small: no cube reaches the required mass")
    s = sup_dist(mu.points, c)
    order = np.argsort(s, kind="stable")
    for k in order:
        side = 2.0 * s[k] if s[k] > 0 else 1e-300
        Q = Cube(c, side)
        if cube_mass(mu, Q) > need:
            return Q
    raise ValueError("could not place Q0")  # pragma: no cover


def _shell(Q0: Cube, ratio: float, m: int) -> Cube | None:
    if m < 0:
        return None
    return Cube(Q0.center, Q0.side * ratio ** m)


def annulus_index(points, Q0: Cube, ratio: float = 1.25) -> np.ndarray:
    """Least ``m >= 0`` with the point in ``ratio^m Q0`` (closed)."""
    s = sup_dist(points, Q0.center)
    t = np.maximum(2.0 * s / Q0.side, 1.0)
    m = np.ceil(np.log(t) / math.log(ratio)).astype(int)
    for i in range(m.shape[0]):
        while s[i] > Q0.side * ratio ** m[i] / 2.0:
            m[i] += 1
        while m[i] > 0 and s[i] <= Q0.side * ratio ** (m[i] - 1) / 2.0:
            m[i] -= 1
    return m


def confinement_violations(family: CandidateFamily, index: dict, Q0: Cube, ratio: float,
                           N: int, N_prime: int) -> list:
    """Candidates from annulus ``m >= N'`` not inside ``Q_{m+N} minus Q_{m-N}``."""
    out = []
    for j, Q in zip(family.atoms, family.cubes):
        m = index[j]
        if m < N_prime:
            continue
        outer = _shell(Q0, ratio, m + N)
        inner = _shell(Q0, ratio, m - N)
        if not contains_cube(outer, Q) or (inner is not None and cubes_intersect(inner, Q)):
            out.append({"atom": int(j), "m": int(m)})
    return out


def annulus_cover(mu: AtomicMeasure, f: DensityVector, lam: float, family: CandidateFamily,
                  cfg: AnnulusConfig | None = None) -> AnnulusResult:
    """Besicovich selection run separately on each annulus ``Q_m minus Q_{m-1}``.

    ``Q_m = ratio^m Q0`` with Q0 so heavy that ``2^{d+1} ||f||_1 / mu(Q0) < lam``.
    With ratio 5/4 every stopping cube from annulus ``m >= 4`` lies in
    ``Q_{m+14} minus Q_{m-14}``: otherwise its side would exceed ``0.75 l(Q_m)``
    and its double would swallow Q0, contradicting the stopping inequality.
    When N, N' are not configured the smallest passing pair (N <= 14, N' <= 4)
    is found by scanning.
    """
    cfg = cfg or AnnulusConfig()
    d = mu.dim
    Q0 = cfg.Q0 or choose_Q0(mu, f, lam, cfg.center)
    idx = annulus_index(mu.points[family.atoms], Q0, cfg.ratio) if len(family) else np.empty(0, int)
    index = {j: int(m) for j, m in zip(family.atoms, idx)}

    if cfg.N is not None:
        N = cfg.N
        N_prime = cfg.N_prime if cfg.N_prime is not None else ANNULUS_N_PRIME
        violations = confinement_violations(family, index, Q0, cfg.ratio, N, N_prime)
    else:
        N, N_prime, violations = ANNULUS_N, ANNULUS_N_PRIME, None
        for n_try in range(1, ANNULUS_N + 1):
            for np_try in range(0, ANNULUS_N_PRIME + 1):
                if not confinement_violations(family, index, Q0, cfg.ratio, n_try, np_try):
                    N, N_prime, violations = n_try, np_try, []
                    break
            if violations is not None:
                break
        if violations is None:
            violations = confinement_violations(family, index, Q0, cfg.ratio, N, N_prime)

    bound = (2 ** d) * (2 * N + N_prime)
    groups = {}
    atoms, cubes = [], []
    for m in sorted(set(index.values())):
        members = [i for i, j in enumerate(family.atoms) if index[j] == m]
        sub = CandidateFamily([family.atoms[i] for i in members],
                              [family.cubes[i] for i in members], family.overlap_bound)
        sel = besicovich_select(sub)
        groups[m] = list(sel.atoms)
        atoms.extend(sel.atoms)
        cubes.extend(sel.cubes)
    counts = overlap_counts(cubes, mu.points)
    merged = Selection(atoms, cubes, counts, int(counts.max()) if counts.size else 0, bound,
                       N=N, N_prime=N_prime)
    if merged.max_overlap > bound:
        raise OverlapError(f"annulus selection overlap {merged.max_overlap} exceeds {bound}")
    return AnnulusResult(Q0, groups, merged, N, N_prime, not violations, violations)
