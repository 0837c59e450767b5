"""Measure and density generators and the end-to-end weak (1,1) experiment."""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .czdecomp import admissibility_floor, decompose, verify_decomposition
from .measure import (AtomicMeasure, DensityVector, GrowthProfile, GrowthViolation,
                      fit_growth_constant, l1_norm, load_measure, min_separation,
                      verify_growth)
from .operators import Kernel, empirical_l2_norm, weak_sweep

GENERATORS = ("grid", "cantor", "segment_plus_atoms", "lacunary", "random", "file")

# slack applied to fitted growth constants so that re-verification is not a tie
FIT_SLACK = 1.0 + 1e-12


@dataclass
class GeneratorSpec:
    kind: str
    dim: int = 1
    count: int = 100
    n: float | None = None
    C0: float | None = None
    r_min: float | None = None
    seed: int = 0
    depth: int = 4
    ratio: float | None = None
    heavy: int = 0
    heavy_mass: float = 25.0
    levels: int = 6
    path: str | None = None
    total_mass: float = 1.0

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


class InstanceError(ValueError):
    """A generator spec that cannot produce a valid measure."""


def _finish(points, weights, n, C0, r_min) -> AtomicMeasure:
    points = np.asarray(points, dtype=float)
    if r_min is None:
        r_min = min_separation(points)
        if not math.isfinite(r_min):
            r_min = 1.0
    if C0 is None:
        C0 = fit_growth_constant(points, weights, n, r_min) * FIT_SLACK
    mu = AtomicMeasure(points, weights, GrowthProfile(n, C0, r_min))
    rep = verify_growth(mu)
    if not rep.passed:
        raise GrowthViolation(
            f"declared C0={C0:g} (n={n:g}, r_min={r_min:g}) fails: tightest ratio {rep.max_ratio:g}")
    return mu


def _grid(spec: GeneratorSpec):
    d = spec.dim
    m = max(1, round(spec.count ** (1.0 / d)))
    h = 1.0 / m
    axes = [np.arange(m) * h] * d
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    w = np.full(pts.shape[0], spec.total_mass / pts.shape[0])
    n = float(d) if spec.n is None else spec.n
    C0 = spec.C0 if spec.C0 is not None else (3.0 ** d if n == d and spec.total_mass == 1.0 else None)
    return pts, w, n, C0, spec.r_min if spec.r_min is not None else h


def _cantor(spec: GeneratorSpec, rng):
    """Corner Cantor iterate: 2 pieces per level in d=1, 4 corners in d=2."""
    d = spec.dim
    if d not in (1, 2):
        raise InstanceError("cantor generator supports d = 1 or 2")
    rho = spec.ratio if spec.ratio is not None else (1.0 / 3.0 if d == 1 else 0.25)
    pieces = 2 ** d
    corners = np.array(np.meshgrid(*[[0.0, 1.0]] * d, indexing="ij")).reshape(d, -1).T
    lows = np.zeros((1, d))
    side = 1.0
    for _ in range(spec.depth):
        new_side = side * rho
        lows = (lows[:, None, :] + corners[None, :, :] * (side - new_side)).reshape(-1, d)
        side = new_side
    pts = lows + side / 2.0
    w = np.full(pts.shape[0], spec.total_mass / pts.shape[0])
    n = min(float(d), math.log(pieces) / math.log(1.0 / rho)) if spec.n is None else spec.n
    pts, w = _add_heavy(pts, w, spec, rng, side)
    r_min = spec.r_min if spec.r_min is not None else min(side, min_separation(pts))
    return pts, w, n, spec.C0, r_min


def _add_heavy(pts, w, spec, rng, spacing):
    if spec.heavy <= 0:
        return pts, w
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    extra = []
    while len(extra) < spec.heavy:
        cand = lo + rng.random(pts.shape[1]) * (hi - lo)
        # keep heavy atoms off the existing support by at least one spacing
        if np.min(np.linalg.norm(pts - cand, axis=1)) > spacing:
            extra.append(cand)
    heavy_w = np.full(spec.heavy, spec.heavy_mass * float(np.median(w)))
    return np.vstack([pts, extra]), np.concatenate([w, heavy_w])


def _segment_plus_atoms(spec: GeneratorSpec, rng):
    """Uniform line mass on [0,1] x {0} plus isolated heavy atoms above it."""
    d = max(spec.dim, 2)
    m = spec.count - spec.heavy
    if m < 1:
        raise InstanceError("segment_plus_atoms needs count > heavy")
    h = 1.0 / m
    pts = np.zeros((m, d))
    pts[:, 0] = (np.arange(m) + 0.5) * h
    w = np.full(m, h * spec.total_mass)
    heavy = max(spec.heavy, 0)
    if heavy:
        hx = rng.uniform(0.05, 0.95, heavy)
        hy = h * (1.5 + 10.0 ** rng.uniform(0, 1.5, heavy))
        hp = np.zeros((heavy, d))
        hp[:, 0] = hx
        hp[:, 1] = hy
        pts = np.vstack([pts, hp])
        w = np.concatenate([w, np.full(heavy, spec.heavy_mass * h * spec.total_mass)])
    n = 1.0 if spec.n is None else spec.n
    return pts, w, n, spec.C0, spec.r_min if spec.r_min is not None else h


def _lacunary(spec: GeneratorSpec, rng):
    """Line mass on [0,1] x {0} plus light clusters hovering at heights 0.3 rho^k.

    Each cluster is two atoms of the base spacing h; its mass stays ~2h while
    the ball reaching down to the line gains mass ~ height, so the doubling
    ratio at the clusters ranges up to ~ 0.3 / h.
    """
    rho = spec.ratio if spec.ratio is not None else 0.5
    per = 2
    base = spec.count - per * spec.levels
    if base < 2:
        raise InstanceError("lacunary needs count > 2 * levels + 1")
    h = 1.0 / base
    pts = [np.column_stack([(np.arange(base) + 0.5) * h, np.zeros(base)])]
    xs = rng.uniform(0.1, 0.9, spec.levels)
    for k in range(spec.levels):
        height = max(0.3 * rho ** k, 2.0 * h)
        pts.append(np.column_stack([xs[k] + np.arange(per) * h, np.full(per, height)]))
    pts = np.unique(np.vstack(pts), axis=0)
    w = np.full(pts.shape[0], h * spec.total_mass)
    n = 1.0 if spec.n is None else spec.n
    return pts, w, n, spec.C0, spec.r_min if spec.r_min is not None else h


def _random(spec: GeneratorSpec, rng):
    """Uniform or clustered random atoms with log-normal weights."""
    d = spec.dim
    N = spec.count
    if rng.random() < 0.5:
        pts = rng.random((N, d))
    else:
        centers = rng.random((max(1, N // 25), d))
        pick = rng.integers(0, centers.shape[0], N)
        spread = 10.0 ** rng.uniform(-3, -1, centers.shape[0])
        pts = centers[pick] + rng.normal(size=(N, d)) * spread[pick][:, None]
    pts = np.unique(pts, axis=0)
    w = np.exp(rng.normal(0.0, 1.0, pts.shape[0]))
    w *= spec.total_mass / w.sum()
    n = float(d) if spec.n is None else spec.n
    return pts, w, n, spec.C0, spec.r_min


def gen_measure(spec: GeneratorSpec) -> AtomicMeasure:
    """Build the measure described by ``spec``; deterministic in ``spec.seed``."""
    if spec.kind not in GENERATORS:
        raise InstanceError(f"unknown generator {spec.kind!r}")
    if spec.kind == "file":
        if not spec.path:
            raise InstanceError("file generator needs a path")
        return load_measure(spec.path)
    if spec.count < 1:
        raise InstanceError("generator needs at least one atom")
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "grid":
        parts = _grid(spec)
    elif spec.kind == "cantor":
        parts = _cantor(spec, rng)
    elif spec.kind == "segment_plus_atoms":
        parts = _segment_plus_atoms(spec, rng)
    elif spec.kind == "lacunary":
        parts = _lacunary(spec, rng)
    else:
        parts = _random(spec, rng)
    return _finish(*parts)


def gen_density(mu: AtomicMeasure, kind: str = "spikes", seed: int = 0, spikes: int | None = None,
                scale: float = 1.0, complex_values: bool = False) -> DensityVector:
    """Test densities.

    ``spikes``: small background plus a few large values of random sign;
    ``ones``: constant one; ``random``: standard normal values.
    """
    rng = np.random.default_rng(seed)
    N = mu.size
    if kind == "ones":
        v = np.ones(N)
    elif kind == "random":
        v = rng.normal(size=N)
    elif kind == "spikes":
        k = spikes if spikes is not None else max(1, N // 20)
        v = rng.normal(0.0, 0.2, N)
        idx = rng.choice(N, size=min(k, N), replace=False)
        v[idx] = rng.choice([-1.0, 1.0], size=idx.size) * 10.0 ** rng.uniform(0.5, 2.0, idx.size)
    else:
        raise InstanceError(f"unknown density kind {kind!r}")
    v = v * scale
    if complex_values:
        v = v * np.exp(1j * rng.uniform(0, 2 * np.pi, N))
    return DensityVector(v)


def lambda_grid(mu: AtomicMeasure, f: DensityVector, count: int = 12) -> np.ndarray:
    """Geometric grid from 1.01x the admissibility floor to 2x max |f|."""
    lo = admissibility_floor(mu, f) * 1.01
    hi = max(float(f.abs().max()) * 2.0, lo * 1.5)
    return np.geomspace(lo, hi, count)


def random_instance(seed: int, dim: int | None = None, n: float | None = None,
                    max_atoms: int = 500):
    """A randomized (measure, density) pair for the invariant suite."""
    rng = np.random.default_rng(seed)
    d = int(dim if dim is not None else rng.integers(1, 3))
    if n is None:
        n = float(rng.choice(sorted({0.5, 1.0, float(d)})))
    count = int(rng.integers(20, max_atoms + 1))
    mu = gen_measure(GeneratorSpec("random", dim=d, count=count, n=n, seed=seed))
    f = gen_density(mu, "spikes", seed=seed + 1, complex_values=(d == 2 and rng.random() < 0.25))
    return mu, f


# --------------------------------------------------------------------------
# experiment
# --------------------------------------------------------------------------

class InvariantFailure(RuntimeError):
    def __init__(self, condition: str, lam: float, seed: int):
        super().__init__(f"invariant {condition!r} failed at lambda={lam:g}; reproduce with seed={seed}")
        self.condition = condition
        self.lam = lam
        self.seed = seed


@dataclass
class ExperimentConfig:
    measure: dict = field(default_factory=lambda: {"kind": "segment_plus_atoms", "count": 200,
                                                   "heavy": 5, "dim": 2})
    density: dict = field(default_factory=lambda: {"kind": "spikes"})
    kernel: dict = field(default_factory=lambda: {"kind": "cauchy"})
    eps_grid: list | None = None
    eps_decades: float = 2.0
    eps_steps: int = 10
    lambda_count: int = 20
    l2_trials: int = 2
    seed: int = 0
    workers: int = 1
    lambdas: list | None = None
    include_parts: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


def make_kernel(spec: dict, dim: int) -> Kernel:
    kind = spec.get("kind", "cauchy")
    if kind == "cauchy":
        return Kernel.cauchy(C_k=spec.get("C_k", 2.0))
    if kind == "riesz":
        return Kernel.riesz(spec.get("n", 1.0), spec.get("component", 0), dim, spec.get("C_k", 2.0))
    if kind == "power":
        return Kernel.power(spec.get("n", 1.0), dim)
    raise InstanceError(f"unknown kernel {kind!r}")


def eps_grid(mu: AtomicMeasure, decades: float = 2.0, steps: int = 10) -> np.ndarray:
    lo = mu.growth.r_min
    return np.geomspace(lo, lo * 10.0 ** decades, steps)


def run_weak11_experiment(config: ExperimentConfig, measure: AtomicMeasure | None = None,
                          density: DensityVector | None = None, csv_path=None) -> dict:
    """Decompose at every admissible lambda, then sweep the truncated transform.

    Raises ``InvariantFailure`` naming the first failing condition.
    Timing lives under the ``timing`` key; everything else is reproducible
    from the config and seed.
    """
    t0 = time.perf_counter()
    mspec = dict(config.measure)
    mspec.setdefault("seed", config.seed)
    mu = measure if measure is not None else gen_measure(GeneratorSpec.from_dict(mspec))
    dspec = dict(config.density)
    f = density if density is not None else gen_density(
        mu, dspec.get("kind", "spikes"), seed=dspec.get("seed", config.seed + 1),
        spikes=dspec.get("spikes"), scale=dspec.get("scale", 1.0),
        complex_values=dspec.get("complex", False))
    K = make_kernel(config.kernel, mu.dim)

    floor = admissibility_floor(mu, f)
    lambdas = (np.asarray(config.lambdas, dtype=float) if config.lambdas
               else lambda_grid(mu, f, config.lambda_count))
    per_lambda = []
    max_phi = 0.0
    constants = None
    t1 = time.perf_counter()
    def one(lam):
        if not lam > floor:
            return {"lambda": float(lam), "skipped": "inadmissible"}, None
        dec = decompose(mu, f, float(lam))
        return dec, verify_decomposition(mu, f, float(lam), dec)

    # lambda points are independent; map() keeps the merge in grid order
    with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
        results = list(pool.map(one, lambdas))
    for lam, (dec, rep) in zip(lambdas, results):
        if rep is None:
            per_lambda.append(dec)
            continue
        constants = rep.constants
        if not rep.passed:
            raise InvariantFailure(rep.failures()[0], float(lam), config.seed)
        phi_ratio = rep["phi_sum"].measured
        max_phi = max(max_phi, phi_ratio)
        per_lambda.append({"lambda": float(lam), "parts": len(dec.parts),
                           "max_overlap": dec.max_overlap, "phi_over_lambda": phi_ratio,
                           "annulus_sum": rep["annulus_sum"].measured,
                           "alpha_over_lambda": rep["alpha_bound"].measured,
                           "passed": rep.passed})
        if config.include_parts:
            per_lambda[-1]["decomposition"] = dec.to_json()
    t2 = time.perf_counter()
    eps = np.asarray(config.eps_grid, dtype=float) if config.eps_grid else eps_grid(
        mu, config.eps_decades, config.eps_steps)
    sweep = weak_sweep(mu, K, f, eps)
    with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
        l2 = list(pool.map(lambda e: empirical_l2_norm(mu, K, float(e), trials=config.l2_trials,
                                                       seed=config.seed), eps))
    t3 = time.perf_counter()
    if csv_path is not None:
        sweep.write_csv(csv_path)
    qs = sweep.quasinorms
    report = {
        "config": asdict(config),
        "instance": {"atoms": mu.size, "dim": mu.dim, "growth": mu.growth.to_json(),
                     "total_mass": mu.total_mass, "f_l1": l1_norm(mu, f),
                     "admissibility_floor": floor},
        "constants": constants.to_json() if constants else None,
        "decompositions": per_lambda,
        "max_phi_over_lambda": max_phi,
        "weak11": {"kernel": K.to_json(), "epsilons": sweep.epsilons, "quasinorms": qs,
                   "max_quasinorm": max(qs) if qs else 0.0,
                   "quasinorm_spread": (max(qs) / min(qs)) if qs and min(qs) > 0 else None,
                   "l2_norms": l2},
        "timing": {"setup_s": t1 - t0, "decompose_s": t2 - t1, "sweep_s": t3 - t2},
    }
    return report


def dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
