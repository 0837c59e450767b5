"""Calderon-Zygmund kernels and truncated transforms on atomic measures."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .measure import AtomicMeasure, DensityVector, l1_norm

KINDS = {"cauchy": kernels.CAUCHY, "riesz": kernels.RIESZ, "power": kernels.POWER}


@dataclass(frozen=True)
class Kernel:
    """A kernel ``k(x, y)`` with declared size/smoothness data ``(n, delta, C_k)``.

    ``cauchy`` is ``1/(z - w)`` in the complex plane (d=2, n=1).  ``riesz``
    is ``(x_j - y_j)/|x - y|^{n+1}`` for the coordinate ``component``.
    ``power`` is ``1/|x - y|^expo``, kept as a negative control: with
    ``expo = 2n`` it is not a CZ kernel of order n.
    """

    kind: str
    n: float = 1.0
    delta: float = 1.0
    C_k: float = 2.0
    component: int = 0
    dim: int = 2
    expo: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "cauchy" and self.dim != 2:
            raise ValueError("the Cauchy kernel lives in the plane (dim=2)")
        if not 0 <= self.component < self.dim:
            raise ValueError("riesz component out of range")

    @classmethod
    def cauchy(cls, C_k: float = 2.0, delta: float = 1.0) -> "Kernel":
        return cls("cauchy", n=1.0, delta=delta, C_k=C_k, dim=2)

    @classmethod
    def riesz(cls, n: float = 1.0, component: int = 0, dim: int = 2, C_k: float = 2.0,
              delta: float = 1.0) -> "Kernel":
        return cls("riesz", n=n, delta=delta, C_k=C_k, component=component, dim=dim)

    @classmethod
    def power(cls, n: float = 1.0, dim: int = 2, C_k: float = 2.0) -> "Kernel":
        return cls("power", n=n, delta=1.0, C_k=C_k, dim=dim, expo=2.0 * n)

    @property
    def code(self) -> int:
        return KINDS[self.kind]

    @property
    def is_complex(self) -> bool:
        return self.kind == "cauchy"

    def to_json(self) -> dict:
        return {"kind": self.kind, "n": self.n, "delta": self.delta, "C_k": self.C_k,
                "component": self.component, "dim": self.dim, "expo": self.expo}

    def values(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Vectorized ``k(x_i, y_i)`` for row-aligned ``(M, d)`` arrays."""
        diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        r2 = (diff * diff).sum(axis=1)
        if np.any(r2 == 0):
            raise ValueError("kernel is not evaluated on the diagonal x = y")
        if self.kind == "cauchy":
            return 1.0 / (diff[:, 0] + 1j * diff[:, 1])
        if self.kind == "riesz":
            return diff[:, self.component] / r2 ** ((self.n + 1.0) / 2.0)
        return 1.0 / r2 ** (self.expo / 2.0)


def kernel_eval(K: Kernel, x, y):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != (K.dim,) or y.shape != (K.dim,):
        raise ValueError(f"kernel expects points in R^{K.dim}")
    return K.values(x[None, :], y[None, :])[0]


@dataclass
class KernelReport:
    passed: bool
    size_ratio: float
    smooth_ratio: float
    smooth_sum_ratio: float
    C_k: float
    samples: int

    def to_json(self) -> dict:
        return dict(self.__dict__)


def verify_kernel_conditions(K: Kernel, sample_count: int = 100_000, seed: int = 0,
                             scales=(1e-3, 1e3), margin: float = 1e-9) -> KernelReport:
    """Sampled check of the size and Holder conditions against ``C_k``.

    The smoothness bound is applied to each of the two differences
    ``|k(x,y) - k(x',y)|`` and ``|k(y,x) - k(y,x')|`` separately, for
    ``|x - x'| <= |x - y| / 2``; ``smooth_sum_ratio`` reports their sum
    (which then obeys ``2 C_k``).  Half of the perturbations point straight
    at y, where the first difference is largest.
    """
    if sample_count < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    d = K.dim
    lo, hi = np.log10(scales[0]), np.log10(scales[1])

    def unit(m):
        v = rng.normal(size=(m, d))
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    m = sample_count
    r = 10.0 ** rng.uniform(lo, hi, m)
    y = unit(m) * (10.0 ** rng.uniform(lo, hi, m))[:, None]
    x = y + unit(m) * r[:, None]
    frac = np.where(rng.random(m) < 0.5, 10.0 ** rng.uniform(-6, np.log10(0.5), m),
                    rng.uniform(0.0, 0.5, m))
    frac[: m // 20] = 0.5
    toward = rng.random(m) < 0.5
    v = np.where(toward[:, None], (y - x) / r[:, None], unit(m))
    xp = x + v * (frac * r)[:, None]
    step = np.linalg.norm(x - xp, axis=1)
    dist = np.linalg.norm(x - y, axis=1)
    keep = (step > 0) & (step <= dist / 2.0)
    x, xp, y, step, dist = x[keep], xp[keep], y[keep], step[keep], dist[keep]

    size = np.abs(K.values(x, y)) * dist ** K.n
    scale = dist ** (K.n + K.delta) / step ** K.delta
    t1 = np.abs(K.values(x, y) - K.values(xp, y)) * scale
    t2 = np.abs(K.values(y, x) - K.values(y, xp)) * scale
    size_r = float(size.max())
    smooth_r = float(np.maximum(t1, t2).max())
    bound = K.C_k * (1.0 + margin)
    return KernelReport(size_r <= bound and smooth_r <= bound, size_r, smooth_r,
                        float((t1 + t2).max()), K.C_k, int(keep.sum()))


class TruncationError(ValueError):
    """Truncation radius below the resolution floor of the measure."""


def truncated_transform(mu: AtomicMeasure, K: Kernel, f: DensityVector, eps: float,
                        eval_atoms=None, adjoint: bool = False) -> np.ndarray:
    """``T_eps f(x) = sum_{|x - x_j| > eps} k(x, x_j) f_j w_j`` at the chosen atoms.

    With ``adjoint=True`` the kernel is replaced by ``conj(k(x_j, x))``,
    the adjoint of ``T_eps`` on ``L^2(mu)``.
    """
    if eps < mu.growth.r_min:
        raise TruncationError(f"eps={eps:g} is below r_min={mu.growth.r_min:g}")
    if K.dim != mu.dim:
        raise ValueError(f"kernel lives in R^{K.dim}, measure in R^{mu.dim}")
    vals = f.values if isinstance(f, DensityVector) else np.asarray(f)
    if vals.shape[0] != mu.size:
        raise ValueError("density length does not match the measure")
    targets = mu.points if eval_atoms is None else mu.points[np.asarray(eval_atoms)]
    out = kernels.transform(targets, mu.points, vals * mu.weights, eps, K.code,
                            K.component, K.n if K.kind == "riesz" else K.expo, adjoint)
    if not K.is_complex and np.asarray(vals).dtype.kind != "c":
        return out.real
    return out


def auto_lambda_grid(values) -> np.ndarray:
    """Points just below each ``|value|``, where ``lambda * mu{|v| > lambda}`` peaks."""
    a = np.abs(np.asarray(values))
    a = np.unique(a[a > 0])
    return a * (1.0 - 1e-9)


def exceedance_masses(mu: AtomicMeasure, values, lambdas) -> np.ndarray:
    """``mu{|v| > lambda}`` for each lambda."""
    a = np.abs(np.asarray(values))
    order = np.argsort(a, kind="stable")
    sa = a[order]
    tail = np.concatenate([np.cumsum(mu.weights[order][::-1])[::-1], [0.0]])
    idx = np.searchsorted(sa, np.asarray(lambdas, dtype=float), side="right")
    return tail[idx]


def weak_quasinorm(mu: AtomicMeasure, values, norm1: float, lambdas=None) -> float:
    """``max_lambda lambda * mu{|v| > lambda} / norm1`` over the grid."""
    if not norm1 > 0:
        raise ValueError("norm1 must be positive")
    lambdas = auto_lambda_grid(values) if lambdas is None else np.asarray(lambdas, dtype=float)
    if lambdas.size == 0:
        return 0.0
    return float((lambdas * exceedance_masses(mu, values, lambdas)).max() / norm1)


def empirical_l2_norm(mu: AtomicMeasure, K: Kernel, eps: float, trials: int = 3,
                      iters: int = 500, tol: float = 1e-12, seed: int = 0) -> float:
    """Power iteration on ``T_eps^* T_eps`` in ``L^2(mu)``; the best of ``trials`` starts."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    w = mu.weights

    def norm(u):
        return math.sqrt(float((np.abs(u) ** 2 * w).sum()))

    best = 0.0
    for _ in range(trials):
        u = rng.normal(size=mu.size) + 1j * rng.normal(size=mu.size)
        u /= norm(u)
        est = 0.0
        for _ in range(iters):
            Tu = truncated_transform(mu, K, u, eps)
            new = norm(Tu)
            if new == 0.0:
                est = 0.0
                break
            u = truncated_transform(mu, K, Tu, eps, adjoint=True)
            nu = norm(u)
            if nu == 0.0:
                est = new
                break
            u /= nu
            if abs(new - est) <= tol * new:
                est = new
                break
            est = new
        best = max(best, est)
    return best


@dataclass
class WeakSweep:
    epsilons: list
    quasinorms: list
    rows: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"epsilons": self.epsilons, "quasinorms": self.quasinorms,
                "max_quasinorm": max(self.quasinorms, default=0.0)}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["eps", "lambda", "exceedance_mass", "quasinorm"])
            for row in self.rows:
                wr.writerow([repr(float(v)) for v in row])

    def write_summary_csv(self, path, l2_norms=None) -> None:
        """One row per eps: ``eps, quasinorm`` (plus ``l2_norm`` when given)."""
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["eps", "quasinorm"] + (["l2_norm"] if l2_norms is not None else []))
            for i, (e, q) in enumerate(zip(self.epsilons, self.quasinorms)):
                extra = [repr(float(l2_norms[i]))] if l2_norms is not None else []
                wr.writerow([repr(float(e)), repr(float(q))] + extra)


def weak_sweep(mu: AtomicMeasure, K: Kernel, f: DensityVector, epsilons, lambdas=None) -> WeakSweep:
    """Exceedance masses of ``|T_eps f|`` over a (eps, lambda) grid.

    ``lambdas=None`` uses the automatic grid of each transform's values.
    """
    nf = l1_norm(mu, f)
    qs, rows = [], []
    for eps in epsilons:
        vals = truncated_transform(mu, K, f, float(eps))
        grid = auto_lambda_grid(vals) if lambdas is None else np.asarray(lambdas, dtype=float)
        ex = exceedance_masses(mu, vals, grid)
        q = float((grid * ex).max() / nf) if grid.size else 0.0
        qs.append(q)
        rows.extend((float(eps), float(l), float(e), q) for l, e in zip(grid, ex))
    return WeakSweep([float(e) for e in epsilons], qs, rows)
