"""Calderon-Zygmund decomposition ``f = g + sum_i b_i`` for atomic measures.

Pipeline: stopping cubes around the atoms where ``|f| > lambda``, an almost
disjoint selection ``{Q_i}``, the doubling companions ``R_i = 6^k Q_i``, and
the constant-sign pieces ``phi_i = alpha_i chi_{A_i}`` carrying the mass of
``f w_i``.  ``verify_decomposition`` re-checks every condition from scratch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .covering import (AnnulusConfig, CandidateFamily, Selection, annulus_cover,
                       besicovich_select)
from .doubling import (DerivedConstants, DoublingParams, annulus_kernel_integral,
                       doubling_power, is_doubling)
from .geometry import Cube, contains_points, dilate, sup_dist
from .measure import (AtomicMeasure, DensityVector, cube_mass, decode_values,
                      encode_values, l1_norm)

R_BASE = 6.0


class InadmissibleLambda(ValueError):
    """``lambda <= 2^{d+1} ||f||_1 / ||mu||``: the level is too low to decompose at."""


class DecompositionError(RuntimeError):
    """A construction step produced something the estimates rule out."""


def threshold(lam: float, d: int) -> float:
    return lam / 2.0 ** (d + 1)


def admissibility_floor(mu: AtomicMeasure, f: DensityVector) -> float:
    return 2.0 ** (mu.dim + 1) * l1_norm(mu, f) / mu.total_mass


def check_admissible(mu: AtomicMeasure, f: DensityVector, lam: float) -> None:
    floor = admissibility_floor(mu, f)
    if not lam > floor:
        raise InadmissibleLambda(f"lambda={lam:g} must exceed 2^(d+1)||f||_1/||mu|| = {floor:g}")


# --------------------------------------------------------------------------
# stopping cubes
# --------------------------------------------------------------------------

def stopping_profile(mu: AtomicMeasure, f: DensityVector, j: int):
    """Step function ``h(l) = int_{Q(x_j, l)} |f| / mu(Q(x_j, 2l))``.

    Returns ``(edges, h)`` where ``h[0]`` is the value on ``(0, edges[0])``,
    ``h[i]`` the value on ``[edges[i-1], edges[i])`` and ``h[-1]`` the value
    on ``[edges[-1], inf)``.
    """
    s = sup_dist(mu.points, mu.points[j])
    order = np.argsort(s, kind="stable")
    ss = s[order]
    cum_a = np.cumsum((f.abs() * mu.weights)[order])
    cum_w = np.cumsum(mu.weights[order])
    pos = s[s > 0]
    # an atom at sup-distance s enters Q(x, l) at l = 2s and Q(x, 2l) at l = s
    edges = np.unique(np.concatenate([pos, 2.0 * pos]))
    left = np.concatenate([[0.0], edges])
    num_idx = np.searchsorted(ss, left / 2.0, side="right") - 1
    den_idx = np.searchsorted(ss, left, side="right") - 1
    h = cum_a[num_idx] / cum_w[den_idx]
    return edges, h


def stopping_cube(mu: AtomicMeasure, f: DensityVector, lam: float, j: int) -> Cube:
    """Cube at atom j from the last maximal interval ``[a, b)`` where ``h > lam/2^{d+1}``.

    The side is ``(a + b) / 2``, so ``h`` exceeds the threshold at the side
    itself and stays below it for every side ``>= a + b`` (twice the chosen
    one), which is what makes the selected cubes satisfy the maximality
    condition for all dilations ``eta > 2``.
    """
    check_admissible(mu, f, lam)
    if not abs(f.values[j]) > lam:
        raise ValueError(f"atom {j} is not in the level set |f| > {lam:g}")
    theta = threshold(lam, mu.dim)
    edges, h = stopping_profile(mu, f, j)
    above = np.flatnonzero(h > theta)
    if above.size == 0:  # pragma: no cover - h on (0, edges[0]) is |f_j| > lambda
        raise DecompositionError(f"no stopping interval at atom {j}")
    last = int(above[-1])
    if last == h.shape[0] - 1:
        # only possible if ||f||_1/||mu|| > theta, i.e. lambda inadmissible
        raise InadmissibleLambda("stopping ratio never drops below the threshold")
    first = last
    while first > 0 and h[first - 1] > theta:
        first -= 1
    a = 0.0 if first == 0 else edges[first - 1]
    b = edges[last]
    return Cube(mu.points[j], (a + b) / 2.0)


def level_set(f: DensityVector, lam: float) -> np.ndarray:
    return np.flatnonzero(f.abs() > lam)


@dataclass
class CubeSelection:
    atoms: list
    cubes: list
    selection: Selection
    mode: str
    annulus: object = None


def select_cubes(mu: AtomicMeasure, f: DensityVector, lam: float,
                 K_overlap: int | None = None, annulus_diameter: float | None = None,
                 annulus_cfg: AnnulusConfig | None = None) -> CubeSelection:
    """Stopping cubes for the level set, thinned to an almost disjoint family.

    The annulus strategy is used when the level set's sup-norm diameter
    exceeds ``annulus_diameter`` (never, when it is None).
    """
    check_admissible(mu, f, lam)
    K = 2 ** mu.dim if K_overlap is None else int(K_overlap)
    idx = level_set(f, lam)
    cubes = [stopping_cube(mu, f, lam, int(j)) for j in idx]
    family = CandidateFamily([int(j) for j in idx], cubes, K)
    spread = 0.0
    if idx.size:
        pts = mu.points[idx]
        spread = float((pts.max(axis=0) - pts.min(axis=0)).max())
    if annulus_diameter is not None and idx.size and spread > annulus_diameter:
        res = annulus_cover(mu, f, lam, family, annulus_cfg)
        sel = res.selection
        return CubeSelection(list(sel.atoms), list(sel.cubes), sel, "annulus", res)
    sel = besicovich_select(family, mu.points)
    return CubeSelection(list(sel.atoms), list(sel.cubes), sel, "plain")


def attach_R(mu: AtomicMeasure, cubes) -> list:
    """``R_i = 6^k Q_i`` for the least ``k >= 1`` making it (6, 6^{n+1})-doubling."""
    return [dilate(Q, R_BASE ** k) for Q, k in zip(cubes, attach_powers(mu, cubes))]


def attach_powers(mu: AtomicMeasure, cubes) -> list:
    p = DoublingParams.for_R(mu.growth.n, R_BASE)
    ks = []
    for Q in cubes:
        k = doubling_power(mu, Q, R_BASE, p, k_min=1)
        # least k: every 6^j Q with 1 <= j < k is non-doubling, which is the
        # hypothesis of the annulus estimate for the pair (6Q, R)
        assert all(not is_doubling(mu, dilate(Q, R_BASE ** i), p) for i in range(1, k))
        assert Q.side * R_BASE ** k > 4.0 * Q.side
        ks.append(k)
    return ks


# --------------------------------------------------------------------------
# phi construction
# --------------------------------------------------------------------------

def partition_weights(mu: AtomicMeasure, cubes) -> np.ndarray:
    """``(len(cubes), N)`` array of ``w_i = chi_{Q_i} / sum_k chi_{Q_k}`` at the atoms."""
    inside = np.array([contains_points(Q, mu.points) for Q in cubes], dtype=float).reshape(
        len(cubes), mu.size)
    counts = inside.sum(axis=0)
    return np.divide(inside, counts, out=np.zeros_like(inside), where=counts > 0)


def processing_order(cubes_R, atoms) -> list:
    """Non-decreasing side of R, ties broken by generating atom index."""
    return sorted(range(len(cubes_R)), key=lambda i: (cubes_R[i].side, atoms[i]))


def build_phi(mu: AtomicMeasure, f: DensityVector, lam: float, cubes, Rs, atoms,
              constants: DerivedConstants):
    """Coefficients ``alpha_i`` and supports ``A_i`` with ``phi_i = alpha_i chi_{A_i}``.

    Returns ``(order, alphas, supports)`` with the last two indexed like the
    inputs.  Raises ``DecompositionError`` if some ``mu(A_k) < mu(R_k)/2``.
    """
    n_parts = len(cubes)
    order = processing_order(Rs, atoms)
    W = partition_weights(mu, cubes)
    cap = 2.0 * constants.C2 * lam
    acc = np.zeros(mu.size)
    alphas = [None] * n_parts
    supports = [None] * n_parts
    fv = f.values
    for pos, i in enumerate(order):
        inR = contains_points(Rs[i], mu.points)
        if pos == 0:
            A = inR
        else:
            # acc only carries phi_j with A_j inside R_j, so on R_i it equals
            # the sum over earlier R_j meeting R_i
            A = inR & (acc <= cap)
        mA = float(mu.weights[A].sum())
        mR = float(mu.weights[inR].sum())
        if not mA >= mR / 2.0:
            raise DecompositionError(
                f"part for atom {atoms[i]}: mu(A)={mA:g} < mu(R)/2={mR / 2:g}")
        target = (fv * W[i] * mu.weights).sum()
        alpha = target / mA
        alphas[i] = alpha
        supports[i] = np.flatnonzero(A)
        acc[A] += abs(alpha)
    return order, alphas, supports


# --------------------------------------------------------------------------
# decomposition
# --------------------------------------------------------------------------

@dataclass
class CZPart:
    atom: int
    Q: Cube
    R: Cube
    k: int
    w: np.ndarray
    alpha: complex
    A: np.ndarray
    b: np.ndarray

    def phi(self, size: int) -> np.ndarray:
        out = np.zeros(size, dtype=np.result_type(self.alpha, float))
        out[self.A] = self.alpha
        return out

    def to_json(self) -> dict:
        return {
            "atom": self.atom, "k": self.k, "Q": self.Q.to_json(), "R": self.R.to_json(),
            "alpha": encode_values([self.alpha])[0],
            "A": [int(a) for a in self.A], "b": encode_values(self.b),
        }


@dataclass
class CZDecomposition:
    lam: float
    parts: list
    g: np.ndarray
    constants: DerivedConstants
    mode: str = "plain"
    max_overlap: int = 0
    selection: dict = field(default_factory=dict)

    @property
    def b(self) -> np.ndarray:
        if not self.parts:
            return np.zeros_like(self.g)
        return np.sum([p.b for p in self.parts], axis=0)

    def to_json(self) -> dict:
        return {
            "lambda": self.lam, "mode": self.mode, "max_overlap": self.max_overlap,
            "parts": [p.to_json() for p in self.parts],
            "g": encode_values(self.g),
            "constants": self.constants.to_json(),
            "selection": self.selection,
        }

    @classmethod
    def from_json(cls, obj: dict, mu: AtomicMeasure) -> "CZDecomposition":
        parts = []
        raw = [(Cube.from_json(p["Q"]), p) for p in obj["parts"]]
        W = partition_weights(mu, [Q for Q, _ in raw]) if raw else np.zeros((0, mu.size))
        for i, (Q, p) in enumerate(raw):
            alpha = decode_values([p["alpha"]])[0]
            parts.append(CZPart(int(p.get("atom", -1)), Q, Cube.from_json(p["R"]),
                                int(p.get("k", 0)), W[i], alpha,
                                np.array(p["A"], dtype=int), decode_values(p["b"])))
        c = obj["constants"]
        consts = DerivedConstants(c["C1"], c["C2"], c["C3"], c["B"], c["K_overlap"])
        return cls(float(obj["lambda"]), parts, decode_values(obj["g"]), consts,
                   obj.get("mode", "plain"), int(obj.get("max_overlap", 0)),
                   obj.get("selection", {}))


def decompose(mu: AtomicMeasure, f: DensityVector, lam: float, K_overlap: int | None = None,
              annulus_diameter: float | None = None,
              annulus_cfg: AnnulusConfig | None = None) -> CZDecomposition:
    if len(f) != mu.size:
        raise ValueError(f"density has {len(f)} values but measure has {mu.size} atoms")
    check_admissible(mu, f, lam)
    sel = select_cubes(mu, f, lam, K_overlap, annulus_diameter, annulus_cfg)
    K = sel.selection.overlap_bound
    constants = DerivedConstants.compute(mu.dim, mu.growth.n, mu.growth.C0, K)
    fv = f.values
    sel_json = {"mode": sel.mode, "N": sel.selection.N, "N_prime": sel.selection.N_prime,
                "overlap_bound": int(K), "max_overlap": int(sel.selection.max_overlap)}
    if not sel.cubes:
        return CZDecomposition(lam, [], fv.copy(), constants, sel.mode, 0, sel_json)

    ks = attach_powers(mu, sel.cubes)
    Rs = [dilate(Q, R_BASE ** k) for Q, k in zip(sel.cubes, ks)]
    order, alphas, supports = build_phi(mu, f, lam, sel.cubes, Rs, sel.atoms, constants)
    W = partition_weights(mu, sel.cubes)
    dtype = np.result_type(fv.dtype, *[np.asarray(a).dtype for a in alphas])
    covered = W.sum(axis=0) > 0
    g = np.where(covered, 0.0, fv).astype(dtype)
    parts = []
    for i in order:
        phi = np.zeros(mu.size, dtype=dtype)
        phi[supports[i]] = alphas[i]
        g = g + phi
        b = W[i] * fv - phi
        alpha = alphas[i] if dtype.kind == "c" else float(np.real(alphas[i]))
        parts.append(CZPart(sel.atoms[i], sel.cubes[i], Rs[i], ks[i], W[i], alpha,
                            supports[i], b))
    return CZDecomposition(lam, parts, g, constants, sel.mode,
                           int(sel.selection.max_overlap), sel_json)


# --------------------------------------------------------------------------
# verification
# --------------------------------------------------------------------------

RECON_TOL = 1e-12
CANCEL_TOL = 1e-12
PHI_TOL = 1e-12


@dataclass
class Check:
    name: str
    passed: bool
    measured: float
    bound: float
    detail: str = ""

    def to_json(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "measured": _num(self.measured),
                "bound": _num(self.bound), "detail": self.detail}


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else str(x)


@dataclass
class InvariantReport:
    checks: list
    constants: DerivedConstants
    lam: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list:
        return [c.name for c in self.checks if not c.passed]

    def to_json(self) -> dict:
        return {"passed": self.passed, "lambda": self.lam,
                "constants": self.constants.to_json(),
                "checks": [c.to_json() for c in self.checks]}


def _maximality_worst(mu: AtomicMeasure, absf_w: np.ndarray, Q: Cube) -> float:
    """Largest ``int_{eta Q} |f| / mu(2 eta Q)`` over ``eta >= 2``.

    With ``r`` the half side of ``eta Q`` the ratio is a right-continuous step
    function of r, jumping where an atom's sup-distance equals r or 2r, so it
    suffices to look at ``r = side`` and at those jump points beyond it.
    """
    s = sup_dist(mu.points, Q.center)
    order = np.argsort(s, kind="stable")
    ss = s[order]
    cum_a = np.cumsum(absf_w[order])
    cum_w = np.cumsum(mu.weights[order])
    r0 = Q.side
    r = np.concatenate([[r0], ss[ss > r0], ss[ss / 2.0 > r0] / 2.0])
    num = np.searchsorted(ss, r, side="right") - 1
    den = np.searchsorted(ss, 2.0 * r, side="right") - 1
    vals = np.where(num >= 0, cum_a[np.maximum(num, 0)], 0.0) / cum_w[den]
    return float(vals.max())


def verify_decomposition(mu: AtomicMeasure, f: DensityVector, lam: float,
                         dec: CZDecomposition, K_overlap: float | None = None) -> InvariantReport:
    """Check every decomposition property directly from the atoms.

    Masses and integrals are recomputed from the cubes; nothing from the
    construction other than the cubes, coefficients, supports and the g/b
    vectors is trusted.
    """
    d, n = mu.dim, mu.growth.n
    K = dec.constants.K_overlap if K_overlap is None else K_overlap
    C = DerivedConstants.compute(d, n, mu.growth.C0, K)
    theta = threshold(lam, d)
    fv = f.values
    absf = np.abs(fv)
    w = mu.weights
    nf = float((absf * w).sum())
    checks = []

    def add(name, ok, measured, bound, detail=""):
        checks.append(Check(name, bool(ok), measured, bound, detail))

    floor = 2.0 ** (d + 1) * nf / mu.total_mass
    add("admissible", lam > floor, lam, floor, "lambda > 2^(d+1)||f||_1/||mu||")
    parts = dec.parts
    size = mu.size

    inQ = [contains_points(p.Q, mu.points) for p in parts]
    counts = np.zeros(size, dtype=int)
    for m in inQ:
        counts += m
    Wi = [np.where(m, 1.0 / np.maximum(counts, 1), 0.0) for m in inQ]
    intQ = [float((absf[m] * w[m]).sum()) for m in inQ]
    phis = []
    for p in parts:
        phi = np.zeros(size, dtype=np.result_type(p.alpha, float))
        phi[np.asarray(p.A, dtype=int)] = p.alpha
        phis.append(phi)

    worst = math.inf
    for p, m in zip(parts, inQ):
        r = float((absf[m] * w[m]).sum()) / cube_mass(mu, dilate(p.Q, 2.0))
        worst = min(worst, r - theta)
    add("stopping_above", worst > 0, worst, 0.0, "min over i of int_Q|f|/mu(2Q) - theta")

    # includes the eta -> infinity limit
    worst = nf / mu.total_mass
    for p in parts:
        worst = max(worst, _maximality_worst(mu, absf * w, p.Q))
    add("stopping_maximal", worst <= theta, worst, theta, "max over i, eta>2 of int_{eta Q}|f|/mu(2 eta Q)")

    covered = counts > 0
    missing = int(np.count_nonzero((absf > lam) & ~covered))
    add("level_set_covered", missing == 0, missing, 0, "atoms with |f|>lambda outside every Q_i")

    worst = 0.0
    for p, wi, phi in zip(parts, Wi, phis):
        target = (fv * wi * w).sum()
        got = (phi * w).sum()
        worst = max(worst, abs(got - target) / (1.0 + abs(target)))
    add("phi_mean", worst <= PHI_TOL, worst, PHI_TOL, "relative mismatch of int phi_i vs int f w_i")

    total_phi = np.sum([np.abs(ph) for ph in phis], axis=0) if phis else np.zeros(size)
    ratio = float(total_phi.max()) / lam
    add("phi_sum", ratio <= C.B, ratio, C.B, "max sum_i |phi_i| / lambda")

    worst = 0.0
    for p, iq in zip(parts, intQ):
        worst = max(worst, abs(p.alpha) * cube_mass(mu, p.R) / iq)
    add("phi_size", worst <= 2.0, worst, 2.0, "max |alpha_i| mu(R_i) / int_Q_i |f|")

    # reconstruction and the form of g
    bsum = np.sum([p.b for p in parts], axis=0) if parts else np.zeros(size)
    recon = float(np.max(np.abs(fv - dec.g - bsum) / (1.0 + absf)))
    add("reconstruction", recon <= RECON_TOL, recon, RECON_TOL, "max |f - g - sum b_i|/(1+|f|)")
    g_expected = np.where(covered, 0.0, fv) + (np.sum(phis, axis=0) if phis else 0.0)
    gerr = float(np.max(np.abs(dec.g - g_expected) / (1.0 + absf)))
    add("g_form", gerr <= RECON_TOL, gerr, RECON_TOL, "g = f chi_outside + sum phi_i")
    berr = 0.0
    for p, wi, phi in zip(parts, Wi, phis):
        berr = max(berr, float(np.max(np.abs(p.b - (wi * fv - phi)) / (1.0 + absf))))
    add("b_form", berr <= RECON_TOL, berr, RECON_TOL, "b_i = w_i f - phi_i")

    # cancellation, support, L1 size of b_i
    worst = 0.0
    for p, iq in zip(parts, intQ):
        worst = max(worst, abs((p.b * w).sum()) / iq)
    add("cancellation", worst <= CANCEL_TOL, worst, CANCEL_TOL, "max |int b_i| / int_Q_i |f|")
    outside = 0
    for p in parts:
        inR = contains_points(p.R, mu.points)
        outside += int(np.count_nonzero((p.b != 0) & ~inR))
    add("support_b", outside == 0, outside, 0, "atoms outside R_i where b_i != 0")
    worst = 0.0
    for p, iq in zip(parts, intQ):
        worst = max(worst, float((np.abs(p.b) * w).sum()) / iq)
    add("b_l1", worst <= 2.0 * (1 + 1e-12), worst, 2.0, "max ||b_i||_1 / int_Q_i |f|")

    # A_i inside R_i with at least half its mass
    worst = math.inf
    for p in parts:
        inR = contains_points(p.R, mu.points)
        A = np.asarray(p.A, dtype=int)
        if A.size and not inR[A].all():
            worst = -math.inf
            break
        mR = float(w[inR].sum())
        worst = min(worst, float(w[A].sum()) / mR if mR > 0 else -math.inf)
    add("A_half_mass", worst >= 0.5, worst, 0.5, "min mu(A_i)/mu(R_i)")

    # |alpha_i| <= C3 lambda and the sign of alpha_i
    worst = max((abs(p.alpha) / lam for p in parts), default=0.0)
    add("alpha_bound", worst <= C.C3, worst, C.C3, "max |alpha_i| / lambda")
    bad_sign = 0
    for p, wi in zip(parts, Wi):
        target = (fv * wi * w).sum()
        prod = p.alpha * np.conj(target)
        if abs(target) > 0 and not (np.real(prod) > 0 and abs(np.imag(prod)) <= 1e-12 * abs(prod)):
            bad_sign += 1
    add("sign", bad_sign == 0, bad_sign, 0, "alpha_i has the sign (phase) of int f w_i")

    # overlap and |g|
    mo = int(counts.max()) if parts else 0
    add("overlap", mo <= K, mo, K, "max number of Q_i containing an atom")
    gmax = float(np.abs(dec.g).max()) / lam
    add("g_bound", gmax <= C.B + 1.0, gmax, C.B + 1.0, "max |g| / lambda")
    gl1 = float((np.abs(dec.g) * w).sum())
    add("g_l1", gl1 <= nf * (1 + 1e-12), gl1, nf, "int |g| <= ||f||_1")
    union = np.zeros(size, dtype=bool)
    for p in parts:
        union |= contains_points(dilate(p.Q, 2.0), mu.points)
    um = float(w[union].sum())
    ub = K * 2.0 ** (d + 1) * nf / lam
    add("union_2Q", um <= ub, um, ub, "mu(U 2Q_i) <= K 2^(d+1) ||f||_1 / lambda")

    # R_i: concentric, doubling, large, and least of the form 6^k Q_i
    pR = DoublingParams.for_R(n, R_BASE)
    bad = 0
    for p in parts:
        k = max(1, int(round(math.log(p.R.side / p.Q.side) / math.log(R_BASE))))
        ok = (p.R.center == p.Q.center and p.R.side > 4.0 * p.Q.side
              and is_doubling(mu, p.R, pR)
              and not any(is_doubling(mu, dilate(p.Q, R_BASE ** j), pR) for j in range(1, k)))
        bad += not ok
    add("R_doubling", bad == 0, bad, 0, "R_i = least (6,6^(n+1))-doubling 6^k Q_i, l(R_i) > 4 l(Q_i)")

    # the annulus estimate for (6Q_i, R_i)
    worst = 0.0
    for p in parts:
        worst = max(worst, annulus_kernel_integral(mu, dilate(p.Q, R_BASE), p.R, n))
    add("annulus_sum", worst <= C.C1, worst, C.C1, "max int_{R_i \\ 6Q_i} |x-x_Q|^-n dmu")

    return InvariantReport(checks, C, lam)
