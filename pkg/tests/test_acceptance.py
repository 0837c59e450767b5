"""Acceptance suite: seven criteria, each reported as one PASS/FAIL line."""
import math
import sys
import time

import numpy as np
import pytest

from _instances import wide_spread_instance
from _report import record
from czlab.covering import (ANNULUS_N, ANNULUS_N_PRIME, CandidateFamily, annulus_index,
                            choose_Q0, confinement_violations)
from czlab.czdecomp import decompose, stopping_cube, verify_decomposition
from czlab.doubling import DerivedConstants, annulus_kernel_integral
from czlab.geometry import Cube, dilate
from czlab.harness import (GeneratorSpec, eps_grid, gen_density, gen_measure, lambda_grid,
                           random_instance)
from czlab.operators import Kernel, empirical_l2_norm, verify_kernel_conditions, weak_sweep

SUITE_INSTANCES = 200
SUITE_LAMBDAS = 10
SUITE_BUDGET_S = 60.0
WEAK_BUDGET_S = 120.0


def direct_annulus_sum(mu, Q, R, n):
    """Plain loop over atoms; independent of the vectorized implementation."""
    total = 0.0
    c = np.asarray(Q.center)
    for x, w in zip(mu.points, mu.weights):
        s = np.abs(x - c).max()
        if Q.half < s <= R.half:
            total += w / math.sqrt(((x - c) ** 2).sum()) ** n
    return total


@pytest.fixture(scope="module")
def suite():
    t0 = time.perf_counter()
    out = {"instances": 0, "lambdas": 0, "parts": 0, "failures": [], "combos": set(),
           "annulus": [], "phi": [], "alpha": [], "overlap": [], "min_lambdas": 10 ** 9}
    for seed in range(SUITE_INSTANCES):
        mu, f = random_instance(seed)
        d, n = mu.dim, mu.growth.n
        out["combos"].add((d, n))
        C1 = DerivedConstants.compute(d, n, mu.growth.C0, 2 ** d).C1
        lams = lambda_grid(mu, f, SUITE_LAMBDAS)
        out["min_lambdas"] = min(out["min_lambdas"], len(lams))
        for lam in lams:
            lam = float(lam)
            dec = decompose(mu, f, lam)
            rep = verify_decomposition(mu, f, lam, dec)
            out["lambdas"] += 1
            out["parts"] += len(dec.parts)
            if not rep.passed:
                out["failures"].append((seed, lam, rep.failures()))
            B, C3 = rep.constants.B, rep.constants.C3
            out["phi"].append((rep["phi_sum"].measured, B))
            out["overlap"].append((dec.max_overlap, 2 ** d))
            for p in dec.parts:
                out["annulus"].append((mu, p, n, C1))
                out["alpha"].append((abs(p.alpha), C3 * lam))
        out["instances"] += 1
    out["elapsed"] = time.perf_counter() - t0
    return out


def test_criterion_1_invariant_suite(suite):
    combos_ok = suite["combos"] >= {(1, 0.5), (1, 1.0), (2, 0.5), (2, 1.0), (2, 2.0)}
    ok = (suite["instances"] >= 200 and suite["min_lambdas"] >= 10 and not suite["failures"]
          and suite["elapsed"] < SUITE_BUDGET_S and combos_ok)
    record(1, ok, f"{suite['instances']} instances x {suite['min_lambdas']} lambdas, "
                  f"{suite['parts']} parts, {len(suite['failures'])} failing decompositions, "
                  f"(d,n) combos {sorted(suite['combos'])}, {suite['elapsed']:.1f}s "
                  f"(budget {SUITE_BUDGET_S:.0f}s)")
    assert not suite["failures"], suite["failures"][:5]
    assert ok


def test_criterion_2_annulus_sum(suite):
    bad = 0
    worst = 0.0
    mismatch = 0.0
    for i, (mu, p, n, C1) in enumerate(suite["annulus"]):
        inner = dilate(p.Q, 6.0)
        v = annulus_kernel_integral(mu, inner, p.R, n)
        if i % 10 == 0:
            ref = direct_annulus_sum(mu, inner, p.R, n)
            mismatch = max(mismatch, abs(v - ref) / max(1.0, ref))
        worst = max(worst, v / C1)
        bad += v > C1
    ok = bad == 0 and mismatch <= 1e-12 and len(suite["annulus"]) > 0
    record(2, ok, f"{len(suite['annulus'])} (6Q,R) pairs, {bad} above C1, max value/C1 = "
                  f"{worst:.3g}, direct-sum mismatch {mismatch:.1e}")
    assert ok


def test_criterion_3_constant_chain(suite):
    phi_bad = sum(m > B for m, B in suite["phi"])
    alpha_bad = sum(a > b for a, b in suite["alpha"])
    phi_worst = max(m / B for m, B in suite["phi"])
    alpha_worst = max((a / b for a, b in suite["alpha"]), default=0.0)
    ok = phi_bad == 0 and alpha_bad == 0
    record(3, ok, f"max sum|phi|/(B lambda) = {phi_worst:.3g} ({phi_bad} violations); "
                  f"max |alpha|/(C3 lambda) = {alpha_worst:.3g} ({alpha_bad} violations)")
    assert ok


def test_criterion_4_overlap_and_annulus(suite):
    over = sum(m > K for m, K in suite["overlap"])
    worst = max(m for m, _ in suite["overlap"])
    confined = 0
    details = []
    for seed, dim in [(0, 1), (1, 1), (2, 2), (3, 2), (4, 1), (5, 2)]:
        mu, f, lam = wide_spread_instance(seed, dim)
        dec = decompose(mu, f, lam, annulus_diameter=1.0)
        sel = dec.selection
        atoms = [int(j) for j in np.flatnonzero(f.abs() > lam)]
        fam = CandidateFamily(atoms, [stopping_cube(mu, f, lam, j) for j in atoms], 2 ** dim)
        Q0 = choose_Q0(mu, f, lam)
        idx = dict(zip(atoms, annulus_index(mu.points[atoms], Q0)))
        viol = confinement_violations(fam, idx, Q0, 1.25, ANNULUS_N, ANNULUS_N_PRIME)
        rep = verify_decomposition(mu, f, lam, dec, K_overlap=sel["overlap_bound"])
        good = dec.mode == "annulus" and not viol and rep.passed and len(set(idx.values())) >= 3
        confined += good
        details.append(f"N={sel['N']},N'={sel['N_prime']}")
    ok = over == 0 and confined >= 5
    record(4, ok, f"max overlap {worst} <= 2^d on all {len(suite['overlap'])} decompositions "
                  f"({over} over); annulus containment on {confined}/6 wide-spread instances "
                  f"[{'; '.join(details)}]")
    assert ok


WEAK_FAMILIES = {
    "segment_plus_atoms": GeneratorSpec("segment_plus_atoms", dim=2, count=500, heavy=10, seed=1),
    "lacunary": GeneratorSpec("lacunary", dim=2, count=500, levels=8, seed=2),
    "cantor+heavy": GeneratorSpec("cantor", dim=2, depth=4, heavy=6, seed=3),
}


def test_criterion_5_weak11_stability():
    t0 = time.perf_counter()
    K = Kernel.cauchy()
    finite = True
    notes, spread_ok, l2_ok = [], True, True
    for name, spec in WEAK_FAMILIES.items():
        mu = gen_measure(spec)
        f = gen_density(mu, "ones")
        eps = eps_grid(mu, decades=2.0, steps=10)
        sw = weak_sweep(mu, K, f, eps)
        l2 = np.array([empirical_l2_norm(mu, K, float(e), trials=2, seed=0) for e in eps])
        q = np.array(sw.quasinorms)
        finite &= bool(np.all(np.isfinite(q)) and np.all(np.isfinite(l2)) and q.min() > 0)
        spread = q.max() / q.min() if q.min() > 0 else math.inf
        ratio = float((q / l2).max())
        spread_ok &= spread < 2.0
        l2_ok &= ratio < 10.0
        notes.append(f"{name}(N={mu.size}): spread {spread:.2f}, max q/L2 {ratio:.2f}")
    elapsed = time.perf_counter() - t0
    ok = finite and elapsed < WEAK_BUDGET_S
    record(5, ok, f"(stability report, hard gate is finiteness) finite={finite}; spread<2x on all families: {spread_ok}; "
                  f"q<10x L2 on all: {l2_ok}; " + "; ".join(notes) + f"; {elapsed:.1f}s")
    assert ok


def test_criterion_6_kernel_conditions():
    passing = {
        "cauchy": Kernel.cauchy(C_k=2.0),
        "riesz n=1 d=2 j=0": Kernel.riesz(1.0, 0, 2, C_k=2.0),
        "riesz n=1 d=2 j=1": Kernel.riesz(1.0, 1, 2, C_k=2.0),
        "riesz n=1 d=1": Kernel.riesz(1.0, 0, 1, C_k=2.0),
    }
    results = {k: verify_kernel_conditions(K, sample_count=100_000) for k, K in passing.items()}
    neg = verify_kernel_conditions(Kernel.power(1.0, 2), sample_count=100_000)
    ok = all(r.passed for r in results.values()) and not neg.passed
    desc = ", ".join(f"{k} smooth {r.smooth_ratio:.4f}" for k, r in results.items())
    record(6, ok, f"{desc}; negative control passed={neg.passed} "
                  f"(size ratio {neg.size_ratio:.3g})")
    assert ok


def test_criterion_7_hand_oracle(three_atoms, spike):
    dec = decompose(three_atoms, spike, 8.0)
    rep = verify_decomposition(three_atoms, spike, 8.0, dec)
    (p,) = dec.parts
    checks = [
        p.Q == Cube((0.0,), 1.5),
        p.R == Cube((0.0,), 9.0),
        abs(p.alpha - 10 / 7) <= 1e-15,
        np.allclose(dec.g, 10 / 7, rtol=1e-15, atol=0),
        np.allclose(p.b, [60 / 7, -10 / 7, -10 / 7], rtol=1e-15, atol=1e-15),
        rep.passed,
    ]
    ok = all(checks)
    record(7, ok, f"Q={p.Q}, R={p.R}, alpha={p.alpha!r}, g={dec.g.tolist()}, b={p.b.tolist()}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
