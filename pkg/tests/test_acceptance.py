"""Acceptance criteria, one test per criterion.

Each test prints a single PASS/FAIL line; the lines are repeated in the
pytest terminal summary.  Run directly with ``python3 tests/test_acceptance.py``
to get the eleven lines without pytest.
"""

import itertools
import json
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
import sympy

sys.path.insert(0, str(Path(__file__).resolve().parent))

from heisenberg_iet.analysis import atom_probe, best_invariant_defect, cohomological_residual, rokhlin_eigenfunction
from heisenberg_iet.bundle import admissible_b_space, circ_dist, sample_admissible, orbit_constraint_holonomy_oracle
from heisenberg_iet.dynamics import (
    ModeObservable,
    birkhoff_mode_averages,
    correlation_series,
    discrepancy_2d,
    mode_correlation,
    skew_orbit,
)
from heisenberg_iet.flow import commutator_shift, first_return_iterates, state_at
from heisenberg_iet.iet import is_irreducible, kernel_basis, omega_matrix, sigma_permutation, validate_iet
from heisenberg_iet.suspension import build_zippered_rectangles

from conftest import GOLDEN, genus_example_skew, golden_map, golden_skew

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = json.loads((ROOT / "tests" / "data" / "fixtures.json").read_text())
LINES: list[str] = []


def report(num, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num:>2} {title}: {detail}"
    LINES.append(line)
    print(line, flush=True)
    assert ok, line


# ------------------------------------------------------------------ 1


def omega_oracle(top, bottom):
    d = len(top)
    p0 = {s: i for i, s in enumerate(top)}
    p1 = {s: i for i, s in enumerate(bottom)}
    M = sympy.zeros(d, d)
    for a, b in itertools.product(top, repeat=2):
        if p0[a] < p0[b] and p1[a] > p1[b]:
            M[p0[a], p0[b]] = 1
        elif p0[a] > p0[b] and p1[a] < p1[b]:
            M[p0[a], p0[b]] = -1
    return M


def test_c01_combinatorial_exhaustion():
    t0 = time.perf_counter()
    count, bad = 0, []
    for d in range(1, 6):
        top = "ABCDE"[:d]
        for perm in itertools.permutations(range(d)):
            if not is_irreducible(perm):
                continue
            bottom = "".join(top[perm.index(k)] for k in range(d))
            spec = validate_iet(top, top, bottom, [1] * d)
            om = omega_matrix(spec)
            ref = omega_oracle(top, bottom)
            basis = kernel_basis(spec)
            null = ref.nullspace()
            ok = om.tolist() == ref.tolist() and np.array_equal(om, -om.T)
            ok &= all(not np.any(om @ v) for v in basis)
            ok &= len(basis) == sigma_permutation(spec).n_singularities - 1 == len(null)
            if basis:
                stacked = sympy.Matrix.hstack(*null, *[sympy.Matrix(v.tolist()) for v in basis])
                ok &= stacked.rank() == len(null)
            count += 1
            if not ok:
                bad.append((top, bottom))
    dt = time.perf_counter() - t0
    report(1, "combinatorial exhaustion", not bad and dt < 10, f"{count} permutations, {len(bad)} mismatches, {dt:.2f} s")


# ------------------------------------------------------------------ 2


def test_c02_commutator_area():
    t0 = time.perf_counter()
    worst = 0.0
    for skew, x in ((golden_skew(), 0.2), (genus_example_skew(), 0.2)):
        a = skew.base.interval_index(x)
        st = state_at(skew, x, 0.5 * skew.h[a], 0.3)
        for t in (1e-3, 1e-2, 1e-1):
            worst = max(worst, circ_dist(commutator_shift(skew, st, t), t * t))
    dt = time.perf_counter() - t0
    report(2, "commutator = area", worst < 1e-12 and dt < 1, f"max |shift - t^2| = {worst:.2e}, {dt:.3f} s")


# ------------------------------------------------------------------ 3


def test_c03_first_return_consistency():
    skew = genus_example_skew()
    rng = np.random.default_rng(2024)
    x0, r0 = rng.uniform(0, 1, 1000), rng.uniform(0, 1, 1000)
    fx, fr, _ = first_return_iterates(skew, x0, r0, 100)
    orb = skew_orbit(skew, x0, r0, 100)
    dx = float(np.max(np.abs(fx - orb.x)))
    d = np.abs(fr - orb.rho) % 1.0
    dr = float(np.max(np.minimum(d, 1.0 - d)))
    report(3, "first return = skew product", dx < 1e-9 and dr < 1e-9, f"max dx = {dx:.2e}, max drho = {dr:.2e}")


# ------------------------------------------------------------------ 4


def test_c04_admissibility_holonomy():
    spec = validate_iet("ABC", "ABC", "BCA", [0.4, 0.3, 0.3])
    worst_ok, bump_err = 0.0, {s: 0.0 for s in spec.top}
    for seed in range(100):
        s = sample_admissible(spec, seed)
        susp = build_zippered_rectangles(spec, s.tau)
        orbits = [c.orbit for c in admissible_b_space(spec, s.h, check=False).constraints]
        for o in orbits:
            worst_ok = max(worst_ok, orbit_constraint_holonomy_oracle(susp, s.b, o).residual)
        for i, sym in enumerate(spec.top):
            b = s.b.copy()
            b[i] += 0.1
            res = max(orbit_constraint_holonomy_oracle(susp, b, o).residual for o in orbits)
            bump_err[sym] = max(bump_err[sym], abs(res - 0.1))
    ok = worst_ok < 1e-10 and all(v < 1e-9 for v in bump_err.values())
    detail = f"admissible residual {worst_ok:.2e}; |perturbed residual - 0.1| per symbol " + ", ".join(
        f"{k}: {v:.2e}" for k, v in bump_err.items()
    )
    report(4, "admissibility <-> holonomy", ok, detail)


# ------------------------------------------------------------------ 5


def closed_form_lag_one(alpha):
    """|C(1)| from symbolic integration of exp(2 pi i g) over the two continuity intervals."""
    x, a = sympy.symbols("x a", positive=True)
    e = lambda u: sympy.exp(2 * sympy.pi * sympy.I * u)  # noqa: E731
    expr = sympy.integrate(e(x), (x, 0, 1 - a)) + sympy.integrate(e(x - (1 - a)), (x, 1 - a, 1))
    val = complex(sympy.N(expr.subs(a, sympy.Rational(1, 2) * (sympy.sqrt(5) - 1)), 30))
    assert alpha == pytest.approx(float((sympy.sqrt(5) - 1) / 2), abs=1e-16)
    return abs(val)


def test_c05_closed_form_correlation():
    t0 = time.perf_counter()
    oracle = closed_form_lag_one(GOLDEN)
    f = ModeObservable.constant_mode(1)
    quad = abs(mode_correlation(golden_skew(), f, f, 1, rule="gauss"))
    dt = time.perf_counter() - t0
    printed = (1 - math.cos(2 * math.pi * GOLDEN)) / math.pi
    ok = abs(quad - oracle) < 1e-6 and abs(oracle - printed) < 1e-12 and dt < 1
    report(5, "closed-form lag-1 correlation", ok, f"quadrature {quad:.12f}, oracle {oracle:.12f}, {dt:.3f} s")


# ------------------------------------------------------------------ 6


@pytest.fixture(scope="module")
def golden_gauss_1024():
    t0 = time.perf_counter()
    f = ModeObservable.constant_mode(1)
    ser = correlation_series(golden_skew(), f, f, 1024, rule="gauss")
    return ser, time.perf_counter() - t0


def test_c06_relative_mixing(golden_gauss_1024):
    ser, dt = golden_gauss_1024
    a = np.abs(ser.values)
    late = float(a[512:1025].max())
    early = float(a[1:33].max())
    p = a[:1001] ** 2
    decade = float(p[101:].sum())
    ok = late < early / 5 and decade < 1e-3 and dt < 120
    report(
        6, "relative mixing", ok,
        f"max|C| on [512,1024] = {late:.3e} vs max on [1,32] / 5 = {early / 5:.3e}; "
        f"sum |C|^2 over (100,1000] = {decade:.3e} (limit 1e-3); {dt:.1f} s",
    )


# ------------------------------------------------------------------ 7


def test_c07_unique_ergodicity():
    skew = golden_skew()
    N = 1_000_000
    orb = skew_orbit(skew, [0.2], [0.0], N - 1)
    disc = discrepancy_2d(orb.x[0], orb.rho[0])
    res = birkhoff_mode_averages(skew, [ModeObservable.constant_mode(m) for m in range(1, 21)], (0.2, 0.0), N)
    worst = max(abs(r.value) for r in res)
    report(7, "unique ergodicity proxy", disc <= 0.01 and worst <= 0.05, f"discrepancy {disc:.2e}, max |mode average| {worst:.2e}")


# ------------------------------------------------------------------ 8


def test_c08_rokhlin_bound():
    skew = golden_skew()
    rows = []
    ok = True
    for K in (100, 1000, 10_000):
        for lam in (0.1, 0.3, 0.7):
            res = rokhlin_eigenfunction(skew, lam, K)
            ok &= res.defect <= 2 / math.sqrt(K) + 1e-3
            rows.append(f"K={K} lam={lam}: {res.defect:.4f}")
    report(8, "Rokhlin bound", ok, "; ".join(rows[::3]) + " (all 9 within 2 K^-1/2 + 1e-3)" if ok else "; ".join(rows))


# ------------------------------------------------------------------ 9


def test_c09_atom_probe():
    f = ModeObservable.constant_mode(1)
    ser = correlation_series(golden_skew(), f, f, 10_000)
    probe = atom_probe(ser, 256, N=10_000).value
    lam0 = 77 / 256
    control = atom_probe(np.exp(2j * math.pi * lam0 * np.arange(10_001)), 256, N=10_000)
    ok = probe < 0.05 and control.value > 0.9 and control.argmax[-1] == lam0
    report(9, "atom probe", ok, f"golden series {probe:.2e}; pure-point control {control.value:.3f} at {control.argmax[-1]:.4f}")


# ------------------------------------------------------------------ 10


def test_c10_furstenberg_separation():
    T = golden_map()
    arr = T.arrays()

    def shift(x):
        a = np.clip(np.searchsorted(arr["left"], x, side="right") - 1, 0, None)
        return (x + arr["w"][a]) % 1.0

    u0 = lambda x: 0.3 * np.cos(2 * math.pi * x)  # noqa: E731
    cob = lambda x: u0(shift(x)) - u0(x)  # noqa: E731
    control = cohomological_residual(T, cob, 1, 8, 4096).residual
    cinv = best_invariant_defect(T, 1, 64, skewing=cob, panels=512).defect
    floor = FIXTURES["golden_cohom"]["floor"]
    inv_floor = FIXTURES["golden_invariant"]["floor"]
    skew = golden_skew()
    res = {B: cohomological_residual(skew, None, 1, B, FIXTURES["golden_cohom"]["orbit_length"]).residual for B in (8, 16, 32, 64)}
    inv = best_invariant_defect(skew, 1, 64).defect
    ok = control < 1e-6 and cinv < 1e-6 and min(res.values()) >= floor and inv >= inv_floor
    detail = (
        f"coboundary residual {control:.1e} (B=8), invariant defect {cinv:.1e}; admissible residuals "
        + ", ".join(f"B{B} {v:.4f}" for B, v in res.items())
        + f" >= floor {floor:.4f}; best invariant defect B64 {inv:.4f} >= {inv_floor:.4f}"
    )
    report(10, "Furstenberg separation", ok, detail)


# ------------------------------------------------------------------ 11

DETERMINISM_RUNS = (
    ("genus2.ini", ("validate", "admissible", "iterate", "commutator")),
    ("golden_torus.ini", ("commutator", "birkhoff", "correlate", "spectrum", "rokhlin", "cohom")),
)


def run_cli(cmd, config, out, threads, seed):
    env = dict(os.environ)
    subprocess.run(
        [sys.executable, "-m", "heisenberg_iet", cmd, "--config", str(config), "--out", str(out),
         "--threads", str(threads), "--seed", str(seed), "--format", "both"],
        check=True, capture_output=True, env=env,
    )


def test_c11_determinism(tmp_path):
    compared, differ = 0, []
    for cfg, cmds in DETERMINISM_RUNS:
        for cmd in cmds:
            for threads in (1, 4):
                run_cli(cmd, ROOT / "configs" / cfg, tmp_path / f"t{threads}", threads, 7)
    for p in sorted((tmp_path / "t1").iterdir()):
        q = tmp_path / "t4" / p.name
        compared += 1
        if not q.exists() or p.read_bytes() != q.read_bytes():
            differ.append(p.name)
    n4 = len(list((tmp_path / "t4").iterdir()))
    ok = compared > 0 and not differ and n4 == compared
    report(11, "determinism across --threads", ok, f"{compared} artifacts compared, {len(differ)} differ")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
