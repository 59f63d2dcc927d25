"""Regenerate tests/data/fixtures.json from brute-force oracles.

    python3 scripts/oracle_fixtures.py

The oracles share no code with the package:

* cohomological floor: orbit of the golden rotation in 40-digit arithmetic,
  complex exponential basis, scipy dense least squares, integer lifts chosen
  by exhaustive search over per-interval offsets (no refinement pass);
* invariant-function floor: the defect form is assembled from closed-form
  integrals of exponentials on the two continuity intervals and minimised
  with scipy's Hermitian eigensolver.

The stored floors are half the smallest oracle value over the basis sweep.
"""

from __future__ import annotations

import itertools
import json
import math
from pathlib import Path

import mpmath
import numpy as np
import scipy.linalg

OUT = Path(__file__).resolve().parents[1] / "tests" / "data" / "fixtures.json"
BASIS = (8, 16, 32, 64)
ORBIT = 4096
MARGIN = 0.5

mpmath.mp.dps = 40
ALPHA = (mpmath.sqrt(5) - 1) / 2
A = float(ALPHA)
CUT = 1.0 - A  # left end of the second interval


def golden_orbit(x0: float, n: int) -> np.ndarray:
    x = mpmath.mpf(x0)
    return np.array([float(mpmath.frac(x + j * ALPHA)) for j in range(n + 1)])


def skewing(x):
    return np.where(x < CUT, x, x - CUT)


def cohom_oracle(B: int, n_orbit: int = ORBIT, x0: float = (math.sqrt(2) - 1) / 2) -> float:
    xs = golden_orbit(x0, n_orbit)
    ks = np.concatenate([np.arange(-B // 2, 0), np.arange(1, B // 2 + 1)])
    E = lambda x: np.exp(2j * np.pi * np.outer(x, ks))  # noqa: E731
    D = E(xs[1:]) - E(xs[:-1])
    t = skewing(xs[:-1])
    lift0 = np.empty_like(t)
    groups = [np.flatnonzero(xs[:-1] < CUT), np.flatnonzero(xs[:-1] >= CUT)]
    for ix in groups:
        o = ix[np.argsort(xs[:-1][ix])]
        un = np.unwrap(t[o], period=1.0)
        lift0[o] = un - np.round(un[0])
    best = math.inf
    for shift in itertools.product((-1, 0, 1), repeat=2):
        lift = lift0.copy()
        for k, ix in zip(shift, groups):
            lift[ix] += k
        c, *_ = scipy.linalg.lstsq(D, lift.astype(complex))
        r = (D @ c).real - t
        r = (r + 0.5) % 1.0 - 0.5
        best = min(best, float(np.sqrt(np.mean(r * r))))
    return best


def _int_exp(m, a, b):
    """Integral of exp(2 pi i m x) over [a, b]."""
    if m == 0:
        return b - a
    return (np.exp(2j * np.pi * m * b) - np.exp(2j * np.pi * m * a)) / (2j * np.pi * m)


def invariant_oracle(B: int, mode: int = 1) -> float:
    ks = np.arange(-(B // 2), B - B // 2)
    # on [l, r): T x = x + w and g(x) = x - l, so V_k = exp(2 pi i (k w - mode l)) e_{k+mode} - e_k
    pieces = [(0.0, CUT, A), (CUT, 1.0, -CUT)]
    M = np.zeros((B, B), dtype=complex)
    for l, r, w in pieces:
        for i, k in enumerate(ks):
            ck = np.exp(2j * np.pi * (k * w - mode * l))
            for j, q in enumerate(ks):
                cq = np.exp(2j * np.pi * (q * w - mode * l))
                M[i, j] += (
                    np.conj(ck) * cq * _int_exp(q - k, l, r)
                    - np.conj(ck) * _int_exp(q - k - mode, l, r)
                    - cq * _int_exp(q + mode - k, l, r)
                    + _int_exp(q - k, l, r)
                )
    evals = scipy.linalg.eigh(M, eigvals_only=True)
    return math.sqrt(max(float(evals[0]), 0.0))


def main() -> None:
    cohom = {B: cohom_oracle(B) for B in BASIS}
    inv = {B: invariant_oracle(B) for B in BASIS}
    data = {
        "generated_by": "python3 scripts/oracle_fixtures.py",
        "golden_cohom": {
            "orbit_length": ORBIT,
            "oracle_residuals": {str(B): v for B, v in cohom.items()},
            "floor": MARGIN * min(cohom.values()),
        },
        "golden_invariant": {
            "oracle_defects": {str(B): v for B, v in inv.items()},
            "floor": MARGIN * inv[64],
        },
        "margin": MARGIN,
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    print(json.dumps(data, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
