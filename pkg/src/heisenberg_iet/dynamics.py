"""Iteration of affine skew products, fibre modes and correlations.

A mode observable f(x, rho) = F(x) exp(2 pi i m rho) is carried by the skew
product into F(T^n x) exp(2 pi i m (rho + G_n(x))), where G_n is the Birkhoff
sum of the skewing function.  G_n is piecewise affine, so correlations between
two mode observables reduce to one-dimensional integrals over its pieces.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .bundle import SkewProduct
from .errors import GridTooCoarse, MeshTooCoarse, OutOfDomain

TWO_PI = 2.0 * math.pi
GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
REFINE_TOL = 1e-8
MAX_REFINE = 12
MC_BURN_IN = 1000
MC_BATCHES = 20


# ------------------------------------------------------------- point iteration


@dataclass(frozen=True)
class SkewStep:
    x: float
    rho: float
    near_discontinuity: bool


def skew_apply(skew: SkewProduct, x: float, rho: float) -> SkewStep:
    """One step of T^(x, rho) = (T x, rho + h_a (x - left_a) + b_a mod 1)."""
    if not (0.0 <= rho < 1.0):
        raise OutOfDomain(f"rho={rho} is outside [0, 1)")
    x2, r2 = skew(x, rho)
    return SkewStep(float(x2), r2, skew.base.near_breakpoint(x))


@dataclass(frozen=True)
class SkewOrbit:
    x: np.ndarray
    rho: np.ndarray
    min_breakpoint_distance: np.ndarray
    guard: float

    @property
    def reliable(self) -> np.ndarray:
        return self.min_breakpoint_distance >= self.guard


def skew_orbit(skew: SkewProduct, x0, rho0, n: int) -> SkewOrbit:
    """Orbits of several starts at once; arrays have shape (starts, n + 1)."""
    arr = skew.arrays()
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    rho0 = np.broadcast_to(np.atleast_1d(np.asarray(rho0, dtype=np.float64)), x0.shape).copy()
    total = float(skew.base.total)
    if np.any((x0 < 0) | (x0 >= total)):
        raise OutOfDomain("start outside the base interval")
    xs, rs, md = kernels.skew_orbit_kernel(x0, rho0, int(n), arr["left"], arr["w"], arr["h"], arr["b"], total)
    return SkewOrbit(xs, rs, md, skew.base.guard)


def birkhoff_skewing_sum(skew: SkewProduct, x: float, n: int) -> float:
    """G_n(x) mod 1, the fibre displacement after n steps."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return 0.0
    orb = skew_orbit(skew, [x], [0.0], n)
    return float(orb.rho[0, -1])


# --------------------------------------------------------------- observables


@dataclass(frozen=True)
class ModeObservable:
    """f(x, rho) = F(x) exp(2 pi i m rho) with F piecewise smooth.

    ``constant`` is set when F is constant; correlations then use exact
    per-piece integrals instead of quadrature.
    """

    mode: int
    base_fn: Callable[[np.ndarray], np.ndarray]
    discontinuities: tuple[float, ...] = ()
    description: str = ""
    constant: complex | None = None

    @classmethod
    def constant_mode(cls, mode: int, value: complex = 1.0) -> "ModeObservable":
        v = complex(value)
        return cls(
            mode=int(mode),
            base_fn=lambda x: np.full(np.shape(x), v, dtype=np.complex128),
            description=f"constant {value} in mode {mode}",
            constant=v,
        )

    def base(self, x) -> np.ndarray:
        return np.asarray(self.base_fn(np.asarray(x, dtype=np.float64)), dtype=np.complex128)

    def __call__(self, x, rho) -> np.ndarray:
        return self.base(x) * np.exp(2j * math.pi * self.mode * np.asarray(rho, dtype=np.float64))

    def as_dict(self) -> dict:
        return {"mode": self.mode, "description": self.description, "discontinuities": list(self.discontinuities)}


def _gl_integrate(lo: np.ndarray, hi: np.ndarray, fn: Callable[[np.ndarray, np.ndarray], np.ndarray], panels: np.ndarray):
    """Composite 8-point Gauss-Legendre over [lo_i, hi_i] with panels_i equal panels each.

    ``fn(x, owner)`` evaluates the integrand at nodes x belonging to interval owner.
    """
    panels = np.maximum(np.asarray(panels, dtype=np.int64), 1)
    owner = np.repeat(np.arange(lo.shape[0]), panels)
    first = np.cumsum(panels) - panels
    k = np.arange(owner.shape[0]) - first[owner]
    width = (hi - lo)[owner] / panels[owner]
    a = lo[owner] + k * width
    half = 0.5 * width
    x = (a + half)[:, None] + half[:, None] * GL_NODES[None, :]
    own = np.broadcast_to(owner[:, None], x.shape)
    vals = fn(x.ravel(), own.ravel()).reshape(x.shape)
    return np.sum((vals @ GL_WEIGHTS) * half)


def _split_segments(lo: np.ndarray, hi: np.ndarray, cuts: np.ndarray, eps: float = kernels.PIECE_EPS):
    """Split each [lo_i, hi_i) at the sorted cuts lying strictly inside; returns (lo, hi, owner)."""
    if cuts.size == 0:
        return lo, hi, np.arange(lo.shape[0])
    i0 = np.searchsorted(cuts, lo + eps, side="right")
    i1 = np.searchsorted(cuts, hi - eps, side="left")
    cnt = np.maximum(i1 - i0, 0)
    reps = cnt + 1
    owner = np.repeat(np.arange(lo.shape[0]), reps)
    first = np.cumsum(reps) - reps
    j = np.arange(owner.shape[0]) - first[owner]
    cidx = i0[owner] + j
    p = np.where(j == 0, lo[owner], cuts[np.clip(cidx - 1, 0, cuts.size - 1)])
    q = np.where(j == cnt[owner], hi[owner], cuts[np.clip(cidx, 0, cuts.size - 1)])
    return p, q, owner


# ------------------------------------------------------------ cocycle pieces


@dataclass
class CocyclePieces:
    """On [a_i, a_i + L_i): T^n x = y_i + (x - a_i) and G_n(x) = G_i + S_i (x - a_i) mod 1."""

    a: np.ndarray
    L: np.ndarray
    y: np.ndarray
    G: np.ndarray
    S: np.ndarray
    n: int = 0

    @classmethod
    def identity(cls, skew: SkewProduct) -> "CocyclePieces":
        total = float(skew.base.total)
        one = lambda v: np.array([v], dtype=np.float64)  # noqa: E731
        return cls(one(0.0), one(total), one(0.0), one(0.0), one(0.0), 0)

    def step(self, skew: SkewProduct) -> "CocyclePieces":
        arr = skew.arrays()
        a, L, y, G, S = kernels.propagate_pieces_kernel(
            self.a, self.L, self.y, self.G, self.S, arr["left"], arr["w"], arr["h"], arr["b"], kernels.PIECE_EPS
        )
        return CocyclePieces(a, L, y, G, S, self.n + 1)

    def __len__(self) -> int:
        return self.a.shape[0]


def cocycle_pieces(skew: SkewProduct, n: int) -> CocyclePieces:
    p = CocyclePieces.identity(skew)
    for _ in range(n):
        p = p.step(skew)
    return p


def min_mesh(skew: SkewProduct, n: int) -> int:
    return 4 * (skew.d * n + 2)


def _correlation_exact(pieces: CocyclePieces, m: int, cf: complex, cg: complex, total: float) -> complex:
    # integral of exp(2 pi i m (G + S t)) over t in [0, L), in closed form
    theta_half = math.pi * m * pieces.S * pieces.L
    vals = pieces.L * np.exp(2j * math.pi * m * pieces.G + 1j * theta_half) * np.sinc(m * pieces.S * pieces.L)
    return complex(cf * np.conj(cg) * np.sum(vals) / total)


def _correlation_gauss(pieces, f: ModeObservable, g: ModeObservable, total: float, mesh: int) -> complex:
    m = f.mode
    lo, hi = pieces.a, pieces.a + pieces.L
    own = np.arange(lo.shape[0])
    if f.discontinuities:
        # cuts of F(T^n x), located through the image coordinate of each piece
        yc = np.sort(np.asarray(f.discontinuities, dtype=np.float64))
        ylo, yhi, o = _split_segments(pieces.y, pieces.y + pieces.L, yc)
        lo, hi, own = pieces.a[o] + (ylo - pieces.y[o]), pieces.a[o] + (yhi - pieces.y[o]), o
    if g.discontinuities:
        lo, hi, o = _split_segments(lo, hi, np.sort(np.asarray(g.discontinuities, dtype=np.float64)))
        own = own[o]
    length = hi - lo
    phase = TWO_PI * abs(m) * pieces.S[own] * length
    panels = np.maximum(np.ceil(phase / (0.5 * math.pi)), np.ceil(mesh * length / total)).astype(np.int64)
    a, y, G, S = pieces.a[own], pieces.y[own], pieces.G[own], pieces.S[own]

    def integrand(x, k):
        t = x - a[k]
        return f.base(y[k] + t) * np.exp(2j * math.pi * m * (G[k] + S[k] * t)) * np.conj(g.base(x))

    return complex(_gl_integrate(lo, hi, integrand, panels) / total)


def _resolve_rule(f: ModeObservable, g: ModeObservable, rule: str) -> str:
    if rule not in ("auto", "gauss", "exact"):
        raise ValueError(f"unknown rule {rule!r}")
    both_const = f.constant is not None and g.constant is not None
    if rule == "exact" and not both_const:
        raise ValueError("exact rule needs constant base functions")
    if rule == "auto":
        return "exact" if both_const else "gauss"
    return rule


@dataclass(frozen=True)
class CorrelationValue:
    value: complex
    mesh: int
    refinements: int
    change: float


def _correlation_at(skew, pieces, f, g, mesh, rule) -> CorrelationValue:
    total = float(skew.base.total)
    if f.mode != g.mode:
        return CorrelationValue(0j, 0, 0, 0.0)
    need = min_mesh(skew, pieces.n)
    if mesh is None:
        mesh = need
    elif mesh < need:
        raise MeshTooCoarse(f"mesh {mesh} < {need} required for lag {pieces.n}")
    if rule == "exact":
        return CorrelationValue(_correlation_exact(pieces, f.mode, f.constant, g.constant, total), len(pieces), 0, 0.0)
    prev = _correlation_gauss(pieces, f, g, total, mesh)
    change = math.inf
    k = 0
    for k in range(1, MAX_REFINE + 1):
        mesh *= 2
        cur = _correlation_gauss(pieces, f, g, total, mesh)
        change = abs(cur - prev)
        prev = cur
        if change < REFINE_TOL:
            break
    return CorrelationValue(prev, mesh, k, change)


def mode_correlation(
    skew: SkewProduct, f: ModeObservable, g: ModeObservable, n: int, mesh: int | None = None, rule: str = "gauss"
) -> complex:
    """<f o T^n, g> with the normalised measure on I x R/Z."""
    if n < 0:
        raise ValueError("lag must be >= 0")
    if f.mode != g.mode:
        return 0j
    rule = _resolve_rule(f, g, rule)
    return _correlation_at(skew, cocycle_pieces(skew, n), f, g, mesh, rule).value


# ------------------------------------------------------------- series + output


@dataclass
class CorrelationSeries:
    lags: np.ndarray
    values: np.ndarray
    method: str
    mesh: list[int] | None = None
    sample_count: int | None = None
    stderr: np.ndarray | None = None
    seed: int | None = None
    spec_hash: str | None = None
    meta: dict = field(default_factory=dict)

    def abs(self) -> np.ndarray:
        return np.abs(self.values)

    def metadata(self) -> dict:
        out = {
            "method": self.method,
            "n_max": int(self.lags[-1]) if self.lags.size else 0,
            "seed": self.seed,
            "spec_hash": self.spec_hash,
        }
        if self.mesh is not None:
            out["mesh"] = [int(v) for v in self.mesh]
        if self.sample_count is not None:
            out["sample_count"] = int(self.sample_count)
        out.update(self.meta)
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            cols = ["n", "re", "im", "abs"] + (["stderr"] if self.stderr is not None else [])
            wr.writerow(cols)
            for i, (n, v) in enumerate(zip(self.lags, self.values)):
                row = [int(n), repr(float(v.real)), repr(float(v.imag)), repr(float(abs(v)))]
                if self.stderr is not None:
                    row.append(repr(float(self.stderr[i])))
                wr.writerow(row)

    def write_sidecar(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.metadata(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def correlation_series(
    skew: SkewProduct,
    f: ModeObservable,
    g: ModeObservable,
    n_max: int,
    method: str = "grid",
    *,
    rule: str = "auto",
    samples: int = 100_000,
    seed: int = 0,
    spec_hash: str | None = None,
) -> CorrelationSeries:
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    lags = np.arange(n_max + 1)
    if method == "grid":
        if f.mode != g.mode:
            return CorrelationSeries(lags, np.zeros(n_max + 1, complex), "grid", [0] * (n_max + 1), spec_hash=spec_hash)
        rule = _resolve_rule(f, g, rule)
        vals = np.empty(n_max + 1, dtype=np.complex128)
        meshes = []
        pieces = CocyclePieces.identity(skew)
        for n in lags:
            if n:
                pieces = pieces.step(skew)
            cv = _correlation_at(skew, pieces, f, g, None, rule)
            vals[n] = cv.value
            meshes.append(cv.mesh)
        if rule == "exact":
            # exact piece integrals: record the number of affine pieces per lag instead of a mesh
            return CorrelationSeries(lags, vals, "grid", spec_hash=spec_hash, meta={"rule": rule, "pieces": meshes})
        return CorrelationSeries(lags, vals, "grid", meshes, spec_hash=spec_hash, meta={"rule": rule})
    if method == "montecarlo":
        return _correlation_montecarlo(skew, f, g, n_max, samples, seed, spec_hash)
    raise ValueError(f"unknown method {method!r}")


def _batch_stderr(v: np.ndarray, batches: int) -> float:
    k = v.shape[0] // batches
    means = v[: k * batches].reshape(batches, k).mean(axis=1)
    return float(np.sqrt(np.var(means, ddof=1) / batches))


def _correlation_montecarlo(skew, f, g, n_max, samples, seed, spec_hash) -> CorrelationSeries:
    rng = np.random.default_rng(seed)
    total = float(skew.base.total)
    x0, r0 = rng.uniform(0.0, total), rng.uniform(0.0, 1.0)
    length = MC_BURN_IN + samples + n_max
    orb = skew_orbit(skew, [x0], [r0], length)
    xs, rs = orb.x[0, MC_BURN_IN:], orb.rho[0, MC_BURN_IN:]
    fx = f(xs, rs)
    gx = np.conj(g(xs[:samples], rs[:samples]))
    vals = np.empty(n_max + 1, dtype=np.complex128)
    err = np.empty(n_max + 1)
    for n in range(n_max + 1):
        prod = fx[n : n + samples] * gx
        vals[n] = prod.mean()
        err[n] = math.hypot(_batch_stderr(prod.real, MC_BATCHES), _batch_stderr(prod.imag, MC_BATCHES))
    return CorrelationSeries(
        np.arange(n_max + 1), vals, "montecarlo", sample_count=samples, stderr=err, seed=seed, spec_hash=spec_hash,
        meta={"burn_in": MC_BURN_IN, "batches": MC_BATCHES},
    )


# ------------------------------------------------------------ ergodic averages


@dataclass(frozen=True)
class BirkhoffResult:
    value: complex
    trace: tuple[tuple[int, complex], ...]
    reliable: bool


def _dyadic_trace(partial: np.ndarray) -> tuple[tuple[int, complex], ...]:
    n = partial.shape[0]
    marks = [1 << k for k in range(n.bit_length()) if (1 << k) <= n]
    if marks[-1] != n:
        marks.append(n)
    return tuple((m, complex(partial[m - 1])) for m in marks)


def birkhoff_mode_averages(
    skew: SkewProduct, observables: Sequence[ModeObservable], start: tuple[float, float], N: int
) -> list[BirkhoffResult]:
    """Averages of several observables along one orbit of length N."""
    if N < 1:
        raise ValueError("N must be >= 1")
    orb = skew_orbit(skew, [start[0]], [start[1]], N - 1)
    xs, rs = orb.x[0], orb.rho[0]
    ok = bool(orb.reliable[0])
    counts = np.arange(1, N + 1)
    out = []
    for obs in observables:
        if obs.constant is not None and obs.mode == 0:
            v = obs.constant
            out.append(BirkhoffResult(v, tuple((m, v) for m, _ in _dyadic_trace(np.zeros(N))), ok))
            continue
        vals = obs(xs, rs)
        partial = np.cumsum(vals) / counts
        out.append(BirkhoffResult(complex(vals.mean()), _dyadic_trace(partial), ok))
    return out


def birkhoff_average(skew: SkewProduct, obs: ModeObservable, start: tuple[float, float], N: int) -> BirkhoffResult:
    return birkhoff_mode_averages(skew, [obs], start, N)[0]


# ------------------------------------------------------------ fibre projection


def mode_project(samples: np.ndarray, n: int) -> np.ndarray:
    """n-th Fourier coefficient in rho of values sampled on a uniform fibre grid.

    ``samples[..., j]`` is f at rho = j / M.  Returns one coefficient per base point.
    """
    samples = np.asarray(samples)
    M = samples.shape[-1]
    if M < 4 * abs(n) + 4:
        raise GridTooCoarse(f"fibre grid of {M} points cannot resolve mode {n}")
    rho = np.arange(M) / M
    return samples @ np.exp(-2j * math.pi * n * rho) / M


# ---------------------------------------------------------------- discrepancy

ANCHORS = 64


def discrepancy_2d(x, rho, total: float = 1.0) -> float:
    """Star discrepancy over anchored boxes [0, i/64 |I|) x [0, j/64)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    rho = np.asarray(rho, dtype=np.float64).ravel()
    if x.shape[0] < 2:
        raise ValueError("need at least two points")
    edges = np.linspace(0.0, 1.0, ANCHORS + 1)
    u = np.clip(x / total, 0.0, np.nextafter(1.0, 0.0))
    hist, _, _ = np.histogram2d(u, rho % 1.0, bins=[edges, edges])
    counts = np.zeros((ANCHORS + 1, ANCHORS + 1))
    counts[1:, 1:] = hist.cumsum(axis=0).cumsum(axis=1)
    area = np.outer(edges, edges)
    return float(np.max(np.abs(counts / x.shape[0] - area)))
