"""Post-processing of correlation series and cohomological diagnostics."""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg

from .bundle import SkewProduct, wrap_half
from .dynamics import GL_NODES, GL_WEIGHTS, skew_orbit
from .errors import TowerConstructionFailed, WindowTooLong
from .iet import IetMap

MIN_SERIES = 64


def _as_array(series) -> np.ndarray:
    vals = getattr(series, "values", series)
    return np.asarray(vals, dtype=np.complex128)


def series_hash(series) -> str:
    v = _as_array(series)
    return hashlib.sha256(np.ascontiguousarray(v).tobytes()).hexdigest()[:16]


# ------------------------------------------------------------------ decay fit


@dataclass(frozen=True)
class DecayFit:
    alpha: float
    K: float
    r2: float
    lags: tuple[int, ...]
    envelope: tuple[float, ...]
    all_zero: bool = False


def dyadic_envelope(series) -> tuple[np.ndarray, np.ndarray]:
    """Block maxima of |C| over [2^k, 2^(k+1)), for every complete block."""
    a = np.abs(_as_array(series))
    n = a.shape[0]
    starts, env = [], []
    k = 0
    while (1 << (k + 1)) <= n:
        lo, hi = 1 << k, 1 << (k + 1)
        starts.append(lo)
        env.append(a[lo:hi].max())
        k += 1
    return np.array(starts), np.array(env)


def fit_decay_exponent(series) -> DecayFit:
    """Least-squares power law K (1 + n)^-alpha through the dyadic envelope of |C(n)|."""
    a = np.abs(_as_array(series))
    if a.shape[0] < MIN_SERIES:
        raise ValueError(f"need at least {MIN_SERIES} lags")
    n, env = dyadic_envelope(a)
    if not np.any(a[1:] > 0):
        return DecayFit(math.inf, 0.0, 0.0, tuple(int(v) for v in n), tuple(float(v) for v in env), True)
    keep = env > 0
    X = np.log1p(n[keep].astype(float))
    Y = np.log(env[keep])
    slope, icpt = np.polyfit(X, Y, 1)
    pred = slope * X + icpt
    ss_tot = float(np.sum((Y - Y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((Y - pred) ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(-float(slope), float(math.exp(icpt)), r2, tuple(int(v) for v in n), tuple(float(v) for v in env))


# ------------------------------------------------------ square summability


@dataclass(frozen=True)
class SquareSumReport:
    checkpoints: tuple[int, ...]
    partial_sums: tuple[float, ...]
    block_increments: tuple[float, ...]
    last_decade_increment: float
    converging: bool

    def as_dict(self) -> dict:
        return {
            "checkpoints": list(self.checkpoints),
            "partial_sums": list(self.partial_sums),
            "block_increments": list(self.block_increments),
            "last_decade_increment": self.last_decade_increment,
            "converging": self.converging,
        }


def square_summability_report(series) -> SquareSumReport:
    """Partial sums of |C(n)|^2 at dyadic checkpoints.

    The last-decade increment is the sum over n_max/10 < n <= n_max.  The
    series is flagged as converging when dyadic block increments shrink.
    """
    p = np.abs(_as_array(series)) ** 2
    n_max = p.shape[0] - 1
    cum = np.cumsum(p)
    marks = [1 << k for k in range(max(n_max, 1).bit_length()) if (1 << k) <= n_max]
    if not marks or marks[-1] != n_max:
        marks.append(n_max)
    sums = [float(cum[m]) for m in marks]
    incs = [sums[0]] + [b - a for a, b in zip(sums, sums[1:])]
    lo = n_max // 10
    decade = float(cum[n_max] - cum[lo])
    full = [1 << k for k in range(1, n_max.bit_length()) if (1 << k) <= n_max]
    blk = [float(cum[m] - cum[m // 2]) for m in full]
    if len(blk) >= 3:
        converging = blk[-1] < blk[-2] and blk[-2] < blk[-3] or blk[-1] == 0.0
    else:
        converging = blk[-1] <= blk[0] if blk else True
    return SquareSumReport(tuple(marks), tuple(sums), tuple(incs), decade, bool(converging))


# ------------------------------------------------------------ spectral density


@dataclass(frozen=True)
class SpectralEstimate:
    frequencies: np.ndarray
    density: np.ndarray
    raw: np.ndarray
    window: str
    window_length: int
    source_hash: str
    total_mass: float
    negative_lobe: float
    negative_mass: float

    def bin_masses(self, nbins: int) -> np.ndarray:
        """Mass of the (raw) density on nbins equal bins of [0, 1)."""
        M = self.raw.shape[0]
        if M % nbins:
            raise ValueError("nbins must divide the grid size")
        return self.raw.reshape(nbins, M // nbins).sum(axis=1) / M

    def max_bin_mass(self, nbins: int) -> float:
        return float(self.bin_masses(nbins).max())

    def provenance(self) -> dict:
        return {"taper": self.window, "length": self.window_length, "source": self.source_hash}


def _taper(name: str, length: int) -> np.ndarray:
    """Symmetric taper on lags -(L-1)..(L-1), equal to 1 at lag 0."""
    m = 2 * length - 1
    if name == "blackman":
        w = np.blackman(m + 2)[1:-1]
    elif name == "bartlett":
        w = 1.0 - np.abs(np.arange(-(length - 1), length)) / length
    elif name in ("rect", "none"):
        w = np.ones(m)
    else:
        raise ValueError(f"unknown taper {name!r}")
    return w / w[length - 1]


def spectral_density(series, window: int | None = None, taper: str = "blackman", grid_factor: int = 4) -> SpectralEstimate:
    """Tapered Fourier transform of the Hermitian extension of C on a grid over [0, 1).

    density(lam) = sum_{|n|<L} w_n C(n) exp(-2 pi i n lam), with C(-n) = conj C(n).
    """
    c = _as_array(series)
    L = c.shape[0] if window is None else int(window)
    if L > c.shape[0]:
        raise WindowTooLong(f"window {L} exceeds series length {c.shape[0]}")
    if L < 1:
        raise ValueError("window must be positive")
    w = _taper(taper, L)
    M = 1 << max(int(math.ceil(math.log2(grid_factor * L))), 1)
    seq = np.zeros(M, dtype=np.complex128)
    seq[:L] = w[L - 1 :] * c[:L]
    if L > 1:
        seq[-(L - 1) :] = (w[: L - 1] * np.conj(c[1:L][::-1]))
    raw = np.fft.fft(seq).real
    freqs = np.arange(M) / M
    neg = np.minimum(raw, 0.0)
    return SpectralEstimate(
        frequencies=freqs,
        density=np.maximum(raw, 0.0),
        raw=raw,
        window=taper,
        window_length=L,
        source_hash=series_hash(c),
        total_mass=float(raw.mean()),
        negative_lobe=float(-neg.min()) + 0.0,
        negative_mass=float(-neg.mean()) + 0.0,
    )


# ------------------------------------------------------------------ atom probe


@dataclass(frozen=True)
class AtomProbe:
    checkpoints: tuple[int, ...]
    maxima: tuple[float, ...]
    argmax: tuple[float, ...]

    @property
    def value(self) -> float:
        return self.maxima[-1]


def atom_probe(series, lam_grid: Sequence[float] | int = 256, N: int | None = None) -> AtomProbe:
    """max over lam of |(1/N) sum_{n<N} C(n) exp(-2 pi i lam n)| at dyadic N (and N itself)."""
    c = _as_array(series)
    if c.shape[0] < MIN_SERIES:
        raise ValueError(f"need at least {MIN_SERIES} lags")
    lam = np.arange(lam_grid) / lam_grid if isinstance(lam_grid, int) else np.asarray(lam_grid, dtype=np.float64)
    N = c.shape[0] if N is None else min(int(N), c.shape[0])
    marks = [1 << k for k in range(6, N.bit_length()) if (1 << k) <= N]
    if not marks or marks[-1] != N:
        marks.append(N)
    maxima, arg = [], []
    acc = np.zeros(lam.shape[0], dtype=np.complex128)
    done = 0
    chunk = 1024
    for m in marks:
        for lo in range(done, m, chunk):
            hi = min(lo + chunk, m)
            n = np.arange(lo, hi)
            acc += np.exp(-2j * math.pi * np.outer(lam, n)) @ c[lo:hi]
        done = m
        mod = np.abs(acc) / m
        k = int(np.argmax(mod))
        maxima.append(float(mod[k]))
        arg.append(float(lam[k]))
    return AtomProbe(tuple(marks), tuple(maxima), tuple(arg))


# ------------------------------------------------------ quadrature on partitions


def _partition_quad(points: np.ndarray, total: float, fn: Callable[[np.ndarray], np.ndarray], panels: int = 1) -> float:
    """Integral of fn over [0, total) split at the given points, GL8 on each cell."""
    pts = np.unique(np.clip(np.concatenate([points, [0.0, total]]), 0.0, total))
    lo, hi = pts[:-1], pts[1:]
    keep = hi - lo > 0
    lo, hi = lo[keep], hi[keep]
    if panels > 1:
        k = np.arange(panels)
        width = (hi - lo) / panels
        lo = (lo[:, None] + k[None, :] * width[:, None]).ravel()
        hi = lo + np.repeat(width, panels)
    half = 0.5 * (hi - lo)
    x = (lo + half)[:, None] + half[:, None] * GL_NODES[None, :]
    vals = fn(x.ravel()).reshape(x.shape)
    return float(np.sum((vals @ GL_WEIGHTS) * half))


def _skew_parts(system, skewing=None) -> tuple[IetMap, Callable[[np.ndarray], np.ndarray]]:
    """Base map and skewing function; a bare exchange gets g = 0 unless one is given."""
    if isinstance(system, SkewProduct):
        T = system.base
        g = system.skewing if skewing is None else skewing
    elif isinstance(system, IetMap):
        T = system
        g = (lambda y: np.zeros_like(y)) if skewing is None else skewing
    else:
        raise TypeError("expected a SkewProduct or an IetMap")
    return T, g


def _map_and_skew(T: IetMap, g, y: np.ndarray):
    arr = T.arrays()
    a = np.clip(np.searchsorted(arr["left"], y, side="right") - 1, 0, T.d - 1)
    Ty = y + arr["w"][a]
    total = float(T.total)
    Ty = np.where(Ty >= total, Ty - total, np.where(Ty < 0, Ty + total, Ty))
    return Ty, np.asarray(g(y), dtype=np.float64)


def _preimages(T: IetMap, pts: np.ndarray) -> np.ndarray:
    arr = T.arrays()
    k = np.clip(np.searchsorted(arr["img_left"], pts, side="right") - 1, 0, T.d - 1)
    return pts - arr["w"][arr["img_sym"][k]]


# ------------------------------------------------------------- Rokhlin towers


@dataclass(frozen=True)
class RokhlinResult:
    lam: float
    height: int
    mode: int
    base_point: float
    base_width: float
    level_starts: np.ndarray
    level_phase: np.ndarray
    level_slope: np.ndarray
    coefficient: float
    norm: float
    defect: float
    bound: float

    @property
    def within_bound(self) -> bool:
        return self.defect <= self.bound

    def value(self, y, rho=0.0) -> np.ndarray:
        """Tower function at (y, rho); zero off the tower."""
        y = np.asarray(y, dtype=np.float64)
        order = np.argsort(self.level_starts)
        st = self.level_starts[order]
        i = np.clip(np.searchsorted(st, y, side="right") - 1, 0, None)
        inside = (y >= st[i]) & (y < st[i] + self.base_width)
        j = order[i]
        ph = -self.lam * j + self.mode * (np.asarray(rho) - self.level_phase[j] - self.level_slope[j] * (y - st[i]))
        return np.where(inside, self.coefficient * np.exp(2j * math.pi * ph), 0.0)


DEFAULT_BASE_POINT = (math.sqrt(2.0) - 1.0) / 2.0


def rokhlin_eigenfunction(
    system, lam: float, height: int, *, mode: int | None = None, base_point: float | None = None, slack: float = 1e-3
) -> RokhlinResult:
    """Approximate eigenfunction f o T^ ~ exp(-2 pi i lam) f supported on a tower of ``height`` levels.

    The base is [x0, x0 + eps) with eps below every gap of the orbit segment
    and every distance to a discontinuity, so the levels are disjoint
    intervals.  On level j the function is c exp(-2 pi i lam j) exp(2 pi i m
    (rho - G_j)), which is exactly equivariant except on the top level and on
    the preimage of the base.  The defect is measured by quadrature.
    """
    T, g = _skew_parts(system)
    h = np.asarray(system.h, float) if isinstance(system, SkewProduct) else np.zeros(T.d)
    if mode is None:
        mode = 1 if isinstance(system, SkewProduct) else 0
    K = int(height)
    if K < 2:
        raise ValueError("tower height must be >= 2")
    total = float(T.total)
    x0 = total * DEFAULT_BASE_POINT if base_point is None else float(base_point)
    skew = system if isinstance(system, SkewProduct) else None
    arr = T.arrays()
    if skew is not None:
        orb = skew_orbit(skew, [x0], [0.0], K)
        P, Gj = orb.x[0], orb.rho[0]
        md = float(orb.min_breakpoint_distance[0])
    else:
        from .iet import iet_orbit

        o = iet_orbit(T, x0, K)
        P = np.concatenate([[x0], np.asarray(o.points, float)])
        Gj = np.zeros(K + 1)
        md = o.min_breakpoint_distance
    if md < T.guard:
        raise TowerConstructionFailed("orbit segment grazes a discontinuity")
    left = arr["left"]
    alpha = np.clip(np.searchsorted(left, P[:K], side="right") - 1, 0, None)
    slope = np.concatenate([[0.0], np.cumsum(h[alpha])])[:K]
    levels = P[:K]
    srt = np.sort(levels)
    gaps = np.diff(srt)
    right_ends = np.append(left[1:], total)[alpha]
    room = min(float(gaps.min()) if gaps.size else total, float(np.min(right_ends - levels)))
    eps = 0.5 * room
    if not eps > 1e-13 * total:
        raise TowerConstructionFailed(f"base width {eps} too small for {K} levels")
    c = 1.0 / math.sqrt(K * eps / total)
    res = RokhlinResult(lam, K, int(mode), x0, eps, levels.copy(), Gj[:K].copy(), slope, c, 0.0, 0.0, 0.0)

    def defect_density(y):
        Ty, gy = _map_and_skew(T, g, y)
        return np.abs(res.value(Ty, gy) - np.exp(-2j * math.pi * lam) * res.value(y, 0.0)) ** 2

    ends = np.concatenate([levels, levels + eps])
    cuts = np.concatenate([ends, _preimages(T, ends), left])
    d2 = _partition_quad(cuts, total, defect_density, panels=2) / total
    n2 = _partition_quad(ends, total, lambda y: np.abs(res.value(y)) ** 2, panels=2) / total
    norm = math.sqrt(n2)
    defect = math.sqrt(d2) / norm
    return RokhlinResult(
        lam, K, int(mode), x0, eps, levels.copy(), Gj[:K].copy(), slope, c, norm, defect, 2.0 / math.sqrt(K) + slack
    )


def eigenfunction_defect(
    system, base_fn: Callable[[np.ndarray], np.ndarray], lam: float, *, mode: int = 0,
    discontinuities: Sequence[float] = (), panels: int = 1024, skewing=None,
) -> float:
    """|| f o T^ - exp(-2 pi i lam) f || / || f || for f = F(x) exp(2 pi i mode rho)."""
    T, g = _skew_parts(system, skewing)
    total = float(T.total)

    def dens(y):
        Ty, gy = _map_and_skew(T, g, y)
        return np.abs(base_fn(Ty) * np.exp(2j * math.pi * mode * gy) - np.exp(-2j * math.pi * lam) * base_fn(y)) ** 2

    disc = np.asarray(discontinuities, float)
    cuts = np.concatenate([T.arrays()["left"], disc, _preimages(T, disc) if disc.size else disc])
    num = _partition_quad(cuts, total, dens, panels)
    den = _partition_quad(cuts, total, lambda y: np.abs(base_fn(y)) ** 2, panels)
    if den == 0:
        raise ValueError("zero function")
    return math.sqrt(num / den)


# ------------------------------------------------------ invariant functions


def furstenberg_invariant_function_check(
    system, modes: Mapping[int, Callable[[np.ndarray], np.ndarray]], *,
    discontinuities: Sequence[float] = (), panels: int = 1024, skewing=None,
) -> float:
    """Relative L^2 defect ||F o T^ - F|| / ||F|| for F = sum_n c_n(x) exp(2 pi i n rho).

    Modes do not mix under the skew product, so the defect splits over n.
    ``skewing`` replaces the affine skewing function, e.g. by a smooth coboundary.
    """
    T, g = _skew_parts(system, skewing)
    total = float(T.total)
    disc = np.asarray(discontinuities, float)
    cuts = np.concatenate([T.arrays()["left"], disc, _preimages(T, disc) if disc.size else disc])
    num = den = 0.0
    for n, cn in modes.items():
        def dens(y, cn=cn, n=n):
            Ty, gy = _map_and_skew(T, g, y)
            return np.abs(cn(Ty) * np.exp(2j * math.pi * n * gy) - cn(y)) ** 2

        num += _partition_quad(cuts, total, dens, panels)
        den += _partition_quad(cuts, total, lambda y, cn=cn: np.abs(cn(y)) ** 2, panels)
    if den == 0:
        raise ValueError("zero function")
    return math.sqrt(num / den)


@dataclass(frozen=True)
class BestInvariant:
    mode: int
    basis_size: int
    defect: float
    coefficients: np.ndarray


def best_invariant_defect(system, mode: int, basis_size: int, *, panels: int = 4096, skewing=None) -> BestInvariant:
    """Smallest relative defect over c(x) exp(2 pi i mode rho), c in a Fourier span.

    The span is exp(2 pi i k x / |I|) for k in [-B/2, B/2).  The minimum is the
    square root of the smallest generalised eigenvalue of (defect form, Gram).
    """
    T, g = _skew_parts(system, skewing)
    total = float(T.total)
    left = T.arrays()["left"]
    pts = np.unique(np.concatenate([left, [total]]))
    lo = np.concatenate([np.linspace(pts[i], pts[i + 1], panels + 1)[:-1] for i in range(len(pts) - 1)])
    hi = np.concatenate([np.linspace(pts[i], pts[i + 1], panels + 1)[1:] for i in range(len(pts) - 1)])
    half = 0.5 * (hi - lo)
    x = ((lo + half)[:, None] + half[:, None] * GL_NODES[None, :]).ravel()
    wts = (half[:, None] * GL_WEIGHTS[None, :]).ravel() / total
    ks = np.arange(-(basis_size // 2), basis_size - basis_size // 2)
    Ty, gy = _map_and_skew(T, g, x)
    phi = np.exp(2j * math.pi * np.outer(x, ks) / total)
    V = np.exp(2j * math.pi * np.outer(Ty, ks) / total) * np.exp(2j * math.pi * mode * gy)[:, None] - phi
    M = (V.conj().T * wts) @ V
    G = (phi.conj().T * wts) @ phi
    evals, evecs = scipy.linalg.eigh(M, G)
    return BestInvariant(int(mode), int(basis_size), math.sqrt(max(float(evals[0]), 0.0)), evecs[:, 0])


# ------------------------------------------------------ cohomological equation


COND_LIMIT = 1e12
RELIFT_ITER = 50
# continuity intervals whose integer offset is searched exhaustively
MAX_OFFSET_PIECES = 6


@dataclass(frozen=True)
class CohomResidualReport:
    mode: int
    basis_size: int
    orbit_length: int
    residual: float
    trend: tuple[tuple[int, float], ...] = ()
    ill_conditioned: bool = False
    condition: float = 0.0
    relift_iterations: int = 0
    coefficients: np.ndarray | None = field(default=None, repr=False, compare=False)

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "basis_size": self.basis_size,
            "orbit_length": self.orbit_length,
            "residual": self.residual,
            "trend": [[b, r] for b, r in self.trend],
            "ill_conditioned": self.ill_conditioned,
            "condition": self.condition,
            "relift_iterations": self.relift_iterations,
        }


def _fourier_design(x: np.ndarray, B: int, total: float) -> np.ndarray:
    """Real basis cos(2 pi k x), sin(2 pi k x), k = 1..B/2 (B columns, x scaled by |I|)."""
    k = np.arange(1, B // 2 + 1)
    ang = 2.0 * math.pi * np.outer(x / total, k)
    return np.concatenate([np.cos(ang), np.sin(ang)], axis=1)


def cohomological_residual(
    system, g: Callable[[np.ndarray], np.ndarray] | None, n: int, basis_size: int, orbit_length: int,
    *, base_point: float | None = None, discontinuities: Sequence[float] = (),
) -> CohomResidualReport:
    """Least-squares fit of u in a Fourier span to u(Tx) - u(x) = n g(x) mod 1 along one orbit.

    The targets live in R/Z.  They are lifted to R by unwrapping along x inside
    each continuity interval (where u o T - u is continuous), the integer
    offset of every interval is chosen to minimise the fit residual, and the
    lifts are then refined relative to the fit until they stop changing.  The
    residual is the RMS circular distance between the fitted increments and n g.
    """
    B, N = int(basis_size), int(orbit_length)
    if B < 4 or B % 2:
        raise ValueError("basis size must be an even number >= 4")
    if N < 10 * B:
        raise ValueError("orbit length must be at least 10 * basis size")
    if g is None and not isinstance(system, SkewProduct):
        raise ValueError("a skewing function is required for a bare interval exchange")
    T, g = _skew_parts(system, g)
    total = float(T.total)
    x0 = total * DEFAULT_BASE_POINT if base_point is None else float(base_point)
    from .iet import iet_orbit

    o = iet_orbit(T, x0, N)
    xs = np.concatenate([[x0], np.asarray(o.points, float)])
    target = n * np.asarray(g(xs[:-1]), dtype=np.float64)
    A = _fourier_design(xs[1:], B, total) - _fourier_design(xs[:-1], B, total)
    sv = np.linalg.svd(A, compute_uv=False)
    cond = float((sv[0] / sv[-1]) ** 2) if sv[-1] > 0 else math.inf
    ill = cond > COND_LIMIT

    def solve(rhs):
        if ill:
            lam = 1e-12 * sv[0] ** 2
            return np.linalg.solve(A.T @ A + lam * np.eye(B), A.T @ rhs)
        return np.linalg.lstsq(A, rhs, rcond=None)[0]

    def score(lift):
        coef = solve(lift)
        return float(np.sum(wrap_half(A @ coef - target) ** 2)), coef

    cuts = np.unique(np.concatenate([T.arrays()["left"][1:], np.asarray(discontinuities, float)]))
    piece = np.searchsorted(cuts, xs[:-1], side="right")
    base = np.empty_like(target)
    groups = [np.flatnonzero(piece == p) for p in range(cuts.size + 1)]
    groups = [ix for ix in groups if ix.size]
    for ix in groups:
        order = ix[np.argsort(xs[:-1][ix])]
        un = np.unwrap(target[order], period=1.0)
        base[order] = un - np.round(un[0] - wrap_half(un[0]))
    best = None
    free = groups[:MAX_OFFSET_PIECES]
    for shift in itertools.product((-1, 0, 1), repeat=len(free)):
        lift = base.copy()
        for k, ix in zip(shift, free):
            lift[ix] += k
        sc, coef = score(lift)
        if best is None or sc < best[0]:
            best = (sc, coef, lift)
    _, coef, lift = best
    it = 0
    for it in range(1, RELIFT_ITER + 1):
        fit = A @ coef
        new = fit + wrap_half(target - fit)
        if not np.any(np.round(new - lift)):
            break
        lift = new
        coef = solve(lift)
    resid = float(np.sqrt(np.mean(wrap_half(A @ coef - target) ** 2)))
    return CohomResidualReport(int(n), B, N, resid, ((B, resid),), ill, cond, it, coef)


def cohomological_residual_sweep(
    system, g, n: int, basis_sizes: Sequence[int], orbit_length: int, **kw
) -> CohomResidualReport:
    """Residuals as the basis doubles; the returned report is the largest basis with the full trend."""
    reports = [cohomological_residual(system, g, n, B, orbit_length, **kw) for B in basis_sizes]
    trend = tuple((r.basis_size, r.residual) for r in reports)
    last = reports[-1]
    return CohomResidualReport(
        last.mode, last.basis_size, last.orbit_length, last.residual, trend,
        any(r.ill_conditioned for r in reports), max(r.condition for r in reports), last.relift_iterations,
        last.coefficients,
    )
