"""Heisenberg circle bundles over zippered-rectangle surfaces.

Normalisation: the fibre is R/Z and parallel transport around a
counter-clockwise loop bounding a disk twists the fibre by the enclosed area
mod 1.  In these units the Weil condition reads ``sum(lambda * h)`` in Z and
the first-return map is the affine skew product

    T^(x, rho) = (x + w_a, rho + h_a (x - left_a) + b_a)    for x in I_a

taken literally mod 1.  The admissible offsets satisfy, for every sigma-orbit
O avoiding 0,

    sum_{k in O} b[k] - b[k+1] = -sum_{k in O} lambda[k] h[k]   (mod 1)

with positions in pi0 order and ``b[d+1] := 0``.  The coefficient vector of
that constraint is exactly the kernel vector lambda(O).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import HeightsNotInCone, NotWeilIntegral
from .iet import IetMap, IetSpec, omega_matrix, orbit_vector, sigma_permutation
from .suspension import Suspension, _partial_sums, heights_cone_contains

WEIL_TOL = 1e-9
CONSTRAINT_TOL = 1e-9
# Sign of the right-hand side of the orbit constraints; checked against
# transported holonomy by orbit_constraint_holonomy_oracle.
ORBIT_CONSTRAINT_SIGN = -1


def circ_dist(x, y=0.0) -> float:
    """Distance on R/Z."""
    r = float(x - y) % 1.0
    return min(r, 1.0 - r)


def wrap_half(v):
    """Representative of v mod 1 in (-1/2, 1/2]."""
    r = np.asarray(v, dtype=np.float64) % 1.0
    r = np.where(r > 0.5, r - 1.0, r)
    return r if r.ndim else float(r)


def weil_check(lengths: Sequence, h: Sequence, tol: float = WEIL_TOL) -> bool:
    area = sum(lam * hh for lam, hh in zip(lengths, h))
    if isinstance(area, Fraction):
        return area.denominator == 1
    return abs(area - round(area)) <= tol


@dataclass(frozen=True)
class OrbitConstraint:
    orbit: tuple[int, ...]
    coeffs: np.ndarray
    rhs: float | Fraction

    def residual(self, b: Sequence) -> float:
        lhs = sum(int(c) * v for c, v in zip(self.coeffs, b))
        return circ_dist(lhs, self.rhs)


@dataclass(frozen=True)
class AdmissibleSpace:
    """Offsets b in (R/Z)^d with coeffs . b = rhs (mod 1) for every constraint."""

    constraints: tuple[OrbitConstraint, ...]
    d: int

    @property
    def codimension(self) -> int:
        return len(self.constraints)

    def to_json_dict(self) -> dict:
        enc = lambda v: str(v) if isinstance(v, Fraction) else repr(float(v))  # noqa: E731
        return {
            "constraints": [
                {"orbit": list(c.orbit), "coeffs": [int(v) for v in c.coeffs], "rhs": enc(c.rhs)}
                for c in self.constraints
            ],
            "codimension": self.codimension,
            "sign_convention": ORBIT_CONSTRAINT_SIGN,
        }


def _orbit_rhs(spec: IetSpec, orbit: Sequence[int], h: Sequence):
    acc = Fraction(0) if spec.exact and all(isinstance(v, Fraction) for v in h) else 0.0
    for k in orbit:
        acc = acc + spec.lengths[k - 1] * h[k - 1]
    val = ORBIT_CONSTRAINT_SIGN * acc
    if isinstance(val, Fraction):
        return val - math.floor(val)
    return val % 1.0


def orbit_constraints(spec: IetSpec, h: Sequence) -> tuple[OrbitConstraint, ...]:
    sing = sigma_permutation(spec)
    return tuple(
        OrbitConstraint(orbit=o, coeffs=orbit_vector(spec, o), rhs=_orbit_rhs(spec, o, h))
        for o in sing.nonzero_orbits()
    )


def admissible_b_space(spec: IetSpec, h: Sequence, *, check: bool = True) -> AdmissibleSpace:
    if check:
        if not weil_check(spec.lengths, h):
            raise NotWeilIntegral(f"area {float(sum(l * x for l, x in zip(spec.lengths, h)))} is not an integer")
        if not heights_cone_contains(spec, h):
            raise HeightsNotInCone("h is not in H_pi^+")
    return AdmissibleSpace(constraints=orbit_constraints(spec, h), d=spec.d)


@dataclass(frozen=True)
class AdmissibilityReport:
    heights_in_cone: bool
    weil: bool
    constraint_residuals: tuple[float, ...]

    @property
    def constraints_ok(self) -> bool:
        return all(r < CONSTRAINT_TOL for r in self.constraint_residuals)

    @property
    def ok(self) -> bool:
        return self.heights_in_cone and self.weil and self.constraints_ok

    def __bool__(self) -> bool:
        return self.ok

    def as_dict(self) -> dict:
        return {
            "heights_in_cone": self.heights_in_cone,
            "weil": self.weil,
            "constraint_residuals": list(self.constraint_residuals),
            "constraints_ok": self.constraints_ok,
            "admissible": self.ok,
        }


def is_admissible(spec: IetSpec, h: Sequence, b: Sequence) -> AdmissibilityReport:
    try:
        in_cone = bool(heights_cone_contains(spec, h))
    except Exception:
        in_cone = False
    residuals = tuple(c.residual(b) for c in orbit_constraints(spec, h))
    return AdmissibilityReport(heights_in_cone=in_cone, weil=weil_check(spec.lengths, h), constraint_residuals=residuals)


def canonical_tau(spec: IetSpec) -> np.ndarray:
    """tau_alpha = pi1(alpha) - pi0(alpha), always inside the cone for irreducible pi."""
    return (spec.perm - np.arange(spec.d)).astype(np.float64)


def _in_cone_float(spec: IetSpec, tau: np.ndarray) -> bool:
    top, bot = _partial_sums(spec, tuple(float(v) for v in tau))
    return all(v > 0 for v in top[:-1]) and all(v < 0 for v in bot[:-1])


def sample_tau(spec: IetSpec, rng: np.random.Generator) -> np.ndarray:
    base = canonical_tau(spec)
    if spec.d == 1:
        return np.array([rng.uniform(-1.0, 1.0)])
    u = rng.normal(size=spec.d) * 0.75
    scale = 1.0
    while scale > 1e-6:
        tau = base + scale * u
        if _in_cone_float(spec, tau):
            break
        scale *= 0.5
    else:  # pragma: no cover - the canonical vector is interior
        tau = base
    return tau * rng.uniform(0.5, 2.0)


def project_offsets(space: AdmissibleSpace, b0: Sequence) -> np.ndarray:
    """Minimal-norm correction of b0 onto the admissible affine set, reduced mod 1."""
    b = np.asarray([float(v) for v in b0], dtype=np.float64)
    if not space.constraints:
        return b % 1.0
    A = np.array([c.coeffs for c in space.constraints], dtype=np.float64)
    r = np.array([float(c.rhs) for c in space.constraints])
    err = wrap_half(r - A @ b)
    delta = A.T @ np.linalg.solve(A @ A.T, np.atleast_1d(err))
    return (b + delta) % 1.0


def sample_offsets(spec: IetSpec, h: Sequence, seed: int | np.random.Generator) -> np.ndarray:
    """Admissible b for fixed heights, from a seeded uniform draw."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    space = admissible_b_space(spec, h)
    return project_offsets(space, rng.uniform(0.0, 1.0, size=spec.d))


@dataclass(frozen=True)
class AdmissibleSample:
    tau: np.ndarray
    h: np.ndarray
    b: np.ndarray
    area: float


def sample_admissible(spec: IetSpec, seed: int | np.random.Generator) -> AdmissibleSample:
    """Deterministic-in-seed point of A_T = H_T x B_T (integral area)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    lam = spec.lengths_array()
    om = omega_matrix(spec).astype(np.float64)
    tau = sample_tau(spec, rng)
    h = -om @ tau
    area = float(lam @ h)
    target = max(1, round(area))
    tau = tau * (target / area)
    h = -om @ tau
    space = admissible_b_space(spec, h, check=False)
    b = project_offsets(space, rng.uniform(0.0, 1.0, size=spec.d))
    return AdmissibleSample(tau=tau, h=h, b=b, area=float(lam @ h))


# --------------------------------------------------------------- skew products


@dataclass(frozen=True)
class SkewProduct:
    """Affine skew product over an IET (pi0 order vectors)."""

    base: IetMap
    h: np.ndarray
    b: np.ndarray
    admissibility: AdmissibilityReport | None = None
    _arrays: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def breakpoints(self):
        return self.base.breakpoints

    @property
    def d(self) -> int:
        return self.base.d

    def arrays(self) -> dict[str, np.ndarray]:
        if not self._arrays:
            self._arrays.update(self.base.arrays())
            self._arrays["h"] = np.asarray(self.h, dtype=np.float64)
            self._arrays["b"] = np.asarray(self.b, dtype=np.float64)
        return self._arrays

    def skewing(self, x):
        """g(x) = h_a (x - left_a) + b_a, vectorised over x."""
        arr = self.arrays()
        x = np.asarray(x, dtype=np.float64)
        a = np.clip(np.searchsorted(arr["left"], x, side="right") - 1, 0, self.d - 1)
        return arr["h"][a] * (x - arr["left"][a]) + arr["b"][a]

    def __call__(self, x, rho):
        a = self.base.interval_index(x)
        left = self.base.breakpoints[a]
        r = rho + self.h[a] * (x - left) + self.b[a]
        return self.base(x), float(r) % 1.0

    def with_offsets(self, b: Sequence) -> "SkewProduct":
        return build_skew_product(self.base, self.h, b)


def build_skew_product(T: IetMap, h: Sequence, b: Sequence, *, check: bool = False) -> SkewProduct:
    h = np.asarray([float(v) for v in h], dtype=np.float64)
    b = np.asarray([float(v) for v in b], dtype=np.float64) % 1.0
    if h.shape != (T.d,) or b.shape != (T.d,):
        raise ValueError(f"h and b must have {T.d} entries")
    if np.any(h <= 0):
        raise ValueError("slopes h must be positive")
    report = is_admissible(T.spec, h, b) if check else None
    return SkewProduct(base=T, h=h, b=b, admissibility=report)


@dataclass(frozen=True)
class BundleSpec:
    suspension: Suspension
    b: np.ndarray

    @property
    def h(self):
        return self.suspension.h

    @property
    def weil(self) -> bool:
        return weil_check(self.suspension.spec.lengths, self.suspension.h)

    def report(self) -> AdmissibilityReport:
        return is_admissible(self.suspension.spec, self.suspension.h, self.b)

    def skew_product(self) -> SkewProduct:
        return build_skew_product(self.suspension.iet, [float(v) for v in self.h], self.b)


# ------------------------------------------------------------------ holonomy


def rect_holonomy(width: float, height: float) -> float:
    """Fibre twist of the counter-clockwise boundary of a width x height rectangle."""
    if width < 0 or height < 0:
        raise ValueError("dimensions must be nonnegative")
    return float(width * height) % 1.0


@dataclass(frozen=True)
class HolonomyCheck:
    orbit: tuple[int, ...]
    transported: float
    enclosed: float
    residual: float
    opposite_sign_residual: float


def orbit_constraint_holonomy_oracle(suspension: Suspension, b: Sequence, orbit: Sequence[int]) -> HolonomyCheck:
    """Recompute one orbit constraint from transport and rectangle holonomies.

    The 1-chain sum_k (v_k - v_{k+1}) (left sides of the upper rectangles,
    closed along the cross-section) bounds minus the union of the rectangles
    R0[k], k in O.  Transport along each v_k is measured with the vertical
    flow from the corner (left_k, 0); the enclosed holonomy is the sum of
    rectangle holonomies.  The residual compares the two with the adopted
    sign; ``opposite_sign_residual`` is what the other sign would give.
    """
    from .flow import FlowState, flow_vertical

    skew = build_skew_product(suspension.iet, [float(v) for v in suspension.h], b)
    spec = suspension.spec
    d = spec.d
    lengths = spec.lengths

    def transport(k: int) -> float:
        if k > d:
            return 0.0
        i = k - 1
        start = FlowState(i, float(suspension.iet.breakpoints[i]), 0.0, 0.0)
        end = flow_vertical(skew, start, float(suspension.h[i]))
        return end.rho

    transported = 0.0
    enclosed = 0.0
    for k in orbit:
        transported += transport(k) - transport(k + 1)
        enclosed += rect_holonomy(float(lengths[k - 1]), float(suspension.h[k - 1]))
    res = circ_dist(transported, ORBIT_CONSTRAINT_SIGN * enclosed)
    alt = circ_dist(transported, -ORBIT_CONSTRAINT_SIGN * enclosed)
    return HolonomyCheck(tuple(orbit), transported % 1.0, enclosed % 1.0, res, alt)
