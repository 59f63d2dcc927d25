"""Interval exchange transformations and their linear-algebraic invariants.

Everything here is laid out in *pi0 order*: index ``i`` refers to the symbol
occupying position ``i + 1`` in the top row.  In that layout ``pi0`` is the
identity and the whole combinatorics is carried by the monodromy permutation
``p = pi1 o pi0^-1``.

Lengths may be floats or :class:`fractions.Fraction`; a spec whose lengths are
all fractions runs in exact arithmetic (see :attr:`IetSpec.exact`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .errors import NonPositiveLength, NotABijection, OutOfDomain, ReduciblePermutation

# Distance to a breakpoint below which floating orbits are flagged unreliable.
GUARD_EPS = 1e-12


def parse_number(value) -> float | Fraction:
    """Decimal -> float, ``"p/q"`` string or Rational -> Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not lengths")
    if isinstance(value, Rational):
        return Fraction(int(value.numerator), int(value.denominator))
    if isinstance(value, str):
        text = value.strip()
        if "/" in text:
            return Fraction(text)
        return float(text)
    return float(value)


@dataclass(frozen=True)
class IetSpec:
    """Validated interval exchange data, reindexed to pi0 order.

    ``top`` lists the symbols left to right before the exchange, ``bottom``
    after it.  ``lengths[i]`` is the length of ``top[i]``.
    """

    top: tuple[str, ...]
    bottom: tuple[str, ...]
    lengths: tuple

    @property
    def d(self) -> int:
        return len(self.top)

    @property
    def alphabet(self) -> tuple[str, ...]:
        return self.top

    @property
    def exact(self) -> bool:
        return all(isinstance(v, Fraction) for v in self.lengths)

    @property
    def perm(self) -> np.ndarray:
        """0-based monodromy in pi0 order: ``perm[i] = pi1(top[i]) - 1``."""
        pos = {s: k for k, s in enumerate(self.bottom)}
        return np.array([pos[s] for s in self.top], dtype=np.int64)

    def pi0(self, symbol: str) -> int:
        return self.top.index(symbol) + 1

    def pi1(self, symbol: str) -> int:
        return self.bottom.index(symbol) + 1

    @property
    def total(self):
        return sum(self.lengths, Fraction(0) if self.exact else 0.0)

    def lengths_array(self) -> np.ndarray:
        return np.array([float(v) for v in self.lengths], dtype=np.float64)

    def with_lengths(self, lengths: Sequence) -> "IetSpec":
        return validate_iet(self.top, self.top, self.bottom, lengths)

    def as_dict(self) -> dict:
        return {
            "alphabet": list(self.top),
            "pi0": list(self.top),
            "pi1": list(self.bottom),
            "lambda": [str(v) if isinstance(v, Fraction) else repr(float(v)) for v in self.lengths],
        }


def _as_order(alphabet: Sequence[str], pi, name: str) -> tuple[str, ...]:
    """Accept a left-to-right symbol sequence or a mapping symbol -> position (1-based)."""
    d = len(alphabet)
    if isinstance(pi, Mapping):
        if set(pi) != set(alphabet):
            raise NotABijection(f"{name} keys {sorted(pi)} do not match the alphabet")
        positions = sorted(int(v) for v in pi.values())
        if positions != list(range(1, d + 1)):
            raise NotABijection(f"{name} values must be exactly 1..{d}, got {positions}")
        return tuple(sorted(alphabet, key=lambda s: int(pi[s])))
    order = tuple(str(s) for s in pi)
    if len(order) != d or set(order) != set(alphabet):
        raise NotABijection(f"{name}={list(order)} is not a bijection onto the alphabet {list(alphabet)}")
    return order


def is_irreducible(perm: Sequence[int]) -> bool:
    """No proper prefix {0..k-1} is mapped onto itself (0-based monodromy)."""
    best = -1
    for k, v in enumerate(perm[:-1]):
        best = max(best, int(v))
        if best == k:
            return False
    return True


def validate_iet(alphabet, pi0, pi1, lengths) -> IetSpec:
    """Validate raw IET data and return an :class:`IetSpec` in pi0 order.

    ``pi0``/``pi1`` are either symbol sequences (left to right) or mappings
    ``symbol -> position``.  ``lengths`` is a sequence aligned with
    ``alphabet`` or a mapping ``symbol -> length``; entries may be numbers or
    ``"p/q"`` strings.
    """
    alphabet = tuple(str(s) for s in alphabet)
    d = len(alphabet)
    if d < 1:
        raise NotABijection("alphabet must contain at least one symbol")
    if len(set(alphabet)) != d:
        raise NotABijection(f"alphabet has repeated symbols: {list(alphabet)}")
    top = _as_order(alphabet, pi0, "pi0")
    bottom = _as_order(alphabet, pi1, "pi1")
    if isinstance(lengths, Mapping):
        if set(lengths) != set(alphabet):
            raise NonPositiveLength("length mapping keys do not match the alphabet")
        raw = {s: lengths[s] for s in alphabet}
    else:
        lengths = list(lengths)
        if len(lengths) != d:
            raise NonPositiveLength(f"expected {d} lengths, got {len(lengths)}")
        raw = dict(zip(alphabet, lengths))
    try:
        parsed = {s: parse_number(v) for s, v in raw.items()}
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise NonPositiveLength(f"unparseable length: {exc}") from None
    for s, v in parsed.items():
        if not (v > 0) or (isinstance(v, float) and not math.isfinite(v)):
            raise NonPositiveLength(f"length of {s!r} must be positive, got {v}")
    exact = all(isinstance(v, Fraction) for v in parsed.values())
    ordered = tuple(parsed[s] if exact else float(parsed[s]) for s in top)
    spec = IetSpec(top=top, bottom=bottom, lengths=ordered)
    if not is_irreducible(spec.perm):
        raise ReduciblePermutation(f"permutation pair {list(top)} / {list(bottom)} is reducible")
    return spec


# ----------------------------------------------------------------- invariants


def omega_matrix(spec: IetSpec) -> np.ndarray:
    """Antisymmetric d x d integer matrix Omega_pi (pi0 order)."""
    p = spec.perm
    d = spec.d
    om = np.zeros((d, d), dtype=np.int64)
    for i in range(d):
        for j in range(d):
            # pi0 order: pi0(i) < pi0(j)  <=>  i < j
            if p[i] > p[j] and i < j:
                om[i, j] = 1
            elif p[i] < p[j] and i > j:
                om[i, j] = -1
    return om


def _matvec(om: np.ndarray, vec: Sequence):
    """Integer matrix times vector, exact when ``vec`` holds Fractions."""
    if all(isinstance(v, Fraction) for v in vec):
        return tuple(sum((int(om[i, j]) * vec[j] for j in range(len(vec))), Fraction(0)) for i in range(len(vec)))
    return om @ np.asarray(vec, dtype=np.float64)


def translation_vector(spec: IetSpec):
    """w = Omega_pi lambda; a tuple of Fractions on the exact path."""
    return _matvec(omega_matrix(spec), spec.lengths)


def monodromy(spec: IetSpec) -> tuple[int, ...]:
    """p = pi1 o pi0^-1 as a 1-based tuple: ``p[k-1] = p(k)``."""
    return tuple(int(v) + 1 for v in spec.perm)


@dataclass(frozen=True)
class SingularityData:
    sigma: tuple[int, ...]
    orbits: tuple[tuple[int, ...], ...]
    zero_orbit: tuple[int, ...]

    @property
    def n_singularities(self) -> int:
        return len(self.orbits)

    def nonzero_orbits(self) -> tuple[tuple[int, ...], ...]:
        return tuple(o for o in self.orbits if 0 not in o)


def sigma_permutation(spec: IetSpec) -> SingularityData:
    p = monodromy(spec)
    d = spec.d
    pinv = {v: k + 1 for k, v in enumerate(p)}
    sigma = []
    for j in range(d + 1):
        if j == 0:
            sigma.append(pinv[1] - 1)
        elif j == pinv[d]:
            sigma.append(d)
        else:
            sigma.append(pinv[p[j - 1] + 1] - 1)
    seen: set[int] = set()
    orbits = []
    for start in range(d + 1):
        if start in seen:
            continue
        cyc = []
        j = start
        while j not in seen:
            seen.add(j)
            cyc.append(j)
            j = sigma[j]
        orbits.append(tuple(cyc))
    zero = next(o for o in orbits if 0 in o)
    return SingularityData(sigma=tuple(sigma), orbits=tuple(orbits), zero_orbit=zero)


def orbit_vector(spec: IetSpec, orbit: Sequence[int]) -> np.ndarray:
    """lambda(O)_alpha = chi_O(pi0(alpha)) - chi_O(pi0(alpha) - 1)."""
    members = set(orbit)
    return np.array([int(k + 1 in members) - int(k in members) for k in range(spec.d)], dtype=np.int64)


def kernel_basis(spec: IetSpec) -> list[np.ndarray]:
    """One integer vector per sigma-orbit avoiding 0; together a basis of Ker Omega_pi."""
    sing = sigma_permutation(spec)
    return [orbit_vector(spec, o) for o in sing.nonzero_orbits()]


def genus(spec: IetSpec) -> int:
    """d = 2g + s - 1 for a suspension with s singularities."""
    s = sigma_permutation(spec).n_singularities
    return (spec.d - s + 1) // 2


# ------------------------------------------------------------------ the map


@dataclass(frozen=True)
class IetMap:
    """The exchange T(x) = x + w_alpha on I_alpha = [left_alpha, left_alpha + lambda_alpha)."""

    spec: IetSpec
    w: tuple
    breakpoints: tuple
    guard: float = GUARD_EPS
    _arrays: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_spec(cls, spec: IetSpec, guard: float = GUARD_EPS) -> "IetMap":
        w = translation_vector(spec)
        zero = Fraction(0) if spec.exact else 0.0
        lefts, acc = [], zero
        for lam in spec.lengths:
            lefts.append(acc)
            acc = acc + lam
        return cls(spec=spec, w=tuple(w), breakpoints=tuple(lefts), guard=guard)

    @property
    def d(self) -> int:
        return self.spec.d

    @property
    def total(self):
        return self.spec.total

    @property
    def exact(self) -> bool:
        return self.spec.exact

    # float64 views used by the kernels
    def arrays(self) -> dict[str, np.ndarray]:
        if not self._arrays:
            left = np.array([float(v) for v in self.breakpoints])
            w = np.array([float(v) for v in self.w])
            lam = self.spec.lengths_array()
            img_left_unsorted = left + w
            order = np.argsort(img_left_unsorted, kind="stable")
            self._arrays.update(
                left=left,
                w=w,
                lengths=lam,
                img_left=img_left_unsorted[order],
                img_sym=order.astype(np.int64),
            )
        return self._arrays

    def interval_index(self, x) -> int:
        """Index alpha (pi0 order) of the interval containing x."""
        if not (0 <= x < self.total):
            raise OutOfDomain(f"{x} is outside [0, {self.total})")
        lo, hi = 0, self.d - 1
        bps = self.breakpoints
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if bps[mid] <= x:
                lo = mid
            else:
                hi = mid - 1
        return lo

    def breakpoint_distance(self, x) -> float:
        interior = self.breakpoints[1:]
        if not interior:
            return math.inf
        return float(min(abs(x - c) for c in interior))

    def near_breakpoint(self, x) -> bool:
        """True when a floating-point x is within the guard distance of a discontinuity."""
        if self.exact and isinstance(x, Fraction):
            return False
        return self.breakpoint_distance(x) < self.guard

    def __call__(self, x):
        return iet_apply(self, x)

    def inverse(self, y):
        """T^-1(y): the unique x with T(x) = y."""
        if not (0 <= y < self.total):
            raise OutOfDomain(f"{y} is outside [0, {self.total})")
        for a in range(self.d):
            lo = self.breakpoints[a] + self.w[a]
            if lo <= y < lo + self.spec.lengths[a]:
                return y - self.w[a]
        raise OutOfDomain(f"{y} not covered by any image interval")  # pragma: no cover


def iet_apply(T: IetMap, x):
    """Image of a single point.  Exact when both T and x are rational."""
    if T.exact and not isinstance(x, float):
        x = parse_number(x) if isinstance(x, str) else x
    a = T.interval_index(x)
    y = x + T.w[a]
    if isinstance(y, float):
        y = kernels._wrap_into(y, float(T.total))
    return y


@dataclass(frozen=True)
class Orbit:
    points: np.ndarray | list
    reliable: bool
    min_breakpoint_distance: float


def iet_orbit(T: IetMap, x0, n: int) -> Orbit:
    """The n points T(x0), ..., T^n(x0) plus a reliability flag.

    Exact specs with a rational start iterate in Fractions.  Floating
    two-interval exchanges (rotations) use the closed form
    ``x0 + k*w_0 mod |I|`` so rounding does not accumulate.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0 <= x0 < T.total):
        raise OutOfDomain(f"{x0} is outside [0, {T.total})")
    if T.exact and not isinstance(x0, float):
        x = parse_number(x0) if isinstance(x0, str) else Fraction(x0)
        pts = []
        for _ in range(n):
            x = iet_apply(T, x)
            pts.append(x)
        return Orbit(points=pts, reliable=True, min_breakpoint_distance=math.inf)
    arr = T.arrays()
    total = float(T.total)
    x0 = float(x0)
    if T.d == 2:
        k = np.arange(1, n + 1, dtype=np.float64)
        pts = np.mod(x0 + k * arr["w"][0], total)
        pts[pts >= total] = 0.0
        prev = np.concatenate(([x0], pts[:-1]))
        md = float(np.min(np.abs(prev - arr["left"][1]))) if T.d > 1 else math.inf
    else:
        pts, md = kernels.iet_orbit_kernel(x0, n, arr["left"], arr["w"], total)
        md = float(md)
    return Orbit(points=pts, reliable=md >= T.guard, min_breakpoint_distance=md)
