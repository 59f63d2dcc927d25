"""Zippered-rectangle suspensions of an interval exchange.

The surface is modelled by the upper rectangles ``R0[a] = I_a x [0, h_a]``.
Each lower rectangle ``R1[a]`` is the translate of ``R0[a]`` by
``(w_a, -h_a)``, so top edges land on the cross-section ``I x {0}``; the
vertical sides are cut into pieces and glued by translations (the zippers),
with the extra segment ``S~`` absorbing the mismatch ``sum(tau)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import InconsistentSystem, TauNotInCone
from .iet import IetMap, IetSpec, kernel_basis, omega_matrix, parse_number, sigma_permutation

LP_SLACK = 1e-9


def _vector(values: Sequence, exact: bool):
    vals = [parse_number(v) if isinstance(v, str) else v for v in values]
    if exact and all(isinstance(v, (Fraction, int)) for v in vals):
        return tuple(Fraction(v) for v in vals)
    return tuple(float(v) for v in vals)


def _zero(vec):
    return Fraction(0) if vec and isinstance(vec[0], Fraction) else 0.0


def _partial_sums(spec: IetSpec, tau):
    """Cumulative tau sums in top order and in bottom order (length d each)."""
    top, acc = [], _zero(tau)
    for v in tau:
        acc = acc + v
        top.append(acc)
    idx = {s: i for i, s in enumerate(spec.top)}
    bot, acc = [], _zero(tau)
    for s in spec.bottom:
        acc = acc + tau[idx[s]]
        bot.append(acc)
    return top, bot


def cone_contains(spec: IetSpec, tau: Sequence) -> bool:
    """Membership of tau (pi0 order) in the open suspension cone T_pi^+."""
    if len(tau) != spec.d:
        raise ValueError(f"tau must have {spec.d} entries")
    tau = _vector(tau, True)
    top, bot = _partial_sums(spec, tau)
    return all(v > 0 for v in top[:-1]) and all(v < 0 for v in bot[:-1])


def heights_from_tau(spec: IetSpec, tau: Sequence):
    """h = -Omega_pi tau, strictly positive on the cone."""
    tau = _vector(tau, True)
    if not cone_contains(spec, tau):
        raise TauNotInCone(f"tau={list(map(str, tau))} is not in the suspension cone")
    om = omega_matrix(spec)
    d = spec.d
    return tuple(-sum((int(om[i, j]) * tau[j] for j in range(d)), _zero(tau)) for i in range(d))


# ------------------------------------------------------------- H_pi^+ membership


@dataclass(frozen=True)
class ConeMembership:
    contains: bool
    witness: tuple | None = None
    method: str = ""

    def __bool__(self) -> bool:
        return self.contains


def _cone_rows(spec: IetSpec) -> np.ndarray:
    """Rows r with r . tau > 0 describing T_pi^+ (2(d-1) rows)."""
    d = spec.d
    idx = {s: i for i, s in enumerate(spec.top)}
    rows = []
    for k in range(1, d):
        r = np.zeros(d, dtype=np.int64)
        r[:k] = 1
        rows.append(r)
    for k in range(1, d):
        r = np.zeros(d, dtype=np.int64)
        for s in spec.bottom[:k]:
            r[idx[s]] = -1
        rows.append(r)
    return np.array(rows, dtype=np.int64).reshape(-1, d)


def _fm_feasible_point(rows: list[tuple[list[Fraction], Fraction]], nvar: int):
    """Fourier-Motzkin for strict systems ``a . c > r``; returns a point or None."""
    if nvar == 0:
        return [] if all(r < 0 for _, r in rows) else None
    k = nvar - 1
    lower, upper, rest = [], [], []
    for a, r in rows:
        if a[k] > 0:
            lower.append((a, r))
        elif a[k] < 0:
            upper.append((a, r))
        else:
            rest.append((a[:k], r))
    # each lower/upper pair: (r_l - a_l'.c)/a_l[k] < x_k < (r_u - a_u'.c)/a_u[k]
    combined = list(rest)
    for al, rl in lower:
        for au, ru in upper:
            # upper bound minus lower bound must stay positive
            cu, cl = Fraction(1) / au[k], Fraction(1) / al[k]
            coeff = [-au[j] * cu + al[j] * cl for j in range(k)]
            rhs = rl * cl - ru * cu
            combined.append((coeff, rhs))
    sub = _fm_feasible_point(combined, k)
    if sub is None:
        return None
    lo = max(((r - sum(a[j] * sub[j] for j in range(k))) / a[k] for a, r in lower), default=None)
    hi = min(((r - sum(a[j] * sub[j] for j in range(k))) / a[k] for a, r in upper), default=None)
    if lo is not None and hi is not None:
        if not lo < hi:
            return None
        x = (lo + hi) / 2
    elif lo is not None:
        x = lo + 1
    elif hi is not None:
        x = hi - 1
    else:
        x = Fraction(0)
    return sub + [x]


def _exact_particular(spec: IetSpec, h: tuple[Fraction, ...]):
    import sympy

    om = sympy.Matrix(omega_matrix(spec).tolist())
    rhs = sympy.Matrix([-sympy.Rational(v.numerator, v.denominator) for v in h])
    try:
        sol, params = om.gauss_jordan_solve(rhs)
    except ValueError:
        raise InconsistentSystem("h is not in the image of Omega_pi") from None
    sol = sol.subs({p: 0 for p in params})
    return [Fraction(int(sympy.fraction(v)[0]), int(sympy.fraction(v)[1])) for v in sol]


def heights_cone_contains(spec: IetSpec, h: Sequence) -> ConeMembership:
    """Decide h in H_pi^+ = -Omega_pi(T_pi^+), returning a witness tau on success."""
    if len(h) != spec.d:
        raise ValueError(f"h must have {spec.d} entries")
    exact = all(isinstance(v, (Fraction, int)) or (isinstance(v, str) and "/" in v) for v in h)
    h = _vector(h, exact)
    if not all(v > 0 for v in h):
        return ConeMembership(False, None, "positivity")
    rows = _cone_rows(spec)
    if exact:
        tau_p = _exact_particular(spec, h)
        kb = kernel_basis(spec)
        m = len(kb)
        fm_rows = []
        for r in rows:
            a = [Fraction(int(sum(int(r[j]) * int(v[j]) for j in range(spec.d)))) for v in kb]
            base = sum((int(r[j]) * tau_p[j] for j in range(spec.d)), Fraction(0))
            fm_rows.append((a, -base))
        pt = _fm_feasible_point(fm_rows, m)
        if pt is None:
            return ConeMembership(False, None, "fourier-motzkin")
        tau = tuple(tau_p[j] + sum((pt[i] * int(kb[i][j]) for i in range(m)), Fraction(0)) for j in range(spec.d))
        return ConeMembership(True, tau, "fourier-motzkin")

    om = omega_matrix(spec).astype(np.float64)
    hv = np.asarray(h, dtype=np.float64)
    scale = max(1.0, float(np.max(np.abs(hv))))
    tau_ls, *_ = np.linalg.lstsq(-om, hv, rcond=None)
    if np.max(np.abs(-om @ tau_ls - hv)) > 1e-9 * scale:
        raise InconsistentSystem("h is not in the image of Omega_pi")
    d = spec.d
    # variables (tau, t): maximise t subject to rows . tau >= t, -Omega tau = h, t <= scale
    c = np.zeros(d + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-rows.astype(np.float64), np.ones((rows.shape[0], 1))]) if rows.size else None
    b_ub = np.zeros(rows.shape[0]) if rows.size else None
    a_eq = np.hstack([-om, np.zeros((d, 1))])
    bounds = [(None, None)] * d + [(None, scale)]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=hv, bounds=bounds, method="highs")
    if res.status != 0:
        return ConeMembership(False, None, "linprog")
    t = -res.fun
    if t <= LP_SLACK * scale:
        return ConeMembership(False, None, "linprog")
    return ConeMembership(True, tuple(float(v) for v in res.x[:d]), "linprog")


# ------------------------------------------------------------------ geometry


@dataclass(frozen=True)
class Rect:
    x0: object
    x1: object
    y0: object
    y1: object


@dataclass(frozen=True)
class Segment:
    """Vertical segment {x} x [y0, y1] (y0 <= y1)."""

    x: object
    y0: object
    y1: object

    @property
    def length(self):
        return self.y1 - self.y0


@dataclass(frozen=True)
class SideGluing:
    """Identify ``src`` side piece of ``R0[src_index]`` with ``dst`` side piece by translation."""

    src_index: int
    src_side: str
    src: tuple
    dst_index: int
    dst_side: str
    dst: tuple
    translation: tuple
    via_s_tilde: bool = False


@dataclass(frozen=True)
class Suspension:
    spec: IetSpec
    tau: tuple
    h: tuple
    r0: tuple[Rect, ...]
    r1: tuple[Rect, ...]
    s0: tuple[Segment, ...]
    s1: tuple[Segment, ...]
    s_tilde: Segment | None
    side_gluings: tuple[SideGluing, ...]
    rect_translations: tuple[tuple, ...]
    iet: IetMap = field(repr=False)

    @property
    def area(self):
        return surface_area(self)

    @property
    def n_singularities(self) -> int:
        return sigma_permutation(self.spec).n_singularities

    def to_json_dict(self) -> dict:
        f = lambda v: str(v) if isinstance(v, Fraction) else float(v)  # noqa: E731
        rect = lambda r: [f(r.x0), f(r.x1), f(r.y0), f(r.y1)]  # noqa: E731
        seg = lambda s: None if s is None else [f(s.x), f(s.y0), f(s.y1)]  # noqa: E731
        syms = self.spec.top
        return {
            "alphabet": list(syms),
            "tau": [f(v) for v in self.tau],
            "h": [f(v) for v in self.h],
            "area": f(self.area),
            "rectangles": {
                s: {"R0": rect(self.r0[i]), "R1": rect(self.r1[i]), "S0": seg(self.s0[i]), "S1": seg(self.s1[i])}
                for i, s in enumerate(syms)
            },
            "s_tilde": seg(self.s_tilde),
            "gluings": [
                {"kind": "rectangle", "symbol": s, "translation": [f(v) for v in self.rect_translations[i]]}
                for i, s in enumerate(syms)
            ]
            + [
                {
                    "kind": "side",
                    "src": [syms[g.src_index], g.src_side, f(g.src[0]), f(g.src[1])],
                    "dst": [syms[g.dst_index], g.dst_side, f(g.dst[0]), f(g.dst[1])],
                    "translation": [f(v) for v in g.translation],
                    "via_s_tilde": g.via_s_tilde,
                }
                for g in self.side_gluings
            ],
        }


def build_zippered_rectangles(spec: IetSpec, tau: Sequence, lengths: Sequence | None = None) -> Suspension:
    """Zippered-rectangle surface M(pi, lambda, tau, h)."""
    if lengths is not None:
        spec = spec.with_lengths(lengths)
    tau = _vector(tau, spec.exact)
    h = heights_from_tau(spec, tau)
    T = IetMap.from_spec(spec)
    d = spec.d
    lam = spec.lengths
    zero = Fraction(0) if spec.exact else 0.0
    idx = {s: i for i, s in enumerate(spec.top)}
    pos1 = [spec.bottom.index(s) for s in spec.top]

    left0 = list(T.breakpoints)
    right0 = [left0[i] + lam[i] for i in range(d)]
    left1 = [left0[i] + T.w[i] for i in range(d)]
    right1 = [left1[i] + lam[i] for i in range(d)]
    z0, z1 = _partial_sums(spec, tau)  # by top position / bottom position
    z0p = z0  # Z0+ indexed by pi0 order
    z1p = [z1[pos1[i]] for i in range(d)]
    total_tau = z0[-1]
    total = T.total

    r0 = tuple(Rect(left0[i], right0[i], zero, h[i]) for i in range(d))
    r1 = tuple(Rect(left1[i], right1[i], -h[i], zero) for i in range(d))
    a0 = d - 1  # alpha(0): last in top row
    a1 = idx[spec.bottom[-1]]  # alpha(1): last in bottom row
    s0, s1 = [], []
    for i in range(d):
        s0.append(Segment(right0[i], min(zero, z0p[i]), max(zero, z0p[i])))
        s1.append(Segment(right1[i], min(zero, z1p[i]), max(zero, z1p[i])))
    shared = Segment(total, min(zero, total_tau), max(zero, total_tau))
    s0[a0] = shared
    s1[a1] = shared
    if total_tau > 0:
        s_tilde = Segment(right0[a1], h[a1], z0p[a1])
    elif total_tau < 0:
        s_tilde = Segment(right1[a0], z1p[a0], -h[a0])
    else:
        s_tilde = None

    gluings: list[SideGluing] = []

    def add(src_i, y0, y1, dst_i, dy, via=False):
        if not y1 > y0:
            return
        dx = right0[dst_i] - left0[src_i]
        gluings.append(SideGluing(src_i, "left", (y0, y1), dst_i, "right", (y0 + dy, y1 + dy), (dx, dy), via))

    for i in range(d):
        z0m = z0p[i - 1] if i > 0 else zero
        # piece A: zipped to the right side of the top-row predecessor
        if i > 0:
            pred = i - 1
            if z0m > h[pred]:
                add(i, zero, h[pred], pred, zero)
                add(i, h[pred], z0m, a0, -h[pred], True)
            else:
                add(i, zero, z0m, pred, zero)
        # piece B: through R1, zipped to the right side of the bottom-row predecessor
        q = pos1[i]
        if q > 0:
            p1 = idx[spec.bottom[q - 1]]
            dy = h[p1] - h[i]
            lo_target = z0m + dy
            if lo_target < 0:
                cut = z0m - lo_target
                add(i, z0m, cut, a1, dy + h[a1], True)
                add(i, cut, h[i], p1, dy)
            else:
                add(i, z0m, h[i], p1, dy)

    trans = tuple((T.w[i], -h[i]) for i in range(d))
    return Suspension(
        spec=spec,
        tau=tau,
        h=h,
        r0=r0,
        r1=r1,
        s0=tuple(s0),
        s1=tuple(s1),
        s_tilde=s_tilde,
        side_gluings=tuple(gluings),
        rect_translations=trans,
        iet=T,
    )


def surface_area(s: Suspension):
    acc = Fraction(0) if all(isinstance(v, Fraction) for v in s.h) and s.spec.exact else 0.0
    for lam, h in zip(s.spec.lengths, s.h):
        acc = acc + lam * h
    return acc


def _tiles(intervals: list[tuple], lo, hi, tol: float) -> bool:
    ivs = sorted(intervals, key=lambda t: float(t[0]))
    cur = lo
    for a, b in ivs:
        if abs(float(a) - float(cur)) > tol:
            return False
        cur = b
    return abs(float(cur) - float(hi)) <= tol


def boundary_report(s: Suspension, tol: float = 1e-12) -> dict:
    """Check that every rectangle edge is glued exactly once or lies on I x {0}."""
    d = s.spec.d
    zero = 0
    left = {i: [] for i in range(d)}
    right = {i: [] for i in range(d)}
    for g in s.side_gluings:
        left[g.src_index].append(g.src)
        right[g.dst_index].append(g.dst)
    total = s.iet.total
    report = {
        "left_sides": all(_tiles(left[i], zero, s.h[i], tol) for i in range(d)),
        "right_sides": all(_tiles(right[i], zero, s.h[i], tol) for i in range(d)),
        "top_edges": _tiles([(r.x0, r.x1) for r in s.r1], zero, total, tol),
        "bottom_edges": _tiles([(r.x0, r.x1) for r in s.r0], zero, total, tol),
    }
    # glued pieces must have equal length and matching heights after translation
    report["translations"] = all(
        math.isclose(float(g.src[1] - g.src[0]), float(g.dst[1] - g.dst[0]), abs_tol=tol)
        and math.isclose(float(g.src[0] + g.translation[1]), float(g.dst[0]), abs_tol=tol)
        for g in s.side_gluings
    )
    report["ok"] = all(report.values())
    return report
