"""Heisenberg translation flow as a special flow over the cross-section.

Inside rectangle alpha the connection form is (x - left_alpha) ds, so moving
up by ds turns the fibre by (x - left_alpha) ds, horizontal moves do not turn
it, and the offset b_alpha is added when the roof is crossed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import kernels
from .bundle import SkewProduct
from .errors import ChartExit, OutOfDomain


@dataclass(frozen=True)
class FlowState:
    alpha: int
    x: float
    s: float
    rho: float
    near_singularity: bool = False

    def symbol(self, skew: SkewProduct) -> str:
        return skew.base.spec.top[self.alpha]


def state_at(skew: SkewProduct, x: float, s: float = 0.0, rho: float = 0.0) -> FlowState:
    a = skew.base.interval_index(x)
    if not (0.0 <= s < skew.h[a]):
        raise OutOfDomain(f"height {s} outside [0, {skew.h[a]})")
    return FlowState(a, float(x), float(s), float(rho) % 1.0)


def _check(skew: SkewProduct, st: FlowState) -> None:
    left = skew.arrays()["left"]
    lam = skew.arrays()["lengths"]
    a = st.alpha
    if not (0 <= a < skew.d) or not (left[a] <= st.x < left[a] + lam[a]) or not (0.0 <= st.s < skew.h[a]):
        raise OutOfDomain(f"{st} is not a valid flow state")


def flow_vertical(skew: SkewProduct, st: FlowState, t: float) -> FlowState:
    """Flow along the lifted vertical field for time t (negative t runs backwards)."""
    if t == 0:
        return st
    arr = skew.arrays()
    left, w, h, b = arr["left"], arr["w"], arr["h"], arr["b"]
    base = skew.base
    a, x, s, r = st.alpha, st.x, st.s, st.rho
    near = st.near_singularity
    if t > 0:
        tt = float(t)
        while True:
            rem = h[a] - s
            if tt < rem:
                s += tt
                r += tt * (x - left[a])
                break
            r += rem * (x - left[a]) + b[a]
            tt -= rem
            near = near or base.near_breakpoint(x)
            x = kernels._wrap_into(x + w[a], float(base.total))
            a = base.interval_index(x)
            s = 0.0
    else:
        tt = -float(t)
        img_left, img_sym = arr["img_left"], arr["img_sym"]
        while True:
            if tt <= s:
                s -= tt
                r -= tt * (x - left[a])
                break
            r -= s * (x - left[a])
            tt -= s
            k = max(int(np.searchsorted(img_left, x, side="right")) - 1, 0)
            a = int(img_sym[k])
            x = x - w[a]
            near = near or base.near_breakpoint(x)
            r -= b[a]
            s = h[a]
            if tt == 0.0:
                # landed exactly on the roof of the previous rectangle: it is the floor of this one
                x = kernels._wrap_into(x + w[a], float(base.total))
                r += b[a]
                a = base.interval_index(x)
                s = 0.0
                break
    return FlowState(int(a), float(x), float(s), float(r) % 1.0, near)


@dataclass(frozen=True)
class FlowBatch:
    alpha: np.ndarray
    x: np.ndarray
    s: np.ndarray
    rho: np.ndarray
    min_breakpoint_distance: np.ndarray


def flow_vertical_batch(skew: SkewProduct, alpha, x, s, rho, t) -> FlowBatch:
    arr = skew.arrays()
    alpha = np.asarray(alpha, dtype=np.int64)
    x = np.asarray(x, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), x.shape).copy()
    out = kernels.flow_vertical_kernel(
        alpha, x, s, rho, t, arr["left"], arr["w"], arr["h"], arr["b"], arr["img_left"], arr["img_sym"]
    )
    return FlowBatch(*out)


def flow_fiber(st: FlowState, t: float) -> FlowState:
    return replace(st, rho=(st.rho + t) % 1.0)


def flow_horizontal(skew: SkewProduct, st: FlowState, t: float) -> FlowState:
    """Move to x + t inside the current rectangle; the fibre coordinate is unchanged."""
    arr = skew.arrays()
    lo = arr["left"][st.alpha]
    hi = lo + arr["lengths"][st.alpha]
    x = st.x + t
    if not (lo <= x < hi):
        raise ChartExit(f"x + t = {x} leaves [{lo}, {hi})")
    return replace(st, x=x)


def _vertical_in_chart(skew: SkewProduct, st: FlowState, t: float) -> FlowState:
    h = skew.h[st.alpha]
    s = st.s + t
    if not (0.0 <= s < h):
        raise ChartExit(f"s + t = {s} leaves [0, {h})")
    return flow_vertical(skew, st, t)


def commutator_shift(skew: SkewProduct, st: FlowState, t: float, *, clockwise: bool = False) -> float:
    """Net fibre shift after going around a t x t square in the current rectangle.

    The default loop is counter-clockwise (left, down, right, up) and encloses
    [x - t, x] x [s - t, s]; its shift is t^2 mod 1.  ``clockwise`` runs
    up, right, down, left around [x, x + t] x [s, s + t] and gives -t^2 mod 1.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if clockwise:
        legs = [("v", t), ("h", t), ("v", -t), ("h", -t)]
    else:
        legs = [("h", -t), ("v", -t), ("h", t), ("v", t)]
    cur = st
    for kind, dt in legs:
        cur = flow_horizontal(skew, cur, dt) if kind == "h" else _vertical_in_chart(skew, cur, dt)
    return (cur.rho - st.rho) % 1.0


def first_return(skew: SkewProduct, st: FlowState) -> tuple[FlowState, float]:
    """Next hit of the cross-section s = 0 and the time taken (= h_alpha)."""
    if st.s != 0.0:
        raise ValueError("first_return needs a state on the cross-section (s == 0)")
    tau = float(skew.h[st.alpha])
    return flow_vertical(skew, st, tau), tau


def first_return_iterates(skew: SkewProduct, x0, rho0, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """n successive returns for a batch of cross-section starts; arrays of shape (m, n + 1)."""
    x = np.asarray(x0, dtype=np.float64).copy()
    r = np.asarray(rho0, dtype=np.float64).copy()
    arr = skew.arrays()
    a = np.clip(np.searchsorted(arr["left"], x, side="right") - 1, 0, None)
    s = np.zeros_like(x)
    xs = np.empty((x.shape[0], n + 1))
    rs = np.empty_like(xs)
    xs[:, 0], rs[:, 0] = x, r
    md = np.full(x.shape[0], np.inf)
    for k in range(n):
        fb = flow_vertical_batch(skew, a, x, s, r, arr["h"][a])
        a, x, s, r = fb.alpha, fb.x, fb.s, fb.rho
        md = np.minimum(md, fb.min_breakpoint_distance)
        xs[:, k + 1], rs[:, k + 1] = x, r
    return xs, rs, md


def trajectory(skew: SkewProduct, st: FlowState, times: Sequence[float]) -> list[tuple[float, FlowState]]:
    """States at the given nondecreasing times, stepping from one sample to the next."""
    out = []
    cur, t_prev = st, 0.0
    for t in times:
        if t < t_prev:
            raise ValueError("sample times must be nondecreasing")
        cur = flow_vertical(skew, cur, t - t_prev)
        t_prev = t
        out.append((float(t), cur))
    return out


def write_trajectory_csv(path, skew: SkewProduct, rows: list[tuple[float, FlowState]]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["t", "alpha", "x", "s", "rho"])
        for t, st in rows:
            wr.writerow([repr(t), st.symbol(skew), repr(st.x), repr(st.s), repr(st.rho)])


def chart_linear_flow(skew: SkewProduct, st: FlowState, vertical: float, horizontal: float, fiber: float, t: float) -> FlowState:
    """Flow of vertical*X + horizontal*Y + fiber*R for time t, confined to the current rectangle."""
    arr = skew.arrays()
    a = st.alpha
    x1 = st.x + horizontal * t
    s1 = st.s + vertical * t
    lo, hi = arr["left"][a], arr["left"][a] + arr["lengths"][a]
    if not (lo <= x1 < hi and 0.0 <= s1 < skew.h[a]):
        raise ChartExit("linear segment leaves the rectangle")
    # integral of (x(u) - left) * vertical du along the straight segment
    gain = vertical * (t * (st.x - lo) + 0.5 * horizontal * t * t) + fiber * t
    return replace(st, x=x1, s=s1, rho=(st.rho + gain) % 1.0)
