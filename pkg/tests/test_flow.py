import math

import numpy as np
import pytest
import scipy.stats

from heisenberg_iet.bundle import build_skew_product, circ_dist
from heisenberg_iet.dynamics import skew_apply, skew_orbit
from heisenberg_iet.errors import ChartExit, OutOfDomain
from heisenberg_iet.flow import (
    FlowState,
    chart_linear_flow,
    commutator_shift,
    first_return,
    first_return_iterates,
    flow_fiber,
    flow_horizontal,
    flow_vertical,
    flow_vertical_batch,
    state_at,
    trajectory,
    write_trajectory_csv,
)
from heisenberg_iet.iet import IetMap, validate_iet


def close(a, b, tol=1e-12):
    return a.alpha == b.alpha and abs(a.x - b.x) < tol and abs(a.s - b.s) < tol and circ_dist(a.rho, b.rho) < tol


def test_vertical_identity(d3_skew):
    st = state_at(d3_skew, 0.1, 0.5, 0.2)
    assert flow_vertical(d3_skew, st, 0.0) == st


def test_vertical_to_roof(d3_skew):
    st = state_at(d3_skew, 0.1, 0.5, 0.2)
    out = flow_vertical(d3_skew, st, 2.0 - 0.5)
    assert out.s == 0.0 and out.x == pytest.approx(0.7)
    assert out.rho == pytest.approx((0.2 + 1.5 * 0.1 + 0.7) % 1.0, abs=1e-14)


def test_full_return_matches_skew(d3_skew):
    for x in (0.1, 0.45, 0.8):
        st, tau = first_return(d3_skew, state_at(d3_skew, x, 0.0, 0.3))
        ref = skew_apply(d3_skew, x, 0.3)
        assert tau == 2.0
        assert st.x == pytest.approx(ref.x, abs=1e-14) and circ_dist(st.rho, ref.rho) < 1e-14


def test_first_return_example(d3_skew):
    st, tau = first_return(d3_skew, state_at(d3_skew, 0.1))
    assert (st.x, st.rho, tau) == pytest.approx((0.7, 0.9, 2.0), abs=1e-14)


def test_return_time_is_roof():
    spec = validate_iet("ABCD", "ABCD", "DCBA", [0.1, 0.2, 0.3, 0.4])
    skew = build_skew_product(IetMap.from_spec(spec), [1.3, 2.1, 1.7, 0.9], [0, 0, 0, 0])
    for x, h in ((0.05, 1.3), (0.2, 2.1), (0.5, 1.7), (0.9, 0.9)):
        assert first_return(skew, state_at(skew, x))[1] == h


def test_first_return_requires_section(d3_skew):
    with pytest.raises(ValueError):
        first_return(d3_skew, state_at(d3_skew, 0.1, 0.5))


def test_iterated_returns(d3_skew):
    rng = np.random.default_rng(0)
    x0, r0 = rng.uniform(0, 1, 200), rng.uniform(0, 1, 200)
    xs, rs, _ = first_return_iterates(d3_skew, x0, r0, 50)
    orb = skew_orbit(d3_skew, x0, r0, 50)
    assert np.max(np.abs(xs - orb.x)) < 1e-9
    d = np.abs(rs - orb.rho) % 1.0
    assert np.max(np.minimum(d, 1 - d)) < 1e-9


def test_fiber_examples(d3_skew):
    st = state_at(d3_skew, 0.3, 1.0, 0.4)
    assert close(flow_fiber(st, 1.0), st)
    assert close(flow_fiber(flow_fiber(st, 0.25), 0.25), flow_fiber(st, 0.5))


@pytest.mark.parametrize("t1,t2", [(0.3, 0.7), (1.9, 0.05), (5.3, 0.6), (-0.7, 0.2), (11.1, 0.9)])
def test_fiber_commutes(d3_skew, t1, t2):
    st = state_at(d3_skew, 0.31, 0.4, 0.1)
    a = flow_fiber(flow_vertical(d3_skew, st, t1), t2)
    b = flow_vertical(d3_skew, flow_fiber(st, t2), t1)
    assert close(a, b)
    h = flow_fiber(flow_horizontal(d3_skew, st, 0.01), t2)
    assert close(h, flow_horizontal(d3_skew, flow_fiber(st, t2), 0.01))


@pytest.mark.parametrize("t1,t2", [(0.3, 0.4), (1.25, 3.5), (7.0, 2.2), (-1.3, 0.4), (2.0, -5.1)])
def test_group_law(d3_skew, t1, t2):
    st = state_at(d3_skew, 0.123, 0.77, 0.5)
    assert close(flow_vertical(d3_skew, st, t1 + t2), flow_vertical(d3_skew, flow_vertical(d3_skew, st, t1), t2), 1e-12)


def test_backward_inverts_forward(d3_skew):
    rng = np.random.default_rng(2)
    for _ in range(50):
        st = state_at(d3_skew, float(rng.uniform()), float(rng.uniform(0, 2)), float(rng.uniform()))
        t = float(rng.uniform(0, 20))
        assert close(flow_vertical(d3_skew, flow_vertical(d3_skew, st, t), -t), st, 1e-11)


def test_horizontal(d3_skew):
    st = state_at(d3_skew, 0.1, 1.0, 0.4)
    assert flow_horizontal(d3_skew, st, 0.0) == st
    moved = flow_horizontal(d3_skew, st, 0.2)
    assert moved.x == pytest.approx(0.3) and moved.rho == st.rho
    with pytest.raises(ChartExit):
        flow_horizontal(d3_skew, st, 0.35)


def test_commutator_examples(d3_skew):
    st = state_at(d3_skew, 0.2, 1.0, 0.0)
    assert commutator_shift(d3_skew, st, 0.1) == pytest.approx(0.01, abs=1e-12)
    assert commutator_shift(d3_skew, st, 0.0) == 0.0
    assert commutator_shift(d3_skew, st, 0.05) == pytest.approx(0.0025, abs=1e-12)
    assert commutator_shift(d3_skew, st, 0.1, clockwise=True) == pytest.approx(0.99, abs=1e-12)
    with pytest.raises(ChartExit):
        commutator_shift(d3_skew, st, 0.3)


def test_chart_linear_flow_square(d3_skew):
    st = state_at(d3_skew, 0.2, 1.0, 0.0)
    t = 0.1
    cur = st
    for v, hz in ((0, -1), (-1, 0), (0, 1), (1, 0)):
        cur = chart_linear_flow(d3_skew, cur, v, hz, 0.0, t)
    assert cur.rho == pytest.approx(t * t, abs=1e-12)
    diag = chart_linear_flow(d3_skew, st, 1.0, 1.0, 0.0, 0.1)
    assert diag.rho == pytest.approx(0.1 * 0.2 + 0.5 * 0.01, abs=1e-14)


def test_state_validation(d3_skew):
    with pytest.raises(OutOfDomain):
        state_at(d3_skew, 0.1, 2.0)


def test_batch_matches_scalar(d3_skew):
    rng = np.random.default_rng(4)
    x = rng.uniform(0, 1, 100)
    s = rng.uniform(0, 2, 100)
    r = rng.uniform(0, 1, 100)
    t = rng.uniform(-10, 10, 100)
    a = np.searchsorted([0.0, 0.4, 0.7], x, side="right") - 1
    fb = flow_vertical_batch(d3_skew, a, x, s, r, t)
    for i in range(100):
        one = flow_vertical(d3_skew, FlowState(int(a[i]), x[i], s[i], r[i]), t[i])
        assert close(one, FlowState(int(fb.alpha[i]), fb.x[i], fb.s[i], fb.rho[i]), 1e-10)


def test_measure_invariance(d3_skew):
    # uniform on the surface: area weights per rectangle, then uniform inside
    rng = np.random.default_rng(9)
    n = 1_000_000
    lam = np.array([0.4, 0.3, 0.3])
    a = rng.choice(3, n, p=lam / lam.sum())
    x = np.array([0.0, 0.4, 0.7])[a] + lam[a] * rng.uniform(size=n)
    s = 2.0 * rng.uniform(size=n)
    r = rng.uniform(size=n)
    fb = flow_vertical_batch(d3_skew, a, x, s, r, 0.37)
    ids = np.stack([fb.alpha, np.floor((fb.x - np.array([0.0, 0.4, 0.7])[fb.alpha]) / lam[fb.alpha] * 4), np.floor(fb.s * 2), np.floor(fb.rho * 4)])
    cell = np.ravel_multi_index(ids.astype(int), (3, 4, 4, 4))
    counts = np.bincount(cell, minlength=192)
    expected = n * np.repeat(lam / lam.sum() / 64, 64)
    stat = float(np.sum((counts - expected) ** 2 / expected))
    assert scipy.stats.chi2.sf(stat, 191) > 1e-4


def test_trajectory_csv(tmp_path, d3_skew):
    rows = trajectory(d3_skew, state_at(d3_skew, 0.1), [0.0, 0.5, 2.5])
    assert close(rows[-1][1], flow_vertical(d3_skew, state_at(d3_skew, 0.1), 2.5))
    write_trajectory_csv(tmp_path / "t.csv", d3_skew, rows)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,alpha,x,s,rho" and len(lines) == 4
    assert math.isclose(float(lines[-1].split(",")[2]), rows[-1][1].x)
