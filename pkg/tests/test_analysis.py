import math

import numpy as np
import pytest

from heisenberg_iet.analysis import (
    atom_probe,
    best_invariant_defect,
    cohomological_residual,
    cohomological_residual_sweep,
    dyadic_envelope,
    eigenfunction_defect,
    fit_decay_exponent,
    furstenberg_invariant_function_check,
    rokhlin_eigenfunction,
    spectral_density,
    square_summability_report,
)
from heisenberg_iet.dynamics import ModeObservable, correlation_series
from heisenberg_iet.errors import WindowTooLong

from conftest import GOLDEN, golden_map, golden_skew

N14 = np.arange(1 << 14)


def coboundary(T, amp=0.3):
    u0 = lambda x: amp * np.cos(2 * math.pi * x)  # noqa: E731
    return u0, lambda x: u0(_apply(T, x)) - u0(x)


def _apply(T, x):
    arr = T.arrays()
    a = np.clip(np.searchsorted(arr["left"], x, side="right") - 1, 0, T.d - 1)
    return (x + arr["w"][a]) % float(T.total)


@pytest.fixture(scope="module")
def golden_series():
    f = ModeObservable.constant_mode(1)
    return correlation_series(golden_skew(), f, f, 4096)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0, 2.0])
def test_planted_exponents(alpha):
    fit = fit_decay_exponent((1.0 + N14) ** -alpha)
    assert fit.alpha == pytest.approx(alpha, abs=0.05)


def test_decay_examples():
    assert fit_decay_exponent(1.0 / (1.0 + N14[:1000])).alpha == pytest.approx(1.0, abs=0.05)
    assert fit_decay_exponent((1.0 + N14[:1000]) ** -0.5).alpha == pytest.approx(0.5, abs=0.05)
    assert fit_decay_exponent(np.ones(1000)).alpha == pytest.approx(0.0, abs=1e-12)
    z = fit_decay_exponent(np.zeros(100))
    assert z.all_zero and z.alpha == math.inf


def test_envelope_blocks():
    n, env = dyadic_envelope(np.arange(16)[::-1].astype(float))
    assert n.tolist() == [1, 2, 4, 8] and env.tolist() == [14, 13, 11, 7]


def test_square_sum_examples():
    rep = square_summability_report(1.0 / (1.0 + np.arange(1001)))
    assert rep.last_decade_increment < 1e-2 and rep.converging
    assert rep.partial_sums[-1] == pytest.approx(np.sum(1.0 / (1.0 + np.arange(1001)) ** 2))
    div = square_summability_report(np.concatenate([[1.0], np.arange(1, 1001) ** -0.25]))
    assert not div.converging
    zero = square_summability_report(np.zeros(1001))
    assert zero.last_decade_increment == 0 and not any(zero.partial_sums)


def test_spectral_white():
    d = np.zeros(128)
    d[0] = 1.0
    est = spectral_density(d)
    np.testing.assert_allclose(est.raw, 1.0, atol=1e-14)


def test_spectral_pure_point():
    # centred in a resolution bin at every window length
    lam0 = 75 / 512
    c = np.exp(2j * math.pi * lam0 * np.arange(4096))
    masses = []
    for L in (64, 256, 1024, 4096):
        est = spectral_density(c, L)
        assert abs(est.frequencies[np.argmax(est.raw)] - lam0) <= 1.0 / est.raw.shape[0]
        masses.append(est.max_bin_mass(L // 16))
    assert all(m > 0.9 for m in masses)


def test_spectral_nonnegative_definite():
    c = 0.8 ** np.arange(500) * np.cos(0.3 * np.arange(500))
    est = spectral_density(c)
    assert est.negative_lobe < 1e-3
    assert est.total_mass == pytest.approx(1.0)
    assert est.provenance()["taper"] == "blackman"


def test_spectral_window_too_long():
    with pytest.raises(WindowTooLong):
        spectral_density(np.ones(10), 20)


def test_spectral_golden_no_atom(golden_series):
    masses = [spectral_density(golden_series, L).max_bin_mass(L // 16) for L in (256, 512, 1024, 2048, 4096)]
    assert all(b < a for a, b in zip(masses, masses[1:]))


def test_atom_probe_examples():
    lam0 = 40 / 256
    c = np.exp(2j * math.pi * lam0 * np.arange(4096))
    p = atom_probe(c)
    assert p.value == pytest.approx(1.0, abs=1e-9) and p.argmax[-1] == pytest.approx(lam0)
    dec = atom_probe(1.0 / (1.0 + np.arange(1 << 14)))
    assert dec.maxima[-1] < dec.maxima[0] and dec.value < 1e-3


def test_atom_probe_golden(golden_series):
    assert atom_probe(golden_series).value < 0.05


@pytest.mark.parametrize("K,lam", [(100, 0.1), (100, 0.7), (1000, 0.3), (10_000, 0.3)])
def test_rokhlin_bound(K, lam):
    res = rokhlin_eigenfunction(golden_skew(), lam, K)
    assert res.within_bound
    assert res.defect <= 2 / math.sqrt(K) + 1e-3
    assert res.norm == pytest.approx(1.0, rel=1e-9)


def test_rokhlin_base_map():
    assert rokhlin_eigenfunction(golden_map(), 0.3, 100).within_bound


def test_constant_eigenfunction():
    assert eigenfunction_defect(golden_map(), lambda y: np.ones_like(y, dtype=complex), 0.0) < 1e-14


def test_rotation_eigenfunction():
    # e(-x) is an eigenfunction of the golden rotation with eigenvalue e(-alpha)
    F = lambda y: np.exp(-2j * math.pi * y)  # noqa: E731
    assert eigenfunction_defect(golden_map(), F, GOLDEN) < 1e-12
    assert eigenfunction_defect(golden_map(), F, 0.1) > 0.1


def test_furstenberg_constant():
    one = lambda y: np.ones_like(y, dtype=complex)  # noqa: E731
    assert furstenberg_invariant_function_check(golden_skew(), {0: one}) < 1e-14


def test_furstenberg_coboundary():
    T = golden_map()
    u0, g = coboundary(T)
    F = {1: lambda y: np.exp(-2j * math.pi * u0(y))}
    assert furstenberg_invariant_function_check(T, F, skewing=g) < 1e-8
    best = best_invariant_defect(T, 1, 32, skewing=g, panels=512)
    assert best.defect < 1e-6


def test_furstenberg_affine_not_invariant():
    F = {1: lambda y: np.ones_like(y, dtype=complex)}
    assert furstenberg_invariant_function_check(golden_skew(), F) > 0.1


def test_cohom_zero():
    rep = cohomological_residual(golden_map(), lambda x: np.zeros_like(x), 1, 8, 4096)
    assert rep.residual == 0.0 and not np.any(rep.coefficients)


@pytest.mark.parametrize("B", [8, 16, 32, 64])
def test_cohom_coboundary(B):
    T = golden_map()
    _, g = coboundary(T)
    assert cohomological_residual(T, g, 1, B, 4096).residual < 1e-6


def test_cohom_coboundary_genus_example(d3_skew):
    T = d3_skew.base
    _, g = coboundary(T, 0.2)
    assert cohomological_residual(T, g, 1, 16, 4096).residual < 1e-6


def test_cohom_sweep_trend():
    rep = cohomological_residual_sweep(golden_skew(), None, 1, (8, 16, 32, 64), 4096)
    assert [b for b, _ in rep.trend] == [8, 16, 32, 64]
    assert all(r > 0.01 for _, r in rep.trend)
    assert rep.as_dict()["basis_size"] == 64


def test_cohom_argument_checks():
    with pytest.raises(ValueError):
        cohomological_residual(golden_map(), None, 1, 8, 4096)
    with pytest.raises(ValueError):
        cohomological_residual(golden_skew(), None, 1, 7, 4096)
    with pytest.raises(ValueError):
        cohomological_residual(golden_skew(), None, 1, 64, 100)
