import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heisenberg_iet.errors import NonPositiveLength, NotABijection, OutOfDomain, ReduciblePermutation
from heisenberg_iet.iet import (
    IetMap,
    genus,
    iet_apply,
    iet_orbit,
    is_irreducible,
    kernel_basis,
    monodromy,
    omega_matrix,
    sigma_permutation,
    translation_vector,
    validate_iet,
)

from conftest import GOLDEN, golden_map

ALPHA = "ABCDEF"


def irreducible_pairs(d):
    top = ALPHA[:d]
    for p in itertools.permutations(range(d)):
        if is_irreducible(p):
            yield top, "".join(top[p.index(k)] for k in range(d))


def test_validate_rotation():
    spec = validate_iet("AB", {"A": 1, "B": 2}, {"A": 2, "B": 1}, [0.4, 0.6])
    assert spec.top == ("A", "B") and spec.bottom == ("B", "A")


def test_validate_identity_is_reducible():
    with pytest.raises(ReduciblePermutation):
        validate_iet("AB", "AB", "AB", [0.4, 0.6])


def test_validate_three_intervals():
    spec = validate_iet("ABC", "ABC", "BCA", [0.4, 0.3, 0.3])
    assert monodromy(spec) == (3, 1, 2)


def test_validate_errors():
    with pytest.raises(NonPositiveLength):
        validate_iet("AB", "AB", "BA", [0.4, 0.0])
    with pytest.raises(NonPositiveLength):
        validate_iet("AB", "AB", "BA", [0.4])
    with pytest.raises(NotABijection):
        validate_iet("AB", "AA", "BA", [0.4, 0.6])
    with pytest.raises(NotABijection):
        validate_iet("AA", "AA", "AA", [0.4, 0.6])


def test_rational_lengths_select_exact_path():
    spec = validate_iet("AB", "AB", "BA", ["2/5", "3/5"])
    assert spec.exact and spec.lengths == (Fraction(2, 5), Fraction(3, 5))


def test_omega_examples():
    swap = validate_iet("AB", "AB", "BA", [0.4, 0.6])
    assert omega_matrix(swap).tolist() == [[0, 1], [-1, 0]]
    d3 = validate_iet("ABC", "ABC", "BCA", [0.4, 0.3, 0.3])
    assert omega_matrix(d3).tolist() == [[0, 1, 1], [-1, 0, 0], [-1, 0, 0]]
    one = validate_iet("A", "A", "A", [1.0])
    assert omega_matrix(one).tolist() == [[0]]


def test_translation_vector_examples():
    swap = validate_iet("AB", "AB", "BA", [0.4, 0.6])
    np.testing.assert_allclose(np.asarray(translation_vector(swap), float), [0.6, -0.4], atol=1e-15)
    d3 = validate_iet("ABC", "ABC", "BCA", [0.4, 0.3, 0.3])
    np.testing.assert_allclose(np.asarray(translation_vector(d3), float), [0.6, -0.4, -0.4], atol=1e-15)


def test_translation_vector_exact():
    d3 = validate_iet("ABC", "ABC", "BCA", ["2/5", "3/10", "3/10"])
    assert list(translation_vector(d3)) == [Fraction(3, 5), Fraction(-2, 5), Fraction(-2, 5)]


def test_monodromy_examples():
    assert monodromy(validate_iet("AB", "AB", "BA", [1, 1])) == (2, 1)
    assert monodromy(validate_iet("ABCD", "ABCD", "DCBA", [1, 1, 1, 1])) == (4, 3, 2, 1)


def test_sigma_examples():
    sw = sigma_permutation(validate_iet("AB", "AB", "BA", [1, 1]))
    assert sw.sigma == (1, 2, 0) and len(sw.orbits) == 1
    rev = sigma_permutation(validate_iet("ABCD", "ABCD", "DCBA", [1, 1, 1, 1]))
    assert rev.sigma == (3, 4, 0, 1, 2) and len(rev.orbits) == 1
    d3 = sigma_permutation(validate_iet("ABC", "ABC", "BCA", [1, 1, 1]))
    assert sorted(map(sorted, d3.orbits)) == [[0, 1, 3], [2]]


def test_kernel_basis_examples():
    assert kernel_basis(validate_iet("AB", "AB", "BA", [1, 1])) == []
    assert kernel_basis(validate_iet("ABCD", "ABCD", "DCBA", [1, 1, 1, 1])) == []
    (v,) = kernel_basis(validate_iet("ABC", "ABC", "BCA", [1, 1, 1]))
    assert v.tolist() == [0, 1, -1]


@pytest.mark.parametrize("d", range(1, 7))
def test_omega_antisymmetric_and_kernel(d):
    for top, bottom in irreducible_pairs(d):
        spec = validate_iet(top, top, bottom, [1] * d)
        om = omega_matrix(spec)
        assert np.array_equal(om, -om.T)
        basis = kernel_basis(spec)
        for v in basis:
            assert not np.any(om @ v)
        assert len(basis) == sigma_permutation(spec).n_singularities - 1
        assert spec.d == 2 * genus(spec) + sigma_permutation(spec).n_singularities - 1


def test_apply_rotation():
    T = IetMap.from_spec(validate_iet("AB", "AB", "BA", [0.4, 0.6]))
    assert iet_apply(T, 0.1) == pytest.approx(0.7, abs=1e-15)
    assert iet_apply(T, 0.5) == pytest.approx(0.1, abs=1e-15)
    assert iet_apply(T, 0.0) == pytest.approx(0.6, abs=1e-15)


def test_apply_out_of_domain():
    T = IetMap.from_spec(validate_iet("AB", "AB", "BA", [0.4, 0.6]))
    with pytest.raises(OutOfDomain):
        iet_apply(T, 1.0)
    with pytest.raises(OutOfDomain):
        iet_apply(T, -0.1)


def test_near_breakpoint_flag():
    T = IetMap.from_spec(validate_iet("AB", "AB", "BA", [0.4, 0.6]))
    assert T.near_breakpoint(0.4 + 1e-14)
    assert not T.near_breakpoint(0.3)


def test_orbit_single_step():
    T = IetMap.from_spec(validate_iet("ABC", "ABC", "BCA", [0.4, 0.3, 0.3]))
    o = iet_orbit(T, 0.1, 1)
    assert o.points[0] == pytest.approx(iet_apply(T, 0.1))


def test_orbit_rational_period_two():
    T = IetMap.from_spec(validate_iet("AB", "AB", "BA", ["1/2", "1/2"]))
    o = iet_orbit(T, Fraction(1, 4), 4)
    assert o.points == [Fraction(3, 4), Fraction(1, 4), Fraction(3, 4), Fraction(1, 4)]


def test_orbit_golden_reliable():
    o = iet_orbit(golden_map(), 0.2, 100_000)
    assert o.reliable
    assert np.all((o.points >= 0) & (o.points < 1))


def test_inverse():
    T = IetMap.from_spec(validate_iet("ABCD", "ABCD", "DCBA", [0.1, 0.2, 0.3, 0.4]))
    for x in np.linspace(0.01, 0.99, 37):
        assert T.inverse(T(x)) == pytest.approx(x, abs=1e-14)


def test_exact_orbit_matches_float():
    lam = ["13/47", "11/47", "9/47", "14/47"]
    exact = IetMap.from_spec(validate_iet("ABCD", "ABCD", "DCBA", lam))
    flt = IetMap.from_spec(validate_iet("ABCD", "ABCD", "DCBA", [float(Fraction(v)) for v in lam]))
    x0 = Fraction(1, 94)
    ex = iet_orbit(exact, x0, 10_000)
    fl = iet_orbit(flt, float(x0), 10_000)
    assert fl.reliable
    assert np.max(np.abs(np.array([float(v) for v in ex.points]) - fl.points)) < 1e-10


lengths = st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6)


@settings(max_examples=200, deadline=None)
@given(lengths, st.randoms(use_true_random=False))
def test_image_intervals_tile(lam, rnd):
    d = len(lam)
    pairs = list(irreducible_pairs(d))
    top, bottom = pairs[rnd.randrange(len(pairs))]
    spec = validate_iet(top, top, bottom, lam)
    T = IetMap.from_spec(spec)
    arr = T.arrays()
    lo = arr["left"] + arr["w"]
    hi = lo + arr["lengths"]
    order = np.argsort(lo)
    assert abs(lo[order][0]) < 1e-12
    np.testing.assert_allclose(lo[order][1:], hi[order][:-1], atol=1e-12)
    assert abs(hi[order][-1] - float(T.total)) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 1.0, exclude_max=True))
def test_golden_rotation_is_translation(x):
    y = golden_map()(x)
    assert (y - x - GOLDEN) % 1.0 == pytest.approx(0.0, abs=1e-12) or math.isclose((y - x - GOLDEN) % 1.0, 1.0, abs_tol=1e-12)
