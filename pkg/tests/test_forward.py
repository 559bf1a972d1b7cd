import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from conftest import MODELS
from popspec import DiscretePSD, DomainError, divide_psd, lsd_density, lsd_quantiles, solve_companion, support_intervals
from popspec.forward import companion_z, companion_z_prime, u_curve

REFERENCE_SUPPORTS = {
    ("base", 0.32): [[0.2615, 1.6935], [3.2610, 10.1562], [10.2899, 38.0931]],
    ("close_top", 0.32): [[0.2617, 1.6951], [3.2916, 10.4557], [12.3253, 39.2608]],
    ("close_low", 0.32): [[0.2552, 1.6086], [1.6609, 4.7592], [9.1912, 37.6300]],
    ("three_atom", 0.1): [[0.6127, 1.2632], [2.3484, 7.4137]],
}


@pytest.mark.parametrize("key", list(REFERENCE_SUPPORTS))
def test_reference_supports(key):
    name, c = key
    got = support_intervals(MODELS[name], c).intervals
    assert got.shape == (len(REFERENCE_SUPPORTS[key]), 2)
    assert np.max(np.abs(got - np.array(REFERENCE_SUPPORTS[key]))) < 1e-3


def test_single_atom_marchenko_pastur_edges():
    c = 0.32
    sup = support_intervals(DiscretePSD([1], [1]), c)
    assert np.allclose(sup.intervals, [[(1 - c**0.5) ** 2, (1 + c**0.5) ** 2]], atol=1e-10)


def test_c_equal_one_reaches_origin():
    sup = support_intervals(DiscretePSD([1], [1]), 1.0)
    assert np.allclose(sup.intervals, [[0, 4]], atol=1e-9)


def test_small_c_splits_every_atom(base):
    assert support_intervals(base, 0.01).m == 4


def test_contour_bounds_midpoint_rule(base):
    sup = support_intervals(base, 0.32)
    x = sup.intervals
    d = sup.contour_bounds
    assert np.isclose(d[0, 0], x[0, 0] / 2)
    assert np.allclose(d[:-1, 1], (x[:-1, 1] + x[1:, 0]) / 2)
    assert np.allclose(d[1:, 0], d[:-1, 1])
    assert np.isclose(d[-1, 1], x[-1, 1] + (x[-1, 1] - x[-1, 0]) / 2)


def test_contour_lower_bound_for_c_above_one():
    sup = support_intervals(DiscretePSD([1, 4], [0.5, 0.5]), 4.0)
    assert sup.contour_bounds[0, 0] == -max(1.0, sup.intervals[0, 0])


def test_edges_are_critical_values(base):
    sup = support_intervals(base, 0.32)
    s_edges = sup.edge_s.ravel()
    s_edges = s_edges[np.isfinite(s_edges)]
    zp = companion_z_prime(s_edges, base, 0.32)
    zpp = companion_z_prime(s_edges, base, 0.32, order=2)
    assert np.max(np.abs(zp)) < 1e-8
    assert np.min(np.abs(zpp)) > 1e-6
    assert np.allclose(np.sort(companion_z(s_edges, base, 0.32)), np.sort(sup.intervals.ravel()))


def test_solve_companion_round_trip(base):
    s0 = -0.2 + 0.3j
    z0 = companion_z(s0, base, 0.32)
    assert abs(solve_companion(z0, base, 0.32) - s0) < 1e-10


@given(st.floats(-5, 45), st.floats(1e-3, 5))
def test_solve_companion_consistency(x, y):
    h, c = MODELS["base"], 0.32
    z = complex(x, y)
    s = solve_companion(z, h, c)
    assert abs(companion_z(s, h, c) - z) < 1e-9 * max(1, abs(z))
    assert s.imag >= 0
    assert abs(solve_companion(z.conjugate(), h, c) - s.conjugate()) < 1e-12 * max(1, abs(s))


def test_real_root_outside_support_has_positive_slope():
    h, c = DiscretePSD([1], [1]), 0.32
    x = (1 + c**0.5) ** 2 + 0.5
    s = solve_companion(x, h, c)
    assert s.imag == 0
    assert companion_z_prime(s.real, h, c) > 0


def test_solve_companion_inside_support_raises(base):
    with pytest.raises(DomainError):
        solve_companion(5.0, base, 0.32)


def test_density_in_gap_is_negligible(base):
    assert lsd_density(2.5, base, 0.32) < 1e-6


@pytest.mark.parametrize("name, c", [("base", 0.32), ("three_atom", 0.1), ("close_low", 0.32)])
def test_interval_masses_match_division(name, c):
    h = MODELS[name]
    sup = support_intervals(h, c)
    div = divide_psd(h, sup)
    total = 0.0
    for (lo, hi), mass in zip(sup.intervals, div.masses):
        val, _ = quad(lambda x: lsd_density(x, h, c), lo, hi, limit=400)
        total += val
        assert abs(val - mass) < 1e-2
    assert abs(total - 1) < 1e-3


def test_u_curve_separates_atoms(base):
    u = u_curve(np.mean([1.6935, 3.2610]), base, 0.32)
    assert 1 < u < 7


def test_u_curve_monotone_in_gap(base):
    xs = np.linspace(1.75, 3.2, 20)
    assert np.all(np.diff(u_curve(xs, base, 0.32)) > 0)
    big = u_curve(np.array([50.0, 100.0, 1000.0]), base, 0.32)
    assert np.all(np.diff(big) > 0) and big[-1] > 900


def test_u_curve_rejects_support_points(base):
    with pytest.raises(DomainError):
        u_curve(5.0, base, 0.32)


def test_divisions():
    cases = {
        ("base", 0.32): [[1], [7], [15, 25]],
        ("close_top", 0.32): [[1], [7], [20, 25]],
        ("close_low", 0.32): [[1], [3], [15, 25]],
        ("three_atom", 0.1): [[1], [4, 5]],
    }
    for (name, c), want in cases.items():
        div = divide_psd(MODELS[name], support_intervals(MODELS[name], c))
        assert [p.atoms.tolist() for p in div.parts] == want
    div = divide_psd(MODELS["base"], support_intervals(MODELS["base"], 0.32))
    assert [p.weights.tolist() for p in div.parts] == [[0.5], [0.25], [0.125, 0.125]]


def test_single_atom_division():
    h = DiscretePSD([2], [1])
    assert divide_psd(h, support_intervals(h, 0.5)).parts == (h,)


def test_quantiles_monotone_and_within_support(base):
    q = lsd_quantiles(base, 0.32, np.linspace(0.01, 0.99, 99))
    sup = support_intervals(base, 0.32)
    assert np.all(np.diff(q) >= 0)
    assert all(sup.contains(x) for x in q)
    # half the mass lies in the first interval
    assert lsd_quantiles(base, 0.32, [0.49])[0] < 1.6935 < lsd_quantiles(base, 0.32, [0.51])[0]


def test_support_regression_runtime():
    t0 = time.perf_counter()
    for name, c in REFERENCE_SUPPORTS:
        support_intervals(MODELS[name], c)
    assert time.perf_counter() - t0 < 1.0
