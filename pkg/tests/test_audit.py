import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noncritical import fixtures
from noncritical.audit import (
    audit_noncritical,
    circle_contour,
    count_zeros,
    default_contours,
    derivative_floor,
    error_audit,
    rect_contour,
    zero_counts_noncritical,
)
from noncritical.errors import ContourError
from noncritical.noncrit_core import NonCriticalEntire, build_noncritical, monomial_poly
from noncritical.planar_sets import Disc, Region
from noncritical.targets import Exp
from oracles import roots_inside

WIN = fixtures.DEFAULT_WINDOW


# zero counting ------------------------------------------------------------------

def test_count_linear():
    assert count_zeros(lambda z: 2 * z, circle_contour(0, 1.0)) == 1


def test_count_exp_any_contour():
    for c in (circle_contour(0, 3.0), rect_contour(-2, -5, 4, 1), circle_contour(1 + 1j, 0.2)):
        assert count_zeros(np.exp, c) == 0


def test_count_multiplicity():
    assert count_zeros(lambda z: (z - 0.1) ** 3 * (z + 0.2j), circle_contour(0, 1.0)) == 4


def test_count_matches_companion_roots(rng):
    for _ in range(40):
        a = rng.normal(size=6) + 1j * rng.normal(size=6)
        R = float(rng.uniform(0.5, 2.0))
        r = np.roots(a[::-1])
        if np.min(np.abs(np.abs(r) - R)) < 1e-3:
            continue
        p = np.polynomial.Polynomial(a)
        assert count_zeros(p, circle_contour(0, R)) == roots_inside(a, 0, R)


def test_count_stable_under_refinement(rng):
    a = rng.normal(size=8) + 1j * rng.normal(size=8)
    p = np.polynomial.Polynomial(a)
    counts = {count_zeros(p, circle_contour(0, 1.3), samples_per_edge=s) for s in (4, 8, 16, 32)}
    assert len(counts) == 1


def test_count_log_route_agrees():
    P = lambda z: 0.5 * z ** 3 - 1j * z  # noqa: E731
    assert count_zeros(lambda z: np.exp(P(z)), circle_contour(0, 2.0)) == 0
    assert count_zeros(log_fprime=P, contour=circle_contour(0, 2.0)) == 0


def test_count_zero_on_contour_raises():
    with pytest.raises(ContourError):
        count_zeros(lambda z: z - 1, circle_contour(0, 1.0, n=4))


def test_count_needs_exactly_one_input():
    with pytest.raises(ContourError):
        count_zeros(contour=circle_contour(0, 1.0))


def test_default_contours_inside_window():
    cs = default_contours(WIN)
    assert len(cs) == 4
    for c in cs:
        assert np.all(np.abs(c.real) < 4) and np.all(np.abs(c.imag) < 4)


# error audits --------------------------------------------------------------------

def test_audit_identical_passes_with_margin():
    z = np.linspace(-1, 1, 50).astype(complex)
    eps = lambda w: 0.1 + 0.05 * np.abs(w)  # noqa: E731
    rep = error_audit(np.sin, np.sin, eps, z)
    assert rep.passed and rep.worst_margin == eps(z).min()


def test_audit_single_spike():
    z = np.linspace(-1, 1, 50).astype(complex)
    Fv = np.sin(z)
    Fv[17] += 2 * 0.1
    rep = error_audit(None, np.sin, 0.1, z, F_values=Fv)
    assert [v[0] for v in rep.violations] == [17]
    assert rep.max_violation_at == z[17]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=5, max_size=30), st.floats(0.01, 1.0), st.floats(0.0, 1.0))
def test_audit_monotone_in_eps(errs, e, bump):
    z = np.arange(len(errs)).astype(complex)
    Fv = np.asarray(errs, dtype=complex)
    small = error_audit(None, None, e, z, F_values=Fv, f_values=np.zeros_like(Fv))
    large = error_audit(None, None, e + bump, z, F_values=Fv, f_values=np.zeros_like(Fv))
    assert {v[0] for v in large.violations} <= {v[0] for v in small.violations}


def test_audit_json_shape():
    rep = error_audit(np.exp, np.exp, 0.1, np.array([0j, 1j]))
    d = rep.to_json()
    assert d["pass"] is True and d["sample_count"] == 2 and d["violations"] == []


# derivative floors ---------------------------------------------------------------

def test_floor_exp_with_bounded_real_part():
    K = Region((Disc(0, 1.0),), WIN, 0.02)
    # Re P = Re z ≥ -1 on the unit disc
    fl = derivative_floor(np.exp, K)
    assert fl.value >= math.exp(-1) - 1e-12
    assert fl.value == pytest.approx(math.exp(-1), abs=1e-3)


def test_floor_annulus():
    fl = derivative_floor(lambda z: 2 * z, fixtures.annulus())
    assert fl.value == pytest.approx(2.0, abs=1e-2)
    assert abs(abs(fl.location) - 1.0) < 0.02
    assert fl.converged


# non-critical audits ---------------------------------------------------------------

def test_zero_counts_noncritical_exponent():
    F = NonCriticalEntire(0j, 0j, monomial_poly([0, 2, 0, 1j]))
    assert zero_counts_noncritical(F) == [0, 0, 0, 0]


def test_audit_noncritical_exp():
    T = fixtures.segment(-2, 2)
    F = build_noncritical(Exp(), T, 0.1, max_degree=1, min_degree=1)
    z = np.linspace(-2, 2, 101).astype(complex)
    rep = audit_noncritical(F, Exp(), 0.1, z, K=T)
    assert rep.passed and rep.max_error < 1e-8
    assert rep.min_fprime == pytest.approx(math.exp(-2), rel=1e-6)


def test_zero_counts_for_a_steep_exponent():
    # Im P reaches ~1e9 on the outer contours, far beyond what sampled principal phases resolve
    F = NonCriticalEntire(0j, 0j, monomial_poly([0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 3j]),
                          window=(-4, -4, 4, 4))
    assert zero_counts_noncritical(F) == [0, 0, 0, 0]
