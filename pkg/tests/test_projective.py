import numpy as np
import pytest
from hypothesis import given, strategies as st

from chernforms.geometry import chern_component, chern_connection, chern_form
from chernforms.grassmann import wedge
from chernforms.jets import Chart
from chernforms.projective import (
    FSBundle,
    Polynomial,
    ProjectiveScenario,
    bezout_run,
    chart_partition,
    fs_bundle,
    homogeneous,
    integrate_top_power,
    to_chart,
)
from chernforms.quadrature import UnsupportedGeometryError
from chernforms.section import ZeroSetError


def chern_and_kaehler(degrees, points):
    bundle = fs_bundle(len(degrees), degrees)
    chart = Chart(points, 3)
    geom = chern_connection(bundle.metric(chart))
    return chern_form(geom), bundle.kaehler_form(geom.gens, chart)


def test_line_bundle_first_chern_form_is_kaehler_form(rng):
    pts = rng.normal(size=(8, 1)) + 1j * rng.normal(size=(8, 1))
    c, om = chern_and_kaehler((1,), pts)
    assert (chern_component(c, 1) - om.truncate(c.order)).max_abs() < 1e-12


@pytest.mark.parametrize("degrees, product", [((1, 1), 1), ((2, 3), 6)])
def test_top_chern_form_is_degree_product(degrees, product, rng):
    pts = rng.normal(size=(8, 2)) + 1j * rng.normal(size=(8, 2))
    c, om = chern_and_kaehler(degrees, pts)
    top = wedge(om, om).truncate(c.order) * product
    assert (chern_component(c, 2) - top).max_abs() < 1e-12


def test_chern_product_formula(rng):
    pts = rng.normal(size=(8, 2)) + 1j * rng.normal(size=(8, 2))
    assert fs_bundle(2, (2, 3)).chern_residual(pts) < 1e-10


@pytest.mark.parametrize("n, tol", [(1, 1e-4), (2, 1e-3)])
def test_top_power_integrates_to_one(n, tol):
    parts = integrate_top_power(n)
    assert len(parts) == n + 1
    assert sum(parts) == pytest.approx(1.0, abs=tol)


def test_degrees_must_be_positive():
    with pytest.raises(ValueError):
        FSBundle(1, (0,))


def test_polynomial_arithmetic():
    z1, z2 = Polynomial.variable(2, 0), Polynomial.variable(2, 1)
    p = (z1 + 2 * z2) ** 2 - z1 * z1
    assert p == Polynomial(2, {(1, 1): 4, (0, 2): 4})
    assert p.degree == 2
    assert p.evaluate([1.0, 2.0]) == pytest.approx(24)


def test_homogenization_rejects_low_declared_degree():
    z = Polynomial.variable(1, 0)
    with pytest.raises(ValueError):
        (z ** 3).homogenize(2)


@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2),
                          st.complex_numbers(max_magnitude=5, allow_nan=False,
                                             allow_infinity=False)), min_size=1, max_size=5),
       st.integers(4, 6),
       st.complex_numbers(min_magnitude=0.1, max_magnitude=3, allow_nan=False,
                          allow_infinity=False))
def test_homogenization_is_homogeneous(terms, d, t):
    F = Polynomial(2, {(a, b): c for a, b, c in terms})
    H = F.homogenize(d)
    z = [0.3 + 0.1j, -0.7j, 1.1]
    assert H.evaluate([t * x for x in z]) == pytest.approx(t ** d * H.evaluate(z), rel=1e-9,
                                                          abs=1e-9)
    # restricted to z0 = 1 it is F again
    assert H.evaluate([1.0] + z[1:]) == pytest.approx(F.evaluate(z[1:]), rel=1e-12, abs=1e-12)


def test_chart_round_trip(rng):
    z = rng.normal(size=(5, 3)) + 1j * rng.normal(size=(5, 3))
    for chart in range(3):
        w = to_chart(z, chart)
        back = homogeneous(w, chart)
        ratio = back / (z / z[:, [chart]])
        assert np.allclose(ratio, 1.0)
    assert np.all(np.isnan(to_chart(np.array([[0.0, 1.0]]), 0)))


def test_chart_partition_sums_to_one(rng):
    z = rng.normal(size=(20, 3)) + 1j * rng.normal(size=(20, 3))
    total = sum(chart_partition(to_chart(z, i)) for i in range(3))
    assert np.allclose(total, 1.0)


def cubic_scenario():
    z = Polynomial.variable(1, 0)
    roots = [[1.0, np.exp(2j * np.pi * k / 3)] for k in range(3)]
    return ProjectiveScenario(1, (3,), [z ** 3 - 1], roots, "cubic")


def test_listed_zeros_are_checked():
    scn = cubic_scenario()
    scn.check_zeros()
    scn.zeros = [[1.0, 2.0]]
    with pytest.raises(ZeroSetError):
        scn.check_zeros()


def test_bezout_rejects_unsupported_shapes():
    z = Polynomial.variable(2, 0)
    scn = ProjectiveScenario(2, (1,), [z], [])
    with pytest.raises(UnsupportedGeometryError):
        bezout_run(scn)


def test_bezout_cubic_on_projective_line():
    rep = bezout_run(cubic_scenario(), level=6)
    assert rep.total == pytest.approx(3.0, rel=0.01)
    assert rep.affine == pytest.approx(3.0, rel=0.01)
    assert abs(rep.infinity) < 0.03
    assert rep.slack >= -rep.total_error
