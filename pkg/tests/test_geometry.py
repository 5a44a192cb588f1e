import numpy as np
import pytest
from hypothesis import given, strategies as st

from chernforms.forms import ALEPH, d, del_, delbar, lift
from chernforms.geometry import (
    MetricField,
    SingularMetricError,
    chern_component,
    chern_connection,
    chern_form,
    chern_form_berezin,
    chern_form_det,
    transgress_numeric,
)
from chernforms.grassmann import Multivector
from chernforms.identities import closedness_residuals, random_metric, random_points
from chernforms.jets import Chart

from helpers import coordinates, field


def test_trivial_metric_is_flat():
    chart = Chart(np.array([[0.3, -0.2j]]), 3)
    geom = chern_connection(MetricField.trivial(chart, 2))
    assert all(t.max_abs() == 0 for row in geom.theta for t in row)
    assert all(t.max_abs() == 0 for row in geom.curvature for t in row)
    c = chern_form(geom)
    assert c.nterms == 1 and c.term(0).value()[0] == 1


def test_line_bundle_chart_curvature_at_origin():
    chart = Chart(np.array([[0.0]]), 4)
    w = chart.z(0)
    geom = chern_connection(MetricField.from_matrix(chart, [[(1.0 + w * w.conj()).inv()]]))
    vol = geom.gens.dz(0) | geom.gens.dzb(0)
    curv = geom.curvature[0][0] * ALEPH
    assert curv.term(vol).value()[0] == pytest.approx(ALEPH)
    c1 = chern_component(chern_form(geom), 1)
    assert c1.term(vol).value()[0] == pytest.approx(ALEPH)


def test_diagonal_metric_curvature_is_blockwise():
    chart = Chart(np.array([[0.2 + 0.1j, -0.4j]]), 4)
    z1, z2 = coordinates(chart)
    g1 = 1.0 + z1 * z1.conj() + 0.5 * z2 * z2.conj()
    g2 = (1.0 + z2 * z2.conj()).power(-2.0)
    geom = chern_connection(MetricField.diagonal(chart, [g1, g2]))
    gens = geom.gens
    for j, g in enumerate((g1, g2)):
        want = delbar(del_(lift(gens, g.log())))
        assert (geom.curvature[j][j] - want).max_abs() < 1e-13
    assert geom.curvature[0][1].max_abs() < 1e-15
    assert geom.curvature[1][0].max_abs() < 1e-15


def test_non_positive_metric_is_rejected():
    chart = Chart(np.array([[0.0]]), 2)
    with pytest.raises(SingularMetricError):
        chern_connection(MetricField.from_matrix(chart, [[chart.const(-1.0)]]))


def test_sum_of_line_bundles_has_product_chern_form():
    from chernforms.projective import fs_bundle
    rng = np.random.default_rng(5)
    pts = rng.normal(size=(6, 2)) + 1j * rng.normal(size=(6, 2))
    assert fs_bundle(2, (1, 1)).chern_residual(pts) < 1e-10
    assert fs_bundle(2, (2, 3)).chern_residual(pts) < 1e-10


def test_zero_deformation_transgresses_to_zero():
    chart = Chart(np.array([[0.5, 0.5j]]), 3)
    geom = chern_connection(MetricField.trivial(chart, 2))
    assert transgress_numeric(geom, Multivector.zero(geom.gens, 3)).max_abs() == 0


def test_numeric_transgression_matches_closed_form_b():
    S = field([[1.0, 1.0]], coordinates)
    assert (transgress_numeric(S.geom, S.gamma_b) - S.form_b()).max_abs() < 1e-8


def test_numeric_transgression_line_bundle_a():
    S = field([[1.0]], coordinates)
    got = transgress_numeric(S.geom, S.gamma_a)
    dz = S.gens.dz(0)
    # a = -2 aleph del log(1/|z|) = aleph dz / z
    assert got.term(dz).value()[0] == pytest.approx(ALEPH)
    assert (got - S.form_a()).max_abs() < 1e-10


# -- properties --------------------------------------------------------------------

def random_geometry(seed, count=4, n=2, m=2, order=4):
    rng = np.random.default_rng(seed)
    chart = Chart(random_points(rng, count, n), order)
    return chern_connection(random_metric(chart, m, rng))


seeds = st.integers(min_value=0, max_value=2**31)


@given(seeds)
def test_chern_form_closed_and_bianchi(seed):
    r = closedness_residuals(random_geometry(seed))
    assert r["dc"] < 1e-9
    assert r["bianchi"] < 1e-10


@given(seeds)
def test_berezin_and_determinant_routes_agree(seed):
    geom = random_geometry(seed, m=3, order=2)
    assert (chern_form_berezin(geom) - chern_form_det(geom)).max_abs() < 1e-10


@given(seeds)
def test_metric_compatibility(seed):
    geom = random_geometry(seed, order=3)
    G = geom.metric.gram
    gens = geom.gens
    m = geom.m
    gtheta = [[sum((lift(gens, G[j][i]).truncate(2) ^ geom.theta[i][k] for i in range(1, m)),
                   lift(gens, G[j][0]).truncate(2) ^ geom.theta[0][k])
               for k in range(m)] for j in range(m)]
    for j in range(m):
        for k in range(m):
            lhs = d(lift(gens, G[j][k]))
            rhs = gtheta[j][k] + gtheta[k][j].conj()
            assert (lhs - rhs).max_abs() < 1e-12


@given(seeds)
def test_first_chern_form_is_log_det_curvature(seed):
    geom = random_geometry(seed)
    G = geom.metric.gram
    det = G[0][0] * G[1][1] - G[0][1] * G[1][0]
    want = delbar(del_(lift(geom.gens, det.log()))) * ALEPH
    got = chern_component(chern_form(geom), 1)
    assert (got - want).max_abs() < 1e-10
