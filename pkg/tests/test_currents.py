import math

import numpy as np
import pytest

from chernforms.currents import (
    BundleModel,
    PairingTask,
    Region,
    TestForm as Bump,
    extrapolate_mass,
    extrapolate_samples,
    green_pairing,
    integrate,
    mass_task,
    meo_pairing,
    mprecis_mass,
    plateau,
    trivial_metric,
    write_samples_csv,
)
from chernforms.jets import Chart
from chernforms.projective import integrate_top_power
from chernforms.quadrature import UnsupportedGeometryError


def model(n, section, label="t"):
    m = len(section(Chart(np.zeros((1, n)), 0)))
    return BundleModel(n, m, trivial_metric(m), section, label)


def power_section(k):
    return lambda c: [c.z(0) ** k]


def coordinates(c):
    return [c.z(a) for a in range(c.n)]


@pytest.mark.parametrize("n", [1, 2])
def test_bump_integral_matches_closed_form(n):
    chi = Bump(tuple([0.1] * n), radius=0.8)
    task = PairingTask("bump", lambda pts: (chi.value(pts),), Region(chi.center, chi.radius),
                       regularised=False, level=8)
    got = integrate(task).value.real
    assert got == pytest.approx(chi.total_integral(), rel=1e-8)


def test_projective_line_has_unit_area():
    assert sum(integrate_top_power(1)) == pytest.approx(1.0, abs=1e-6)


def test_mass_integrand_at_half_is_beta_function():
    # lam * int u^(lam-1) (1-u)^3 du with u = |z|^2
    lam = 0.5
    task = mass_task(model(1, power_section(1)), Bump((0.0,)), 1, level=8)
    want = math.gamma(lam + 1) * 6 / math.gamma(lam + 4)
    assert integrate(task, lam).value.real == pytest.approx(want, rel=1e-6)


def test_extrapolation_recovers_polynomial_limit():
    lams = [2.0 ** -k for k in range(1, 7)]
    vals = [3.0 - 2 * x + 0.5 * x ** 2 - x ** 3 for x in lams]
    est = extrapolate_samples(lams, vals, [0.0] * len(lams))
    assert est.ok and est.limit == pytest.approx(3.0, abs=1e-12)
    # the bar includes the drop to a quadratic fit, so it bounds the true error
    assert abs(est.limit - 3.0) <= est.error


def test_extrapolation_needs_three_samples():
    with pytest.raises(ValueError):
        extrapolate_samples([0.5, 0.25], [1.0, 1.0], [0.0, 0.0])


def test_lambda_schedule_must_decrease():
    with pytest.raises(ValueError):
        mass_task(model(1, power_section(1)), Bump((0.0,)), 1, lambdas=(0.25, 0.5, 0.125))


def test_simple_zero_has_unit_mass():
    est = extrapolate_mass(mass_task(model(1, power_section(1)), Bump((0.0,)), 1))
    assert est.limit == pytest.approx(1.0, rel=0.01)
    assert abs(est.limit - 1.0) <= max(est.error, 1e-3)


def test_truncated_route_below_codimension_vanishes():
    est = mprecis_mass(model(2, coordinates), Bump((0.0, 0.0)), 1, 2, level=6)
    assert abs(est.limit) <= est.error + 1e-6


def test_green_pairing_for_constant_section_vanishes():
    rep = green_pairing(model(1, lambda c: [c.const(2.0)]), Bump((0.0,)), 1, level=6)
    assert abs(rep.residual) < 1e-10


def test_green_pairing_line_bundle():
    rep = green_pairing(model(1, power_section(1)), Bump((0.0,)), 1)
    assert rep.relative < 0.02
    assert rep.terms["M_chi"] == pytest.approx(1.0, rel=0.01)


def test_meo_pairing_coordinate_line():
    # f = z1 on C^2: the zero set is the line {z1 = 0} with multiplicity one
    rep = meo_pairing(model(2, lambda c: [c.z(0)]), Bump((0.0, 0.0)), 1,
                      [("hyperplane:0", 1)], level=6)
    assert rep.relative < 0.02
    assert abs(rep.terms["gamma_chi"]) < 1e-12


def test_meo_rejects_unparameterised_component():
    with pytest.raises(UnsupportedGeometryError):
        meo_pairing(model(2, coordinates), Bump((0.0, 0.0)), 2, [("curve", 1)])


def test_region_rejects_unknown_singular_set():
    with pytest.raises(UnsupportedGeometryError):
        Region((0.0,), 1.0, "cusp").rule(4, tail=False)


def test_plateau_profile():
    d = np.array([0.0, 0.5, 0.75, 1.0, 2.0])
    v = plateau(d, 0.5, 1.0)
    assert v[0] == 1 and v[1] == 1 and v[3] == 0 and v[4] == 0
    assert 0 < v[2] < 1
    assert v[2] == pytest.approx(0.5)


def test_parallel_evaluation_is_bitwise_identical():
    m = model(2, coordinates)
    chi = Bump((0.0, 0.0))
    a = integrate(mass_task(m, chi, 2, level=4, jobs=1), 0.25)
    b = integrate(mass_task(m, chi, 2, level=4, jobs=2), 0.25)
    assert a.value == b.value and a.error == b.error


def test_samples_csv(tmp_path):
    path = tmp_path / "s.csv"
    write_samples_csv(path, [("x", 1, 0.5, 1 + 2j, 1e-3, 10)])
    lines = path.read_text().splitlines()
    assert lines[0].startswith("scenario,k,lambda")
    assert lines[1].split(",")[3] == "1.000000000000e+00"
