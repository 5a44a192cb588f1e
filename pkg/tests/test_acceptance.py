"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

The verdict lines are printed in the terminal summary (see conftest.py).
"""

import itertools
import time

import numpy as np
import pytest

from chernforms.cli import main as cli_main
from chernforms.currents import (
    BundleModel,
    TestForm as Bump,
    extrapolate_mass,
    green_pairing,
    mass_task,
    meo_pairing,
    trivial_metric,
)
from chernforms.forms import ALEPH
from chernforms.geometry import chern_connection, chern_form
from chernforms.grassmann import (
    GeneratorSet,
    Multivector,
    berezin_e,
    degree_project,
    exp_even,
    identity_tilde,
    matrix_tilde,
)
from chernforms.identities import (
    closedness_residuals,
    literal_sign_residuals,
    random_metric,
    random_points,
    random_section_field,
    run_suite,
)
from chernforms.jets import Chart
from chernforms.positivity import positive_form_test, positivity_check
from chernforms.projective import (
    Polynomial,
    ProjectiveScenario,
    bezout_run,
    fs_bundle,
    integrate_top_power,
)

from helpers import record

SEED = 2024
JET_CHECK = 1e-9
LAMBDA_CHECK = 1e-12


def leibniz_det(A):
    m = len(A)
    total = 0.0
    for perm in itertools.permutations(range(m)):
        sign = (-1) ** sum(1 for i in range(m) for j in range(i + 1, m) if perm[i] > perm[j])
        term = complex(sign)
        for i in range(m):
            term *= A[i][perm[i]]
        total += term
    return total


def line(n, section, metric=None, label="acceptance"):
    m = len(section(Chart(np.zeros((1, n)), 0)))
    return BundleModel(n, m, metric or trivial_metric(m), section, label)


def coords(c):
    return [c.z(a) for a in range(c.n)]


MASS_CASES = {
    "z": (line(1, lambda c: [c.z(0)]), 1, 1, 1.0, 0.01),
    "z^2": (line(1, lambda c: [c.z(0) ** 2]), 1, 1, 2.0, 0.01),
    "z^3": (line(1, lambda c: [c.z(0) ** 3]), 1, 1, 3.0, 0.01),
    "(z1,z2)": (line(2, coords), 2, 2, 1.0, 0.01),
    "(z1^2,z2^2)": (line(2, lambda c: [c.z(0) ** 2, c.z(1) ** 2]), 2, 2, 4.0, 0.02),
}


@pytest.fixture(scope="module")
def mass_runs():
    """Standard and truncated estimates of M_p, plus M_k for k < p, on every mass case."""
    runs = {}
    for name, (model, k, p, want, tol) in MASS_CASES.items():
        chi = Bump((0.0,) * model.n)
        out = {"want": want, "tol": tol}
        for route in ("standard", "truncated"):
            out[route] = extrapolate_mass(mass_task(model, chi, k, route=route, p=p))
        out["lower"] = [extrapolate_mass(mass_task(model, chi, j, p=p)) for j in range(1, p)]
        runs[name] = out
    return runs


@pytest.fixture(scope="module")
def identity_suite():
    start = time.perf_counter()
    worst = run_suite(SEED, n=2, ranks=(2, 3), points=100)
    return worst, time.perf_counter() - start


def test_criterion_01_berezin_determinant():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for trial in range(100):
        m = 1 + trial % 4
        g = GeneratorSet(1, m)
        A = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
        tilde = matrix_tilde([[Multivector.scalar(g, complex(A[j][k])) for k in range(m)]
                              for j in range(m)])
        got = complex(berezin_e(exp_even(tilde + identity_tilde(g))).term(0).value()[0])
        want = leibniz_det(A + np.eye(m))
        worst = max(worst, abs(got - want) / max(1.0, abs(want)))
    ok = record(1, "Berezin determinant", worst < 1e-12,
                f"worst relative error {worst:.2e} over 100 matrices (tol 1e-12)")
    assert ok


def test_criterion_02_closedness_and_bianchi():
    rng = np.random.default_rng(SEED)
    worst = {"dc": 0.0, "bianchi": 0.0}
    for _ in range(50):
        chart = Chart(random_points(rng, 4, 2), 4)
        geom = chern_connection(random_metric(chart, 2, rng))
        for key, r in closedness_residuals(geom).items():
            worst[key] = max(worst[key], r)
    ok = record(2, "Chern form closed, Bianchi identity", max(worst.values()) < JET_CHECK,
                f"d c(D) {worst['dc']:.2e}, D Theta {worst['bianchi']:.2e} (tol 1e-9)")
    assert ok


def test_criterion_03_fubini_study_anchors():
    rng = np.random.default_rng(SEED)
    line_area = sum(integrate_top_power(1))
    plane_volume = sum(integrate_top_power(2))
    pts = rng.normal(size=(20, 2)) + 1j * rng.normal(size=(20, 2))
    product = max(fs_bundle(2, degs).chern_residual(pts) for degs in ((1, 2), (2, 3), (1, 1)))
    ok = abs(line_area - 1) < 1e-4 and abs(plane_volume - 1) < 1e-3 and product < 1e-10
    record(3, "Fubini-Study anchors", ok,
           f"P^1 area {line_area:.8f}, P^2 volume {plane_volume:.6f}, "
           f"product formula residual {product:.2e}")
    assert ok


def test_criterion_04_quotient_routes(identity_suite):
    worst, _ = identity_suite
    r = worst["cq_routes"]
    ok = record(4, "quotient Chern form routes agree", r < JET_CHECK,
                f"max componentwise gap {r:.2e} at 100 points, m = 2, 3 (tol 1e-9)")
    assert ok


def test_criterion_05_transgression_identities(identity_suite):
    worst, seconds = identity_suite
    jet_keys = ("del_v_gives_b", "d_b", "dbar_a", "d_a", "b_from_a", "del_W_gives_a",
                "deformation_a")
    lam_keys = ("residue", "principal", "quotient")
    jet = max(worst[k] for k in jet_keys)
    lam = max(worst[k] for k in lam_keys)
    rng = np.random.default_rng(SEED)
    literal = {}
    for m in (2, 3):
        for key, r in literal_sign_residuals(random_section_field(rng, 2, m, 10)).items():
            literal[f"m{m}:{key}"] = r
    shown = ", ".join(f"{k} {v:.3g}" for k, v in literal.items())
    ok = jet < JET_CHECK and lam < LAMBDA_CHECK
    record(5, "transgression identities", ok,
           f"jet-level max {jet:.2e} (tol 1e-9), finite-lambda max {lam:.2e} (tol 1e-12), "
           f"{seconds:.0f} s; sign-flipped variants for reference: {shown}")
    assert ok


def test_criterion_06_multiplicity_recovery(mass_runs):
    parts, ok = [], True
    for name, run in mass_runs.items():
        est = run["standard"]
        hit = abs(est.limit - run["want"]) <= run["tol"] * run["want"] and est.ok
        lower = all(abs(e.limit) <= e.error for e in run["lower"])
        ok = ok and hit and lower
        parts.append(f"{name} {est.limit:.5f}+-{est.error:.1e}")
        for j, e in enumerate(run["lower"], start=1):
            parts.append(f"{name} M_{j} {e.limit:.1e} (bar {e.error:.1e})")
    record(6, "multiplicity recovery", ok, "; ".join(parts))
    assert ok


def test_criterion_07_truncated_route(mass_runs):
    parts, ok = [], True
    for name, run in mass_runs.items():
        a, b = run["standard"], run["truncated"]
        gap, bar = abs(a.limit - b.limit), a.error + b.error
        ok = ok and gap <= bar
        parts.append(f"{name} gap {gap:.1e} <= {bar:.1e}")
    record(7, "truncated mass route agrees", ok, "; ".join(parts))
    assert ok


def test_criterion_08_green_pairing():
    classical = green_pairing(line(1, lambda c: [c.z(0)]), Bump((0.0,)), 1)
    plane = green_pairing(line(2, coords), Bump((0.0, 0.0)), 2)
    ok = classical.relative < 0.02 and plane.relative < 0.02
    record(8, "Green current pairing", ok,
           f"relative residual m=1 {classical.relative:.2e}, n=m=2 {plane.relative:.2e} (tol 2%)")
    assert ok


def test_criterion_09_meo_pairing():
    chi = Bump((0.0, 0.0))
    point = meo_pairing(line(2, coords), chi, 2, [("point", 1)])
    divisor = meo_pairing(line(2, lambda c: [c.z(0) * c.z(1), c.z(0) ** 2]), chi, 1,
                          [("hyperplane:0", 1)])
    ok = point.relative < 0.02 and divisor.relative < 0.02
    record(9, "log-norm potential pairing", ok,
           f"relative residual (z1,z2) {point.relative:.2e}, (z1 z2, z1^2) {divisor.relative:.2e} "
           f"(tol 2%)")
    assert ok


def test_criterion_10_positivity(mass_runs):
    rng = np.random.default_rng(SEED)
    pts = rng.normal(size=(50, 2)) + 1j * rng.normal(size=(50, 2))
    bundle = fs_bundle(2, (1, 2))
    chart = Chart(pts, 3)
    metric = bundle.metric(chart)
    geom = chern_connection(metric)
    verdict = positivity_check([[t * ALEPH for t in row] for row in geom.curvature], "bott_chern",
                               gram=metric.values())
    c = chern_form(geom)
    forms = [positive_form_test(degree_project(c, k, k).truncate(0), trials=200, seed=SEED)
             for k in (1, 2)]
    masses = [run[route] for run in mass_runs.values() for route in ("standard", "truncated")]
    low_mass = min(e.limit + e.error for e in masses)
    ok = (verdict.min_eigenvalue >= -1e-10 and all(f[0] for f in forms) and low_mass >= 0)
    record(10, "positivity", ok,
           f"FS min eigenvalue {verdict.min_eigenvalue:.3e}, c1 min pairing {forms[0][1]:.3e}, "
           f"c2 min pairing {forms[1][1]:.3e}, smallest M_p + bar {low_mass:.3f}")
    assert ok


def test_criterion_11_bezout():
    z = Polynomial.variable(1, 0)
    cubic = ProjectiveScenario(1, (3,), [z ** 3 - 1],
                               [[1.0, np.exp(2j * np.pi * k / 3)] for k in range(3)], "cubic")
    x, y = Polynomial.variable(2, 0), Polynomial.variable(2, 1)
    roots = [[1.0, s, np.exp(2j * np.pi * k / 3)] for s in (1.0, -1.0) for k in range(3)]
    plane = ProjectiveScenario(2, (2, 3), [x ** 2 - 1, y ** 3 - 1], roots, "plane")
    # the homogenised constant vanishes to order 2 at [0 : 1]
    constant = ProjectiveScenario(1, (2,), [Polynomial.constant(1, 1.0)], [[0.0, 1.0]], "constant")
    a = bezout_run(cubic, level=6)
    b = bezout_run(plane, level=6)
    c = bezout_run(constant, level=6)
    ok = (abs(a.total - 3) <= 0.03 and abs(b.affine - 6) <= 0.12 and abs(b.infinity) <= 0.12
          and abs(c.infinity - 2) <= 0.04)
    record(11, "Bezout masses", ok,
           f"P^1 cubic total {a.total:.5f}; P^2 affine {b.affine:.5f}, infinity {b.infinity:.1e}; "
           f"constant of degree 2 at infinity {c.infinity:.5f}")
    assert ok


def test_criterion_12_determinism(tmp_path):
    codes, summaries = [], []
    start = time.perf_counter()
    for run in ("first", "second"):
        out = tmp_path / run
        codes.append(cli_main(["verify-all", "--seed", str(SEED), "--out-dir", str(out)]))
        summaries.append((out / "summary.csv").read_bytes())
    minutes = (time.perf_counter() - start) / 60
    ok = summaries[0] == summaries[1]
    record(12, "verify-all is deterministic", ok,
           f"summary.csv identical: {ok}, exit codes {codes}, {minutes:.1f} min for both runs")
    assert ok
