"""Jet-level identity suite on random analytic metrics and sections.

Every check returns the largest coefficient of a difference that vanishes
identically, so residuals are at round-off level when everything is right.
"""

from __future__ import annotations

import numpy as np

from .forms import ALEPH, d, ddc, del_, delbar, lift
from .geometry import MetricField, chern_connection, chern_form, transgress_numeric
from .grassmann import degree_project, wedge
from .jets import Chart
from .section import SectionField

IDENTITY_ORDER = 4


def random_points(rng, count: int, n: int, scale: float = 0.5, shift: float = 0.3):
    return rng.normal(size=(count, n)) * scale + shift + 1j * rng.normal(size=(count, n)) * scale


def random_metric(chart: Chart, m: int, rng, scale: float = 0.4) -> MetricField:
    """I + A A^H + |z_1|^4 I with A linear in z: positive definite everywhere."""
    n = chart.n
    z = [chart.z(a) for a in range(n)]
    A = [[sum((z[a] * complex(scale * (rng.normal() + 1j * rng.normal())) for a in range(1, n)),
              z[0] * complex(scale * (rng.normal() + 1j * rng.normal())))
          for _ in range(m)] for _ in range(m)]
    quartic = z[0] * z[0].conj() * z[0] * z[0].conj() * 0.2
    gram = []
    for i in range(m):
        row = []
        for j in range(m):
            g = A[i][0] * A[j][0].conj()
            for k in range(1, m):
                g = g + A[i][k] * A[j][k].conj()
            if i == j:
                g = g + quartic + 1.0
            row.append(g)
        gram.append(row)
    return MetricField.from_matrix(chart, gram)


def random_section(chart: Chart, m: int, rng, degree: int = 2) -> list:
    """m holomorphic polynomials with random coefficients, nonzero at the origin."""
    n = chart.n
    z = [chart.z(a) for a in range(n)]
    out = []
    for _ in range(m):
        acc = chart.const(complex(rng.normal() + 1j * rng.normal()))
        for a in range(n):
            acc = acc + z[a] * complex(rng.normal() + 1j * rng.normal())
            if degree >= 2:
                for b in range(a, n):
                    acc = acc + z[a] * z[b] * complex(0.5 * (rng.normal() + 1j * rng.normal()))
        out.append(acc)
    return out


def random_section_field(rng, n: int, m: int, count: int, order: int = IDENTITY_ORDER,
                         min_norm: float = 0.1):
    """Random metric and section at ``count`` points where |f| >= min_norm."""
    seed = int(rng.integers(2**32))
    for _ in range(50):
        pts = random_points(rng, 4 * count, n)
        probe = Chart(pts, 0)
        sub = np.random.default_rng(seed)
        gram = random_metric(probe, m, sub).values()
        f = np.stack([c.value() for c in random_section(probe, m, sub)], axis=1)
        norm2 = np.einsum("pi,pij,pj->p", f.conj(), gram, f).real
        keep = np.nonzero(norm2 >= min_norm ** 2)[0][:count]
        if keep.size == count:
            break
    else:
        raise RuntimeError("could not place points away from the zero set")
    chart = Chart(pts[keep], order)
    sub = np.random.default_rng(seed)
    geom = chern_connection(random_metric(chart, m, sub))
    return SectionField(geom, random_section(chart, m, sub))


def closedness_residuals(geom) -> dict:
    c = chern_form(geom)
    return {"dc": d(c).max_abs(), "bianchi": geom.bianchi_residual()}


def transgression_residuals(S: SectionField, t: float = 0.37) -> dict:
    """Identities relating b, v, a, W and the Chern forms of E, S and Q."""
    cE = chern_form(S.geom)
    cq = S.cq
    mixed = cE - wedge(S.cs, cq)
    b, v, a, W = S.form_b(), S.form_v(), S.form_a(), S.form_w()
    lg = lift(S.gens, S.log_norm2)
    return {
        "cq_routes": (S.cq_formula() - S.cq_via_da()).max_abs(),
        "cq_top_vanishes": degree_project(cq, S.m, S.m).max_abs(),
        "v_routes": (v - S.form_v_gamma_b()).max_abs(),
        "a_routes": (a - S.form_a_resolvent()).max_abs(),
        "del_v_gives_b": (del_(v) * (2 * ALEPH) - b).max_abs(),
        "d_b": (d(b) - mixed).max_abs(),
        "ddc_v": (-ddc(v) - mixed).max_abs(),
        "dbar_a": (delbar(a) - (cE - cq)).max_abs(),
        "d_a": (d(a) - (cE - cq)).max_abs(),
        "b_from_a": (b - (a - wedge(del_(lg) * ALEPH, cq))).max_abs(),
        "del_W_gives_a": (del_(W) * (-2 * ALEPH) - a).max_abs(),
        "transgression_b": (transgress_numeric(S.geom, S.gamma_b) - b).max_abs(),
        "transgression_a": (transgress_numeric(S.geom, S.gamma_a) - a).max_abs(),
        "dual_section_lemma": S.lemma_residual(),
        "deformation_a": S.deformation_a_residual(t),
    }


def literal_sign_residuals(S: SectionField, t: float = 0.37) -> dict:
    """Residuals of the sign-flipped variants; informational, these do not vanish."""
    b, v, a = S.form_b(), S.form_v(), S.form_a()
    lg = lift(S.gens, S.log_norm2)
    return {
        "del_v_gives_b[-]": (del_(v) * (-2 * ALEPH) - b).max_abs(),
        "b_from_a[+]": (b - (a + wedge(del_(lg) * ALEPH, S.cq))).max_abs(),
        "deformation_a[t-t^2]": S.deformation_a_residual(t, literal=True),
    }


def finite_lambda_residuals(S: SectionField, lams=(0.5, 1.0, 2.0)) -> dict:
    out = {}
    for lam in lams:
        for k, r in S.lambda_identity_residuals(lam).items():
            out[k] = max(out.get(k, 0.0), r)
    return out


def run_suite(seed: int, n: int = 2, ranks=(2, 3), points: int = 100, order: int = IDENTITY_ORDER,
              batch: int = 25) -> dict:
    """Worst residual per identity over ``points`` random off-zero points per rank."""
    rng = np.random.default_rng(seed)
    worst = {}
    for m in ranks:
        done = 0
        while done < points:
            count = min(batch, points - done)
            S = random_section_field(rng, n, m, count, order)
            for group in (closedness_residuals(S.geom), transgression_residuals(S),
                          finite_lambda_residuals(S)):
                for k, r in group.items():
                    worst[k] = max(worst.get(k, 0.0), float(r))
            done += count
    return worst
