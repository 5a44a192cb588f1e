"""Forms built from a holomorphic section f of a Hermitian bundle, off its zero set.

Conventions: f~ = sum f_j e_j, sigma~ = sum sigma_k e*_k with
sigma = f^H G / |f|^2 the minimal-norm dual section, phi = -del log|f|^2 and
Df = D f~.  Everything is evaluated pointwise with jet coefficients.
"""

from __future__ import annotations

from functools import cached_property
from math import factorial

import numpy as np

from .forms import ALEPH, covariant_10, ddc, del_, delbar, lift
from .geometry import BundleGeometry, ConsistencyError, det_even, endo_square_tilde
from .grassmann import (
    Multivector,
    berezin_e,
    divided_power,
    exp_even,
    matrix_untilde,
    power,
    vector_e,
    vector_estar,
    wedge,
    wedge_all,
)
from .jets import Jet


class ZeroSetError(ValueError):
    """The basepoint lies on (or numerically at) the zero set of the section."""


class HolomorphyError(ValueError):
    pass


def _series(first: Multivector, ratio: Multivector, weight) -> Multivector:
    """sum_l weight(l) first ^ ratio^l, stopping when the power vanishes."""
    out = first * weight(0)
    term = first
    ell = 0
    while True:
        ell += 1
        term = wedge(term, ratio)
        if term.nterms == 0:
            return out
        out = out + term * weight(ell)


def _exp_series_weight(ell):
    return 1.0 / factorial(ell + 1)


class SectionField:
    """A holomorphic section given by its component jets in the holomorphic frame."""

    def __init__(self, geom: BundleGeometry, components, *, zero_tol=1e-300, check=True):
        if len(components) != geom.m:
            raise ValueError(f"section has {len(components)} entries, bundle rank is {geom.m}")
        self.geom = geom
        self.gens = geom.gens
        self.components = list(components)
        self.zero_tol = zero_tol
        if check:
            self.check_holomorphic()

    # -- basic data -----------------------------------------------------------
    @property
    def m(self):
        return self.geom.m

    @property
    def n(self):
        return self.geom.n

    def check_holomorphic(self, tol=1e-12):
        for j, fj in enumerate(self.components):
            if fj.order < 1:
                continue
            n = fj.n
            for v in range(n):
                defect = np.abs(fj.diff(n + v).coeffs).max()
                if defect > tol:
                    raise HolomorphyError(f"entry {j} depends on zbar (defect {defect:.2e})")

    @cached_property
    def norm2(self) -> Jet:
        G = self.geom.metric.gram
        out = None
        for j in range(self.m):
            for k in range(self.m):
                t = self.components[j].conj() * G[j][k] * self.components[k]
                out = t if out is None else out + t
        return out

    def _require_off_zero(self):
        v = np.abs(self.norm2.value())
        if np.any(v <= self.zero_tol):
            raise ZeroSetError("section vanishes at a basepoint")

    @cached_property
    def log_norm2(self) -> Jet:
        self._require_off_zero()
        return self.norm2.log()

    @cached_property
    def dual_row(self):
        """s_k = sum_j conj(f_j) G_jk."""
        G = self.geom.metric.gram
        row = []
        for k in range(self.m):
            acc = None
            for j in range(self.m):
                t = self.components[j].conj() * G[j][k]
                acc = t if acc is None else acc + t
            row.append(acc)
        return row

    @cached_property
    def sigma_row(self):
        self._require_off_zero()
        inv = self.norm2.inv()
        return [s * inv for s in self.dual_row]

    def _scalar(self, jet):
        return lift(self.gens, jet)

    @cached_property
    def f_tilde(self) -> Multivector:
        return vector_e([self._scalar(x) for x in self.components])

    @cached_property
    def sigma_tilde(self) -> Multivector:
        return vector_estar([self._scalar(x) for x in self.sigma_row])

    @cached_property
    def s_tilde(self) -> Multivector:
        return vector_estar([self._scalar(x) for x in self.dual_row])

    @cached_property
    def phi(self) -> Multivector:
        return -del_(self._scalar(self.log_norm2))

    @cached_property
    def Df(self) -> Multivector:
        return self.geom.D(self.f_tilde)

    @cached_property
    def dbar_sigma(self) -> Multivector:
        return delbar(self.sigma_tilde)

    @cached_property
    def projector_tilde(self) -> Multivector:
        """(j j*)~ = f~ ^ sigma~."""
        return wedge(self.f_tilde, self.sigma_tilde)

    def contraction(self) -> np.ndarray:
        """sigma . f at the basepoints (should be 1)."""
        acc = 0
        for s, f in zip(self.sigma_row, self.components):
            acc = acc + (s * f).value()
        return acc

    def lemma_residual(self) -> float:
        """D' sigma - phi ^ sigma."""
        lhs = covariant_10(self.geom.action, self.sigma_tilde)
        return (lhs - wedge(self.phi, self.sigma_tilde)).max_abs()

    # -- connection deformations -------------------------------------------------
    @cached_property
    def gamma_a(self) -> Multivector:
        return wedge(self.Df, self.sigma_tilde)

    @cached_property
    def gamma_b(self) -> Multivector:
        return wedge(self.Df - wedge(self.f_tilde, self.phi), self.sigma_tilde)

    @cached_property
    def dbar_gamma_b(self) -> Multivector:
        return delbar(self.gamma_b)

    def gamma_forms(self):
        return self.gamma_a, self.gamma_b, self.dbar_gamma_b

    def curvature_times_f(self) -> Multivector:
        """(Theta f)~ = sum_jk Theta_jk f_k e_j."""
        curv = self.geom.curvature
        col = []
        for j in range(self.m):
            acc = curv[j][0] * self.components[0]
            for k in range(1, self.m):
                acc = acc + curv[j][k] * self.components[k]
            col.append(acc)
        return vector_e(col)

    def deformation_a_residual(self, t: float, literal: bool = False) -> float:
        """-t D gamma_a~ + t^2 (gamma_a^gamma_a)~ against its closed form.

        The closed form carries (t^2 - t) Df^phi^sigma~; ``literal=True`` flips
        that coefficient to (t - t^2) for comparison.
        """
        lhs = self.geom.D(self.gamma_a) * (-t) + endo_square_tilde(self.gamma_a) * (t * t)
        th_f = self.curvature_times_f()
        coeff = (t - t * t) if literal else (t * t - t)
        rhs = (wedge(self.Df, self.dbar_sigma) + wedge(th_f, self.sigma_tilde)) * (-t) \
            + wedge_all(self.Df, self.phi, self.sigma_tilde) * coeff
        return (lhs - rhs).max_abs()

    # -- exponentials shared by many formulas ------------------------------------
    @cached_property
    def base_even(self) -> Multivector:
        """I~ + aleph Theta~."""
        return self.geom.identity_tilde + self.geom.curvature_tilde * ALEPH

    @cached_property
    def base_exp(self) -> Multivector:
        return exp_even(self.base_even)

    @cached_property
    def twist(self) -> Multivector:
        """-aleph Df ^ delbar sigma~."""
        return wedge(self.Df, self.dbar_sigma) * (-ALEPH)

    @cached_property
    def twisted_exp(self) -> Multivector:
        """exp(I~ + aleph Theta~ - aleph Df)."""
        return exp_even(self.base_even - self.Df * ALEPH)

    @cached_property
    def resolvent(self) -> Multivector:
        """sigma~ ^ sum_l (delbar sigma~)^l."""
        return _series(self.sigma_tilde, self.dbar_sigma, lambda ell: 1.0)

    # -- Chern forms of S and Q --------------------------------------------------
    @cached_property
    def cq(self) -> Multivector:
        return self.cq_formula()

    def cq_formula(self) -> Multivector:
        return berezin_e(wedge(self.projector_tilde, exp_even(self.base_even + self.twist)))

    def cq_via_da(self) -> Multivector:
        """det(aleph Theta_a + I) for the deformed connection D - gamma_a."""
        g = self.gamma_a
        theta_a = self.geom.curvature_tilde - self.geom.D(g) + endo_square_tilde(g)
        mat = matrix_untilde(theta_a)
        one = Multivector.scalar(self.gens, 1.0, theta_a.order, theta_a.batch)
        m = self.m
        return det_even([[mat[j][k] * ALEPH + (one if j == k else one * 0.0) for k in range(m)]
                         for j in range(m)])

    def cq_checked(self, tol=1e-9) -> Multivector:
        a = self.cq_formula()
        b = self.cq_via_da()
        gap = (a - b).max_abs()
        if gap > tol * max(1.0, a.max_abs()):
            raise ConsistencyError(f"quotient Chern form routes disagree by {gap:.3e}")
        return a

    @cached_property
    def cs(self) -> Multivector:
        """c(D_S) = 1 - aleph del delbar log|f|^2 off the zero set."""
        lg = self._scalar(self.log_norm2)
        return ddc(lg) * (-0.5) + 1.0

    # -- transgression forms -------------------------------------------------------
    def form_b(self) -> Multivector:
        first = wedge(self.gamma_b * ALEPH, self.base_exp)
        return berezin_e(_series(first, self.dbar_gamma_b * (-ALEPH), _exp_series_weight))

    def _v_sum(self, proj, inner, twist):
        m = self.m
        out = Multivector.zero(self.gens, proj.order, proj.batch)
        for ell in range(1, m):
            t = wedge_all(proj, divided_power(inner, m - 1 - ell), divided_power(twist, ell))
            out = out + berezin_e(t) * ((-1) ** ell / (2.0 * ell))
        return out

    def form_v(self) -> Multivector:
        """The l-sum with the projector f~ ^ sigma~ in front."""
        return self._v_sum(self.projector_tilde, self.base_even + self.twist, self.twist)

    def form_v_gamma_b(self) -> Multivector:
        """Same sum written with -aleph delbar gamma_b~ in place of the twist."""
        tw = self.dbar_gamma_b * (-ALEPH)
        return self._v_sum(self.projector_tilde, self.base_even + tw, tw)

    def form_a(self) -> Multivector:
        first = wedge_all(self.Df * ALEPH, self.sigma_tilde, self.base_exp)
        return berezin_e(_series(first, self.twist, _exp_series_weight))

    def form_a_resolvent(self) -> Multivector:
        return -berezin_e(wedge(self.twisted_exp, self.resolvent))

    def form_w(self) -> Multivector:
        """log(1/|f|) c(D_Q) - v."""
        return self.cq * (self.log_norm2 * -0.5) - self.form_v()

    # -- other potentials -----------------------------------------------------------
    def meo_forms(self, p: int):
        """(w, gamma) with w = log|f| (dd^c log|f|)^(p-1), gamma = -(dd^c log|f|)^p."""
        if p < 1:
            raise ValueError("codimension must be positive")
        log_abs = self._scalar(self.log_norm2 * 0.5)
        omega = ddc(log_abs)
        w = wedge(log_abs.truncate(omega.order), power(omega, p - 1))
        return w, -power(omega, p)

    # -- lambda-regularised objects ---------------------------------------------------
    def norm_power(self, lam: float) -> Jet:
        if not lam > 0:
            raise ValueError("lambda must be positive")
        return (self.log_norm2 * lam).exp()

    def lambda_objects(self, lam: float):
        """U, R, the mass integrand and |f|^(2 lam) a at a fixed lambda."""
        pw = self._scalar(self.norm_power(lam))
        U = wedge(pw, self.resolvent)
        R = wedge(delbar(pw), self.resolvent)
        return {"U": U, "R": R, "M": self.mass_integrand(lam), "A": wedge(pw, self.form_a())}

    def mass_density(self) -> Multivector:
        """aleph del|f|^2 ^ delbar|f|^2 / |f|^4 ^ c(D_Q) (lambda-free part)."""
        nrm = self._scalar(self.norm2)
        dd = wedge(del_(nrm), delbar(nrm)) * (self.norm2 * self.norm2).inv().truncate(nrm.order - 1)
        return wedge(dd * ALEPH, self.cq)

    def mass_integrand(self, lam: float) -> Multivector:
        return self.mass_density() * (self.norm_power(lam) * lam)

    def mprecis_density(self, k: int, p: int) -> Multivector:
        """Bidegree (k,k) density of the truncated sum with j from p-1 to k-1."""
        m = self.m
        nrm = self._scalar(self.norm2)
        dd = wedge(del_(nrm), delbar(nrm)) * (self.norm2 * self.norm2).inv().truncate(nrm.order - 1)
        theta = self.geom.curvature_tilde * ALEPH
        out = Multivector.zero(self.gens, self.twist.order, self.twist.batch)
        if k > m:
            return out
        for j in range(max(p - 1, 0), k):
            t = wedge_all(self.projector_tilde, divided_power(self.twist, j),
                          divided_power(theta, k - 1 - j),
                          divided_power(self.geom.identity_tilde, m - k))
            out = out + berezin_e(t)
        return wedge(dd * ALEPH, out)

    def lambda_identity_residuals(self, lam: float) -> dict:
        """Residuals of the three finite-lambda factorisations, relative to the larger side."""
        obj = self.lambda_objects(lam)
        pw = self._scalar(self.norm_power(lam))
        a = self.form_a()
        E = self.twisted_exp
        pairs = {
            "residue": (-wedge(delbar(pw), a), berezin_e(wedge(E, obj["R"]))),
            "principal": (wedge(pw, a), -berezin_e(wedge(E, obj["U"]))),
            "quotient": (wedge(pw, self.cq), berezin_e(wedge_all(E, self.f_tilde, obj["U"]))),
        }
        return {k: (lhs - rhs).max_abs() / max(1.0, lhs.max_abs())
                for k, (lhs, rhs) in pairs.items()}

