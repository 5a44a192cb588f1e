"""Bott-Chern and Nakano positivity of End(E)-valued (1,1)-forms, and positivity of (r,r)-forms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grassmann import Multivector, degree_project, wedge

PSD_TOL = 1e-10


class HermiticityError(ValueError):
    pass


class NotPositiveError(ValueError):
    pass


@dataclass
class PositivityVerdict:
    positive: bool
    min_eigenvalue: float
    eigenvalues: np.ndarray  # (B, m*n)


def top_density_factor(n: int) -> complex:
    """Lebesgue density of dz_1..dz_n dzb_1..dzb_n."""
    sign = -1.0 if (n * (n - 1) // 2) % 2 else 1.0
    return sign * (-2j) ** n


def top_density(a: Multivector) -> np.ndarray:
    """Density (per basepoint) of the top-degree part of a form."""
    return a.term(a.gens.top_form).value() * top_density_factor(a.n)


def curvature_tensor(mat, gram=None) -> np.ndarray:
    """Coefficients A[point, j, k, a, b] of an operator i sum A_jk e_j e*_k, A_jk = sum A^ab dz_a dzb_b.

    ``mat`` is the matrix of forms (for example aleph*Theta).  With ``gram``
    given (shape (B, m, m), pairing eta^H G xi) the result is expressed in an
    orthonormal frame obtained from the Cholesky factor G = L L^H.
    """
    m = len(mat)
    x = mat[0][0]
    n, B = x.n, x.batch
    out = np.zeros((B, m, m, n, n), dtype=complex)
    for j in range(m):
        for k in range(m):
            for a in range(n):
                for b in range(n):
                    blade = (1 << a) | (1 << (n + b))
                    out[:, j, k, a, b] = mat[j][k].term(blade).value() / 1j
    if gram is not None:
        L = np.linalg.cholesky(gram)
        Linv_h = np.linalg.inv(np.conj(np.swapaxes(L, 1, 2)))
        Lh = np.conj(np.swapaxes(L, 1, 2))
        out = np.einsum("pjs,pstab,ptk->pjkab", Lh, out, Linv_h)
    return out


def hermitian_matrix(tensor: np.ndarray, mode: str = "bott_chern") -> np.ndarray:
    """Assemble the (B, n*m, n*m) Hermitian form indexed by (a, j)."""
    B, m, _, n, _ = tensor.shape
    if mode == "bott_chern":
        h = np.einsum("pjkab->pajbk", tensor)
    elif mode == "nakano":
        h = np.einsum("pkjab->pajbk", tensor)
    else:
        raise ValueError(f"unknown positivity mode {mode!r}")
    return h.reshape(B, n * m, n * m)


def positivity_check(mat, mode: str = "bott_chern", gram=None, tol: float = PSD_TOL):
    tensor = curvature_tensor(mat, gram)
    h = hermitian_matrix(tensor, mode)
    scale = max(1.0, float(np.abs(h).max()))
    defect = float(np.abs(h - np.conj(np.swapaxes(h, 1, 2))).max())
    if defect > 1e-10 * scale:
        raise HermiticityError(f"curvature operator is not Hermitian (defect {defect:.2e})")
    ev = np.linalg.eigvalsh(0.5 * (h + np.conj(np.swapaxes(h, 1, 2))))
    low = float(ev.min())
    return PositivityVerdict(low >= -tol, low, ev)


def psd_factor(B: np.ndarray, tol: float = PSD_TOL):
    """Vectors g_l with B = sum g_l g_l^H."""
    B = np.asarray(B, dtype=complex)
    w, V = np.linalg.eigh(0.5 * (B + B.conj().T))
    if w.min() < -tol * max(1.0, abs(w).max()):
        raise NotPositiveError(f"matrix has eigenvalue {w.min():.3e}")
    keep = w > tol * max(1.0, abs(w).max())
    return [np.sqrt(w[i]) * V[:, i] for i in np.nonzero(keep)[0]]


def _decomposable(gens, rng, s: int, batch: int) -> Multivector:
    """Random alpha_1 ^ ... ^ alpha_s with alpha_i constant (1,0)-forms."""
    n = gens.n
    out = Multivector.scalar(gens, 1.0, 0, batch)
    for _ in range(s):
        c = rng.normal(size=(n, batch)) + 1j * rng.normal(size=(n, batch))
        terms = Multivector(gens, 0, np.array([1 << a for a in range(n)], dtype=np.int64),
                            c[:, None, :])
        out = wedge(out, terms)
    return out


def positive_form_test(omega: Multivector, trials: int = 200, seed: int = 0,
                       tol: float = PSD_TOL):
    """Pair an (r,r)-form with i^(s^2) alpha ^ conj(alpha), s = n - r, alpha decomposable.

    Returns (verdict, smallest real part, largest |imag| relative to scale).
    """
    n = omega.n
    om = omega.values()
    r = _pure_bidegree(om)
    s = n - r
    rng = np.random.default_rng(seed)
    phase = 1j ** (s * s)
    worst_re, worst_im, scale = np.inf, 0.0, 0.0
    for _ in range(trials if s > 0 else 1):
        alpha = _decomposable(om.gens, rng, s, om.batch)
        test = wedge(alpha, alpha.conj()) * phase
        val = top_density(wedge(om, test))
        scale = max(scale, float(np.abs(val).max()))
        worst_re = min(worst_re, float(val.real.min()))
        worst_im = max(worst_im, float(np.abs(val.imag).max()))
    ok = worst_re >= -tol * max(1.0, scale) and worst_im <= 1e-8 * max(1.0, scale)
    return ok, worst_re, worst_im


def _pure_bidegree(om: Multivector) -> int:
    if om.nterms == 0:
        return 0
    g = om.gens
    p = np.bitwise_count(om.masks & g.holo_bits)
    q = np.bitwise_count(om.masks & g.antiholo_bits)
    if (om.masks & (g.e_bits | g.estar_bits)).any() or not (p == p[0]).all() or not (q == p).all():
        raise ValueError("positive_form_test needs a pure (r,r)-form")
    return int(p[0])


def levi_eigenvalues(form11: Multivector) -> np.ndarray:
    """Eigenvalues of the Hermitian matrix h_ab with form = i sum h_ab dz_a dzb_b."""
    n = form11.n
    h = np.zeros((form11.batch, n, n), dtype=complex)
    for a in range(n):
        for b in range(n):
            h[:, a, b] = form11.term((1 << a) | (1 << (n + b))).value() / 1j
    return np.linalg.eigvalsh(0.5 * (h + np.conj(np.swapaxes(h, 1, 2))))


def w_positivity_scan(sections, nu_grid=None, trials: int = 50, seed: int = 0):
    """Smallest grid value nu_k making -v_k + nu_k c_k(D_Q) positive where |f| <= 1.

    ``sections`` is a list of SectionField objects (one batch each).  Returns a
    list of dicts per k with the selected nu (or None) and the minimal pairing
    of W_k itself on the sampled points.
    """
    nu_grid = np.linspace(0.0, 5.0, 51) if nu_grid is None else np.asarray(nu_grid)
    report = []
    S0 = sections[0]
    kmax = min(S0.m - 1, S0.n)
    for k in range(0, kmax + 1):
        found = None
        w_min = np.inf
        for nu in nu_grid:
            ok_all = True
            for S in sections:
                inside = np.abs(S.norm2.value()) <= 1.0
                if not inside.any():
                    continue
                cqk = degree_project(S.cq, k, k)
                vk = degree_project(S.form_v(), k, k)
                cand = _restrict(cqk * nu - vk, inside)
                ok, _, _ = positive_form_test(cand, trials=trials, seed=seed)
                ok_all = ok_all and ok
            if ok_all:
                found = float(nu)
                break
        for S in sections:
            inside = np.abs(S.norm2.value()) <= 1.0
            if not inside.any():
                continue
            wk = _restrict(degree_project(S.form_w(), k, k), inside)
            _, low, _ = positive_form_test(wk, trials=trials, seed=seed)
            w_min = min(w_min, low)
        report.append({"k": k, "nu": found, "min_w_pairing": w_min})
    return report


def _restrict(a: Multivector, keep: np.ndarray) -> Multivector:
    a = a.values()
    return Multivector(a.gens, 0, a.masks, a.coeffs[:, :, keep], prune=False)
