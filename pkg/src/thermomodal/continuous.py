"""Characteristic equations of the continuous weak-coupled system.

Separating ``exp(lam t)`` in the weak system gives, for the displacement
profile ``phi``, the fourth-order equation

    phi'''' - lam (lam + 1) phi'' + lam (lam^2 + gamma^2) phi = 0,

whose characteristic roots are ``+-a, +-b`` with

    a^2 + b^2 = lam (lam + 1),      a^2 b^2 = lam (lam^2 + gamma^2).

The second unknown follows from ``gamma psi = phi'' - lam^2 phi``.  Imposing
the boundary conditions of a case on ``phi = sum c_r exp(r x)`` yields a 4x4
matrix whose determinant vanishes exactly at eigenvalues.

Exponentials are kept finite by column scaling: the column carrying
``exp(+-r pi)`` with growing modulus is divided by ``exp(|Re r| pi)``.  All
determinants returned here therefore carry the common factor
``exp(-(|Re a| + |Re b|) pi)``, recorded as ``log_scale``.
"""

from __future__ import annotations

import cmath
import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import BoundaryCase, as_bc

# sign relating the printed closed forms to the direct 4x4 determinant
CLOSED_FORM_FACTOR = {
    BoundaryCase.DD: 1.0,
    BoundaryCase.DN: -1.0,
    BoundaryCase.ND: -1.0,
    BoundaryCase.NN: 1.0,
}

NEWTON_MAXITER = 100


@dataclass(frozen=True)
class QuarticRoots:
    """Roots ``a, b`` of the characteristic quartic at ``lam``.

    ``disc`` is the discriminant ``(lam (lam+1))^2 - 4 lam (lam^2 + gamma^2)``
    of the quadratic in ``X^2``; ``sqrt_disc`` is the branch actually used.
    """

    lam: complex
    gamma: float
    a: complex
    b: complex
    disc: complex
    sqrt_disc: complex

    @property
    def l(self) -> complex:
        return self.a * (self.a**2 - self.lam**2)

    @property
    def m(self) -> complex:
        return self.b * (self.b**2 - self.lam**2)

    @property
    def l_star(self) -> complex:
        return self.a**2 - self.lam**2

    @property
    def m_star(self) -> complex:
        return self.b**2 - self.lam**2

    @property
    def log_scale(self) -> float:
        return (abs(self.a.real) + abs(self.b.real)) * math.pi

    def quartic_residual(self, x: complex) -> float:
        """``|x^4 - lam(lam+1) x^2 + lam(lam^2+gamma^2)|``."""
        lam, g = self.lam, self.gamma
        return abs(x**4 - lam * (lam + 1) * x**2 + lam * (lam**2 + g * g))


def roots_ab(lam: complex, gamma: float, branch: str = "asymptotic") -> QuarticRoots:
    """Compute the quartic roots ``a, b`` at ``lam``.

    Parameters
    ----------
    lam : complex
        Spectral parameter.
    gamma : float
        Coupling constant.
    branch : {"asymptotic", "principal"}
        How the square root of the discriminant is chosen.  ``"principal"``
        takes the principal value.  ``"asymptotic"`` (default) takes the sign
        that lies closer to ``lam (lam - 1)``, so that ``b^2 ~ lam`` and
        ``a^2 ~ lam^2`` for large ``|lam|`` regardless of direction.  ``a`` and
        ``b`` themselves are principal square roots in both modes.

    Notes
    -----
    The smaller of ``a^2, b^2`` is recovered from the product ``a^2 b^2``
    rather than by subtraction, which avoids cancellation when
    ``|lam| >> 1``.  Any other branch choice only permutes ``{+-a, +-b}``.
    """
    lam = complex(lam)
    if branch not in ("asymptotic", "principal"):
        raise ValueError(f"unknown branch {branch!r}")
    p = lam * (lam + 1)
    c = lam * (lam * lam + gamma * gamma)
    disc = p * p - 4 * c
    s = cmath.sqrt(disc)
    if branch == "asymptotic" and abs(s - lam * (lam - 1)) > abs(s + lam * (lam - 1)):
        s = -s
    plus, minus = p + s, p - s
    if abs(plus) >= abs(minus):
        a2 = plus / 2
        b2 = c / a2 if a2 != 0 else minus / 2
    else:
        b2 = minus / 2
        a2 = c / b2 if b2 != 0 else plus / 2
    return QuarticRoots(lam, float(gamma), cmath.sqrt(a2), cmath.sqrt(b2), disc, s)


# ---------------------------------------------------------------------------
# boundary matrices and determinants


def _column_exponentials(r: complex):
    """Scaled ``(exp(r pi), exp(-r pi))``, total factor ``exp(-|Re r| pi)``."""
    if r.real >= 0:
        return cmath.exp(r * math.pi - abs(r.real) * math.pi), cmath.exp(-r * math.pi), True
    return cmath.exp(r * math.pi), cmath.exp(-r * math.pi - abs(r.real) * math.pi), False


def boundary_matrix(roots: QuarticRoots, bc) -> np.ndarray:
    """Column-scaled 4x4 boundary matrix for ``phi = sum c_r exp(r x)``.

    Columns correspond to ``r = a, -a, b, -b``.  Rows impose, at ``x = 0`` and
    ``x = pi``, the displacement condition (rows 1-2) and the temperature
    condition (rows 3-4).  A Dirichlet temperature condition is written with
    ``phi'' `` (equivalent to ``psi = 0`` once ``phi = 0``) for DD and with
    ``l* = a^2 - lam^2`` for ND; Neumann temperature uses ``l = a l*``.
    """
    bc = as_bc(bc)
    a, b = roots.a, roots.b
    ea, ea_inv, a_up = _column_exponentials(a)
    eb, eb_inv, b_up = _column_exponentials(b)
    # left endpoint entries (exp(0) = 1), scaled alongside their column
    one_a = (cmath.exp(-abs(a.real) * math.pi), 1.0) if a_up else (1.0, cmath.exp(-abs(a.real) * math.pi))
    one_b = (cmath.exp(-abs(b.real) * math.pi), 1.0) if b_up else (1.0, cmath.exp(-abs(b.real) * math.pi))
    left = np.array([one_a[0], one_a[1], one_b[0], one_b[1]], dtype=complex)
    right = np.array([ea, ea_inv, eb, eb_inv], dtype=complex)

    if bc.displacement_dirichlet:
        w1 = np.array([1, 1, 1, 1], dtype=complex)
    else:
        w1 = np.array([a, -a, b, -b], dtype=complex)
    if bc is BoundaryCase.DD:
        w2 = np.array([a * a, a * a, b * b, b * b], dtype=complex)
    elif bc is BoundaryCase.ND:
        w2 = np.array([roots.l_star, roots.l_star, roots.m_star, roots.m_star], dtype=complex)
    else:
        w2 = np.array([roots.l, -roots.l, roots.m, -roots.m], dtype=complex)
    return np.vstack([w1 * left, w1 * right, w2 * left, w2 * right])


def closed_form_det(roots: QuarticRoots, bc) -> complex:
    """Printed closed-form determinant, times ``exp(-log_scale)``.

    The DN and ND forms are returned with the factor ``CLOSED_FORM_FACTOR``
    applied so that they agree with :func:`boundary_matrix` directly.
    """
    bc = as_bc(bc)
    a, b = roots.a, roots.b
    S = roots.log_scale
    pi = math.pi

    def ex(z):
        return cmath.exp(z * pi - S)

    cosh_sum = ex(a + b) + ex(-(a + b))
    cosh_diff = ex(a - b) + ex(b - a)
    const = math.exp(-S)
    if bc is BoundaryCase.DD:
        val = (a - b) ** 2 * (a + b) ** 2 * (cosh_sum - cosh_diff)
    elif bc is BoundaryCase.DN:
        l, m = roots.l, roots.m
        val = 8 * l * m * const + (l - m) ** 2 * cosh_sum - (l + m) ** 2 * cosh_diff
    elif bc is BoundaryCase.ND:
        ls, ms = roots.l_star, roots.m_star
        val = 8 * a * b * ls * ms * const + (b * ls - a * ms) ** 2 * cosh_sum - (b * ls + a * ms) ** 2 * cosh_diff
    else:
        l, m = roots.l, roots.m
        val = (a * m - b * l) ** 2 * (cosh_sum - cosh_diff)
    return CLOSED_FORM_FACTOR[bc] * val


@dataclass(frozen=True)
class BoundaryDeterminant:
    """Direct and closed-form determinants at one ``lam``, both scaled by ``exp(-log_scale)``."""

    bc: BoundaryCase
    roots: QuarticRoots
    matrix: np.ndarray
    det_direct: complex
    det_closed: complex
    log_scale: float

    @property
    def hadamard(self) -> float:
        """Product of row norms, an upper bound for ``|det_direct|``."""
        return float(np.prod(np.linalg.norm(self.matrix, axis=1)))

    @property
    def relative(self) -> float:
        h = self.hadamard
        return abs(self.det_direct) / h if h > 0 else 0.0


def char_det(lam: complex, gamma: float, bc, branch: str = "asymptotic") -> BoundaryDeterminant:
    """Evaluate the characteristic determinant of case ``bc`` at ``lam``."""
    bc = as_bc(bc)
    roots = roots_ab(lam, gamma, branch)
    M = boundary_matrix(roots, bc)
    return BoundaryDeterminant(bc, roots, M, complex(np.linalg.det(M)),
                               closed_form_det(roots, bc), roots.log_scale)


# ---------------------------------------------------------------------------
# root finding


@dataclass(frozen=True)
class RootResult:
    lam: complex
    converged: bool
    iterations: int
    residual: float
    degenerate: bool = False


def _reduced_det(lam: complex, gamma: float, bc: BoundaryCase, log_scale: float) -> complex:
    """``det / (a b)`` at a fixed scaling; even in ``a`` and ``b``, so analytic in ``lam``."""
    roots = roots_ab(lam, gamma)
    M = boundary_matrix(roots, bc)
    d = np.linalg.det(M) * math.exp(roots.log_scale - log_scale)
    return complex(d / (roots.a * roots.b))


def find_eigen_near(seed: complex, gamma: float, bc, tol: float = 1e-10,
                    maxiter: int = NEWTON_MAXITER) -> RootResult:
    """Locate a zero of the characteristic determinant near ``seed``.

    Damped Newton iteration with a central-difference derivative, step
    ``1e-6 * max(1, |lam|)``.  The iteration stops once
    ``|det| <= tol * prod(row norms)``.  A result whose quartic discriminant
    vanishes there (``a = +-b``) is flagged ``degenerate``, since the
    determinant is identically zero at such points.

    Returns
    -------
    RootResult
        ``converged`` is False when ``maxiter`` steps did not meet the
        tolerance; ``lam`` is then the best iterate.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    bc = as_bc(bc)
    lam = complex(seed)
    cur = char_det(lam, gamma, bc)
    best = (cur.relative, lam)
    it = 0
    for it in range(1, maxiter + 1):
        if cur.relative <= tol:
            break
        S = cur.log_scale
        f = _reduced_det(lam, gamma, bc, S)
        h = 1e-6 * max(1.0, abs(lam))
        df = (_reduced_det(lam + h, gamma, bc, S) - _reduced_det(lam - h, gamma, bc, S)) / (2 * h)
        if df == 0 or not np.isfinite(df):
            break
        step = f / df
        t = 1.0
        for _ in range(30):
            trial = char_det(lam - t * step, gamma, bc)
            if trial.relative < cur.relative:
                break
            t *= 0.5
        lam, cur = lam - t * step, trial
        if cur.relative < best[0]:
            best = (cur.relative, lam)
        if abs(t * step) <= 4 * np.finfo(float).eps * max(1.0, abs(lam)):
            break
    res, lam = best
    converged = res <= tol
    roots = roots_ab(lam, gamma)
    degenerate = abs(roots.a**2 - roots.b**2) <= 1e-6 * max(1.0, abs(lam) ** 2)
    return RootResult(lam, converged, it, res, degenerate)


@dataclass(frozen=True)
class AsymptoticRow:
    k: int
    lam: complex
    scaled_decay: float
    converged: bool


def branch_asymptotics_check(gamma: float, bc, k_range: Iterable[int], tol: float = 1e-10,
                             jobs: int = 1) -> list[AsymptoticRow]:
    """Hyperbolic roots seeded at ``i k`` and the products ``|Re lam| k^2``.

    Bounded, positive products across ``k`` indicate decay of order ``k^-2``
    along the wave branch.  Rows that fail to converge are kept with
    ``converged=False``.
    """
    ks = [int(k) for k in k_range]
    if not ks or min(ks) < 5 or max(ks) > 60:
        raise ValueError("k_range must lie within [5, 60]")
    bc = as_bc(bc)

    def one(k):
        r = find_eigen_near(1j * k, gamma, bc, tol)
        return AsymptoticRow(k, r.lam, abs(r.lam.real) * k * k, r.converged)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(one, ks))
    return [one(k) for k in ks]


def roots_csv(bc, gamma: float, rows: Sequence[AsymptoticRow]) -> str:
    """CSV with columns ``bc, gamma, k, re_lambda, im_lambda, converged``."""
    bc = as_bc(bc)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bc", "gamma", "k", "re_lambda", "im_lambda", "converged"])
    for r in rows:
        w.writerow([bc.value, f"{gamma:.17g}", r.k, f"{r.lam.real:.17g}", f"{r.lam.imag:.17g}",
                    str(r.converged).lower()])
    return buf.getvalue()
