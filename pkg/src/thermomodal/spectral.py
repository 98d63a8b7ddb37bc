"""Spectra, branch labels and resolvent norms of generator matrices."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import InsufficientBranch, NoConvergence, SingularMatrix, SingularShift
from .model import CouplingModel, GeneratorMatrix, Kind, build_generator

# branch thresholds (configuration constants, see classify_branches)
PARABOLIC_MAX_IMAG = 0.5
PARABOLIC_MAX_REAL = -1.0
HYPERBOLIC_MIN_IMAG = 0.5

EIG_BACKWARD_RTOL = 1e-9
SINGULAR_SHIFT_RTOL = 1e-14
SVD_MAX_N = 64
POINTS_PER_DECADE = 64


def _entries(A) -> np.ndarray:
    return A.entries if isinstance(A, GeneratorMatrix) else np.asarray(A, dtype=float)


def _describe(A) -> str:
    if isinstance(A, GeneratorMatrix):
        return f"{A.model.kind.value}/{A.bc.value} n={A.n} gamma={A.gamma} ({A.provenance.value})"
    return f"matrix of shape {np.shape(A)}"


def eigenvalues(A, check: bool = True) -> np.ndarray:
    """All eigenvalues of ``A`` (LAPACK geev: balancing, Hessenberg, shifted QR).

    With ``check=True`` every eigenpair is certified by its residual
    ``||A v - lam v|| <= 1e-9 ||A||`` (unit ``v``).
    """
    M = _entries(A)
    try:
        w, V = scipy.linalg.eig(M, check_finite=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NoConvergence(f"eigensolver failed for {_describe(A)}: {exc}") from None
    if check:
        V = V / np.linalg.norm(V, axis=0)
        res = np.linalg.norm(M @ V - V * w, axis=0)
        scale = max(np.linalg.norm(M, 2), 1.0)
        worst = float(res.max()) if res.size else 0.0
        if worst > EIG_BACKWARD_RTOL * scale:
            raise NoConvergence(f"eigenpair residual {worst:.3e} exceeds tolerance for {_describe(A)}")
    order = np.lexsort((w.imag, w.real))
    return w[order]


class Branch(str, Enum):
    HYPERBOLIC = "hyperbolic"
    PARABOLIC = "parabolic"


class BranchLabel(NamedTuple):
    branch: Branch
    low_confidence: bool = False


def classify_branches(eigs, gamma: float | None = None) -> list[BranchLabel]:
    """Label eigenvalues as wave-like (hyperbolic) or heat-like (parabolic).

    Parabolic: ``|Im| <= 0.5`` and ``Re <= -1``.  Hyperbolic: ``|Im| >= 0.5``.
    Anything else is called hyperbolic with ``low_confidence=True``.
    ``gamma`` is accepted for interface symmetry and does not change the rule.
    """
    labels = []
    for lam in np.asarray(eigs, dtype=complex):
        if abs(lam.imag) <= PARABOLIC_MAX_IMAG and lam.real <= PARABOLIC_MAX_REAL:
            labels.append(BranchLabel(Branch.PARABOLIC))
        elif abs(lam.imag) >= HYPERBOLIC_MIN_IMAG:
            labels.append(BranchLabel(Branch.HYPERBOLIC))
        else:
            labels.append(BranchLabel(Branch.HYPERBOLIC, True))
    return labels


@dataclass(frozen=True)
class SpectrumReport:
    n: int
    eigenvalues: np.ndarray
    abscissa: float
    min_distance: float
    branches: list

    def hyperbolic(self) -> np.ndarray:
        return self.eigenvalues[[b.branch is Branch.HYPERBOLIC for b in self.branches]]

    def parabolic(self) -> np.ndarray:
        return self.eigenvalues[[b.branch is Branch.PARABOLIC for b in self.branches]]


def spectrum_report(A: GeneratorMatrix) -> SpectrumReport:
    w = eigenvalues(A)
    return SpectrumReport(A.n, w, float(w.real.max()), float((-w.real).min()),
                          classify_branches(w, A.gamma))


# ---------------------------------------------------------------------------
# resolvent


class ResolventEvaluator:
    """Evaluates ``||(z I - A)^{-1}||_2`` for many shifts ``z``.

    Small matrices (``3n <= 3 * SVD_MAX_N``) use a full SVD per shift.  Larger
    ones are reduced once to complex Schur form ``A = Q T Q^H``; the smallest
    singular value of ``z I - T`` then comes from Lanczos (ARPACK) on
    ``(zI-T)^{-1} (zI-T)^{-H}``, two triangular solves per product, with the
    SVD as fallback.
    """

    def __init__(self, A, method: str = "auto", tol: float = 1e-10, maxiter: int = 10):
        self.M = _entries(A)
        self.N = self.M.shape[0]
        self.norm = max(float(np.linalg.norm(self.M, 2)), np.finfo(float).tiny)
        if method == "auto":
            method = "svd" if self.N <= 3 * SVD_MAX_N else "inverse"
        if method not in ("svd", "inverse"):
            raise ValueError(f"unknown method {method!r}")
        self.method = method
        self.tol = tol
        self.maxiter = maxiter
        if method == "inverse":
            self.T, _ = scipy.linalg.schur(self.M.astype(complex), output="complex")
            # fixed generic start vector; warm starts can sit on a non-dominant eigenvector
            rng = np.random.default_rng(0)
            self._v0 = rng.standard_normal(self.N) + 1j * rng.standard_normal(self.N)
        self.fallbacks = 0

    def sigma_min(self, z: complex) -> float:
        if self.method == "svd":
            B = z * np.eye(self.N) - self.M
            return float(scipy.linalg.svdvals(B)[-1])
        return self._sigma_min_inverse(z)

    def _sigma_min_inverse(self, z: complex) -> float:
        B = z * np.eye(self.N) - self.T
        diag_min = float(np.abs(np.diag(B)).min())
        if diag_min < SINGULAR_SHIFT_RTOL * self.norm:
            return diag_min
        op = scipy.sparse.linalg.LinearOperator(
            (self.N, self.N), dtype=complex,
            matvec=lambda v: scipy.linalg.solve_triangular(
                B, scipy.linalg.solve_triangular(B, v, trans="C", check_finite=False),
                check_finite=False))
        try:
            mu = scipy.sparse.linalg.eigsh(op, k=1, which="LM", v0=self._v0, tol=self.tol,
                                           maxiter=self.maxiter * self.N,
                                           return_eigenvectors=False)[0]
            return 1.0 / math.sqrt(float(mu))
        except scipy.sparse.linalg.ArpackNoConvergence:
            self.fallbacks += 1
            return float(scipy.linalg.svdvals(B)[-1])

    def norm_at(self, z: complex) -> float:
        smin = self.sigma_min(z)
        if smin < SINGULAR_SHIFT_RTOL * self.norm:
            raise SingularShift(z, smin)
        return 1.0 / smin


def resolvent_norm(A, lam: complex, method: str = "auto") -> float:
    """``||(lam I - A)^{-1}||_2 = 1 / sigma_min(lam I - A)``."""
    return ResolventEvaluator(A, method=method).norm_at(complex(lam))


@dataclass(frozen=True)
class ResolventScan:
    alpha: float
    s: np.ndarray
    norm: np.ndarray
    scaled: np.ndarray
    supremum: float
    argsup: float
    skipped: list = field(default_factory=list)

    def rows(self):
        return zip(self.s.tolist(), self.norm.tolist(), self.scaled.tolist())


def scan_grid(s_min: float, s_max: float, num: int | None = None) -> np.ndarray:
    """Positive half of the log-spaced frequency grid."""
    if num is None:
        decades = math.log10(s_max / s_min)
        num = max(2, int(math.ceil(POINTS_PER_DECADE * decades)) + 1)
    return np.geomspace(s_min, s_max, num)


def resolvent_scan(A, s_min: float = 1.0, s_max: float = 1e3, num: int | None = None,
                   alpha: float = 0.0, jobs: int = 1, method: str = "auto") -> ResolventScan:
    """Sample ``|s|^-alpha ||R(is, A)||`` on ``+-[s_min, s_max]``.

    ``num`` is the number of log-spaced points per half-line (default: 64 per
    decade).  Every eigenvalue with ``|Im| in [s_min, s_max]`` adds its own
    ``|Im|`` and the two points half a grid step either side, so sharp peaks
    near weakly damped eigenvalues are not stepped over.  Shifts that are
    numerically in the spectrum are skipped and listed in ``skipped``.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if not (0 < s_min < s_max):
        raise ValueError("need 0 < s_min < s_max")
    if alpha > 0 and s_min < 1:
        raise ValueError("polynomial criterion needs s_min >= 1")
    if num is not None and num < 2:
        raise ValueError("num must be >= 2")
    base = scan_grid(s_min, s_max, num)
    ratio = base[1] / base[0]
    extra = []
    for lam in eigenvalues(A, check=False):
        t = abs(lam.imag)
        if s_min <= t <= s_max:
            step = t * (ratio - 1.0)
            extra.extend([t - 0.5 * step, t, t + 0.5 * step])
    pos = np.unique(np.clip(np.concatenate([base, extra]), s_min, s_max))
    s = np.concatenate([-pos[::-1], pos])

    ev = ResolventEvaluator(A, method=method)

    def one(si):
        try:
            return ev.norm_at(1j * si)
        except SingularShift:
            return None

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            vals = list(pool.map(one, s))
    else:
        vals = [one(si) for si in s]

    skipped = [float(si) for si, v in zip(s, vals) if v is None]
    keep = np.array([v is not None for v in vals])
    s = s[keep]
    norms = np.array([v for v in vals if v is not None], dtype=float)
    scaled = norms * np.abs(s) ** (-alpha) if alpha else norms.copy()
    k = int(np.argmax(scaled))
    return ResolventScan(float(alpha), s, norms, scaled, float(scaled[k]), float(s[k]), skipped)


# ---------------------------------------------------------------------------
# tables and fits


def abscissa_table(model: CouplingModel, bc, ns: Sequence[int], gamma: float | None = None,
                   provenance: str = "assembled") -> list[tuple[int, float]]:
    """``(n, min{-Re lam})`` for each ``n``: distance of the spectrum to the imaginary axis."""
    if not ns:
        raise ValueError("ns must be nonempty")
    if gamma is not None:
        model = model.with_gamma(gamma)
    rows = []
    for n in ns:
        w = eigenvalues(build_generator(model, bc, int(n), provenance))
        rows.append((int(n), float((-w.real).min())))
    return rows


def abscissa_csv(rows) -> str:
    return "n,min_distance\n" + "".join(f"{n},{d:.17g}\n" for n, d in rows)


def inverse_inf_norm(A) -> float:
    """``||A^{-1}||_inf``, the largest absolute row sum of the inverse."""
    M = _entries(A)
    try:
        inv = np.linalg.inv(M)
    except np.linalg.LinAlgError:
        raise SingularMatrix(f"{_describe(A)} is singular") from None
    if not np.all(np.isfinite(inv)) or np.linalg.cond(M) > 1e15:
        raise SingularMatrix(f"{_describe(A)} is numerically singular")
    return float(np.abs(inv).sum(axis=1).max())


def branch_slope(eigs, min_imag: float = 2.0, min_points: int = 5) -> float:
    """Least-squares slope of ``log|Re lam|`` against ``log|Im lam|``.

    Uses hyperbolic eigenvalues in the upper half plane with ``Im >= min_imag``
    (conjugates carry no extra information).
    """
    w = np.asarray(eigs, dtype=complex)
    labels = classify_branches(w)
    sel = np.array([lb.branch is Branch.HYPERBOLIC and not lb.low_confidence for lb in labels], dtype=bool)
    sel &= (w.imag >= min_imag) & (w.real != 0)
    if sel.sum() < min_points:
        raise InsufficientBranch(f"only {int(sel.sum())} hyperbolic eigenvalues with Im >= {min_imag}")
    x = np.log(w.imag[sel])
    y = np.log(np.abs(w.real[sel]))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def polynomial_order_fit(model: CouplingModel, bc, n: int, gamma: float | None = None,
                         provenance: str = "assembled") -> float:
    """Fitted decay exponent of the hyperbolic branch (about -2 for order-2 decay)."""
    if model.kind is not Kind.WEAK:
        raise ValueError("polynomial_order_fit applies to the weak model")
    if gamma is not None:
        model = model.with_gamma(gamma)
    if model.gamma <= 0:
        raise ValueError("gamma must be > 0")
    return branch_slope(eigenvalues(build_generator(model, bc, n, provenance)))
