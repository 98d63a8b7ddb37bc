"""Modal (Galerkin) generator matrices for 1-D thermoelastic systems on (0, pi).

State ordering is always ``(u-block, v-block, theta-block)`` where the u-block
holds the coordinates of ``d/dx u``, the v-block those of ``d/dt u`` and the
theta-block those of the temperature.  Every block has ``n`` entries, so a
generator is a dense ``3n x 3n`` real matrix.

Two builders exist:

* :func:`build_generator_printed` writes the block matrices down from their
  closed forms (diagonal ``D = diag(1..n)``, the odd/even Hilbert-type
  ``-(4/pi) ij/(i^2-j^2)`` matrices, ...).
* :func:`build_generator_assembled` computes Gram blocks from exact
  trigonometric integrals, orthonormalizes them with ``M = L^T L`` Cholesky
  factors and forms the generator from the factors.

The assembled path is authoritative; :func:`discrepancy_report` lists where
the closed forms disagree with it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import GramNotSPD, UndefinedEntry

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
CHOLESKY_PIVOT_RTOL = 1e-14
DEFAULT_GAMMA = 0.05


class Kind(str, Enum):
    STRONG = "strong"
    WEAK = "weak"


class BoundaryCase(str, Enum):
    """Displacement condition first, temperature second."""

    DD = "DD"
    DN = "DN"
    ND = "ND"
    NN = "NN"

    @property
    def displacement_dirichlet(self) -> bool:
        return self.value[0] == "D"

    @property
    def temperature_dirichlet(self) -> bool:
        return self.value[1] == "D"


class Provenance(str, Enum):
    PRINTED = "printed"
    ASSEMBLED = "assembled"


def as_kind(value) -> Kind:
    return value if isinstance(value, Kind) else Kind(str(value).lower())


def as_bc(value) -> BoundaryCase:
    return value if isinstance(value, BoundaryCase) else BoundaryCase(str(value).upper())


@dataclass(frozen=True)
class CouplingModel:
    """Coupling kind and dimensionless coupling strength.

    ``gamma == 0`` is accepted as the decoupled reference system used by
    oracles; user-facing entry points (scenarios, CLI) require ``gamma > 0``.
    """

    kind: Kind
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        object.__setattr__(self, "kind", as_kind(self.kind))
        g = float(self.gamma)
        if not math.isfinite(g) or g < 0:
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma!r}")
        object.__setattr__(self, "gamma", g)

    def with_gamma(self, gamma: float) -> "CouplingModel":
        return CouplingModel(self.kind, gamma)


# ---------------------------------------------------------------------------
# basis functions


@dataclass(frozen=True)
class TrigTerm:
    """``amplitude * func(freq * x)`` with ``func`` in {sin, cos}."""

    func: str
    amplitude: float
    freq: int

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        f = np.sin if self.func == "sin" else np.cos
        return self.amplitude * f(self.freq * x)

    def derivative(self) -> "TrigTerm":
        if self.func == "sin":
            return TrigTerm("cos", self.amplitude * self.freq, self.freq)
        return TrigTerm("sin", -self.amplitude * self.freq, self.freq)


@dataclass(frozen=True)
class ModalBasis:
    """The three function families phi_j, psi_j, xi_j, j = 1..n."""

    n: int
    phi: tuple[TrigTerm, ...]
    psi: tuple[TrigTerm, ...]
    xi: tuple[TrigTerm, ...]

    def family(self, name: str) -> tuple[TrigTerm, ...]:
        return {"phi": self.phi, "psi": self.psi, "xi": self.xi}[name]

    def evaluate(self, name: str, x, derivative: bool = False) -> np.ndarray:
        """Matrix of shape ``(n, len(x))`` with the family (or its derivative) on ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        terms = self.family(name)
        if derivative:
            terms = tuple(t.derivative() for t in terms)
        return np.array([t(x) for t in terms])


# (phi func, phi has 1/j factor, psi func, xi func) per (kind, bc)
_BASIS_TABLE = {
    (Kind.STRONG, BoundaryCase.DD): ("sin", True, "sin", "sin"),
    (Kind.STRONG, BoundaryCase.DN): ("sin", True, "sin", "cos"),
    (Kind.STRONG, BoundaryCase.ND): ("cos", True, "sin", "sin"),
    (Kind.STRONG, BoundaryCase.NN): ("cos", True, "sin", "cos"),
    (Kind.WEAK, BoundaryCase.DD): ("sin", False, "sin", "sin"),
    (Kind.WEAK, BoundaryCase.DN): ("sin", True, "sin", "cos"),
    (Kind.WEAK, BoundaryCase.ND): ("cos", True, "sin", "sin"),
    (Kind.WEAK, BoundaryCase.NN): ("cos", True, "sin", "cos"),
}


def build_basis(model: CouplingModel, bc, n: int) -> ModalBasis:
    """Basis of eigenfunctions of the decoupled system for ``(model.kind, bc)``."""
    bc = as_bc(bc)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    phi_f, scaled, psi_f, xi_f = _BASIS_TABLE[(model.kind, bc)]
    c = SQRT_2_OVER_PI
    js = range(1, n + 1)
    phi = tuple(TrigTerm(phi_f, c / j if scaled else c, j) for j in js)
    psi = tuple(TrigTerm(psi_f, c, j) for j in js)
    xi = tuple(TrigTerm(xi_f, c, j) for j in js)
    return ModalBasis(n, phi, psi, xi)


# ---------------------------------------------------------------------------
# exact trigonometric integrals over (0, pi)


def _sin_cos_integral(i: int, j: int) -> float:
    # int_0^pi sin(i x) cos(j x) dx for integers i, j >= 0
    if i == j or (i + j) % 2 == 0:
        return 0.0
    return 2.0 * i / (i * i - j * j)


def _raw_integral(f1: str, i: int, f2: str, j: int) -> float:
    if f1 == "sin" and f2 == "sin":
        return math.pi / 2 if (i == j and i != 0) else 0.0
    if f1 == "cos" and f2 == "cos":
        if i == j:
            return math.pi if i == 0 else math.pi / 2
        return 0.0
    if f1 == "sin":
        return _sin_cos_integral(i, j)
    return _sin_cos_integral(j, i)


def trig_inner(t1: TrigTerm, t2: TrigTerm) -> float:
    """Exact L2(0, pi) inner product of two trigonometric terms."""
    return t1.amplitude * t2.amplitude * _raw_integral(t1.func, t1.freq, t2.func, t2.freq)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def trig_inner_quad(t1: TrigTerm, t2: TrigTerm) -> float:
    """Composite Gauss-Legendre version of :func:`trig_inner` (cross-check only).

    One 64-point panel per wavelength of the product's highest frequency.
    """
    panels = max(1, math.ceil((t1.freq + t2.freq) / 2))
    edges = np.linspace(0.0, math.pi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return float(np.sum(w * t1(x) * t2(x)))


def _gram(a: Sequence[TrigTerm], b: Sequence[TrigTerm], quadrature: bool) -> np.ndarray:
    inner = trig_inner_quad if quadrature else trig_inner
    return np.array([[inner(ti, tj) for tj in b] for ti in a])


def _d(terms: Iterable[TrigTerm]) -> tuple[TrigTerm, ...]:
    return tuple(t.derivative() for t in terms)


@dataclass(frozen=True)
class GramBlocks:
    M1: np.ndarray
    M2: np.ndarray
    M3: np.ndarray
    Dt: np.ndarray
    Ft: np.ndarray
    G: np.ndarray
    L1: np.ndarray
    L2: np.ndarray
    L3: np.ndarray


def upper_cholesky_lower(M: np.ndarray) -> np.ndarray:
    """Lower-triangular ``L`` with ``M = L^T L``.

    Obtained from the ordinary factorization of the index-reversed matrix.
    Raises :class:`GramNotSPD` if ``M`` is not symmetric positive definite or a
    pivot falls below ``1e-14 * max(diag(M))``.
    """
    M = np.asarray(M, dtype=float)
    if not np.allclose(M, M.T, rtol=1e-12, atol=1e-14 * max(1.0, np.abs(M).max())):
        raise GramNotSPD("Gram block is not symmetric")
    flip = M[::-1, ::-1]
    try:
        C = np.linalg.cholesky(flip)
    except np.linalg.LinAlgError as exc:
        raise GramNotSPD(f"Cholesky failed: {exc}") from None
    pivots = np.diag(C) ** 2
    if pivots.min() < CHOLESKY_PIVOT_RTOL * np.diag(M).max():
        raise GramNotSPD(f"Cholesky pivot {pivots.min():.3e} below threshold")
    return C.T[::-1, ::-1].copy()


def assemble_gram(basis: ModalBasis, model: CouplingModel, bc=None, quadrature: bool = False) -> GramBlocks:
    """Gram blocks of the Galerkin system and their ``L^T L`` factors.

    The coupling block uses ``(d/dx xi_i, psi_j)`` for the strong model and
    ``(xi_i, psi_j)`` for the weak one.  ``bc`` is accepted for symmetry with
    the other builders; the basis already encodes it.
    """
    dphi, dpsi, dxi = _d(basis.phi), _d(basis.psi), _d(basis.xi)
    M1 = _gram(dphi, dphi, quadrature)
    M2 = _gram(basis.psi, basis.psi, quadrature)
    M3 = _gram(basis.xi, basis.xi, quadrature)
    Dt = _gram(dphi, dpsi, quadrature)
    if model.kind is Kind.STRONG:
        Ft = _gram(dxi, basis.psi, quadrature)
    else:
        Ft = _gram(basis.xi, basis.psi, quadrature)
    G = _gram(dxi, dxi, quadrature)
    L1, L2, L3 = (upper_cholesky_lower(M) for M in (M1, M2, M3))
    return GramBlocks(M1, M2, M3, Dt, Ft, G, L1, L2, L3)


# ---------------------------------------------------------------------------
# generator matrices


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    model: CouplingModel
    bc: BoundaryCase
    n: int
    entries: np.ndarray
    provenance: Provenance

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.shape != (3 * self.n, 3 * self.n):
            raise ValueError(f"expected shape {(3 * self.n,) * 2}, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("generator has non-finite entries")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def gamma(self) -> float:
        return self.model.gamma

    def block(self, row: int, col: int) -> np.ndarray:
        n = self.n
        return self.entries[row * n:(row + 1) * n, col * n:(col + 1) * n]

    def to_csv(self) -> str:
        rows = (",".join(f"{v:.17g}" for v in row) for row in self.entries)
        return "\n".join(rows) + "\n"

    def to_json(self) -> str:
        return json.dumps({
            "kind": self.model.kind.value,
            "bc": self.bc.value,
            "n": self.n,
            "gamma": self.model.gamma,
            "provenance": self.provenance.value,
            "entries": self.entries.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "GeneratorMatrix":
        d = json.loads(text)
        return cls(CouplingModel(d["kind"], d["gamma"]), as_bc(d["bc"]), int(d["n"]),
                   np.array(d["entries"], dtype=float), Provenance(d["provenance"]))


def _assemble_blocks(n, P12, P21, P23, P32, P33) -> np.ndarray:
    Z = np.zeros((n, n))
    return np.block([[Z, P12, Z], [P21, Z, P23], [Z, P32, P33]])


def build_generator_assembled(model: CouplingModel, bc, n: int, quadrature: bool = False) -> GeneratorMatrix:
    """Orthonormalized Galerkin generator from Gram blocks and Cholesky factors."""
    bc = as_bc(bc)
    basis = build_basis(model, bc, n)
    g = assemble_gram(basis, model, bc, quadrature=quadrature)
    L1i, L2i, L3i = (np.linalg.inv(L) for L in (g.L1, g.L2, g.L3))
    gam = model.gamma
    P12 = L1i.T @ g.Dt.T @ L2i
    P21 = -L2i.T @ g.Dt @ L1i
    P23 = -gam * (L2i.T @ g.Ft @ L3i)
    P32 = gam * (L3i.T @ g.Ft.T @ L2i)
    P33 = -(L3i.T @ g.G @ L3i)
    return GeneratorMatrix(model, bc, n, _assemble_blocks(n, P12, P21, P23, P32, P33), Provenance.ASSEMBLED)


# ---- printed closed forms ----------------------------------------------------


def _hilbert_parity(n: int, parity: str, numerator: str = "ij") -> tuple[np.ndarray, list]:
    """``-(4/pi) ij / (i^2 - j^2)`` (or the ``i / (j^2 - i^2)`` variant) on entries
    whose ``|i-j|`` has the given parity.

    Returns the matrix (NaN where the formula divides by zero) and the list of
    undefined 1-based index pairs.
    """
    out = np.zeros((n, n))
    undefined = []
    want = 1 if parity == "odd" else 0
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if abs(i - j) % 2 != want:
                continue
            if numerator == "ij":
                num, den = i * j, i * i - j * j
            else:  # weak/NN display: -(4/pi) i / (j^2 - i^2)
                num, den = i, j * j - i * i
            if den == 0:
                out[i - 1, j - 1] = np.nan
                undefined.append((i, j))
            else:
                out[i - 1, j - 1] = -4.0 / math.pi * num / den
    return out, undefined


def printed_blocks(model: CouplingModel, bc, n: int) -> dict:
    """Positional blocks ``P12, P21, P23, P32, P33`` as printed for ``(kind, bc)``.

    Returns ``{"blocks": {...}, "roles": {...}, "undefined": {role: [(i, j), ...]}}``.
    Undefined entries are NaN in the returned arrays; ``roles`` maps the printed
    symbol (D, F, G) to the positional blocks it fills.
    """
    bc = as_bc(bc)
    gam = model.gamma
    k = np.arange(1, n + 1, dtype=float)
    Dg = np.diag(k)
    I = np.eye(n)
    undefined: dict[str, list] = {}
    key = (model.kind, bc)

    if bc in (BoundaryCase.DD, BoundaryCase.DN):
        Dw = Dg
        P12, P21 = Dw, -Dw
    else:
        Dw, und = _hilbert_parity(n, "even")
        if und:
            undefined["D"] = und
        P12, P21 = Dw.T, -Dw

    if key == (Kind.STRONG, BoundaryCase.DD) or key == (Kind.STRONG, BoundaryCase.ND):
        F, _ = _hilbert_parity(n, "odd")
        P23, P32 = -gam * F, gam * F.T
    elif bc is BoundaryCase.DN:
        P23, P32 = gam * Dg, -gam * Dg
    elif key == (Kind.WEAK, BoundaryCase.DD):
        P23, P32 = -gam * I, gam * I
    elif key == (Kind.STRONG, BoundaryCase.NN) or key == (Kind.WEAK, BoundaryCase.ND):
        P23, P32 = -gam * Dg, gam * Dg.T
    else:  # weak NN
        F, und = _hilbert_parity(n, "even", numerator="i")
        if und:
            undefined["F"] = und
        P23, P32 = -gam * F, gam * F.T

    if bc in (BoundaryCase.DD, BoundaryCase.DN) or key == (Kind.WEAK, BoundaryCase.ND):
        P33 = -np.diag(k ** 2)
    elif key == (Kind.STRONG, BoundaryCase.NN):
        P33 = -(2.0 / math.pi) * np.diag(k)
    else:  # strong ND, weak NN
        P33 = -(2.0 / math.pi) * np.diag(k ** 2)

    blocks = {"P12": P12, "P21": P21, "P23": P23, "P32": P32, "P33": P33}
    roles = {"D": ("P12", "P21"), "F": ("P23", "P32"), "G": ("P33",)}
    return {"blocks": blocks, "roles": roles, "undefined": undefined}


def build_generator_printed(model: CouplingModel, bc, n: int) -> GeneratorMatrix:
    """Generator written from the closed-form block displays.

    Raises :class:`UndefinedEntry` where a printed formula divides by zero at
    an index pair its stated condition includes.
    """
    bc = as_bc(bc)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    pb = printed_blocks(model, bc, n)
    for role, pairs in pb["undefined"].items():
        i, j = pairs[0]
        raise UndefinedEntry(role, i, j, f"{model.kind.value}/{bc.value} block {role}: "
                                         f"formula undefined at (i, j) = ({i}, {j}) and {len(pairs) - 1} more")
    b = pb["blocks"]
    A = _assemble_blocks(n, b["P12"], b["P21"], b["P23"], b["P32"], b["P33"])
    return GeneratorMatrix(model, bc, n, A, Provenance.PRINTED)


def build_generator(model: CouplingModel, bc, n: int, provenance="assembled") -> GeneratorMatrix:
    if Provenance(provenance) is Provenance.PRINTED:
        return build_generator_printed(model, bc, n)
    return build_generator_assembled(model, bc, n)


@dataclass(frozen=True)
class Discrepancy:
    kind: str
    bc: str
    n: int
    block: str
    status: str  # "mismatch" or "undefined"
    max_abs_diff: float
    undefined_pairs: tuple = ()

    def as_dict(self) -> dict:
        return {"kind": self.kind, "bc": self.bc, "n": self.n, "block": self.block,
                "status": self.status, "max_abs_diff": self.max_abs_diff,
                "undefined_pairs": [list(p) for p in self.undefined_pairs]}


def discrepancy_report(model: CouplingModel, bc, ns: Sequence[int] = (2, 4, 8), rtol: float = 1e-10) -> list[Discrepancy]:
    """Per-block comparison of printed closed forms against the assembled generator.

    A block is reported when it has undefined printed entries or when its
    defined entries differ from the assembled ones by more than
    ``rtol * ||printed||_inf``.  An empty list means the printed matrix is
    consistent for every ``n`` in ``ns``.
    """
    bc = as_bc(bc)
    out = []
    for n in ns:
        pb = printed_blocks(model, bc, n)
        A = build_generator_assembled(model, bc, n)
        pos = {"P12": (0, 1), "P21": (1, 0), "P23": (1, 2), "P32": (2, 1), "P33": (2, 2)}
        finite = [np.nan_to_num(b) for b in pb["blocks"].values()]
        scale = max(1.0, max(np.abs(np.sum(np.abs(b), axis=1)).max() for b in finite))
        for role, names in pb["roles"].items():
            und = pb["undefined"].get(role, [])
            if und:
                out.append(Discrepancy(model.kind.value, bc.value, n, role, "undefined", float("nan"), tuple(und)))
            diff = 0.0
            for name in names:
                P = pb["blocks"][name]
                mask = np.isfinite(P)
                diff = max(diff, float(np.max(np.abs(P[mask] - A.block(*pos[name])[mask]), initial=0.0)))
            if diff > rtol * scale:
                out.append(Discrepancy(model.kind.value, bc.value, n, role, "mismatch", diff))
    return out


# ---------------------------------------------------------------------------
# dissipativity


@dataclass(frozen=True)
class DissipativityResult:
    sampled: float  # max over trials of y^T A y for unit y
    certified: float  # largest eigenvalue of (A + A^T)/2
    samples: np.ndarray  # the drawn unit vectors, one per row
    values: np.ndarray


def dissipativity_defect(A, trials: int = 1000, seed: int = 42) -> DissipativityResult:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    M = A.entries if isinstance(A, GeneratorMatrix) else np.asarray(A, dtype=float)
    rng = np.random.default_rng(seed)
    Y = rng.standard_normal((trials, M.shape[0]))
    Y /= np.linalg.norm(Y, axis=1, keepdims=True)
    values = np.einsum("ki,ij,kj->k", Y, M, Y)
    certified = float(np.linalg.eigvalsh(0.5 * (M + M.T)).max())
    return DissipativityResult(float(values.max()), certified, Y, values)
