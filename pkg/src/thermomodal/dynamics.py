"""Time integration of modal systems, energies and decay-rate fits."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence, Union

import numpy as np
import scipy.linalg

from .errors import IllConditionedEigenbasis, IncompatibleData, NonPositiveEnergy, SingularMatrix
from .model import (
    BoundaryCase,
    CouplingModel,
    GeneratorMatrix,
    GramBlocks,
    ModalBasis,
    TrigTerm,
    _raw_integral,
    as_bc,
    assemble_gram,
    build_basis,
    build_generator,
)

EIGENBASIS_MAX_COND = 1e12
DEFAULT_N = 100
DEFAULT_T = 100.0
DEFAULT_DT = 0.1

# ---------------------------------------------------------------------------
# initial data


def _trig(func: str, k: int, x):
    return np.sin(k * x) if func == "sin" else np.cos(k * x)


def _antiderivative(func: str, k: int, x: float) -> float:
    """Antiderivative of ``func(k x)`` (``x`` itself when ``k = 0``)."""
    if k == 0:
        return x if func == "cos" else 0.0
    if func == "sin":
        return -math.cos(k * x) / k
    return math.sin(k * x) / k


@dataclass(frozen=True)
class Zero:
    def __call__(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def inner(self, t: TrigTerm) -> float:
        return 0.0

    def derivative_inner(self, t: TrigTerm) -> float:
        return 0.0

    def trace(self) -> tuple[float, float]:
        return 0.0, 0.0


@dataclass(frozen=True)
class _Mode:
    j: int
    amplitude: float = 1.0
    func = "sin"

    def __call__(self, x):
        return self.amplitude * _trig(self.func, self.j, np.asarray(x, dtype=float))

    def inner(self, t: TrigTerm) -> float:
        return self.amplitude * t.amplitude * _raw_integral(self.func, self.j, t.func, t.freq)

    def derivative_inner(self, t: TrigTerm) -> float:
        dfunc = "cos" if self.func == "sin" else "sin"
        sign = 1.0 if self.func == "sin" else -1.0
        return sign * self.j * self.amplitude * t.amplitude * _raw_integral(dfunc, self.j, t.func, t.freq)

    def trace(self) -> tuple[float, float]:
        v = self(np.array([0.0, math.pi]))
        return float(v[0]), float(v[1])


@dataclass(frozen=True)
class SineMode(_Mode):
    """``amplitude * sin(j x)``."""

    func = "sin"

    def __post_init__(self):
        if self.j < 1:
            raise ValueError("SineMode needs j >= 1")

    def trace(self) -> tuple[float, float]:
        return 0.0, 0.0


@dataclass(frozen=True)
class CosineMode(_Mode):
    """``amplitude * cos(j x)``."""

    func = "cos"

    def __post_init__(self):
        if self.j < 0:
            raise ValueError("CosineMode needs j >= 0")


@dataclass(frozen=True)
class PiecewiseConstant:
    """Step function: ``values[i]`` on ``(edges[i], edges[i+1])`` with edges ``0, *breakpoints, pi``."""

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if len(vals) != len(bp) + 1:
            raise ValueError("need exactly one more value than breakpoints")
        if any(not (0.0 < b < math.pi) for b in bp) or any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing inside (0, pi)")

    @property
    def edges(self) -> tuple[float, ...]:
        return (0.0, *self.breakpoints, math.pi)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(np.asarray(self.breakpoints), x, side="right"), 0, len(self.values) - 1)
        return np.asarray(self.values)[idx]

    def inner(self, t: TrigTerm) -> float:
        e = self.edges
        total = 0.0
        for c, x0, x1 in zip(self.values, e[:-1], e[1:]):
            total += c * (_antiderivative(t.func, t.freq, x1) - _antiderivative(t.func, t.freq, x0))
        return t.amplitude * total

    def derivative_inner(self, t: TrigTerm) -> float:
        raise IncompatibleData("a piecewise-constant displacement has no square-integrable gradient")

    def trace(self) -> tuple[float, float]:
        return self.values[0], self.values[-1]


Field = Union[Zero, SineMode, CosineMode, PiecewiseConstant]


@dataclass(frozen=True)
class InitialData:
    """Initial displacement ``u0``, velocity ``v0`` and temperature ``theta0``."""

    u0: Field = Zero()
    v0: Field = Zero()
    theta0: Field = Zero()


def sine_velocity(j: int = 1) -> InitialData:
    """``u0 = theta0 = 0``, ``v0 = sin(j x)``."""
    return InitialData(v0=SineMode(j))


def step_velocity() -> InitialData:
    """``u0 = theta0 = 0``, ``v0 = 2`` on ``(0, pi/2)`` and ``-1`` on ``(pi/2, pi)``."""
    return InitialData(v0=PiecewiseConstant((math.pi / 2,), (2.0, -1.0)))


def _check_trace(name: str, f: Field, bc: BoundaryCase, atol: float = 1e-12):
    left, right = f.trace()
    if abs(left) > atol or abs(right) > atol:
        raise IncompatibleData(f"{name} has boundary values ({left:g}, {right:g}) under a "
                               f"Dirichlet condition ({bc.value})")


def project_initial(data: InitialData, basis: ModalBasis, model: CouplingModel, bc,
                    gram: GramBlocks | None = None) -> np.ndarray:
    """Modal coordinates (orthonormalized frame) of the initial data.

    The displacement is projected through its gradient (``M1 c = (u0', phi_j')``),
    the velocity and temperature in L2 (``M2 c = (v0, psi_j)``, ``M3 c = (theta0, xi_j)``).
    Cosine families start at ``j = 1``, so constant parts are dropped.  The
    result is ``(L1 c_u, L2 c_v, L3 c_theta)``.

    Raises
    ------
    IncompatibleData
        If ``u0`` (Dirichlet displacement) or ``theta0`` (Dirichlet
        temperature) does not vanish at the endpoints.
    """
    bc = as_bc(bc)
    if bc.displacement_dirichlet:
        _check_trace("u0", data.u0, bc)
    if bc.temperature_dirichlet:
        _check_trace("theta0", data.theta0, bc)
    g = gram if gram is not None else assemble_gram(basis, model, bc)
    rhs_u = np.array([data.u0.derivative_inner(t.derivative()) for t in basis.phi])
    rhs_v = np.array([data.v0.inner(t) for t in basis.psi])
    rhs_t = np.array([data.theta0.inner(t) for t in basis.xi])
    blocks = []
    for M, L, rhs in ((g.M1, g.L1, rhs_u), (g.M2, g.L2, rhs_v), (g.M3, g.L3, rhs_t)):
        c = scipy.linalg.solve(M, rhs, assume_a="pos")
        blocks.append(L @ c)
    return np.concatenate(blocks)


# ---------------------------------------------------------------------------
# integration


class Scheme(str, Enum):
    TRAPEZOIDAL = "trapezoidal"
    EIGEN = "eigen"


def _steps(T: float, dt: float) -> int:
    if not (T > 0 and dt > 0 and dt <= T):
        raise ValueError("need T > 0 and 0 < dt <= T")
    k = round(T / dt)
    if abs(k * dt - T) > 1e-9 * T:
        raise ValueError(f"T = {T} is not a multiple of dt = {dt}")
    return int(k)


@dataclass(frozen=True)
class Trajectory:
    """Modal states on a time grid.  ``states[k]`` belongs to ``times[k]``."""

    times: np.ndarray
    states: np.ndarray
    energy_modal: np.ndarray
    energy_grid: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def at(self, t: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.times - t)))
        return self.states[k]


def modal_energy(y) -> np.ndarray | float:
    """``||y||^2 / 2`` (rowwise for 2-D input)."""
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        return 0.5 * float(y @ y)
    return 0.5 * np.einsum("ij,ij->i", y, y)


def cayley_matrix(A: np.ndarray, dt: float) -> np.ndarray:
    """``(I - dt/2 A)^{-1} (I + dt/2 A)``."""
    N = A.shape[0]
    I = np.eye(N)
    try:
        lu = scipy.linalg.lu_factor(I - 0.5 * dt * A)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularMatrix(f"I - dt/2 A is singular: {exc}") from None
    if np.any(np.abs(np.diag(lu[0])) < np.finfo(float).eps * np.abs(np.diag(lu[0])).max()):
        raise SingularMatrix("I - dt/2 A is singular")
    return scipy.linalg.lu_solve(lu, I + 0.5 * dt * A)


def integrate(A, y0, T: float = DEFAULT_T, dt: float = DEFAULT_DT, scheme="trapezoidal",
              n_grid: int | None = None) -> Trajectory:
    """Integrate ``dy/dt = A y`` on ``[0, T]`` with states at every multiple of ``dt``.

    Parameters
    ----------
    A : GeneratorMatrix or ndarray
        Generator.  With a :class:`GeneratorMatrix` the metadata carries the
        model and, if ``n_grid`` is given, grid energies are also computed.
    y0 : array_like
        Initial modal vector.
    scheme : {"trapezoidal", "eigen"}
        Trapezoidal (Cayley) stepping, or ``V exp(Lambda t) V^{-1} y0`` from
        the eigendecomposition.  The eigen path falls back to trapezoidal
        stepping when ``cond(V) > 1e12``; ``metadata["fallback"]`` records it.
    """
    scheme = Scheme(scheme)
    M = A.entries if isinstance(A, GeneratorMatrix) else np.asarray(A, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    k = _steps(T, dt)
    times = dt * np.arange(k + 1)
    meta = {"dt": dt, "T": T, "scheme": scheme.value, "fallback": False}
    if isinstance(A, GeneratorMatrix):
        meta.update(model=A.model.kind.value, bc=A.bc.value, n=A.n, gamma=A.gamma,
                    provenance=A.provenance.value)

    states = None
    if scheme is Scheme.EIGEN:
        try:
            states = _eigen_states(M, y0, times)
        except IllConditionedEigenbasis as exc:
            meta["fallback"] = True
            meta["fallback_reason"] = str(exc)
    if states is None:
        C = cayley_matrix(M, dt)
        states = np.empty((k + 1, y0.size))
        states[0] = y0
        y = y0
        for i in range(1, k + 1):
            y = C @ y
            states[i] = y
        if meta["fallback"]:
            meta["scheme"] = Scheme.TRAPEZOIDAL.value
    traj = Trajectory(times, states, modal_energy(states), None, meta)
    if n_grid is not None and isinstance(A, GeneratorMatrix):
        basis = build_basis(A.model, A.bc, A.n)
        traj = Trajectory(times, states, traj.energy_modal,
                          grid_energy(traj, basis, n_grid, A.model, A.bc), meta)
    return traj


def _eigen_states(M: np.ndarray, y0: np.ndarray, times: np.ndarray) -> np.ndarray:
    w, V = scipy.linalg.eig(M)
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > EIGENBASIS_MAX_COND:
        raise IllConditionedEigenbasis(f"cond(V) = {cond:.3e}")
    c = np.linalg.solve(V, y0.astype(complex))
    return ((np.exp(np.outer(times, w)) * c) @ V.T).real


# ---------------------------------------------------------------------------
# energies


def _frame_coefficients(states: np.ndarray, gram: GramBlocks) -> tuple[np.ndarray, ...]:
    """Undo the Cholesky frame: coefficients of the raw basis functions per block."""
    n = gram.L1.shape[0]
    out = []
    for b, L in enumerate((gram.L1, gram.L2, gram.L3)):
        yb = states[:, b * n:(b + 1) * n]
        out.append(scipy.linalg.solve_triangular(L, yb.T, lower=True).T)
    return tuple(out)


def reconstruct(states, basis: ModalBasis, model: CouplingModel, bc, x) -> tuple[np.ndarray, ...]:
    """``u, v, theta`` on points ``x`` for every state (arrays of shape ``(len(states), len(x))``)."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    g = assemble_gram(basis, model, bc)
    cu, cv, ct = _frame_coefficients(states, g)
    return (cu @ basis.evaluate("phi", x), cv @ basis.evaluate("psi", x), ct @ basis.evaluate("xi", x))


def grid_energy(traj: Trajectory | np.ndarray, basis: ModalBasis, n_grid: int,
                model: CouplingModel | None = None, bc=None) -> np.ndarray:
    """Finite-difference energy on ``x_j = j h``, ``h = pi / n_grid``.

    ``(h/2) sum_{j=0}^{N-1} ((u_{j+1} - u_j)/h)^2 + v_j^2 + theta_j^2`` with
    the fields reconstructed from the modal coordinates.  Boundary values
    come from the basis functions themselves, so they satisfy the
    boundary conditions automatically.
    """
    if n_grid < 2:
        raise ValueError("n_grid must be >= 2")
    if isinstance(traj, Trajectory):
        states = traj.states
        if model is None:
            model = CouplingModel(traj.metadata["model"], traj.metadata["gamma"])
        if bc is None:
            bc = traj.metadata["bc"]
    else:
        states = np.atleast_2d(np.asarray(traj, dtype=float))
    h = math.pi / n_grid
    x = h * np.arange(n_grid + 1)
    return _fd_energy(*reconstruct(states, basis, model, bc, x), h)


def _fd_energy(u, v, th, h):
    du = np.diff(u, axis=1) / h
    return 0.5 * h * (np.sum(du**2, axis=1) + np.sum(v[:, :-1] ** 2, axis=1) + np.sum(th[:, :-1] ** 2, axis=1))


def discretization_gap(model: CouplingModel, bc, n_coarse: int = 64, n_fine: int = 128,
                       data: InitialData | None = None, T: float = 1.0, dt: float = 0.01,
                       n_grid: int = 1024) -> float:
    """Relative grid-energy norm of the difference between two truncation orders at time ``T``.

    Both runs use the same time step, so the gap isolates the modal truncation.
    """
    data = data if data is not None else sine_velocity(1)
    h = math.pi / n_grid
    x = h * np.arange(n_grid + 1)
    fields = []
    for n in (n_coarse, n_fine):
        tr = simulate(model, bc, n, data, T, dt)
        fields.append(reconstruct(tr.states[-1:], build_basis(model, bc, n), model, bc, x))
    diff = [a - b for a, b in zip(*fields)]
    ref = float(_fd_energy(*fields[1], h)[0])
    return math.sqrt(float(_fd_energy(*diff, h)[0]) / ref)


def dissipation_rate(traj: Trajectory, gram: GramBlocks | None = None) -> np.ndarray:
    """``||d/dx theta||^2`` per time, from the theta block and the gradient Gram matrix."""
    md = traj.metadata
    model = CouplingModel(md["model"], md["gamma"])
    g = gram if gram is not None else assemble_gram(build_basis(model, md["bc"], md["n"]), model, md["bc"])
    ct = _frame_coefficients(traj.states, g)[2]
    return np.einsum("ij,jk,ik->i", ct, g.G, ct)


def dissipation_identity_error(traj: Trajectory, window=(1.0, None)) -> float:
    """Relative L2-in-time mismatch between ``-dE/dt`` (central differences) and the dissipation rate."""
    t, E = traj.times, traj.energy_modal
    rate = dissipation_rate(traj)
    dEdt = (E[2:] - E[:-2]) / (t[2:] - t[:-2])
    tc = t[1:-1]
    lo, hi = window[0], window[1] if window[1] is not None else t[-1]
    sel = (tc >= lo) & (tc <= hi)
    diff = -dEdt[sel] - rate[1:-1][sel]
    return float(np.linalg.norm(diff) / np.linalg.norm(rate[1:-1][sel]))


# ---------------------------------------------------------------------------
# rate fits


def _window(times, E, window):
    times = np.asarray(times, dtype=float)
    E = np.asarray(E, dtype=float)
    lo, hi = window
    if lo < times[0] - 1e-12 or hi > times[-1] + 1e-12 or hi <= lo:
        raise ValueError(f"window {window} not inside [{times[0]}, {times[-1]}]")
    sel = (times >= lo - 1e-12) & (times <= hi + 1e-12)
    if np.any(E[sel] <= 0):
        raise NonPositiveEnergy(f"nonpositive energy inside window {window}")
    return times[sel], E[sel]


def _linfit(x, y) -> tuple[float, float]:
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    return float(slope), r2


def fit_exponential_rate(times, E, window) -> tuple[float, float]:
    """Least-squares rate ``-d ln E / dt`` on ``window`` and the fit's ``r^2``."""
    t, e = _window(times, E, window)
    slope, r2 = _linfit(t, np.log(e))
    return -slope, r2


def fit_polynomial_rate(times, E, window) -> tuple[float, float]:
    """Least-squares exponent ``d ln E / d ln t`` on ``window`` and ``r^2``."""
    if window[0] < 1:
        raise ValueError("polynomial fits need a window starting at t >= 1")
    t, e = _window(times, E, window)
    return _linfit(np.log(t), np.log(e))


def dominant_mode(A, y0, rel_weight: float = 1e-2) -> complex:
    """Slowest-decaying eigenvalue among those carrying a significant share of ``y0``.

    The weight of mode ``k`` is ``|c_k| ||v_k||`` with ``y0 = V c``; modes with
    weight below ``rel_weight`` times the largest weight are ignored.
    """
    M = A.entries if isinstance(A, GeneratorMatrix) else np.asarray(A, dtype=float)
    w, V = scipy.linalg.eig(M)
    c = np.linalg.solve(V, np.asarray(y0, dtype=complex))
    weight = np.abs(c) * np.linalg.norm(V, axis=0)
    keep = weight >= rel_weight * weight.max()
    cand = w[keep]
    return complex(cand[np.argmax(cand.real)])


# ---------------------------------------------------------------------------
# sweeps


def simulate(model: CouplingModel, bc, n: int = DEFAULT_N, data: InitialData | None = None,
             T: float = DEFAULT_T, dt: float = DEFAULT_DT, scheme="trapezoidal",
             n_grid: int | None = None, provenance="assembled") -> Trajectory:
    """Project ``data`` (default ``v0 = sin x``), build the generator and integrate."""
    bc = as_bc(bc)
    data = data if data is not None else sine_velocity(1)
    A = build_generator(model, bc, n, provenance)
    y0 = project_initial(data, build_basis(model, bc, n), model, bc)
    return integrate(A, y0, T, dt, scheme, n_grid)


@dataclass(frozen=True)
class SweepResult:
    tag: str
    terminal_energy: float
    trajectory: Trajectory


def _run_all(runs, jobs):
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(lambda f: f(), runs))
    return [f() for f in runs]


def smoothness_sweep(model: CouplingModel, bc, n: int, js: Sequence[int], T: float = DEFAULT_T,
                     dt: float = DEFAULT_DT, jobs: int = 1) -> list[SweepResult]:
    """One run per ``j`` with ``v0 = sin(j x)``; results ordered as ``js``."""
    if not js:
        raise ValueError("js must be nonempty")

    def job(j):
        def f():
            tr = simulate(model, bc, n, sine_velocity(j), T, dt)
            return SweepResult(f"j={j}", float(tr.energy_modal[-1]), tr)
        return f

    return _run_all([job(j) for j in js], jobs)


def discontinuity_sweep(model: CouplingModel, bc, n: int, T: float = DEFAULT_T,
                        dt: float = DEFAULT_DT, jobs: int = 1) -> list[SweepResult]:
    """Smooth (``sin x``) versus step velocity data."""
    cases = [("smooth", sine_velocity(1)), ("step", step_velocity())]

    def job(tag, data):
        def f():
            tr = simulate(model, bc, n, data, T, dt)
            return SweepResult(tag, float(tr.energy_modal[-1]), tr)
        return f

    return _run_all([job(t, d) for t, d in cases], jobs)
