"""End-to-end acceptance checks, shared by ``thermomodal verify`` and the test suite.

Each check returns a :class:`CheckResult`; ``passed`` requires both the
numerical condition and the wall-time budget.
"""

from __future__ import annotations

import cmath
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import continuous as cs
from . import dynamics as dy
from . import spectral as sp
from .model import BoundaryCase, CouplingModel, build_basis, build_generator_assembled, build_generator_printed


@dataclass
class CheckResult:
    id: int
    name: str
    passed: bool
    runtime: float
    budget: float
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = " ".join(f"{k}={_fmt(v)}" for k, v in self.details.items())
        return f"[{status}] criterion {self.id:2d} {self.name} ({self.runtime:.2f}s/{self.budget:g}s) {extra}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(_fmt(x) for x in v) + "]"
    return str(v)


def _rel_spread(values) -> float:
    v = np.asarray(values, dtype=float)
    return float((v.max() - v.min()) / abs(v.mean()))


# ---------------------------------------------------------------------------


def check_printed_oracle() -> tuple[bool, dict]:
    diffs = {}
    ok = True
    for kind, bc in (("strong", "DD"), ("weak", "DD"), ("weak", "DN")):
        worst = 0.0
        for g in (0.05, 0.5):
            m = CouplingModel(kind, g)
            for n in (2, 4, 8):
                P = build_generator_printed(m, bc, n).entries
                A = build_generator_assembled(m, bc, n).entries
                worst = max(worst, float(np.abs(P - A).max()))
        diffs[f"{kind}_{bc}"] = worst
        ok &= worst <= 1e-10
    return ok, diffs


def check_inverse_norm() -> tuple[bool, dict]:
    worst = 0.0
    for g in (0.05, 0.5, 1.0):
        for n in (2, 8, 32):
            A = build_generator_printed(CouplingModel("weak", g), "DN", n)
            worst = max(worst, abs(sp.inverse_inf_norm(A) - (g * g + g + 1)))
    return worst <= 1e-10, {"max_abs_err": worst}


def check_uncoupled_spectrum() -> tuple[bool, dict]:
    worst = 0.0
    for n in (1, 2, 4, 8, 16, 32):
        w = sp.eigenvalues(build_generator_assembled(CouplingModel("strong", 0.0), "DD", n))
        k = np.arange(1, n + 1)
        ref = np.concatenate([1j * k, -1j * k, -(k.astype(float) ** 2)])
        # match greedily; spectra are simple
        got = list(w)
        for r in ref:
            i = int(np.argmin(np.abs(np.asarray(got) - r)))
            worst = max(worst, abs(got.pop(i) - r))
    return worst <= 1e-8, {"max_abs_err": worst}


TABLE_GAMMA = 0.04228


def check_abscissa_table(gamma: float = TABLE_GAMMA) -> tuple[bool, dict]:
    rows = sp.abscissa_table(CouplingModel("strong", gamma), "DD", (8, 16, 24, 32))
    vals = [d for _, d in rows]
    spread = _rel_spread(vals)
    in_range = all(7e-4 <= v <= 1.1e-3 for v in vals)
    return spread <= 5e-3 and in_range, {"gamma": gamma, "values": vals, "spread": spread, "in_range": in_range}


def check_uniform_exponential() -> tuple[bool, dict]:
    m = CouplingModel("strong", 0.05)
    sups = [sp.resolvent_scan(build_generator_assembled(m, "DD", n), 1, 1e3, alpha=0, jobs=2).supremum
            for n in (16, 64)]
    var = abs(sups[1] - sups[0]) / min(sups)
    return var <= 0.10, {"sup_n16": sups[0], "sup_n64": sups[1], "variation": var}


def check_uniform_polynomial() -> tuple[bool, dict]:
    m = CouplingModel("weak", 0.05)
    out, ok = {}, True
    for bc in ("DD", "DN"):
        sups = [sp.resolvent_scan(build_generator_assembled(m, bc, n), 1, 1e3, alpha=2, jobs=2).supremum
                for n in (32, 64)]
        var = abs(sups[1] - sups[0]) / min(sups)
        out[f"{bc}_sups"] = sups
        out[f"{bc}_variation"] = var
        ok &= var <= 0.10
    return ok, out


def check_spectral_asymptotics() -> tuple[bool, dict]:
    m = CouplingModel("weak", 0.05)
    w = sp.eigenvalues(build_generator_assembled(m, "DD", 64))
    slope = sp.branch_slope(w)
    worst = 0.0
    for k in range(1, 21):
        r = cs.find_eigen_near(1j * k, 0.05, "DD")
        near = w[np.argmin(np.abs(w - r.lam))]
        worst = max(worst, abs(near - r.lam) if r.converged else math.inf)
    return -2.2 <= slope <= -1.8 and worst <= 1e-2, {"slope": slope, "max_root_gap": worst}


def check_determinants(samples: int = 200, seed: int = 42) -> tuple[bool, dict]:
    rng = np.random.default_rng(seed)
    out, ok = {}, True
    for bc in BoundaryCase:
        worst = 0.0
        for _ in range(samples):
            lam = 10 ** rng.uniform(0, math.log10(50)) * cmath.exp(1j * rng.uniform(0, 2 * math.pi))
            d = cs.char_det(lam, 0.05, bc)
            worst = max(worst, abs(d.det_direct - d.det_closed) / abs(d.det_closed))
        out[bc.value] = worst
        ok &= worst <= 1e-6
    return ok, out


def check_quartic_rates(samples: int = 1000, seed: int = 42) -> tuple[bool, dict]:
    rng = np.random.default_rng(seed)
    worst_res = 0.0
    g = 0.05
    for _ in range(samples):
        lam = 10 ** rng.uniform(0, 2) * cmath.exp(1j * rng.uniform(0, 2 * math.pi))
        r = cs.roots_ab(lam, g)
        scale = max(1.0, abs(lam) ** 4)
        worst_res = max(worst_res, *(r.quartic_residual(x) / scale for x in (r.a, -r.a, r.b, -r.b)))
    worst_rate = 0.0
    for t in np.geomspace(10, 1e4, 400):
        lam = 1j * t
        r = cs.roots_ab(lam, g)
        h = abs(lam) ** 0.5
        worst_rate = max(worst_rate, abs(r.a + r.b - lam) / h, abs(r.a - r.b - lam) / h,
                         abs(r.b**2 - lam) * abs(lam))
    return worst_res <= 1e-9 and worst_rate <= 10, {"max_residual": worst_res, "max_rate_ratio": worst_rate}


def check_energy_dissipation() -> tuple[bool, dict]:
    out, ok = {}, True
    for kind in ("strong", "weak"):
        tr = dy.simulate(CouplingModel(kind, 0.05), "DD", 100, dy.sine_velocity(1), 100.0, 0.1)
        inc = float(np.diff(tr.energy_modal).max())
        err = dy.dissipation_identity_error(tr, (1.0, 100.0))
        out[f"{kind}_max_increase"] = inc
        out[f"{kind}_dissipation_err"] = err
        ok &= inc <= 1e-12 and err <= 0.05
    return ok, out


POLY_BOUND = 50.0


def check_decay_dichotomy() -> tuple[bool, dict]:
    s = CouplingModel("strong", 0.05)
    A = build_generator_assembled(s, "DD", 100)
    y0 = dy.project_initial(dy.sine_velocity(1), build_basis(s, "DD", 100), s, "DD")
    tr = dy.integrate(A, y0, 100.0, 0.1)
    rate, _ = dy.fit_exponential_rate(tr.times, tr.energy_modal, (50, 100))
    lam = dy.dominant_mode(A, y0)
    rate_err = abs(rate - 2 * abs(lam.real)) / (2 * abs(lam.real))

    w = CouplingModel("weak", 0.05)
    Ms = []
    for n in (25, 50, 100):
        Aw = build_generator_assembled(w, "DD", n)
        yw = dy.project_initial(dy.sine_velocity(1), build_basis(w, "DD", n), w, "DD")
        trw = dy.integrate(Aw, yw, 100.0, 0.1)
        sel = trw.times >= 1
        Ms.append(float(np.max(trw.times[sel] * trw.energy_modal[sel]) / np.linalg.norm(Aw.entries @ yw) ** 2))
    ok = rate_err <= 0.15 and max(Ms) <= POLY_BOUND and _rel_spread(Ms) <= 0.01
    return ok, {"rate": rate, "two_re_lambda": 2 * abs(lam.real), "rate_err": rate_err, "M": Ms}


def check_data_sensitivity() -> tuple[bool, dict]:
    weak = CouplingModel("weak", 0.05)
    strong = CouplingModel("strong", 0.05)
    Ew = [r.terminal_energy for r in dy.smoothness_sweep(weak, "DD", 100, [1, 2, 3])]
    ordered = Ew[2] >= Ew[1] >= Ew[0]
    rates = []
    for r in dy.smoothness_sweep(strong, "DD", 100, [1, 2, 3]):
        rates.append(dy.fit_exponential_rate(r.trajectory.times, r.trajectory.energy_modal, (50, 100))[0])
    rate_spread = (max(rates) - min(rates)) / min(rates)
    smooth, step = dy.discontinuity_sweep(weak, "DD", 100)
    ratio = lambda r: r.trajectory.energy_modal[-1] / r.trajectory.energy_modal[0]  # noqa: E731
    slower = ratio(step) > ratio(smooth)
    ok = ordered and rate_spread <= 0.20 and slower
    return ok, {"weak_E100": Ew, "ordered": ordered, "strong_rates": rates, "strong_rate_spread": rate_spread,
                "step_retained": ratio(step), "smooth_retained": ratio(smooth)}


def check_trotter_kato() -> tuple[bool, dict]:
    out, ok = {}, True
    for kind in ("strong", "weak"):
        gap = dy.discretization_gap(CouplingModel(kind, 0.05), "DD", 64, 128)
        out[kind] = gap
        ok &= gap <= 1e-3
    return ok, out


CRITERIA: dict[int, tuple[str, Callable[[], tuple[bool, dict]], float]] = {
    1: ("printed_matrix_oracle", check_printed_oracle, 1.0),
    2: ("inverse_norm_identity", check_inverse_norm, 1.0),
    3: ("uncoupled_spectrum", check_uncoupled_spectrum, 5.0),
    4: ("abscissa_table_pattern", check_abscissa_table, 30.0),
    5: ("uniform_exponential_resolvent", check_uniform_exponential, 300.0),
    6: ("uniform_polynomial_resolvent", check_uniform_polynomial, 300.0),
    7: ("spectral_asymptotics", check_spectral_asymptotics, 120.0),
    8: ("determinant_equivalence", check_determinants, 30.0),
    9: ("quartic_and_rates", check_quartic_rates, 30.0),
    10: ("energy_monotone_dissipation", check_energy_dissipation, 60.0),
    11: ("decay_dichotomy", check_decay_dichotomy, 180.0),
    12: ("data_sensitivity", check_data_sensitivity, 180.0),
    13: ("trotter_kato", check_trotter_kato, 60.0),
}


def run_check(cid: int) -> CheckResult:
    name, fn, budget = CRITERIA[cid]
    t0 = time.perf_counter()
    try:
        ok, details = fn()
    except Exception as exc:  # a crash is a failed criterion, reported not raised
        ok, details = False, {"error": f"{type(exc).__name__}: {exc}"}
    runtime = time.perf_counter() - t0
    return CheckResult(cid, name, bool(ok) and runtime < budget, runtime, budget, details)


def run_acceptance(ids=None) -> list[CheckResult]:
    return [run_check(i) for i in (ids or sorted(CRITERIA))]
