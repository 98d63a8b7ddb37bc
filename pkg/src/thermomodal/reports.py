"""Run scenarios, write CSV payloads and emit run reports."""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from . import acceptance
from . import continuous as cs
from . import dynamics as dy
from . import spectral as sp
from .errors import ThermoModalError
from .model import CouplingModel, build_basis, build_generator, discrepancy_report, dissipativity_defect
from .scenario import Scenario, Task

OUT_DIR_ENV = "THERMO_OUT_DIR"
DEFAULT_OUT_DIR = "thermo_out"


# ---------------------------------------------------------------------------
# CSV


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """Header plus rows; floats with 17 significant digits, LF line endings."""
    lines = [",".join(header)]
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# report types


@dataclass(frozen=True)
class ProducedFile:
    path: str
    sha256: str
    rows: int


@dataclass(frozen=True)
class ReportWarning:
    operation: str
    params: dict
    message: str

    def as_dict(self) -> dict:
        return {"operation": self.operation, "params": self.params, "message": self.message}


@dataclass
class RunReport:
    scenario: dict
    files: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    wall_time: float = 0.0
    status: str = "ok"
    error: str | None = None
    exit_code: int = 0

    def as_dict(self) -> dict:
        return {
            "version": __version__,
            "scenario": _jsonable(self.scenario),
            "status": self.status,
            "exit_code": self.exit_code,
            "error": self.error,
            "files": [{"path": f.path, "sha256": f.sha256, "rows": f.rows} for f in self.files],
            "warnings": [_jsonable(w.as_dict()) for w in self.warnings],
            "wall_time": round(self.wall_time, 6),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return {"re": _jsonable(obj.real), "im": _jsonable(obj.imag)}
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "value") and not isinstance(obj, (str, int)):
        return obj.value
    return obj


def emit_report(report: RunReport, path, fmt: str = "json") -> Path:
    """Write ``report`` as JSON (stable key order) or as plain text."""
    path = Path(path)
    d = report.as_dict()
    if fmt == "json":
        text = json.dumps(d, indent=2) + "\n"
    elif fmt == "text":
        lines = [f"status: {d['status']} (exit {d['exit_code']})", f"task: {d['scenario'].get('task')}",
                 f"wall_time: {d['wall_time']:.3f}s"]
        if d["error"]:
            lines.append(f"error: {d['error']}")
        lines.append("files:" + ("" if d["files"] else " []"))
        lines.extend(f"  {f['path']}  sha256={f['sha256']}  rows={f['rows']}" for f in d["files"])
        if d["warnings"]:
            lines.append("warnings:")
            lines.extend(f"  [{w['operation']}] {json.dumps(w['params'])} {w['message']}" for w in d["warnings"])
        else:
            lines.append("warnings: []")
        text = "\n".join(lines) + "\n"
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


# ---------------------------------------------------------------------------
# running


def resolve_out_dir(cli_value: str | None = None, scenario_value: str | None = None) -> Path:
    """Output directory: explicit flag, then the environment, then the scenario, then the default."""
    return Path(cli_value or os.environ.get(OUT_DIR_ENV) or scenario_value or DEFAULT_OUT_DIR)


class _Run:
    def __init__(self, sc: Scenario, out: Path):
        self.sc = sc
        self.out = out
        self.report = RunReport(sc.echo())

    def write(self, name: str, header, rows) -> None:
        if self.sc.outputs is not None and name.removesuffix(".csv") not in self.sc.outputs:
            return
        rows = list(rows)
        text = csv_text(header, rows)
        self.out.mkdir(parents=True, exist_ok=True)
        p = self.out / name
        p.write_text(text, encoding="utf-8", newline="\n")
        self.report.files.append(ProducedFile(str(p), sha256(text), len(rows)))

    def warn(self, operation: str, params: dict, message: str) -> None:
        self.report.warnings.append(ReportWarning(operation, params, message))

    @property
    def model(self) -> CouplingModel:
        return CouplingModel(self.sc.model, self.sc.gamma)

    def base_params(self) -> dict:
        return {"model": self.sc.model, "bc": self.sc.bc, "n": self.sc.n, "gamma": self.sc.gamma,
                "provenance": self.sc.provenance}

    def generator(self, n: int | None = None):
        A = build_generator(self.model, self.sc.bc, n or self.sc.n, self.sc.provenance)
        res = dissipativity_defect(A, seed=self.sc.seed)
        tol = 1e-10 * max(1.0, float(np.abs(A.entries).max()))
        if res.certified > tol:
            self.warn("dissipativity_defect", {**self.base_params(), "n": A.n, "seed": self.sc.seed},
                      f"generator is not dissipative: max eig of symmetric part {res.certified:.3e}, "
                      f"max sampled {res.sampled:.3e}")
        return A

    def discrepancies(self) -> None:
        for d in discrepancy_report(self.model, self.sc.bc):
            p = {"kind": d.kind, "bc": d.bc, "n": d.n, "block": d.block}
            if d.status == "undefined":
                self.warn("discrepancy_report", p, f"printed block {d.block} is undefined at "
                          f"{len(d.undefined_pairs)} index pairs in case {d.bc}")
            else:
                self.warn("discrepancy_report", p, f"printed block {d.block} differs from the assembled "
                          f"one in case {d.bc} (max abs diff {d.max_abs_diff:.3e})")


def _task_spectrum(r: _Run) -> None:
    A = r.generator()
    rep = sp.spectrum_report(A)
    rows = [(A.n, lam.real, lam.imag, lb.branch.value, lb.low_confidence)
            for lam, lb in zip(rep.eigenvalues, rep.branches)]
    r.write("eigenvalues.csv", ["n", "re", "im", "branch", "low_confidence"], rows)
    low = sum(lb.low_confidence for lb in rep.branches)
    if low:
        r.warn("classify_branches", r.base_params(), f"{low} eigenvalues labelled with low confidence")


def _task_resolvent(r: _Run) -> None:
    p = r.sc.params
    scan = sp.resolvent_scan(r.generator(), p["s_min"], p["s_max"], p["num"], p["alpha"], jobs=p["jobs"])
    r.write("resolvent.csv", ["s", "norm", "scaled"], scan.rows())
    r.write("resolvent_summary.csv", ["alpha", "supremum", "argsup"], [(scan.alpha, scan.supremum, scan.argsup)])
    if scan.skipped:
        r.warn("resolvent_scan", {**r.base_params(), "alpha": p["alpha"]},
               f"{len(scan.skipped)} shifts lie numerically in the spectrum and were skipped")


def _task_abscissa(r: _Run) -> None:
    rows = sp.abscissa_table(r.model, r.sc.bc, r.sc.params["ns"], provenance=r.sc.provenance)
    r.write("abscissa.csv", ["n", "min_distance"], rows)


def _task_roots(r: _Run) -> None:
    p = r.sc.params
    if p["seeds"]:
        rows = []
        for k, seed in enumerate(p["seeds"], 1):
            res = cs.find_eigen_near(seed, r.sc.gamma, r.sc.bc, p["tol"])
            rows.append(cs.AsymptoticRow(k, res.lam, abs(res.lam.real) * k * k, res.converged))
    else:
        rows = cs.branch_asymptotics_check(r.sc.gamma, r.sc.bc, range(p["k_min"], p["k_max"] + 1), p["tol"], p["jobs"])
    r.write("roots.csv", ["bc", "gamma", "k", "re_lambda", "im_lambda", "converged"],
            [(r.sc.bc, r.sc.gamma, row.k, row.lam.real, row.lam.imag, row.converged) for row in rows])
    for row in rows:
        if not row.converged:
            r.warn("find_eigen_near", {"bc": r.sc.bc, "gamma": r.sc.gamma, "k": row.k, "tol": p["tol"]},
                   "root search did not converge; best iterate reported")


def _trajectory(r: _Run, data=None):
    sc = r.sc
    A = r.generator()
    y0 = dy.project_initial(data or sc.initial_data(), build_basis(r.model, sc.bc, sc.n), r.model, sc.bc)
    tr = dy.integrate(A, y0, sc.T, sc.dt, sc.scheme, sc.params.get("n_grid") or sc.n)
    if tr.metadata.get("fallback"):
        r.warn("integrate", {**r.base_params(), "dt": sc.dt, "scheme": sc.scheme},
               "eigen-expansion fell back to trapezoidal stepping: " + tr.metadata.get("fallback_reason", ""))
    return tr


def _task_simulate(r: _Run) -> None:
    tr = _trajectory(r)
    r.write("energy.csv", ["t", "E_modal", "E_grid"], zip(tr.times, tr.energy_modal, tr.energy_grid))
    window = r.sc.params.get("window") or [r.sc.T / 2, r.sc.T]
    fits = []
    for kind, fn in (("exponential", dy.fit_exponential_rate), ("polynomial", dy.fit_polynomial_rate)):
        try:
            val, r2 = fn(tr.times, tr.energy_modal, tuple(window))
            fits.append((kind, window[0], window[1], val, r2))
        except (ThermoModalError, ValueError) as exc:
            r.warn(f"fit_{kind}_rate", {**r.base_params(), "window": window}, str(exc))
    r.write("fits.csv", ["fit", "t_start", "t_end", "value", "r_squared"], fits)


def _sweep_rows(results):
    for res in results:
        for t, E in zip(res.trajectory.times, res.trajectory.energy_modal):
            yield res.tag, t, E


def _task_smoothness(r: _Run) -> None:
    p = r.sc.params
    res = dy.smoothness_sweep(r.model, r.sc.bc, r.sc.n, p["js"], r.sc.T, r.sc.dt, p["jobs"])
    r.write("sweep.csv", ["tag", "t", "E"], _sweep_rows(res))
    r.write("terminal.csv", ["tag", "E_T"], [(x.tag, x.terminal_energy) for x in res])


def _task_discontinuity(r: _Run) -> None:
    res = dy.discontinuity_sweep(r.model, r.sc.bc, r.sc.n, r.sc.T, r.sc.dt, r.sc.params["jobs"])
    r.write("sweep.csv", ["tag", "t", "E"], _sweep_rows(res))
    r.write("terminal.csv", ["tag", "E_T"], [(x.tag, x.terminal_energy) for x in res])


def _task_verify(r: _Run) -> None:
    ids = r.sc.params.get("criteria") or sorted(acceptance.CRITERIA)
    results = acceptance.run_acceptance(ids)
    r.write("acceptance.csv", ["criterion", "name", "passed", "runtime", "budget"],
            [(c.id, c.name, c.passed, c.runtime, c.budget) for c in results])
    for c in results:
        if not c.passed:
            r.warn("acceptance", {"criterion": c.id, "name": c.name}, json.dumps(_jsonable(c.details)))
    if not all(c.passed for c in results):
        r.report.status = "acceptance_failed"
        r.report.exit_code = 3


_DISPATCH = {
    Task.SPECTRUM: _task_spectrum,
    Task.RESOLVENT: _task_resolvent,
    Task.ABSCISSA_TABLE: _task_abscissa,
    Task.CONTINUOUS_ROOTS: _task_roots,
    Task.SIMULATE: _task_simulate,
    Task.SMOOTHNESS_SWEEP: _task_smoothness,
    Task.DISCONTINUITY_SWEEP: _task_discontinuity,
    Task.VERIFY: _task_verify,
}


def run(scenario: Scenario, out_dir=None) -> RunReport:
    """Execute one scenario; module errors end up in the report instead of propagating."""
    out = Path(out_dir) if out_dir is not None else resolve_out_dir(None, scenario.output_dir)
    r = _Run(scenario, out)
    t0 = time.perf_counter()
    try:
        if scenario.task is not Task.VERIFY:
            r.discrepancies()
        _DISPATCH[scenario.task](r)
    except ThermoModalError as exc:
        r.report.status = "numerical_failure"
        r.report.error = f"{type(exc).__name__}: {exc}"
        r.report.exit_code = 2
        r.warn(scenario.task.value, r.base_params(), r.report.error)
    r.report.wall_time = time.perf_counter() - t0
    emit_report(r.report, out / "report.json", "json")
    return r.report


def run_batch(scenarios: Sequence[Scenario], out_dir, jobs: int = 1) -> list[RunReport]:
    """Run scenarios into ``out_dir/<index>_<name>``; reports keep input order."""
    out = Path(out_dir)
    width = max(2, len(str(len(scenarios))))
    dirs = [out / f"{i:0{width}d}_{sc.name}" for i, sc in enumerate(scenarios)]
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(run, scenarios, dirs))
    return [run(sc, d) for sc, d in zip(scenarios, dirs)]
