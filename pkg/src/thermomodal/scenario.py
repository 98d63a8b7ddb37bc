"""Scenario files: JSON run descriptions with validation and defaults."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

from .dynamics import CosineMode, InitialData, PiecewiseConstant, SineMode, Zero
from .errors import ParseError, ValidationError
from .model import BoundaryCase, Kind, Provenance


class Task(str, Enum):
    SPECTRUM = "Spectrum"
    RESOLVENT = "Resolvent"
    ABSCISSA_TABLE = "AbscissaTable"
    CONTINUOUS_ROOTS = "ContinuousRoots"
    SIMULATE = "Simulate"
    SMOOTHNESS_SWEEP = "SmoothnessSweep"
    DISCONTINUITY_SWEEP = "DiscontinuitySweep"
    VERIFY = "Verify"


N_RANGE = (1, 512)
GAMMA_MAX = 10.0
DT_MAX = 1.0
T_MAX = 1e4
ABSCISSA_GAMMA = 0.1
ABSCISSA_NS = (8, 16, 24, 32)


@dataclass(frozen=True)
class Scenario:
    """A validated run description.  ``params`` holds the task-specific fields."""

    task: Task
    name: str = "run"
    model: str = "strong"
    bc: str = "DD"
    n: int = 100
    gamma: float = 0.05
    T: float = 100.0
    dt: float = 0.1
    scheme: str = "trapezoidal"
    provenance: str = "assembled"
    seed: int = 42
    output_dir: str | None = None
    initial: dict = field(default_factory=lambda: {"u0": {"type": "zero"}, "v0": {"type": "sine", "j": 1},
                                                   "theta0": {"type": "zero"}})
    params: dict = field(default_factory=dict)
    outputs: tuple | None = None

    def echo(self) -> dict:
        d = asdict(self)
        d["task"] = self.task.value
        return d

    def initial_data(self) -> InitialData:
        return InitialData(**{k: field_from_json(self.initial.get(k, {"type": "zero"}), k)
                              for k in ("u0", "v0", "theta0")})


# task-specific fields and defaults
_TASK_PARAMS: dict[Task, dict[str, Any]] = {
    Task.SPECTRUM: {},
    Task.RESOLVENT: {"alpha": 0.0, "s_min": 1.0, "s_max": 1e3, "num": None, "jobs": 1},
    Task.ABSCISSA_TABLE: {"ns": list(ABSCISSA_NS)},
    Task.CONTINUOUS_ROOTS: {"k_min": 5, "k_max": 30, "tol": 1e-10, "seeds": None, "jobs": 1},
    Task.SIMULATE: {"n_grid": None, "window": None},
    Task.SMOOTHNESS_SWEEP: {"js": [1, 2, 3], "jobs": 1},
    Task.DISCONTINUITY_SWEEP: {"jobs": 1},
    Task.VERIFY: {"criteria": None, "jobs": 1},
}
# files each task can write (without the .csv suffix)
OUTPUTS: dict[Task, tuple[str, ...]] = {
    Task.SPECTRUM: ("eigenvalues",),
    Task.RESOLVENT: ("resolvent", "resolvent_summary"),
    Task.ABSCISSA_TABLE: ("abscissa",),
    Task.CONTINUOUS_ROOTS: ("roots",),
    Task.SIMULATE: ("energy", "fits"),
    Task.SMOOTHNESS_SWEEP: ("sweep", "terminal"),
    Task.DISCONTINUITY_SWEEP: ("sweep", "terminal"),
    Task.VERIFY: ("acceptance",),
}
_COMMON = {"task", "name", "model", "bc", "n", "gamma", "T", "dt", "scheme", "provenance", "seed",
           "output_dir", "initial", "outputs"}


def field_from_json(spec, name: str = "field"):
    """Build an initial-data field from ``{"type": ..., ...}`` (or the string ``"zero"``)."""
    if spec in (None, "zero", 0):
        return Zero()
    if not isinstance(spec, dict) or "type" not in spec:
        raise ValidationError([(f"initial.{name}", "expected an object with a 'type' key")])
    kind = spec["type"]
    try:
        if kind == "zero":
            return Zero()
        if kind == "sine":
            return SineMode(int(spec["j"]), float(spec.get("amplitude", 1.0)))
        if kind == "cosine":
            return CosineMode(int(spec["j"]), float(spec.get("amplitude", 1.0)))
        if kind == "piecewise":
            return PiecewiseConstant(tuple(spec["breakpoints"]), tuple(spec["values"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError([(f"initial.{name}", str(exc))]) from None
    raise ValidationError([(f"initial.{name}", f"unknown type {kind!r}")])


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def validate(raw: dict) -> Scenario:
    """Validate a decoded scenario object, collecting every violation."""
    if not isinstance(raw, dict):
        raise ValidationError([("<root>", "scenario must be a JSON object")])
    bad: list[tuple[str, str]] = []
    try:
        task = Task(raw.get("task"))
    except ValueError:
        valid = ", ".join(t.value for t in Task)
        raise ValidationError([("task", f"must be one of {valid}, got {raw.get('task')!r}")]) from None

    known = _COMMON | set(_TASK_PARAMS[task])
    for key in sorted(set(raw) - known):
        bad.append((key, f"unknown field for task {task.value}"))

    if raw.get("model", "strong") not in {k.value for k in Kind}:
        bad.append(("model", "must be 'strong' or 'weak'"))
    if raw.get("bc", "DD") not in {b.value for b in BoundaryCase}:
        bad.append(("bc", "must be one of DD, DN, ND, NN"))
    if raw.get("provenance", "assembled") not in {p.value for p in Provenance}:
        bad.append(("provenance", "must be 'assembled' or 'printed'"))
    if raw.get("scheme", "trapezoidal") not in ("trapezoidal", "eigen"):
        bad.append(("scheme", "must be 'trapezoidal' or 'eigen'"))

    n = raw.get("n", 100)
    if not (isinstance(n, int) and not isinstance(n, bool) and N_RANGE[0] <= n <= N_RANGE[1]):
        bad.append(("n", f"must be an integer in [{N_RANGE[0]}, {N_RANGE[1]}]"))
    default_gamma = ABSCISSA_GAMMA if task is Task.ABSCISSA_TABLE else 0.05
    gamma = raw.get("gamma", default_gamma)
    if not (_is_num(gamma) and 0 < gamma <= GAMMA_MAX):
        bad.append(("gamma", f"must be a number in (0, {GAMMA_MAX:g}]"))
    dt = raw.get("dt", 0.1)
    if not (_is_num(dt) and 0 < dt <= DT_MAX):
        bad.append(("dt", f"must be a number in (0, {DT_MAX:g}]"))
    T = raw.get("T", 100.0)
    if not (_is_num(T) and 0 < T <= T_MAX):
        bad.append(("T", f"must be a number in (0, {T_MAX:g}]"))
    if _is_num(T) and _is_num(dt) and dt > 0 and T > 0:
        if dt > T or abs(round(T / dt) * dt - T) > 1e-9 * T:
            bad.append(("dt", "T must be a positive multiple of dt"))
    seed = raw.get("seed", 42)
    if not (isinstance(seed, int) and not isinstance(seed, bool) and seed >= 0):
        bad.append(("seed", "must be a nonnegative integer"))
    name = raw.get("name", "run")
    if not isinstance(name, str) or not name or any(c in name for c in "/\\"):
        bad.append(("name", "must be a nonempty string without path separators"))

    params = dict(_TASK_PARAMS[task])
    for key in _TASK_PARAMS[task]:
        if key in raw:
            params[key] = raw[key]
    bad.extend(_validate_params(task, params))

    initial = raw.get("initial", Scenario.__dataclass_fields__["initial"].default_factory())
    if not isinstance(initial, dict):
        bad.append(("initial", "must be an object"))
        initial = {}
    else:
        for key in sorted(set(initial) - {"u0", "v0", "theta0"}):
            bad.append((f"initial.{key}", "unknown field"))
        for key in ("u0", "v0", "theta0"):
            try:
                field_from_json(initial.get(key, {"type": "zero"}), key)
            except ValidationError as exc:
                bad.extend(exc.violations)

    outputs = raw.get("outputs")
    if outputs is not None:
        allowed = OUTPUTS[task]
        if not (isinstance(outputs, list) and all(isinstance(o, str) for o in outputs)):
            bad.append(("outputs", "must be a list of output names"))
        else:
            for o in outputs:
                if o not in allowed:
                    bad.append(("outputs", f"unknown output {o!r} for {task.value}; choose from {', '.join(allowed)}"))
            outputs = tuple(outputs)

    if bad:
        raise ValidationError(bad)
    return Scenario(outputs=outputs, task=task, name=name, model=raw.get("model", "strong"), bc=raw.get("bc", "DD"),
                    n=n, gamma=float(gamma), T=float(T), dt=float(dt),
                    scheme=raw.get("scheme", "trapezoidal"), provenance=raw.get("provenance", "assembled"),
                    seed=seed, output_dir=raw.get("output_dir"), initial=initial, params=params)


def _validate_params(task: Task, p: dict) -> list[tuple[str, str]]:
    bad = []
    if "jobs" in p and not (isinstance(p["jobs"], int) and p["jobs"] >= 1):
        bad.append(("jobs", "must be a positive integer"))
    if task is Task.RESOLVENT:
        if not (_is_num(p["alpha"]) and p["alpha"] >= 0):
            bad.append(("alpha", "must be a nonnegative number"))
        if not (_is_num(p["s_min"]) and _is_num(p["s_max"]) and 0 < p["s_min"] < p["s_max"]):
            bad.append(("s_min", "need 0 < s_min < s_max"))
        if p["num"] is not None and not (isinstance(p["num"], int) and p["num"] >= 2):
            bad.append(("num", "must be an integer >= 2"))
    elif task is Task.ABSCISSA_TABLE:
        ns = p["ns"]
        if not (isinstance(ns, list) and ns and all(isinstance(k, int) and N_RANGE[0] <= k <= N_RANGE[1] for k in ns)):
            bad.append(("ns", f"must be a nonempty list of integers in [{N_RANGE[0]}, {N_RANGE[1]}]"))
    elif task is Task.CONTINUOUS_ROOTS:
        if not (isinstance(p["k_min"], int) and isinstance(p["k_max"], int) and 5 <= p["k_min"] <= p["k_max"] <= 60):
            bad.append(("k_min", "need integers 5 <= k_min <= k_max <= 60"))
        if not (_is_num(p["tol"]) and p["tol"] > 0):
            bad.append(("tol", "must be positive"))
        if p["seeds"] is not None:
            try:
                p["seeds"] = [complex(str(s).replace(" ", "")) for s in p["seeds"]]
            except (TypeError, ValueError):
                bad.append(("seeds", "must be a list of complex numbers such as '10j' or '-100'"))
    elif task is Task.SMOOTHNESS_SWEEP:
        js = p["js"]
        if not (isinstance(js, list) and js and all(isinstance(j, int) and j >= 1 for j in js)):
            bad.append(("js", "must be a nonempty list of positive integers"))
    elif task is Task.SIMULATE:
        if p["n_grid"] is not None and not (isinstance(p["n_grid"], int) and p["n_grid"] >= 2):
            bad.append(("n_grid", "must be an integer >= 2"))
        w = p["window"]
        if w is not None and not (isinstance(w, list) and len(w) == 2 and all(_is_num(x) for x in w) and w[0] < w[1]):
            bad.append(("window", "must be [start, end] with start < end"))
    return bad


def loads(text: str) -> list[Scenario]:
    """Parse a scenario document: one object or a list of objects (a batch)."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    if isinstance(raw, list):
        if not raw:
            raise ParseError("empty scenario batch")
        out, bad = [], []
        for i, item in enumerate(raw):
            try:
                out.append(validate(item))
            except ValidationError as exc:
                bad.extend((f"[{i}].{f}", m) for f, m in exc.violations)
        if bad:
            raise ValidationError(bad)
        return out
    return [validate(raw)]


def parse_scenario(path) -> Scenario | list[Scenario]:
    """Read and validate a scenario file; a batch file yields a list."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    items = loads(text)
    return items if text.lstrip().startswith("[") else items[0]
