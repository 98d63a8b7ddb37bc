"""Command-line interface.

Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 acceptance failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ScenarioError, ValidationError
from .reports import emit_report, resolve_out_dir, run, run_batch
from .scenario import Scenario, Task, parse_scenario, validate

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_ACCEPTANCE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, n_default=None, gamma_default=None, sim: bool = False):
    p.add_argument("--model", choices=("strong", "weak"), default="strong")
    p.add_argument("--bc", choices=("DD", "DN", "ND", "NN"), default="DD")
    p.add_argument("--n", type=int, default=n_default)
    p.add_argument("--gamma", type=float, default=gamma_default)
    p.add_argument("--provenance", choices=("assembled", "printed"), default="assembled")
    p.add_argument("--seed", type=int, default=42, help="seed for dissipativity sampling (default 42)")
    p.add_argument("--out", default=None, help="output directory (overrides THERMO_OUT_DIR)")
    p.add_argument("--name", default=None)
    p.add_argument("--format", choices=("json", "text"), default="text", help="report printed to stdout")
    if sim:
        p.add_argument("--T", type=float, default=100.0)
        p.add_argument("--dt", type=float, default=0.1)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="thermomodal", description="Modal approximation of coupled wave-heat systems.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("spectrum", help="eigenvalues of the generator")
    _common(p, 32)

    p = sub.add_parser("resolvent", help="resolvent norm along the imaginary axis")
    _common(p, 32)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--s-min", type=float, default=1.0)
    p.add_argument("--s-max", type=float, default=1e3)
    p.add_argument("--num", type=int, default=None, help="points per half-line")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("abscissa", help="distance of the spectrum to the imaginary axis for several n")
    _common(p, None, None)
    p.add_argument("--ns", type=int, nargs="+", default=[8, 16, 24, 32])

    p = sub.add_parser("roots", help="eigenvalues of the continuous weak system from the characteristic determinant")
    _common(p, None, 0.05)
    p.add_argument("--k-min", type=int, default=5)
    p.add_argument("--k-max", type=int, default=30)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--seeds", nargs="+", default=None, help="explicit starting points, e.g. 10j -100")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("simulate", help="integrate the modal system and record energies")
    _common(p, 100, 0.05, sim=True)
    p.add_argument("--scheme", choices=("trapezoidal", "eigen"), default="trapezoidal")
    p.add_argument("--v0", default="sine:1",
                   help="velocity datum: 'sine:J', 'cosine:J', 'step' or 'zero' (default sine:1)")
    p.add_argument("--n-grid", type=int, default=None)
    p.add_argument("--window", type=float, nargs=2, default=None)

    p = sub.add_parser("sweep", help="energy curves for several initial data")
    _common(p, 100, 0.05, sim=True)
    p.add_argument("--kind", choices=("smoothness", "discontinuity"), default="smoothness")
    p.add_argument("--js", type=int, nargs="+", default=[1, 2, 3])
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("verify", help="run the acceptance checks")
    p.add_argument("--criteria", type=int, nargs="+", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("json", "text"), default="text")

    p = sub.add_parser("run", help="run a scenario file (one object or a list)")
    p.add_argument("scenario")
    p.add_argument("--out", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--format", choices=("json", "text"), default="text")
    return ap


def _velocity(spec: str) -> dict:
    if spec == "zero":
        return {"type": "zero"}
    if spec == "step":
        return {"type": "piecewise", "breakpoints": [1.5707963267948966], "values": [2.0, -1.0]}
    kind, _, j = spec.partition(":")
    if kind in ("sine", "cosine") and j.isdigit():
        return {"type": kind, "j": int(j)}
    raise ValidationError([("v0", f"cannot parse {spec!r}")])


def scenario_from_args(args) -> Scenario:
    """Translate subcommand flags into a validated scenario."""
    cmd = args.command
    if cmd == "verify":
        raw = {"task": Task.VERIFY.value, "name": "verify"}
        if args.criteria:
            raw["criteria"] = args.criteria
        return validate(raw)
    task = {"spectrum": Task.SPECTRUM, "resolvent": Task.RESOLVENT, "abscissa": Task.ABSCISSA_TABLE,
            "roots": Task.CONTINUOUS_ROOTS, "simulate": Task.SIMULATE}.get(cmd)
    if cmd == "sweep":
        task = Task.SMOOTHNESS_SWEEP if args.kind == "smoothness" else Task.DISCONTINUITY_SWEEP
    raw = {"task": task.value, "name": args.name or cmd, "model": args.model, "bc": args.bc,
           "provenance": args.provenance, "seed": args.seed}
    if args.n is not None:
        raw["n"] = args.n
    if args.gamma is not None:
        raw["gamma"] = args.gamma
    if hasattr(args, "T"):
        raw["T"], raw["dt"] = args.T, args.dt
    if cmd == "resolvent":
        raw.update(alpha=args.alpha, s_min=args.s_min, s_max=args.s_max, num=args.num, jobs=args.jobs)
    elif cmd == "abscissa":
        raw["ns"] = args.ns
    elif cmd == "roots":
        raw.update(k_min=args.k_min, k_max=args.k_max, tol=args.tol, seeds=args.seeds, jobs=args.jobs)
    elif cmd == "simulate":
        raw.update(scheme=args.scheme, n_grid=args.n_grid,
                   window=list(args.window) if args.window else None,
                   initial={"u0": {"type": "zero"}, "v0": _velocity(args.v0), "theta0": {"type": "zero"}})
    elif cmd == "sweep":
        raw["jobs"] = args.jobs
        if args.kind == "smoothness":
            raw["js"] = args.js
    return validate(raw)


def _print_report(report, fmt: str, out_dir) -> None:
    path = emit_report(report, out_dir / f"report.{'json' if fmt == 'json' else 'txt'}", fmt)
    sys.stdout.write(path.read_text(encoding="utf-8"))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            loaded = parse_scenario(args.scenario)
            if isinstance(loaded, list):
                out = resolve_out_dir(args.out)
                reports = run_batch(loaded, out, args.jobs)
                for rep in reports:
                    sys.stdout.write(json.dumps({"name": rep.scenario["name"], "status": rep.status,
                                                 "exit_code": rep.exit_code}) + "\n")
                return max(rep.exit_code for rep in reports)
            scenario = loaded
        else:
            scenario = scenario_from_args(args)
    except ScenarioError as exc:
        sys.stderr.write(f"thermomodal: {exc}\n")
        return EXIT_VALIDATION
    out = resolve_out_dir(args.out, scenario.output_dir)
    report = run(scenario, out)
    if scenario.task is Task.VERIFY:
        for row in _acceptance_lines(out):
            sys.stdout.write(row + "\n")
    _print_report(report, args.format, out)
    return report.exit_code


def _acceptance_lines(out):
    p = out / "acceptance.csv"
    if not p.exists():
        return []
    lines = p.read_text(encoding="utf-8").splitlines()[1:]
    rows = []
    for line in lines:
        cid, name, passed, runtime, budget = line.split(",")
        status = "PASS" if passed == "true" else "FAIL"
        rows.append(f"[{status}] criterion {int(cid):2d} {name} ({float(runtime):.2f}s/{float(budget):g}s)")
    return rows


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
