"""Command-line front end.

Every command writes one table, either as CSV with a header row or as a JSON
object ``{schema_version, command, parameters, rows}``. Numbers are printed
with 12 significant digits; a non-finite number aborts the command.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import infotheory, optimizer, simulator, verify
from .cloner import average_qubit_fidelity, product_ansatz
from .qkit import Mode, Protocol

SCHEMA_VERSION = "1.0"
DIGITS = 12


class CliError(Exception):
    pass


def _num(x):
    x = float(x)
    if not math.isfinite(x):
        raise CliError(f"non-finite value {x} in output")
    return float(f"{x:.{DIGITS}g}")


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return _num(v)
    return v


def _csv_text(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.{DIGITS}g}"
    return str(v)


def render(command: str, parameters: dict, rows: list[dict], fmt: str) -> str:
    rows = [{k: _cell(v) for k, v in row.items()} for row in rows]
    if fmt == "json":
        doc = {
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "parameters": {k: _cell(v) for k, v in parameters.items()},
            "rows": rows,
        }
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    columns = list(rows[0]) if rows else []
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_text(row[c]) for c in columns])
    return buf.getvalue()


def fb_grid(lo: float, hi: float, step: float) -> list[float]:
    if step <= 0:
        raise CliError("--step must be positive")
    if hi < lo:
        raise CliError(f"empty range: --fb-min {lo} exceeds --fb-max {hi}")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + k * step, 12) for k in range(count)]


def cmd_threshold(args):
    value = infotheory.threshold(args.protocol)
    return {"protocol": args.protocol}, [{"protocol": args.protocol, "threshold": value}], True


def cmd_sweep(args):
    protocol = Protocol(args.protocol)
    lo, hi = optimizer.fidelity_domain(protocol)
    fb_min = lo if args.fb_min is None else args.fb_min
    fb_max = hi if args.fb_max is None else args.fb_max
    grid = fb_grid(fb_min, fb_max, args.step)
    if grid[0] < lo - 1e-12 or grid[-1] > hi + 1e-12:
        raise CliError(f"infeasible range for {protocol.value}: F_B must lie in [{lo:.6g}, {hi:.6g}]")
    rows = []
    for fb in grid:
        fb = min(max(fb, lo), hi)
        a = product_ansatz(protocol, fb, args.n)
        fe = average_qubit_fidelity(a, protocol, args.mode, "E")
        p = infotheory.curve_point(protocol, fb, min(fe, 1.0))
        rows.append({"F_B": p.F_B, "F_E": p.F_E, "I_AB": p.I_AB, "I_AE": p.I_AE, "rate": p.rate_lower_bound})
    params = {"protocol": protocol.value, "n": args.n, "mode": args.mode,
              "fb_min": fb_min, "fb_max": fb_max, "step": args.step}
    return params, rows, True


def cmd_optimize(args):
    problem = optimizer.OptimizationProblem(
        args.protocol, args.n, args.mode, args.fb,
        parameterization=args.param, restarts=args.restarts, seed=args.seed,
    )
    res = optimizer.optimize(problem)
    closed = optimizer.optimal_fe(args.protocol, args.fb)
    row = {
        "F_B_target": args.fb,
        "F_B": res.fb_achieved,
        "F_E": res.fe,
        "F_E_closed_form": closed,
        "deviation": abs(res.fe - closed),
        "converged": res.converged,
        **{f"residual_{k}": v for k, v in res.residuals.items()},
        "amplitudes": " ".join(f"{x:.{DIGITS}g}" for x in res.a.entries.real.ravel()),
    }
    params = {"protocol": args.protocol, "n": args.n, "mode": args.mode, "fb": args.fb,
              "param": args.param, "restarts": args.restarts, "seed": args.seed}
    if not res.converged:
        print(f"error: no start met the constraints (max residual {res.max_residual:.3g})", file=sys.stderr)
    return params, [row], res.converged


def cmd_simulate(args):
    if args.rounds < 1:
        raise CliError("--rounds must be >= 1")
    config = simulator.SimConfig.at_fidelity(args.protocol, args.n, args.mode, args.fb, args.rounds, args.seed)
    report = simulator.run(config)
    rows = [
        {"quantity": r.quantity, "empirical": r.empirical, "standard_error": r.standard_error,
         "analytic": r.analytic, "z": r.z, "qubits_sifted": report.qubits_sifted,
         "rounds_sifted": report.rounds_sifted}
        for r in simulator.empirical_vs_analytic(config, report)
    ]
    params = {"protocol": args.protocol, "n": args.n, "mode": args.mode, "fb": args.fb,
              "rounds": args.rounds, "seed": args.seed}
    return params, rows, True


def cmd_verify(args):
    n_values = (args.n,) if args.n is not None else None
    checks = verify.run_suite(args.suite, n_values, args.tamper, args.restarts, args.seed)
    rows = [{"suite": c.suite, "check": c.name, "value": c.value, "limit": c.limit,
             "bound": "max" if c.upper else "min", "status": c.status} for c in checks]
    params = {"suite": args.suite, "n": args.n if args.n is not None else "default", "tamper": args.tamper}
    return params, rows, all(c.passed for c in checks)


def _fidelity(text):
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seqclone", description="Cloning attacks on qubit sequences in QKD.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fb=False, n_default=1):
        p.add_argument("--protocol", choices=[x.value for x in Protocol], default=Protocol.BB84.value)
        p.add_argument("--n", type=int, default=n_default, help="qubits per sequence")
        p.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.INDEPENDENT.value)
        if fb:
            p.add_argument("--fb", type=_fidelity, required=True, help="Bob's target fidelity")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--out", default=None, help="output file (default: stdout)")

    p = sub.add_parser("threshold", help="F_B where I_AB = I_AE on the optimal curve")
    p.add_argument("--protocol", choices=[x.value for x in Protocol], required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("sweep", help="information curves over a grid of F_B")
    common(p)
    p.add_argument("--fb-min", type=_fidelity, default=None)
    p.add_argument("--fb-max", type=_fidelity, default=None)
    p.add_argument("--step", type=_fidelity, default=0.05)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("optimize", help="multi-start search for Eve's best cloner")
    common(p, fb=True, n_default=2)
    p.add_argument("--param", choices=[x.value for x in optimizer.Parameterization],
                   default=optimizer.Parameterization.GENERAL_REAL.value)
    p.add_argument("--restarts", type=int, default=optimizer.DEFAULT_RESTARTS)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("simulate", help="Monte-Carlo protocol rounds against the tensor-power cloner")
    common(p, fb=True, n_default=2)
    p.add_argument("--rounds", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run self-check suites")
    p.add_argument("--suite", choices=verify.SUITES + ("all",), default="all")
    p.add_argument("--n", type=int, default=None, help="restrict checks to one sequence length")
    p.add_argument("--tamper", action="store_true", help="perturb the cloners (negative control)")
    p.add_argument("--restarts", type=int, default=optimizer.DEFAULT_RESTARTS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        params, rows, ok = args.func(args)
        text = render(args.command, params, rows, args.format)
    except optimizer.InfeasibleTargetError as exc:
        print(f"error: infeasible target: {exc}", file=sys.stderr)
        return 1
    except (CliError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
