"""Command-line front end.

Subcommands
-----------
gen-instance   write an instance file (named or generated)
solve          run one method, write a per-restart / per-iteration trace CSV
bench          run every ``[run NAME]`` of a config file, write a summary CSV
validate       check assumptions and spectral bounds of an instance

Exit codes: 0 success, 1 validation failure, 2 usage or configuration error.
The ``SEED`` environment variable overrides every seed.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import os
import sys
from pathlib import Path

import numpy as np

from .adapter import restarted_solve
from .baselines import BaselineConfig, run_baseline
from .fileformat import ConfigError, dump_instance, load_instance, parse_bench_config
from .instances import (KINDS, NAMED_INSTANCES, InstanceSpec, block_parameters, generate, named_instance,
                        validate_tridiag_spectrum, validate_spectrum_E)
from .oracles import CostModel, OracleLedger
from .problem import (AssumptionViolation, DegenerateProblem, ProblemParams, check_spectra, r2_metric,
                      solve_exact_quadratic, validate_assumption5)
from .traces import format_float, write_trace_csv

EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2
SUMMARY_HEADER = ("run", "instance", "method", "kappa_x", "kappa_y", "kappa_xy", "r2", "grad_f", "grad_g",
                  "matvec_B", "matvec_Bt", "exec_time")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _seed(default):
    env = os.environ.get("SEED")
    if env is None:
        return default
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"environment variable SEED must be an integer, got {env!r}") from None


def _parse_params(text):
    vals = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        if "=" not in item:
            raise ConfigError(f"--params entry {item!r} is not key=value")
        k, v = (s.strip() for s in item.split("=", 1))
        try:
            vals[k] = float(v)
        except ValueError:
            raise ConfigError(f"--params field '{k}' is not a number") from None
    try:
        return ProblemParams(**vals)
    except TypeError as exc:
        raise ConfigError(f"--params: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"--params: {exc}") from None


def resolve_instance(ref, seed=None):
    """``(problem, spec or None, meta)`` for a named instance or an instance file."""
    if ref in NAMED_INSTANCES:
        spec = NAMED_INSTANCES[ref]
        if seed is not None and spec.kind == "random-quadratic":
            spec = dataclasses.replace(spec, seed=seed)
        meta = {"name": ref, "kind": spec.kind}
        if spec.kind != "random-quadratic":
            meta["block_size"] = spec.dx
        return generate(spec), spec, meta
    if ref == "bilinear_1d":
        return named_instance(ref), None, {"name": ref}
    path = Path(ref)
    if not path.is_file():
        raise ConfigError(f"instance {ref!r} is neither a known name ({', '.join(sorted(NAMED_INSTANCES))}, "
                          "bilinear_1d) nor a readable file")
    problem, meta = load_instance(path.read_text())
    return problem, None, meta


def _write(text, output):
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


def cmd_gen_instance(args):
    seed = _seed(args.seed)
    if args.name:
        problem, spec, meta = resolve_instance(args.name, seed)
    else:
        if not args.kind or not args.params:
            raise ConfigError("gen-instance needs --name, or --kind together with --params")
        spec = InstanceSpec(args.kind, _parse_params(args.params), args.dx, args.dy, args.A,
                            0 if seed is None else seed)
        problem = generate(spec)
        meta = {"kind": spec.kind}
        if spec.kind in ("coupled-block", "chain-gradient", "bilinear-tridiag"):
            meta["block_size"] = spec.dx
    _write(dump_instance(problem, meta), args.output)
    return EXIT_OK


def _run_method(problem, method, eps, relative, restarts, max_iters, step, model):
    ledger = OracleLedger()
    sol = solve_exact_quadratic(problem)
    R2 = r2_metric(problem, sol, np.zeros(problem.dx), np.zeros(problem.dy))
    target = eps * R2 if relative else eps
    if method == "sliding":
        _, _, trace = restarted_solve(problem, target, ledger, solution=sol, n_restarts=restarts,
                                      cost_model=model)
    else:
        res = run_baseline(problem, BaselineConfig(method, step, max_iters, target), ledger, solution=sol,
                           cost_model=model)
        trace = res.trace
    return trace


def cmd_solve(args):
    problem, _, _ = resolve_instance(args.instance, _seed(None))
    model = CostModel(args.tau_f, args.tau_g, args.tau_B)
    trace = _run_method(problem, args.method, args.eps, not args.absolute, args.restarts, args.max_iters,
                        args.step, model)
    _write(write_trace_csv(trace), args.output)
    return EXIT_OK


def cmd_bench(args):
    text = Path(args.config).read_text() if args.config != "-" else sys.stdin.read()
    runs = parse_bench_config(text, seed_override=os.environ.get("SEED"))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for rc in runs:
        problem, _, _ = resolve_instance(rc.instance, rc.seed)
        model = CostModel(rc.tau_f, rc.tau_g, rc.tau_B)
        trace = _run_method(problem, rc.method, rc.eps, rc.relative, rc.restarts, rc.max_iters, rc.step, model)
        if rc.output:
            Path(rc.output).write_text(write_trace_csv(trace))
        last = trace[-1]
        try:
            cn = problem.condition_numbers()
            kap = (cn.kappa_x, cn.kappa_y, cn.kappa_xy)
        except DegenerateProblem:
            kap = (None, None, None)
        w.writerow([rc.name, rc.instance, rc.method, *map(format_float, kap), format_float(last.r2), last.grad_f,
                    last.grad_g, last.matvec_B, last.matvec_Bt, format_float(last.exec_time)])
    _write(buf.getvalue(), args.output)
    return EXIT_OK


def validation_report(problem, spec=None, meta=None):
    """Report lines and overall verdict for :func:`cmd_validate`."""
    meta = meta or {}
    lines = []
    ok = True
    a5 = validate_assumption5(problem.params)
    lines.append(f"assumption5_ok={'true' if a5 else 'false'}")
    for v in a5.violations:
        lines.append(f"  violated: {v}")
    ok &= bool(a5)
    spectra = check_spectra(problem)
    lines.append(f"spectra_ok={'true' if spectra else 'false'}")
    for v in spectra.violations:
        lines.append(f"  violated: {v}")
    ok &= bool(spectra)
    kind = spec.kind if spec is not None else meta.get("kind")
    B = problem.dense_B()
    if kind == "coupled-block":
        d = spec.dx if spec is not None else int(meta.get("block_size", 1))
        n, a, b, c = block_parameters(problem.params)
        E = B[::d, ::d]
        rep = validate_spectrum_E(E, a, b, c if problem.params.mu_xy > 0 else 0.0, n)
        lines.append(f"block_coupling n={n}")
        lines.extend(rep.lines())
        ok &= rep.ok
    elif kind == "bilinear-tridiag":
        p = problem.params
        rep = validate_tridiag_spectrum(p.L_xy, max(p.mu_xy, p.mu_yx), B.shape[0])
        lines.append("bidiagonal_coupling")
        lines.extend(rep.lines())
        ok &= rep.ok
    return lines, ok


def cmd_validate(args):
    problem, spec, meta = resolve_instance(args.instance, _seed(None))
    lines, ok = validation_report(problem, spec, meta)
    print("\n".join(lines))
    print(f"valid={'true' if ok else 'false'}")
    return EXIT_OK if ok else EXIT_INVALID


def build_parser():
    ap = _Parser(prog="bilinear-sliding", description="Sliding solver for bilinearly-coupled saddle problems.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-instance", help="write an instance file")
    g.add_argument("--name", help="named instance to write")
    g.add_argument("--kind", choices=KINDS)
    g.add_argument("--params", help="comma separated, e.g. L_x=10,L_y=10,L_xy=20,mu_x=1,mu_y=1")
    g.add_argument("--dx", type=int, default=4)
    g.add_argument("--dy", type=int)
    g.add_argument("--A", type=float, default=1.0)
    g.add_argument("--seed", type=int)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen_instance)

    s = sub.add_parser("solve", help="run one method and write its trace CSV")
    s.add_argument("--instance", required=True)
    s.add_argument("--method", choices=("sliding", "extragradient", "gda"), default="sliding")
    s.add_argument("--eps", type=float, default=1e-8, help="target, relative to the initial R^2 by default")
    s.add_argument("--absolute", action="store_true", help="treat --eps as an absolute target")
    s.add_argument("--restarts", type=int)
    s.add_argument("--max-iters", type=int, default=100_000)
    s.add_argument("--step", type=float)
    s.add_argument("--tau-f", type=float, default=1.0)
    s.add_argument("--tau-g", type=float, default=1.0)
    s.add_argument("--tau-B", type=float, default=1.0)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run a config matrix and write a summary CSV")
    b.add_argument("--config", required=True)
    b.add_argument("-o", "--output")
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("validate", help="check assumptions and spectral bounds")
    v.add_argument("--instance", required=True)
    v.set_defaults(func=cmd_validate)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        if getattr(args, "eps", 1.0) is not None and getattr(args, "eps", 1.0) <= 0:
            raise ConfigError("--eps must be positive")
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AssumptionViolation, DegenerateProblem) as exc:
        print(f"invalid problem: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
