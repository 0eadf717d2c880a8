"""Command-line front end.

Subcommands: `run` executes a full experiment, `bounds` prints error/cost
tables, `certify` runs the classical integrator certificates, and `compare`
prints the quantum-vs-classical resource comparison.  All flags mirror
config fields; a JSON config file can supply any of them, with explicit
flags taking precedence.  ELASTOQ_THREADS caps the number of parallel
step-size jobs in `run`.
"""
from __future__ import annotations

import argparse
import json
import sys

from .classical import (
    cost_model,
    global_error_certificate,
    local_error_certificate,
    make_leapfrog_config,
    power_bound_certificate,
)
from .experiments import ExperimentConfig, run_experiment
from .hamiltonian import HamiltonianModel, format_cost_report, steps_and_cost
from .lattice import LatticeShape
from .media import MaterialParams

_BOUND_SCHEMES = ("first-norm", "first-commutator", "second")

FULL_SCALE = {"n": 5, "T": 30.0, "taus": (0.1, 0.2, 0.5, 1.0), "oracle": "krylov"}


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", type=int, default=None, help="qubits per spatial axis")
    parser.add_argument("--h", type=float, default=None, help="grid spacing")
    parser.add_argument("--rho", type=float, default=None, help="mass density")
    parser.add_argument("--E", type=float, default=None, help="Young's modulus")
    parser.add_argument("--nu", type=float, default=None, help="Poisson ratio")
    parser.add_argument("--T", type=float, default=None, help="total simulation time")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="elastoq")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a fidelity/field experiment")
    _add_model_flags(run)
    run.add_argument("--tau", type=float, action="append", default=None,
                     help="Trotter step size (repeatable)")
    run.add_argument("--init", choices=["pulse", "p", "s"], default=None)
    run.add_argument("--scheme", choices=["u1", "u2"], default=None)
    run.add_argument("--oracle", choices=["dense", "krylov", "auto"], default=None)
    run.add_argument("--out", default=None, help="output directory")
    run.add_argument("--clip", type=float, default=None,
                     help="clip fraction for exported field values")
    run.add_argument("--dry-run", action="store_true",
                     help="print the plan and gate accounts, produce no output")
    run.add_argument("--config", default=None, help="JSON config file")
    run.add_argument("--full-scale", action="store_true",
                     help="n=5, T=30 full-scale run (Krylov oracle; slow)")

    bounds = sub.add_parser("bounds", help="print error bound and gate cost tables")
    _add_model_flags(bounds)
    bounds.add_argument("--eps", type=float, default=0.1, help="target accuracy")
    bounds.add_argument("--scheme", choices=_BOUND_SCHEMES + ("all",), default="all")

    certify = sub.add_parser("certify", help="classical integrator certificates")
    _add_model_flags(certify)
    certify.add_argument("--tau", type=float, default=0.1, help="leapfrog step size")
    certify.add_argument("--eta", type=float, default=1.0, help="stability margin")
    certify.add_argument("--steps", type=int, default=1000,
                         help="steps for the power-bound probe evolution")

    compare = sub.add_parser("compare", help="quantum vs classical resource report")
    _add_model_flags(compare)
    compare.add_argument("--eps", type=float, default=0.1, help="target accuracy")

    return parser


_RUN_DEFAULTS = ExperimentConfig(n=2)


def _merged_run_config(args: argparse.Namespace) -> ExperimentConfig:
    values = {
        "n": _RUN_DEFAULTS.n, "h": _RUN_DEFAULTS.h, "rho": _RUN_DEFAULTS.rho,
        "E": _RUN_DEFAULTS.E, "nu": _RUN_DEFAULTS.nu, "T": _RUN_DEFAULTS.T,
        "taus": _RUN_DEFAULTS.taus, "init": _RUN_DEFAULTS.init,
        "scheme": _RUN_DEFAULTS.scheme, "oracle": _RUN_DEFAULTS.oracle,
        "out_dir": _RUN_DEFAULTS.out_dir, "clip": _RUN_DEFAULTS.clip,
    }
    if args.config:
        with open(args.config) as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(values)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update(loaded)
    if args.full_scale:
        values.update(FULL_SCALE)
        print("warning: full-scale run (19 qubits, T=30); expect a long wall time",
              file=sys.stderr)
    flag_map = {
        "n": args.n, "h": args.h, "rho": args.rho, "E": args.E, "nu": args.nu,
        "T": args.T, "taus": tuple(args.tau) if args.tau else None,
        "init": args.init, "scheme": args.scheme, "oracle": args.oracle,
        "out_dir": args.out, "clip": args.clip,
    }
    values.update({k: v for k, v in flag_map.items() if v is not None})
    values["taus"] = tuple(values["taus"])
    return ExperimentConfig(dry_run=args.dry_run, **values)


def _model_from_args(args: argparse.Namespace) -> tuple[HamiltonianModel, float]:
    n = args.n if args.n is not None else 2
    h = args.h if args.h is not None else 1.0
    rho = args.rho if args.rho is not None else 1.0
    e = args.E if args.E is not None else 0.646
    nu = args.nu if args.nu is not None else 0.255
    t = args.T if args.T is not None else 10.0
    model = HamiltonianModel.build(LatticeShape(n=n, h=h),
                                   MaterialParams(rho=rho, E=e, nu=nu))
    return model, t


def _cmd_run(args: argparse.Namespace) -> int:
    run_experiment(_merged_run_config(args))
    return 0


def _cmd_bounds(args: argparse.Namespace) -> int:
    model, t = _model_from_args(args)
    schemes = _BOUND_SCHEMES if args.scheme == "all" else (args.scheme,)
    blocks = []
    for scheme in schemes:
        budget = steps_and_cost(model, t, args.eps, scheme)
        blocks.append(format_cost_report(model, t, args.eps, budget))
    print("\n\n".join(blocks))
    return 0


def _cmd_certify(args: argparse.Namespace) -> int:
    model, t = _model_from_args(args)
    config = make_leapfrog_config(model, tau=args.tau, eta=args.eta, T=t)
    reports = [power_bound_certificate(model, config, m_max=args.steps)]
    if args.tau * config.l_norm <= 1.0:
        reports.append(local_error_certificate(model, args.tau))
        reports.append(global_error_certificate(model, config))
    print("\n\n".join(rep.to_text() for rep in reports))
    return 0 if all(rep.passed for rep in reports) else 1


def _cmd_compare(args: argparse.Namespace) -> int:
    model, t = _model_from_args(args)
    print("# Resource comparison on the same semidiscrete system.")
    print("# Excludes spatial discretization error, source terms, state")
    print("# preparation, readout, and fault-tolerance overhead.")
    print()
    print(cost_model(model, t, args.eps).to_text())
    for scheme in _BOUND_SCHEMES:
        budget = steps_and_cost(model, t, args.eps, scheme)
        print()
        print(format_cost_report(model, t, args.eps, budget))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "bounds": _cmd_bounds,
                "certify": _cmd_certify, "compare": _cmd_compare}
    try:
        return handlers[args.command](args)
    except Exception as exc:  # structured error record, nonzero exit
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
