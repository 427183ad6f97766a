"""Command-line interface: ``psnspd <subcommand> ...``.

Every subcommand writes a JSON document to ``--output`` (stdout by default).
Failures exit with status 1 and print ``{"error": ..., "type": ...}`` on
stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .detector_model import PixelEfficiencies, ProbabilityMatrix, build_p_matrix
from .efficiency_fit import FitOptions
from .mc_simulator import SimulationConfig, simulate_pulses
from .photon_sources import ClickStatistics, PhotonStatistics, poisson_statistics
from .pipeline import (
    FitWorkflowConfig,
    counts_to_click_statistics,
    histogram_to_record,
    load_records,
    run_fit_workflow,
    run_reconstruct_workflow,
)
from .uncertainty import (
    PAPER_BUDGET,
    FluxErrorBudget,
    flux_relative_uncertainty,
    matrix_uncertainty,
)

logger = logging.getLogger("psnspd")


def _read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _etas_arg(args) -> PixelEfficiencies:
    if args.etas_file:
        return PixelEfficiencies.from_dict(_read_json(args.etas_file))
    if args.etas is None:
        raise ValueError("give --etas or --etas-file")
    return PixelEfficiencies(args.etas)


def _click_input(path):
    """A click-statistics file ``{"probs": [...]}`` or a count record file."""
    data = _read_json(path)
    if isinstance(data, dict) and "probs" in data:
        return ClickStatistics.from_dict(data)
    records = load_records(path)
    if len(records) != 1:
        raise ValueError(f"{path} holds {len(records)} records; expected one")
    return records[0]


def _budget(args) -> FluxErrorBudget:
    if getattr(args, "budget_file", None):
        return FluxErrorBudget.from_dict(_read_json(args.budget_file))
    return FluxErrorBudget(args.sigma_pm, args.sigma_op, args.sigma_at)


def cmd_build_matrix(args):
    return build_p_matrix(_etas_arg(args), args.max_photons).to_dict()


def cmd_simulate(args):
    etas = _etas_arg(args)
    if args.source_file:
        cfg = SimulationConfig(etas, args.n_pulses, args.seed,
                               source=PhotonStatistics.from_dict(_read_json(args.source_file)))
    else:
        cfg = SimulationConfig(etas, args.n_pulses, args.seed, mu=args.mu)
    hist = simulate_pulses(cfg, workers=args.workers)
    if args.as_record:
        return histogram_to_record(hist, args.rep_rate, args.mu).to_dict()
    return hist.to_dict()


def cmd_fit(args):
    records = [r for path in args.records for r in load_records(path)]
    mus = args.mu if args.mu else None
    options = FitOptions(n_restarts=args.restarts, seed=args.seed)
    config = FitWorkflowConfig(args.max_photons, args.background_rate, options)
    fit, matrix = run_fit_workflow(records, mus, config)
    return {"fit": fit.to_dict(), "matrix": matrix.to_dict()}


def cmd_reconstruct(args):
    matrix_doc = _read_json(args.matrix)
    # accept a bare matrix or the output of `fit`
    matrix = ProbabilityMatrix.from_dict(matrix_doc.get("matrix", matrix_doc))
    s_true = poisson_statistics(args.true_mu, matrix.max_photons) if args.true_mu is not None else None
    result, table = run_reconstruct_workflow(_click_input(args.clicks), matrix, s_true,
                                             args.background_rate)
    return {**result.to_dict(), "table": table}


def cmd_uncertainty(args):
    item = _click_input(args.clicks)
    mu = args.mu
    if isinstance(item, ClickStatistics):
        q = item
    else:
        q = counts_to_click_statistics(item, args.background_rate)
        mu = item.mu if mu is None else mu
    if mu is None:
        raise ValueError("mean photon number unknown: give --mu or store it in the record")
    report = matrix_uncertainty(
        q, mu,
        n_mc_sets=args.sets,
        n_trials_per_set=args.trials,
        budget=_budget(args),
        seed=args.seed,
        max_photons=args.max_photons,
        fit_options=FitOptions(n_restarts=args.restarts, seed=args.seed),
        workers=args.workers,
    )
    return report.to_dict()


def cmd_flux_error(args):
    budget = _budget(args)
    return {**budget.to_dict(), "flux_rel_sigma": flux_relative_uncertainty(budget)}


def _add_etas(p):
    p.add_argument("--etas", type=float, nargs="+", help="per-pixel efficiencies")
    p.add_argument("--etas-file", help='JSON file {"etas": [...]}')


def _add_budget(p):
    p.add_argument("--sigma-pm", type=float, default=PAPER_BUDGET.sigma_pm_rel,
                   help="power-meter relative uncertainty")
    p.add_argument("--sigma-op", type=float, default=PAPER_BUDGET.sigma_op_rel,
                   help="optical-coupler relative uncertainty")
    p.add_argument("--sigma-at", type=float, default=PAPER_BUDGET.sigma_at_rel,
                   help="per-attenuator relative uncertainty (three in chain)")
    p.add_argument("--budget-file", help="JSON file with sigma_pm_rel, sigma_op_rel, sigma_at_rel")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--max-photons", type=int, default=9)
    common.add_argument("--output", "-o", help="write JSON here instead of stdout")
    common.add_argument("--format", choices=["json"], default="json")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="psnspd",
        description="Parallel multi-pixel photon-number-resolving detector analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-matrix", parents=[common], help="efficiencies -> click-probability matrix")
    _add_etas(p)
    p.set_defaults(func=cmd_build_matrix)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo pulse train -> histogram")
    _add_etas(p)
    p.add_argument("--mu", type=float, help="Poisson mean photon number per pulse")
    p.add_argument("--source-file", help="photon statistics JSON instead of --mu")
    p.add_argument("--n-pulses", type=int, default=10_000_000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--as-record", action="store_true",
                   help="emit nested threshold counts instead of a histogram")
    p.add_argument("--rep-rate", type=float, default=1e7, help="Hz, used with --as-record")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[common], help="count records -> efficiencies and matrix")
    p.add_argument("records", nargs="+", help="record JSON files (object or array)")
    p.add_argument("--mu", type=float, nargs="+", help="override per-record mean photon numbers")
    p.add_argument("--restarts", type=int, default=16)
    p.add_argument("--background-rate", type=float, default=0.0,
                   help="dark events per second removed from the 1-click class")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("reconstruct", parents=[common], help="click statistics + matrix -> photon statistics")
    p.add_argument("clicks", help='record JSON or {"probs": [...]}')
    p.add_argument("matrix", help="matrix JSON (or fit output)")
    p.add_argument("--true-mu", type=float, help="tabulate against Poisson(true_mu)")
    p.add_argument("--background-rate", type=float, default=0.0)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("uncertainty", parents=[common], help="Monte Carlo spread of the fitted matrix")
    p.add_argument("clicks", help='record JSON or {"probs": [...]}')
    p.add_argument("--mu", type=float)
    p.add_argument("--sets", type=int, default=200)
    p.add_argument("--trials", type=int, default=10_000_000, help="pulses per resampled set")
    p.add_argument("--restarts", type=int, default=2)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--background-rate", type=float, default=0.0)
    _add_budget(p)
    p.set_defaults(func=cmd_uncertainty)

    p = sub.add_parser("flux-error", parents=[common], help="relative photon-flux uncertainty")
    _add_budget(p)
    p.set_defaults(func=cmd_flux_error)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        doc = args.func(args)
    except Exception as exc:  # reported as a machine-readable error object
        json.dump({"error": str(exc), "type": type(exc).__name__}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    text = json.dumps(doc, indent=2)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
