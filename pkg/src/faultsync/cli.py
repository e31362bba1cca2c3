"""Command-line front end.

    faultsync analyze  SCENARIO...   decomposition and predicted weights
    faultsync certify  SCENARIO...   agent admissibility and scale-free check
    faultsync simulate SCENARIO...   time series (CSV or JSON)
    faultsync verify   SCENARIO...   predicted vs. measured report
    faultsync fault    SCENARIO...   remove the scenario's faults, then verify

SCENARIO is a path to a JSON file or ``fixture:NAME`` for a bundled one.
Outputs go to ``<out>/<scenario id>/``. Exit status: 0 success, 2 failed
verification or certification, 1 any other error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import FaultSyncError, NotCertified
from .graph import bicomponents, block_decomposition, condensation_dot, has_spanning_tree, zero_eigenvalue_multiplicity
from .protocol import disc_grid, halfplane_grid
from .scenario import Scenario, fixture_names, load_fixture, load_scenario
from .simulator import analyze, build_network, certification_summary, coupling_matrix, simulate
from .sync import beta_weights, left_eigenvector

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n")


def _load(ref: str) -> Scenario:
    if ref.startswith("fixture:"):
        return load_fixture(ref.split(":", 1)[1])
    return load_scenario(ref)


def _parse_edge(text: str) -> tuple[int, int]:
    try:
        a, b = text.split(":")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected FROM:TO, got {text!r}") from None


def cmd_analyze(sc: Scenario, args, out: Path) -> int:
    g = sc.graph
    part = bicomponents(g)
    blocks = block_decomposition(g, coupling_matrix(sc))
    beta = beta_weights(blocks)
    result = {
        "scenario_id": sc.id,
        "time_domain": sc.time_domain,
        "nodes": g.n,
        "k": blocks.k,
        "has_spanning_tree": has_spanning_tree(g),
        "zero_eigenvalue_multiplicity": zero_eigenvalue_multiplicity(coupling_matrix(sc)),
        "bicomponents": [{"nodes": list(c), "basic": b} for c, b in zip(part.components, part.basic)],
        "left_eigenvectors": [left_eigenvector(L).tolist() for L in blocks.Li],
        "beta": beta.to_dict(),
    }
    _write_json(out / "analysis.json", result)
    (out / "condensation.dot").write_text(condensation_dot(g))
    if args.format == "csv":
        lines = ["node," + ",".join(f"B{i}" for i in range(1, blocks.k + 1))]
        for v, row in zip(beta.nodes, beta.beta):
            lines.append(f"{v}," + ",".join(repr(float(x)) for x in row))
        (out / "beta.csv").write_text("\n".join(lines) + "\n")
    print(f"{sc.id}: k={blocks.k}, non-basic nodes={list(beta.nodes)}")
    return EXIT_OK


def cmd_certify(sc: Scenario, args, out: Path) -> int:
    summary = certification_summary(sc)
    if not args.no_grid:
        grid = halfplane_grid() if sc.time_domain == "continuous" else disc_grid()
        sweep = certification_summary(sc, lambdas=grid)
        summary["grid"] = sweep["scale_free"]
        summary["passed"] = summary["passed"] and sweep["passed"]
    _write_json(out / "certification.json", summary)
    print(f"{sc.id}: certification {'passed' if summary['passed'] else 'FAILED'}")
    return EXIT_OK if summary["passed"] else EXIT_FAILED


def cmd_simulate(sc: Scenario, args, out: Path) -> int:
    from .protocol import closed_loop

    sys_ = closed_loop(sc.agent, sc.protocol)
    blocks = block_decomposition(sc.graph, coupling_matrix(sc))
    series = simulate(build_network(blocks, sys_), sc.initial_states(args.seed), sc.sim.T, sc.sim.h)
    if args.format == "json":
        _write_json(out / "timeseries.json", series.to_dict(args.every))
    else:
        (out / "timeseries.csv").write_text(series.to_csv(args.every))
    print(f"{sc.id}: {len(series.times)} samples")
    return EXIT_OK


def cmd_verify(sc: Scenario, args, out: Path) -> int:
    try:
        run = analyze(sc, certify=not args.no_certify, tolerance=args.tolerance, seed=args.seed)
    except NotCertified as exc:
        _write_json(out / "certification.json", exc.args[0])
        print(f"{sc.id}: not certified (use --no-certify to waive)", file=sys.stderr)
        return EXIT_FAILED
    rep = run.report
    _write_json(out / "report.json", rep.to_dict())
    if args.format == "csv":
        (out / "timeseries.csv").write_text(run.series.to_csv(args.every))
    dev = "n/a" if rep.max_beta_deviation is None else f"{rep.max_beta_deviation:.2e}"
    print(f"{sc.id}: k={rep.k}, max disagreement={max(rep.disagreement):.2e}, "
          f"non-basic error={rep.nonbasic_error:.2e}, beta deviation={dev}, "
          f"{'PASS' if rep.passed else 'FAIL'}")
    return EXIT_OK if rep.passed else EXIT_FAILED


def cmd_fault(sc: Scenario, args, out: Path) -> int:
    faulted = sc.faulted(tuple(args.remove))
    _write_json(out / "graph.json", faulted.graph.to_dict())
    return cmd_verify(faulted, args, out)


COMMANDS = {
    "analyze": cmd_analyze,
    "certify": cmd_certify,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "fault": cmd_fault,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="faultsync", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--list-fixtures", action="store_true", help="print bundled scenario names and exit")
    sub = ap.add_subparsers(dest="command")
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("scenarios", nargs="+", metavar="SCENARIO")
        p.add_argument("--out", type=Path, default=Path("out"))
        p.add_argument("--seed", type=int, default=None, help="override the random initial-state seed")
        p.add_argument("--tolerance", type=float, default=1e-3, help="pass threshold for verify reports")
        p.add_argument("--no-certify", action="store_true", help="waive certification before verifying")
        p.add_argument("--format", choices=("csv", "json"), default="json" if name != "simulate" else "csv")
        p.add_argument("--every", type=int, default=1, help="keep every n-th sample in time series output")
        if name == "certify":
            p.add_argument("--no-grid", action="store_true", help="only check the scenario's own eigenvalues")
        if name == "fault":
            p.add_argument("--remove", type=_parse_edge, action="append", default=[], metavar="FROM:TO",
                           help="additional edge to remove (repeatable)")
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    if args.list_fixtures:
        print("\n".join(fixture_names()))
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_ERROR
    if args.every < 1:
        print("error: --every must be positive", file=sys.stderr)
        return EXIT_ERROR
    status = EXIT_OK
    for ref in args.scenarios:
        try:
            sc = _load(ref)
            out = args.out / sc.id
            out.mkdir(parents=True, exist_ok=True)
            rc = COMMANDS[args.command](sc, args, out)
        except (FaultSyncError, OSError, ValueError, ArithmeticError) as exc:
            print(f"error: {ref}: {type(exc).__name__}: {exc}", file=sys.stderr)
            rc = EXIT_ERROR
        except Exception as exc:  # last resort: report instead of a traceback
            print(f"internal error: {ref}: {type(exc).__name__}: {exc}", file=sys.stderr)
            rc = EXIT_ERROR
        if rc == EXIT_ERROR or status == EXIT_ERROR:
            status = EXIT_ERROR
        else:
            status = max(status, rc)
    return status


if __name__ == "__main__":
    sys.exit(main())
