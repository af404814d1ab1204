"""
Experiment Runner - Command-Line Entry Point
run a scenario, sweep one of its parameters, or evaluate a closed-form model

    python -m execution.run_experiments run --scenario efficiency_p01 --seed 1 --out results
    python -m execution.run_experiments sweep --scenario efficiency_p01 --param p --values 0.001,0.01,0.1
    python -m execution.run_experiments model --name eta --grid p=0.01:0.3:30 --set N=32
"""

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from itertools import repeat
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from execution import __version__
from execution.analysis import (AimdModelParams, efficiency_bound, efficiency_eta,
                                efficiency_eta_exact, forward_coded_packets, padhye_window,
                                stationary_rate)
from execution.netsim import run_scenario
from execution.reports import (SWEEP_METRICS, RunReport, build_report, csv_text, write_report)
from execution.scenarios import (ScenarioError, build_scenario, bundled_scenarios, load_scenario,
                                 read_scenario_file, resolve_param, with_override)
from execution.settings import configure_logging

logger = logging.getLogger(__name__)

EXIT_RUNTIME = 1
EXIT_USAGE = 2


# =============================================================================
# ARGUMENT HELPERS
# =============================================================================

def resolve_scenario_path(name: str) -> Path:
    """A file path, or the id of a bundled scenario."""
    path = Path(name)
    if path.is_file():
        return path
    bundled = bundled_scenarios()
    if path.stem in bundled and path.suffix in ("", ".toml") and path.parent == Path("."):
        return bundled[path.stem]
    raise FileNotFoundError(f"scenario file not found: {name}")


def parse_scalar(text: str) -> Any:
    text = text.strip()
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def parse_values(spec: str) -> List[Any]:
    """'a,b,c' or 'start:stop:count' (inclusive linear grid). '' is the empty list."""
    spec = spec.strip()
    if not spec:
        return []
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid must be start:stop:count, got {spec!r}")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ValueError(f"grid count must be >= 1, got {count}")
        return [float(v) for v in np.linspace(start, stop, count)]
    return [parse_scalar(v) for v in spec.split(",") if v.strip()]


def parse_assignment(text: str) -> Tuple[str, str]:
    name, sep, value = text.partition("=")
    if not sep or not name.strip():
        raise ValueError(f"expected NAME=VALUE, got {text!r}")
    return name.strip(), value.strip()


# =============================================================================
# run
# =============================================================================

def cmd_run(scenario_path: str, seed: Optional[int] = None, out_dir: Optional[str] = None,
            timeseries: bool = False, duration: Optional[float] = None) -> RunReport:
    scenario = load_scenario(resolve_scenario_path(scenario_path), seed)
    if duration is not None:
        scenario = replace(scenario, sim_duration_s=duration)
    report = build_report(scenario, run_scenario(scenario))
    if out_dir is not None:
        write_report(report, Path(out_dir), timeseries)
    return report


def _handle_run(args) -> int:
    report = cmd_run(args.scenario, args.seed, args.out, args.timeseries, args.duration)
    print(f"✓ {report.scenario_id} (seed {report.seed}): efficiency {report.efficiency:.4f}")
    for row in report.summary_rows():
        completion = f", done in {row['completion_s']:.3f}s" if row["completion_s"] is not None else ""
        print(f"  flow {row['flow']} [{row['protocol']}]: {row['goodput_bps'] / 1e6:.3f} Mbps{completion}")
    return 0


# =============================================================================
# sweep
# =============================================================================

def _sweep_point(data: Dict[str, Any], source: str, param: str, value: Any) -> Dict[str, Any]:
    """One sweep run; module-level so worker processes can unpickle it."""
    scenario = build_scenario(with_override(data, param, value, source), source)
    return build_report(scenario, run_scenario(scenario)).sweep_metrics()


def cmd_sweep(scenario_path: str, param: str, values: List[Any], seed: Optional[int] = None,
              jobs: int = 1) -> str:
    """CSV text with one row per value, ordered by value."""
    path = resolve_scenario_path(scenario_path)
    source = str(path)
    data = read_scenario_file(path)
    if seed is not None:
        data["seed"] = seed
    # reject an unknown or unused parameter before running anything
    first = with_override(data, param, values[0] if values else 0, source)
    if values:
        build_scenario(first, source)

    if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
        values = sorted(values)

    if jobs > 1 and len(values) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            metrics = list(pool.map(_sweep_point, repeat(data), repeat(source), repeat(param), values))
    else:
        metrics = [_sweep_point(data, source, param, v) for v in values]

    run_seed = data.get("seed", 1)
    rows = [{"param": resolve_param(param), "value": v, "seed": run_seed, **m}
            for v, m in zip(values, metrics)]
    logger.info(f"✓ Sweep of {param} over {len(values)} values complete")
    return csv_text(rows, ["param", "value", "seed"] + SWEEP_METRICS)


def _handle_sweep(args) -> int:
    text = cmd_sweep(args.scenario, args.param, parse_values(args.values), args.seed, args.jobs)
    _emit(text, args.out)
    return 0


# =============================================================================
# model
# =============================================================================

def _padhye(params: Dict[str, float]) -> Dict[str, Any]:
    return {"p": params["p"], "window": padhye_window(params["p"])}


def _eta(params: Dict[str, float]) -> Dict[str, Any]:
    N, p = int(params["N"]), params["p"]
    return {
        "N": N, "p": p, "n": forward_coded_packets(N, p),
        "eta": efficiency_eta(N, p),
        "eta_exact": efficiency_eta_exact(N, p),
        "efficiency_bound": efficiency_bound(N, p),
    }


def _stationary(params: Dict[str, float]) -> Dict[str, Any]:
    model = AimdModelParams(params["alpha"], params["rtt"], params["mean_beta"], params["mean_T"])
    return {**params, "alpha_tilde": model.alpha_tilde, "rate": stationary_rate(model)}


# name -> (evaluator, default parameters, default grid, output columns)
MODELS = {
    "padhye": (_padhye, {"p": 0.01}, "p=0.001:0.2:50", ["p", "window"]),
    "eta": (_eta, {"N": 32, "p": 0.01}, "p=0.0:0.3:31",
            ["N", "p", "n", "eta", "eta_exact", "efficiency_bound"]),
    "stationary": (_stationary, {"alpha": 1.0, "rtt": 0.025, "mean_beta": 0.5, "mean_T": 1.0},
                   "mean_beta=0.1:0.9:9",
                   ["alpha", "rtt", "mean_beta", "mean_T", "alpha_tilde", "rate"]),
}


def cmd_model(name: str, grid: Optional[str] = None, sets: Optional[List[str]] = None) -> str:
    if name not in MODELS:
        raise ValueError(f"unknown model {name!r}; expected one of {sorted(MODELS)}")
    evaluate, defaults, default_grid, columns = MODELS[name]
    params = dict(defaults)
    for assignment in sets or []:
        key, value = parse_assignment(assignment)
        if key not in params:
            raise ValueError(f"model {name} has no parameter {key!r}; expected one of {sorted(params)}")
        params[key] = float(value)

    grid_name, grid_values = parse_assignment(grid or default_grid)
    if grid_name not in params:
        raise ValueError(f"model {name} has no parameter {grid_name!r}; expected one of {sorted(params)}")
    rows = [evaluate({**params, grid_name: float(v)}) for v in parse_values(grid_values)]
    return csv_text(rows, columns)


def _handle_model(args) -> int:
    _emit(cmd_model(args.name, args.grid, args.set), args.out)
    return 0


# =============================================================================
# main
# =============================================================================

def _emit(text: str, out: Optional[str]):
    if out is None:
        sys.stdout.write(text)
        return
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    Path(out).write_text(text, encoding="utf-8")
    logger.info(f"✓ Wrote {out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="run_experiments", description="CTCP experiment runner")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="DEBUG logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one scenario")
    run.add_argument("--scenario", required=True, help="scenario file or bundled scenario id")
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run.add_argument("--out", default=None, help="directory for CSV output")
    run.add_argument("--timeseries", action="store_true", help="also write the time-series CSV")
    run.add_argument("--duration", type=float, default=None, help="override the simulated seconds")
    run.set_defaults(handler=_handle_run)

    sweep = sub.add_parser("sweep", help="run a scenario once per parameter value")
    sweep.add_argument("--scenario", required=True)
    sweep.add_argument("--param", required=True, help="dotted field (link.loss.p) or alias (p, queue_bdp, ...)")
    sweep.add_argument("--values", required=True, help="v1,v2,... or start:stop:count")
    sweep.add_argument("--seed", type=int, default=None)
    sweep.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sweep.add_argument("--out", default=None, help="CSV file (default: stdout)")
    sweep.set_defaults(handler=_handle_sweep)

    model = sub.add_parser("model", help="evaluate a closed-form model over a grid")
    model.add_argument("--name", required=True, choices=sorted(MODELS))
    model.add_argument("--grid", default=None, help="NAME=start:stop:count or NAME=v1,v2,...")
    model.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="fix a model parameter (repeatable)")
    model.add_argument("--out", default=None, help="CSV file (default: stdout)")
    model.set_defaults(handler=_handle_model)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)

    try:
        return args.handler(args)
    except (ScenarioError, FileNotFoundError, ValueError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
