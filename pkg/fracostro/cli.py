"""Batch front-end: derive | solve | kernel | sweep.

Exit codes: 0 success, 2 configuration or input error, 3 derivation error,
4 singular or oversized system, 1 anything unexpected. Errors go to standard
error as one JSON line.
"""

import argparse
import json
import logging
import os
import sys
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import NoReturn

import dotenv
import numpy as np

from fracostro._config import RunConfig, get_defaults, load_run_config
from fracostro._errors import ConfigError, DomainError, FracError, SingularLegendreError
from fracostro._filesystem import get_output_path, write_json
from fracostro._types import SampledPath, UniformGrid
from fracostro.lagrangian_dsl import LagrangianSpec, evaluate, parse
from fracostro.pathint import spectral_report
from fracostro.solver import BoundaryData, solve_stationary, write_trajectory
from fracostro.systems import coerce_param, from_config
from fracostro.variational import (
    coordinate_stack,
    derivation,
    energy_drift,
    euler_lagrange_residual,
    reduced_hamiltonian,
)

logger = logging.getLogger(__name__)

COMMANDS = ("derive", "solve", "kernel", "sweep")


def _csv_digits() -> int:
    return int(get_defaults().get("csv_digits", 17))


def build_grid(config: RunConfig) -> UniformGrid:
    return UniformGrid(config.grid.a, config.grid.b, config.grid.n)


def build_boundary(config: RunConfig, lag: LagrangianSpec, grid: UniformGrid) -> BoundaryData:
    """Explicit pairs, a profile, the reference trajectory, or zero data, in that order."""
    boundary = config.boundary
    if boundary is not None and boundary.profile is None:
        left = [(l, coerce_param("boundary", v)) for l, v in boundary.left or []]
        right = [(l, coerce_param("boundary", v)) for l, v in boundary.right or []]
        return BoundaryData(left=tuple(left), right=tuple(right))
    profile = boundary.profile if boundary is not None else config.reference
    if profile is not None:
        return BoundaryData.from_profile(lag, grid, profile)
    return BoundaryData.dirichlet_zero(lag)


def _reference_path(config: RunConfig, lag: LagrangianSpec, grid: UniformGrid) -> SampledPath | None:
    if config.reference is None:
        return None
    values = evaluate(parse(config.reference, params=set(lag.params)), {"t": grid.times()}, lag.params)
    return SampledPath(grid, values)


def run_derive(config: RunConfig) -> dict:
    return dict(derivation(from_config(config)))


def _solve_one(config: RunConfig) -> tuple[LagrangianSpec, SampledPath, dict]:
    lag = from_config(config)
    grid = build_grid(config)
    bc = build_boundary(config, lag, grid)
    x = solve_stationary(lag, grid, bc, config.solve)

    residual = euler_lagrange_residual(lag, x)
    interior = residual.interior()
    scale = float(np.max(np.abs(x.values))) or 1.0
    report: dict = {
        "system": lag.json(),
        "grid": grid.json(),
        "boundary": bc.json(),
        "el_residual_max": float(np.max(np.abs(residual.values[interior]))) if len(interior) else 0.0,
        "max_imag_ratio": float(np.max(np.abs(x.values.imag)) / scale),
    }
    try:
        h = reduced_hamiltonian(lag, x)
        report["energy_drift_abs"] = energy_drift(h.sampled, scale=1.0)
        report["energy_drift"] = energy_drift(h.sampled, scale=h.scale)
    except (SingularLegendreError, DomainError) as e:
        logger.info(f"No energy drift for {lag.name}: {e}")
        report["energy_drift"] = None

    reference = _reference_path(config, lag, grid)
    if reference is not None:
        report["reference_error"] = float(np.max(np.abs(x.values - reference.values)))
    return lag, x, report


def run_solve(config: RunConfig, out_dir: str) -> dict:
    lag, x, report = _solve_one(config)
    write_trajectory(get_output_path(out_dir, config.output.trajectory), coordinate_stack(lag, x), _csv_digits())
    write_json(get_output_path(out_dir, config.output.report), report)
    return report


def run_kernel(config: RunConfig, out_dir: str | None = None) -> dict:
    lag = from_config(config)
    grid = build_grid(config)
    bc = build_boundary(config, lag, grid) if config.boundary is not None else None
    report = spectral_report(lag, grid, bc, config.kernel)
    if out_dir is not None:
        write_json(get_output_path(out_dir, config.output.report), report.json())
        report.write_correlator(get_output_path(out_dir, config.output.correlator), _csv_digits())
    return report.json()


def run_sweep(config: RunConfig, out_dir: str) -> dict:
    """Solve once per alpha; sup-distances are measured against alpha = 1 when swept, else the first alpha."""
    if config.sweep is None:
        raise DomainError("sweep needs a 'sweep' section with alphas")
    alphas = config.sweep.alphas
    configs = [config.model_copy(update={"alpha": alpha}) for alpha in alphas]

    with ThreadPoolExecutor(max_workers=config.sweep.workers) as executor:
        results = list(executor.map(_solve_one, configs))

    reference_index = next((i for i, alpha in enumerate(alphas) if alpha == 1.0), 0)
    reference = results[reference_index][1].values
    entries = []
    for alpha, (lag, x, report) in zip(alphas, results, strict=True):
        name = f"trajectory_alpha_{alpha:g}.csv"
        write_trajectory(get_output_path(out_dir, name), coordinate_stack(lag, x), _csv_digits())
        entries.append(
            {
                "alpha": alpha,
                "trajectory": name,
                "sup_distance": float(np.max(np.abs(x.values - reference))),
                "el_residual_max": report["el_residual_max"],
                "energy_drift": report["energy_drift"],
            }
        )
    summary = {"reference_alpha": alphas[reference_index], "runs": entries}
    write_json(get_output_path(out_dir, config.output.report), summary)
    return summary


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        raise ConfigError(f"{self.prog}: {message}")


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    """Parse command-line arguments; usage errors raise ConfigError."""
    parser = _ArgumentParser(prog="fracostro", description="Fractional Ostrogradski mechanics toolkit.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="Run configuration (JSON or YAML)")
    parser.add_argument("--out", default=".", help="Output directory")
    parser.add_argument("--alpha", type=float, default=None, help="Override the configured alpha")
    parser.add_argument("--grid-n", type=int, default=None, help="Override the configured sample count")
    parser.add_argument("--log-level", default=None, help="Logging level (default: $FRACOSTRO_LOG_LEVEL or WARNING)")
    return parser.parse_args(argv)


def _print_derivation(result: dict) -> None:
    print(f"system: {result['system']}")
    print(f"L = {result['lagrangian']}")
    print(f"EL: {result['euler_lagrange']} = 0")
    for index, momentum in enumerate(result["momenta"]):
        print(f"p{index} = {momentum}")
    print(f"H = {result['hamiltonian']}")


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except ConfigError as e:
        print(json.dumps(e.json()), file=sys.stderr)
        return e.exit_code

    dotenv.load_dotenv()
    level = (args.log_level or os.getenv("FRACOSTRO_LOG_LEVEL") or "WARNING").upper()
    logging.basicConfig(level=level, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")

    try:
        config = load_run_config(args.config, alpha=args.alpha, grid_n=args.grid_n)
        if args.command == "derive":
            result = run_derive(config)
            _print_derivation(result)
            if args.out != ".":
                write_json(get_output_path(args.out, "derive.json"), result)
        elif args.command == "solve":
            run_solve(config, args.out)
        elif args.command == "kernel":
            result = run_kernel(config, args.out)
            print(json.dumps({"log_det": result["log_det"], "gap_estimates": result["gap_estimates"]}))
        else:
            run_sweep(config, args.out)
    except FracError as e:
        print(json.dumps(e.json()), file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.debug("Unexpected failure", exc_info=True)
        print(json.dumps({"error": "internal", "message": str(e)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
