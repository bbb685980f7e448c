"""Experiment runner: criterion sweeps, reconstructions, property suites.

Subcommands: ``criterion``, ``reconstruct``, ``properties``, ``mesh-dump``.
A JSON config file supplies defaults (``--config``); individual flags
override it. Every report embeds the fully resolved configuration, and all
randomness is seeded, so identical configs reproduce reports byte for byte.

Exit codes: 0 success, 1 validation error, 2 criterion not met,
3 infeasible reconstruction, 4 solver non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .criterion import (
    LAMBDA_FLOOR,
    BoxBounds,
    CriterionData,
    closed_form_step_count,
    evaluate_criterion,
    find_sufficient_m,
)
from .fem import assemble, build_disk_geometry, mesh_to_text, triangulate
from .properties import run_property_suites
from .solver import (
    ConvergenceError,
    InfeasibleProblemError,
    ReconstructionResult,
    SdpProblem,
    SolverOptions,
    solve,
    solve_noisy,
)
from .symmat import SymMatrix, spectral_norm

__all__ = ["ExperimentConfig", "main"]

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CRITERION = 2
EXIT_INFEASIBLE = 3
EXIT_NO_CONVERGENCE = 4


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment parameters; defaults here are the CLI defaults."""

    a: float = 1.0
    b: float = 2.0
    n: int = 2
    interface_radius: float = 0.5
    segments_per_arc: int = 8
    mesh_size: float = 0.1
    m: int | None = None
    m_max: int = 40
    lambda_floor: float = LAMBDA_FLOOR
    true_gamma: list[float] | str = "random"
    gamma_seed: int = 0
    delta: float = 0.0
    noise_seed: int = 0
    opt_tol: float | None = None
    feas_tol: float = 1e-9
    max_newton: int = 50
    mu_factor: float = 0.2
    samples: int = 200
    seed: int = 0
    output_dir: str = "."
    force: bool = False

    @classmethod
    def resolve(cls, file_values: dict, flag_values: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(file_values) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        merged = dict(file_values)
        merged.update({k: v for k, v in flag_values.items() if v is not None})
        return cls(**merged)

    def bounds(self) -> BoxBounds:
        return BoxBounds(self.a, self.b, self.n)

    def geometry(self):
        return build_disk_geometry(self.n, self.interface_radius, self.segments_per_arc)

    def solver_options(self) -> SolverOptions:
        return SolverOptions(
            opt_tol=self.opt_tol,
            feas_tol=self.feas_tol,
            max_newton=self.max_newton,
            mu_factor=self.mu_factor,
        )

    def resolve_true_gamma(self, bounds: BoxBounds) -> np.ndarray:
        if isinstance(self.true_gamma, str):
            if self.true_gamma != "random":
                raise ValueError(
                    f"true_gamma must be a vector or 'random', got {self.true_gamma!r}"
                )
            rng = np.random.default_rng(self.gamma_seed)
            return bounds.a + (bounds.b - bounds.a) * rng.random(bounds.n)
        gamma = np.asarray(self.true_gamma, dtype=float)
        if gamma.shape != (bounds.n,):
            raise ValueError(f"true_gamma must have length {bounds.n}")
        if not bounds.contains(gamma):
            raise ValueError("true_gamma must lie in [a, b]^n")
        return gamma


def _criterion_payload(
    data: CriterionData,
    bounds: BoxBounds,
    m: int,
    lambda_floor: float,
    swept: bool,
    history: tuple[float, ...] | None,
) -> dict:
    return {
        "bounds": {"a": bounds.a, "b": bounds.b, "n": bounds.n},
        "k_max": data.k_max,
        "k_closed_form": closed_form_step_count(bounds),
        "m": m,
        "swept": swept,
        "eigenvalues": [
            {"j": j, "k": k, "value": data.eigenvalues[(j, k)]}
            for (j, k) in sorted(data.eigenvalues)
        ],
        "lambda": data.lam,
        "lambda_floor": lambda_floor,
        "fulfilled": data.fulfilled(lambda_floor),
        "lambda_history": None if history is None else list(history),
    }


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(cell) for cell in row])


def _format_cell(cell) -> str:
    if isinstance(cell, float):
        return f"{cell:.17g}"
    return str(cell)


def _noise_matrix(m: int, seed: int) -> SymMatrix:
    """Symmetric Gaussian noise direction with unit spectral norm, so that
    delta times it saturates the noise bound exactly."""
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((m, m))
    sym = SymMatrix(0.5 * (raw + raw.T))
    return (1.0 / spectral_norm(sym)) * sym


def _evaluate_setup(config: ExperimentConfig):
    """Common criterion stage: fixed m evaluates directly, otherwise the
    incremental sweep picks the smallest sufficient m."""
    bounds = config.bounds()
    geometry = config.geometry()
    if config.m is not None:
        if config.m < 1:
            raise ValueError(f"m must be >= 1, got {config.m}")
        fmap = assemble(geometry, config.mesh_size, config.m)
        data = evaluate_criterion(fmap, bounds)
        return bounds, fmap, data, config.m, False, None
    sweep = find_sufficient_m(
        geometry, bounds, config.mesh_size, config.m_max, config.lambda_floor
    )
    fmap = assemble(geometry, config.mesh_size, sweep.m)
    return bounds, fmap, sweep.data, sweep.m, True, sweep.history


def run_criterion(config: ExperimentConfig) -> int:
    bounds, _, data, m, swept, history = _evaluate_setup(config)
    payload = {
        "command": "criterion",
        "config": asdict(config),
        "criterion": _criterion_payload(
            data, bounds, m, config.lambda_floor, swept, history
        ),
    }
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "report.json", payload)
    return EXIT_OK if data.fulfilled(config.lambda_floor) else EXIT_CRITERION


def run_reconstruct(config: ExperimentConfig) -> int:
    bounds, fmap, data, m, swept, history = _evaluate_setup(config)
    criterion_payload = _criterion_payload(
        data, bounds, m, config.lambda_floor, swept, history
    )
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if not data.fulfilled(config.lambda_floor) and not config.force:
        _write_json(
            out_dir / "report.json",
            {
                "command": "reconstruct",
                "config": asdict(config),
                "criterion": criterion_payload,
                "error": "criterion not met; rerun with force to reconstruct anyway",
            },
        )
        return EXIT_CRITERION

    true_gamma = config.resolve_true_gamma(bounds)
    exact = fmap.measurements(true_gamma)
    if config.delta > 0.0:
        noisy = exact + config.delta * _noise_matrix(m, config.noise_seed)
    else:
        noisy = exact

    certified = data.fulfilled(config.lambda_floor)
    try:
        if certified:
            result = solve_noisy(
                fmap, bounds, noisy, config.delta, data, config.solver_options()
            )
        else:
            # Forced run without a certificate: same program, no radius.
            target = noisy + config.delta * SymMatrix.identity(m)
            result = solve(
                SdpProblem(fmap, bounds, target, config.delta), config.solver_options()
            )
    except InfeasibleProblemError as exc:
        _write_json(
            out_dir / "report.json",
            {
                "command": "reconstruct",
                "config": asdict(config),
                "criterion": criterion_payload,
                "error": f"infeasible: {exc}",
            },
        )
        return EXIT_INFEASIBLE
    except ConvergenceError as exc:
        _write_json(
            out_dir / "report.json",
            {
                "command": "reconstruct",
                "config": asdict(config),
                "criterion": criterion_payload,
                "error": f"no convergence: {exc}",
            },
        )
        return EXIT_NO_CONVERGENCE

    _write_reconstruction_outputs(
        out_dir, config, criterion_payload, true_gamma, result
    )
    return EXIT_OK


def _write_reconstruction_outputs(
    out_dir: Path,
    config: ExperimentConfig,
    criterion_payload: dict,
    true_gamma: np.ndarray,
    result: ReconstructionResult,
) -> None:
    errors = np.abs(result.minimizer - true_gamma)
    payload = {
        "command": "reconstruct",
        "config": asdict(config),
        "criterion": criterion_payload,
        "true_coefficients": true_gamma.tolist(),
        "reconstruction": {
            "minimizer": result.minimizer.tolist(),
            "objective": result.objective,
            "constraint_margin": result.constraint_margin,
            "iterations": result.iterations,
            "certified_error_radius": result.certified_error_radius,
        },
        "errors": {
            "per_component": errors.tolist(),
            "max_abs": float(errors.max()),
        },
    }
    _write_json(out_dir / "report.json", payload)

    radius = result.certified_error_radius
    rows = [
        [j + 1, true_gamma[j], result.minimizer[j], errors[j], "" if radius is None else radius]
        for j in range(true_gamma.shape[0])
    ]
    _write_csv(
        out_dir / "reconstruction.csv",
        ["component", "true_value", "reconstructed", "abs_error", "certified_radius"],
        rows,
    )
    trace_rows = [[rec.stage, rec.objective, rec.margin] for rec in result.trace]
    _write_csv(out_dir / "trace.csv", ["iteration", "objective", "margin"], trace_rows)


def run_properties(config: ExperimentConfig) -> int:
    bounds, fmap, data, m, swept, history = _evaluate_setup(config)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    criterion_payload = _criterion_payload(
        data, bounds, m, config.lambda_floor, swept, history
    )

    if not data.fulfilled(config.lambda_floor):
        _write_json(
            out_dir / "report.json",
            {
                "command": "properties",
                "config": asdict(config),
                "criterion": criterion_payload,
                "error": "criterion not met; converse-monotonicity suite needs lam > 0",
            },
        )
        return EXIT_CRITERION

    outcomes = run_property_suites(fmap, bounds, data.lam, config.samples, config.seed)
    payload = {
        "command": "properties",
        "config": asdict(config),
        "criterion": criterion_payload,
        "properties": [
            {
                "name": o.name,
                "passed": o.passed,
                "total": o.total,
                "first_failure": o.first_failure,
            }
            for o in outcomes
        ],
        "all_passed": all(o.ok for o in outcomes),
    }
    _write_json(out_dir / "report.json", payload)
    if not payload["all_passed"]:
        failing = [o.name for o in outcomes if not o.ok]
        print(f"property failures: {', '.join(failing)}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def run_mesh_dump(config: ExperimentConfig) -> int:
    mesh = triangulate(config.geometry(), config.mesh_size)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "mesh.txt").write_text(mesh_to_text(mesh))
    return EXIT_OK


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None, help="JSON config file")
    parser.add_argument("--a", type=float, default=None, help="lower coefficient bound")
    parser.add_argument("--b", type=float, default=None, help="upper coefficient bound")
    parser.add_argument("--n", type=int, default=None, help="number of interface arcs")
    parser.add_argument("--interface-radius", dest="interface_radius", type=float, default=None)
    parser.add_argument(
        "--segments-per-arc", dest="segments_per_arc", type=int, default=None
    )
    parser.add_argument("--mesh-size", dest="mesh_size", type=float, default=None)
    parser.add_argument("--output-dir", dest="output_dir", type=str, default=None)


def _add_criterion_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--m", type=int, default=None, help="fixed current count")
    parser.add_argument(
        "--m-max", dest="m_max", type=int, default=None, help="sweep limit for m"
    )
    parser.add_argument("--lambda-floor", dest="lambda_floor", type=float, default=None)


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--opt-tol", dest="opt_tol", type=float, default=None)
    parser.add_argument("--feas-tol", dest="feas_tol", type=float, default=None)
    parser.add_argument("--max-newton", dest="max_newton", type=int, default=None)
    parser.add_argument("--mu-factor", dest="mu_factor", type=float, default=None)


def _parse_true_gamma(raw: str | None):
    if raw is None or raw == "random":
        return raw
    return [float(part) for part in raw.split(",")]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robinsdp",
        description="Robin transmission coefficient reconstruction experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    crit = sub.add_parser("criterion", help="evaluate or sweep the solvability criterion")
    _add_common_flags(crit)
    _add_criterion_flags(crit)

    rec = sub.add_parser("reconstruct", help="synthesize data and reconstruct")
    _add_common_flags(rec)
    _add_criterion_flags(rec)
    _add_solver_flags(rec)
    rec.add_argument(
        "--true-gamma",
        dest="true_gamma",
        type=str,
        default=None,
        help="comma-separated coefficients, or 'random'",
    )
    rec.add_argument("--gamma-seed", dest="gamma_seed", type=int, default=None)
    rec.add_argument("--delta", type=float, default=None, help="noise level")
    rec.add_argument("--noise-seed", dest="noise_seed", type=int, default=None)
    rec.add_argument(
        "--force", action="store_const", const=True, default=None,
        help="reconstruct even when the criterion is not met",
    )

    props = sub.add_parser("properties", help="run the sampled property suites")
    _add_common_flags(props)
    _add_criterion_flags(props)
    props.add_argument("--samples", type=int, default=None)
    props.add_argument("--seed", type=int, default=None)

    mesh = sub.add_parser("mesh-dump", help="write the triangulation as plain text")
    _add_common_flags(mesh)

    return parser


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    file_values: dict = {}
    if args.config is not None:
        file_values = json.loads(Path(args.config).read_text())
        if not isinstance(file_values, dict):
            raise ValueError("config file must contain a JSON object")
    flag_values = {
        key: value
        for key, value in vars(args).items()
        if key not in ("command", "config")
    }
    if "true_gamma" in flag_values:
        flag_values["true_gamma"] = _parse_true_gamma(flag_values["true_gamma"])
    config = ExperimentConfig.resolve(file_values, flag_values)
    if args.command in ("criterion", "properties", "reconstruct") and config.m is None:
        if config.m_max < 1:
            raise ValueError(f"m_max must be >= 1, got {config.m_max}")
    return config


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _resolve_config(args)
        if args.command == "criterion":
            return run_criterion(config)
        if args.command == "reconstruct":
            return run_reconstruct(config)
        if args.command == "properties":
            return run_properties(config)
        if args.command == "mesh-dump":
            return run_mesh_dump(config)
        raise ValueError(f"unknown command {args.command!r}")
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
