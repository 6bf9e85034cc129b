"""
Command-Line Interface for spinboson-spectrum

This module provides the `spinboson-spectrum` command. Each sub-command
loads a model (a bundled preset or a JSON model file), runs one computation
and writes a JSON or CSV report to standard output or to --out. Errors are
reported as a single JSON line on standard error with exit code 2 for
invalid input and 3 for numerical failures.
"""
import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from config import (BOUNDARY_GAP, DEFAULT_ORDER, DEFAULT_PANELS, INTEGRAL_REL_TOL,
                    ORACLE_ORDER, ORACLE_PANELS, ROOT_ABS_TOL, Tolerances)
from errors import EXIT_NUMERICAL, EXIT_OK, DomainError, SpinBosonError, to_error_dict
from model import ValidatedModel, alpha_critical, classify, load_model, model_rule, probe_integrability
from nevanlinna import (SIGMAS, asymptotics_table, check_small_alpha_regime,
                        essential_spectrum, find_zero, phi_derivative, scan_alpha,
                        sigma_label, weak_coupling_margin)
from oracle import FUZZ_COUNT, compare_counts, fuzz_elementary_inequality, oneboson_spectrum
from presets import get_preset, preset_names
from report_utils import plot_table, render_csv, render_json, write_text
from schur import discrete_eigenvalues, full_count_bound_check

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 1.0
DEFAULT_GAP = 1e-3
DEFAULT_PROBES = 5
DEFAULT_SCAN_GRID = "0.01:3:40log"
DEFAULT_ASYMPTOTICS_GRID = (1e-3, 1e-2, 1e-1)


@dataclass(frozen=True)
class RunConfig:
    """Everything a sub-command needs, built once from the flags."""

    command: str
    model: ValidatedModel
    model_source: str
    alpha: float = DEFAULT_ALPHA
    alphas: Tuple[float, ...] = ()
    panels: int = DEFAULT_PANELS
    order: int = DEFAULT_ORDER
    tolerances: Tolerances = field(default_factory=Tolerances)
    out: Optional[str] = None
    fmt: str = "json"
    seed: int = 0
    count: Optional[int] = None
    sigmas: Tuple[int, ...] = SIGMAS
    gap: float = DEFAULT_GAP
    oracle_panels: int = ORACLE_PANELS
    oracle_order: int = ORACLE_ORDER
    plot: Optional[str] = None

    def __post_init__(self):
        if self.alphas and any(b <= a for a, b in zip(self.alphas, self.alphas[1:])):
            raise DomainError("alpha grid must be strictly increasing")
        if not self.alpha > 0:
            raise DomainError(f"--alpha must be positive, got {self.alpha}")
        if not self.gap > 0:
            raise DomainError(f"--gap must be positive, got {self.gap}")


def parse_alpha_grid(text: str) -> Tuple[float, ...]:
    """
    Parse 'start:stop:steps' with a trailing 'log' or 'lin' (default lin).

    Both '0.01:1:20log' and '0.01:1:20:log' are accepted.

    Returns:
        Strictly increasing tuple of positive couplings
    """
    parts = text.strip().split(":")
    spacing = "lin"
    if len(parts) == 4:
        spacing = parts.pop()
    elif len(parts) == 3 and parts[2].endswith(("log", "lin")):
        spacing, parts[2] = parts[2][-3:], parts[2][:-3]
    if len(parts) != 3 or spacing not in ("log", "lin"):
        raise DomainError(f"alpha grid must look like start:stop:steps(log|lin), got '{text}'")
    try:
        start, stop, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise DomainError(f"malformed alpha grid '{text}'") from exc
    if not (0 < start < stop) or steps < 2:
        raise DomainError("alpha grid needs 0 < start < stop and at least two steps")
    grid = np.geomspace(start, stop, steps) if spacing == "log" else np.linspace(start, stop, steps)
    return tuple(float(a) for a in grid)


def _oracle_rule(config: RunConfig):
    return model_rule(config.model, config.oracle_panels, config.oracle_order)


def cmd_classify(config: RunConfig) -> Dict[str, Any]:
    model = config.model
    regime = classify(model, config.alpha)
    small = check_small_alpha_regime(model, config.alpha)
    return {
        "model": model.name,
        "alpha": config.alpha,
        "regime": regime.tag,
        "alpha_cr": alpha_critical(model),
        "m": model.m,
        "epsilon": model.epsilon,
        "dimension": model.dimension,
        "integrability": model.spec.integrability,
        "probed_integrability": probe_integrability(model),
        "small_alpha_regime": small if isinstance(small, bool) else "not-applicable",
    }


def cmd_bottom(config: RunConfig) -> Dict[str, Any]:
    model, alpha, tol = config.model, config.alpha, config.tolerances
    root_tol = tol.root_tol
    regime = classify(model, alpha)
    roots, zeros = {}, []
    for sigma in SIGMAS:
        root = find_zero(model, sigma, alpha, root_tol, tol.rel_tol, tol.boundary_gap)
        slope = None if root is None else phi_derivative(model, sigma, alpha, root, tol.rel_tol)
        roots[sigma_label(sigma)] = {"root": root, "phi_derivative": slope}
        if root is not None:
            zeros.append(root)
    energy = min(zeros)
    report = {
        "model": model.name,
        "alpha": alpha,
        "regime": regime.tag,
        "E": energy,
        "roots": roots,
        "essential_spectrum": essential_spectrum(model, alpha, root_tol).to_dict(),
    }
    if check_small_alpha_regime(model, alpha):
        report["weak_coupling_margin"] = weak_coupling_margin(model, alpha, root_tol)
    return report


def cmd_scan(config: RunConfig) -> pd.DataFrame:
    alphas = config.alphas or parse_alpha_grid(DEFAULT_SCAN_GRID)
    table = scan_alpha(config.model, alphas, config.tolerances.root_tol, config.tolerances.rel_tol)
    if config.plot:
        plot_table(table, "alpha", ["E_plus", "E_minus", "E"], config.plot,
                   f"Phi zeros of {config.model.name}", logx=True)
    return table


def cmd_eigs(config: RunConfig) -> Dict[str, Any]:
    model, alpha = config.model, config.alpha
    rule = model_rule(model, config.panels, config.order)
    ess = essential_spectrum(model, alpha)
    sectors = []
    for sigma in config.sigmas:
        eigenvalues = discrete_eigenvalues(model, sigma, alpha, rule, config.gap)
        sectors.append({
            "sigma": sigma_label(sigma),
            "sector_bottom": ess.sector_bottoms[sigma],
            "eigenvalues": eigenvalues,
            "count": len(eigenvalues),
        })
    probe = ess.bottom - config.gap
    return {
        "model": model.name,
        "alpha": alpha,
        "ess_bottom": ess.bottom,
        "rule": {"panels": config.panels, "order": config.order, "nodes": rule.size},
        "sectors": sectors,
        "total_count": sum(s["count"] for s in sectors),
        "full_count_bound": {
            "z": probe,
            "holds": full_count_bound_check(model, alpha, probe, _oracle_rule(config)),
        },
    }


def cmd_oracle(config: RunConfig) -> pd.DataFrame:
    rule = _oracle_rule(config)
    frames = []
    for sigma in config.sigmas:
        table = compare_counts(config.model, sigma, config.alpha, rule,
                               config.count or DEFAULT_PROBES, config.gap)
        table.insert(0, "sigma", sigma_label(sigma))
        frames.append(table)
    return pd.concat(frames, ignore_index=True)


def cmd_asymptotics(config: RunConfig) -> pd.DataFrame:
    alphas = config.alphas or DEFAULT_ASYMPTOTICS_GRID
    table = asymptotics_table(config.model, alphas)
    if config.plot:
        plot_table(table, "alpha", ["ratio", "target"], config.plot,
                   f"(E_plus + eps) / alpha^2 for {config.model.name}", logx=True)
    return table


def cmd_oneboson(config: RunConfig) -> Dict[str, Any]:
    report = oneboson_spectrum(config.model, config.alpha,
                               model_rule(config.model, config.panels, config.order))
    report.update({"model": config.model.name, "alpha": config.alpha})
    return report


def cmd_fuzz_inequality(config: RunConfig) -> Dict[str, Any]:
    return fuzz_elementary_inequality(config.count or FUZZ_COUNT, config.seed)


COMMANDS: Dict[str, Tuple[Callable[[RunConfig], Any], str, str]] = {
    "classify": (cmd_classify, "json", "classify the coupling regime"),
    "bottom": (cmd_bottom, "json", "E(alpha), both Phi zeros and the essential spectrum"),
    "scan": (cmd_scan, "csv", "sweep alpha over a grid"),
    "eigs": (cmd_eigs, "json", "discrete eigenvalues below the essential spectrum"),
    "oracle": (cmd_oracle, "json", "Schur counts against the dense truncation"),
    "asymptotics": (cmd_asymptotics, "csv", "weak-coupling expansion of the ground-state branch"),
    "oneboson": (cmd_oneboson, "json", "spectrum of the one-boson system"),
    "fuzz": (cmd_fuzz_inequality, "json", "fuzz the elementary kernel inequality"),
}


class CommandParser(argparse.ArgumentParser):
    """Argument parser whose usage errors join the JSON error path."""

    def error(self, message):
        raise DomainError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = CommandParser(
        prog="spinboson-spectrum",
        description="Spectral analysis of the spin-boson model with at most two photons.",
    )
    parser.add_argument("command", choices=list(COMMANDS), help="Computation to run.")
    parser.add_argument("--model", help="Path of a JSON model file (overrides --preset).")
    parser.add_argument("--preset", default="M1", choices=preset_names(), help="Bundled model (default: M1).")
    parser.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="Coupling strength (default: 1).")
    parser.add_argument("--alpha-grid", dest="alpha_grid",
                        help="Coupling grid start:stop:steps(log|lin) for scan and asymptotics.")
    parser.add_argument("--panels", type=int, default=DEFAULT_PANELS, help="Graded panels per segment.")
    parser.add_argument("--order", type=int, default=DEFAULT_ORDER, help="Gauss-Legendre points per panel.")
    parser.add_argument("--oracle-panels", dest="oracle_panels", type=int, default=ORACLE_PANELS,
                        help="Panels of the dense truncation rule.")
    parser.add_argument("--oracle-order", dest="oracle_order", type=int, default=ORACLE_ORDER,
                        help="Gauss-Legendre order of the dense truncation rule.")
    parser.add_argument("--tol", type=float, default=ROOT_ABS_TOL,
                        help=f"Absolute tolerance of Phi zeros (default: {ROOT_ABS_TOL:g}).")
    parser.add_argument("--rel-tol", dest="rel_tol", type=float, default=INTEGRAL_REL_TOL,
                        help=f"Relative tolerance of the radial integrals (default: {INTEGRAL_REL_TOL:g}).")
    parser.add_argument("--boundary-gap", dest="boundary_gap", type=float, default=BOUNDARY_GAP,
                        help=f"Closest approach of Phi zeros to m + sigma*eps (default: {BOUNDARY_GAP:g}).")
    parser.add_argument("--sigma", choices=["+", "-", "both"], default="both", help="Sectors to analyse.")
    parser.add_argument("--gap", type=float, default=DEFAULT_GAP,
                        help=f"Distance kept below the essential spectrum (default: {DEFAULT_GAP:g}).")
    parser.add_argument("--count", type=int, help="Fuzz triples, or probe energies for oracle.")
    parser.add_argument("--seed", type=int, default=0, help="Random seed (default: 0).")
    parser.add_argument("--out", help="Write the report here instead of standard output.")
    parser.add_argument("--format", dest="fmt", choices=["json", "csv"], help="Report format.")
    parser.add_argument("--plot", help="Also save a PNG figure (scan, asymptotics).")
    parser.add_argument("--verbose", action="store_true", help="Log debug messages on standard error.")
    return parser


def build_config(args: argparse.Namespace) -> RunConfig:
    if args.model:
        model, source = load_model(args.model), args.model
    else:
        model, source = get_preset(args.preset), f"preset:{args.preset}"
    sigmas = {"+": (1,), "-": (-1,), "both": SIGMAS}[args.sigma]
    return RunConfig(
        command=args.command,
        model=model,
        model_source=source,
        alpha=args.alpha,
        alphas=parse_alpha_grid(args.alpha_grid) if args.alpha_grid else (),
        panels=args.panels,
        order=args.order,
        tolerances=Tolerances(rel_tol=args.rel_tol, root_tol=args.tol, boundary_gap=args.boundary_gap),
        out=args.out,
        fmt=args.fmt or COMMANDS[args.command][1],
        seed=args.seed,
        count=args.count,
        sigmas=sigmas,
        gap=args.gap,
        oracle_panels=args.oracle_panels,
        oracle_order=args.oracle_order,
        plot=args.plot,
    )


def render(config: RunConfig, result: Any) -> str:
    if config.fmt == "csv":
        table = result if isinstance(result, pd.DataFrame) else pd.json_normalize(result)
        return render_csv(table)
    payload = {"table": result} if isinstance(result, pd.DataFrame) else result
    payload = dict(payload, model_source=config.model_source)
    return render_json(config.command, payload)


def report_error(exc: BaseException) -> int:
    error = to_error_dict(exc)
    if not isinstance(exc, SpinBosonError):
        error["exit_code"] = EXIT_NUMERICAL
    sys.stderr.write(json.dumps(error) + "\n")
    return error["exit_code"]


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except DomainError as exc:
        return report_error(exc)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        config = build_config(args)
        handler = COMMANDS[config.command][0]
        result = handler(config)
        write_text(render(config, result), config.out, sys.stdout)
    except Exception as exc:  # noqa: BLE001
        logger.debug("command failed", exc_info=True)
        return report_error(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
