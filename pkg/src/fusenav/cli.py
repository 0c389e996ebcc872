"""Command line interface: run, compare, and validate scenarios.

Exit codes for `run`: 0 goal reached, 2 collision, 3 timeout, 1 error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .presets import PRESET_NAMES, load_preset
from .runner import (
    FusionMode,
    Scenario,
    ScenarioError,
    compare_modes,
    emit_outputs,
    load_scenario,
    run_scenario,
    validate_scenario,
)


def _resolve_scenario(spec: str) -> Scenario:
    if Path(spec).exists():
        return load_scenario(spec)
    if spec in PRESET_NAMES:
        return load_preset(spec)
    raise FileNotFoundError(
        f"scenario {spec!r} is neither a file nor a preset (presets: {', '.join(PRESET_NAMES)})"
    )


def _apply_overrides(scenario: Scenario, args) -> Scenario:
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    if getattr(args, "mode", None):
        scenario = replace(scenario, mode=FusionMode(args.mode))
    return scenario


def _print_summary(result) -> None:
    state = "goal_reached" if result.goal_reached else ("collided" if result.collided else "timed_out")
    m = result.metrics
    print(
        f"{result.scenario_name} [{result.mode.value}] seed={result.seed}: {state} "
        f"in {m['duration_s']:.1f} s, path {m['path_length_m']:.2f} m, "
        f"min clearance {m['min_clearance_m']:.3f} m, "
        f"mean pos err {m['mean_position_error_m']:.3f} m"
    )


def cmd_run(args) -> int:
    scenario = _apply_overrides(_resolve_scenario(args.scenario), args)
    result = run_scenario(scenario)
    _print_summary(result)
    if args.out:
        paths = emit_outputs(result, args.out)
        print(f"outputs in {Path(args.out).resolve()}: " + ", ".join(p.name for p in paths.values()))
    if result.goal_reached:
        return 0
    return 2 if result.collided else 3


def cmd_compare(args) -> int:
    scenario = _apply_overrides(_resolve_scenario(args.scenario), args)
    report = compare_modes(scenario)
    _print_summary(report.lidar_only)
    _print_summary(report.fusion)
    for key, delta in sorted(report.deltas.items()):
        print(f"  delta {key}: {delta:+.3f}")
    print(f"verdict: {report.verdict}")
    if args.out:
        emit_outputs(report.lidar_only, Path(args.out) / "lidar")
        emit_outputs(report.fusion, Path(args.out) / "fusion")
        print(f"outputs in {Path(args.out).resolve()}")
    return 0


def cmd_validate(args) -> int:
    scenario = _resolve_scenario(args.scenario)
    problems = validate_scenario(scenario)
    if problems:
        print(f"{scenario.name}: INVALID")
        for p in problems:
            print(f"  - {p}")
        return 1
    print(f"{scenario.name}: OK")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fusenav",
        description="Sensor-fusion navigation scenarios: depth cameras + LiDAR + DWA.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_mode=True):
        p.add_argument("--scenario", required=True, help="preset name or scenario YAML file")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--out", default=None, help="output directory for trajectory/metrics/plot")
        if with_mode:
            p.add_argument("--mode", choices=[m.value for m in FusionMode], default=None)

    run_p = sub.add_parser("run", help="run one scenario")
    add_common(run_p)
    run_p.set_defaults(func=cmd_run)

    cmp_p = sub.add_parser("compare", help="run lidar-only vs fusion with the same seed")
    add_common(cmp_p, with_mode=False)
    cmp_p.set_defaults(func=cmd_compare)

    val_p = sub.add_parser("validate", help="check a scenario without running it")
    val_p.add_argument("--scenario", required=True)
    val_p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
