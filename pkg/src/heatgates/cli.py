"""Command-line front end: single runs and truth-table sweeps.

Artifacts land in the chosen output directory: density snapshots
(``density_t{iter}.pgm`` / ``.csv``), a per-iteration ``convergence.csv``,
and a ``manifest.txt`` holding every parameter that shaped the run plus
the readout. A manifest doubles as a config file, so a finished run can
be reproduced with ``--config manifest.txt``.

Exit codes: 0 success, 1 solver failure, 2 invalid configuration,
3 truth table disagrees with the gate's function.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from dataclasses import dataclass, field, fields as dataclass_fields
from pathlib import Path

import numpy as np

from . import fem, gates, optimizer, snapshots

EXIT_OK = 0
EXIT_SOLVER_FAILURE = 1
EXIT_INVALID_CONFIG = 2
EXIT_TABLE_MISMATCH = 3

FORMATS = {"pgm": ("pgm",), "csv": ("csv",), "both": ("pgm", "csv")}

_GATE_ALIASES = {"and": "and", "xor": "xor",
                 "half-adder": "half_adder", "half_adder": "half_adder"}

_INT_FIELDS = {"max_iters", "snapshot_stride"}
_STR_FIELDS = {"rule"}
_OPTIMIZER_KEYS = {f.name for f in dataclass_fields(optimizer.OptParams)}


class ConfigError(ValueError):
    """Invalid or unknown configuration entry; message names the field."""


@dataclass
class RunConfig:
    gate: str
    bc: str
    x: int = 0
    y: int = 0
    out_dir: Path | None = None
    formats: tuple[str, ...] = ("pgm",)
    overrides: dict = field(default_factory=dict)

    def build(self) -> tuple[gates.GateSpec, optimizer.OptParams]:
        spec = gates.build_gate(self.gate, self.bc)
        settings = {"mass": spec.mass, **self.overrides}
        try:
            params = optimizer.OptParams(**settings)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return spec, params


def _parse_value(key: str, raw: str):
    try:
        if key in _STR_FIELDS:
            return raw
        if key in _INT_FIELDS:
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"optimizer.{key}: cannot parse {raw!r}") from exc


def load_config_file(path) -> dict:
    """Read a config/manifest file into plain run settings.

    Sections ``[gate]``, ``[optimizer]``, ``[output]`` are understood;
    a ``[result]`` section (present in manifests) is ignored. Unknown
    sections or keys raise ConfigError.
    """
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")

    settings: dict = {"overrides": {}}
    for section in parser.sections():
        if section == "result":
            continue
        if section == "gate":
            for key, raw in parser.items(section):
                if key == "kind":
                    settings["gate"] = _normalize_gate(raw)
                elif key == "bc":
                    settings["bc"] = _normalize_bc(raw)
                elif key in ("x", "y"):
                    settings[key] = _parse_bit(key, raw)
                else:
                    raise ConfigError(f"unknown key gate.{key}")
        elif section == "optimizer":
            for key, raw in parser.items(section):
                if key not in _OPTIMIZER_KEYS:
                    raise ConfigError(f"unknown key optimizer.{key}")
                settings["overrides"][key] = _parse_value(key, raw)
        elif section == "output":
            for key, raw in parser.items(section):
                if key == "dir":
                    settings["out_dir"] = Path(raw)
                elif key == "format":
                    settings["formats"] = _parse_format(raw)
                elif key == "snapshot_stride":
                    settings["overrides"]["snapshot_stride"] = _parse_value(key, raw)
                else:
                    raise ConfigError(f"unknown key output.{key}")
        else:
            raise ConfigError(f"unknown section [{section}]")
    return settings


def _normalize_gate(raw: str) -> str:
    try:
        return _GATE_ALIASES[raw.strip().lower()]
    except KeyError:
        raise ConfigError(f"gate.kind: unknown gate {raw!r}") from None


def _normalize_bc(raw: str) -> str:
    value = raw.strip().lower()
    if value not in gates.BC_KINDS:
        raise ConfigError(f"gate.bc: unknown boundary-condition kind {raw!r}")
    return value


def _parse_bit(key: str, raw: str) -> int:
    if raw.strip() not in ("0", "1"):
        raise ConfigError(f"gate.{key}: must be 0 or 1, got {raw!r}")
    return int(raw)


def _parse_format(raw: str) -> tuple[str, ...]:
    try:
        return FORMATS[raw.strip().lower()]
    except KeyError:
        raise ConfigError(f"output.format: must be pgm, csv, or both, got {raw!r}") from None


def _fmt(value) -> str:
    if isinstance(value, float):
        return np.format_float_positional(value, unique=True)
    return str(value)


def write_manifest(path, config: RunConfig, params: optimizer.OptParams,
                   result: dict) -> None:
    lines = ["[gate]",
             f"kind = {config.gate}",
             f"bc = {config.bc}",
             f"x = {config.x}",
             f"y = {config.y}",
             "",
             "[optimizer]"]
    for name in sorted(_OPTIMIZER_KEYS - {"snapshot_stride"}):
        lines.append(f"{name} = {_fmt(getattr(params, name))}")
    lines += ["",
              "[output]",
              f"format = {_format_name(config.formats)}",
              f"snapshot_stride = {params.snapshot_stride}",
              "",
              "[result]"]
    for key in sorted(result):
        lines.append(f"{key} = {_fmt(result[key])}")
    Path(path).write_text("\n".join(lines) + "\n")


def _format_name(formats: tuple[str, ...]) -> str:
    return "both" if len(formats) > 1 else formats[0]


def _write_run_artifacts(out_dir: Path, config: RunConfig, spec: gates.GateSpec,
                         params: optimizer.OptParams,
                         trace: optimizer.RunTrace,
                         readout: gates.ReadoutResult) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for row in trace.rows:
        if row.snapshot is None:
            continue
        for path in snapshots.snapshot_paths(out_dir, row.iteration, config.formats):
            if path.suffix == ".pgm":
                snapshots.write_pgm(path, row.snapshot, spec.nx, spec.ny,
                                    params.rho_min, params.rho_max)
            else:
                snapshots.write_csv(path, row.snapshot, spec.nx, spec.ny)
    snapshots.write_convergence(out_dir / "convergence.csv", trace)
    result = {"termination": trace.termination, "iterations": trace.iterations}
    for name, value in readout.densities.items():
        result[f"rho_{name}"] = value
        result[f"bit_{name}"] = int(readout.bits[name])
    write_manifest(out_dir / "manifest.txt", config, params, result)


def cmd_run(config: RunConfig) -> int:
    """Run one input pair and write its artifacts."""
    if config.out_dir is None:
        print("error: no output directory (use --out or [output] dir)", file=sys.stderr)
        return EXIT_INVALID_CONFIG
    try:
        spec, params = config.build()
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_CONFIG

    mesh = spec.build_mesh()
    try:
        bcs = gates.encode_inputs(spec, config.x, config.y)
        trace = optimizer.run(optimizer.initial_state(mesh, params), mesh, bcs, params)
    except (fem.SolverFailure, fem.IllPosedProblemError,
            fem.SingularSystemError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER_FAILURE

    readout = gates.read_output(trace.final.values, spec)
    try:
        _write_run_artifacts(Path(config.out_dir), config, spec, params, trace, readout)
    except OSError as exc:
        print(f"error: cannot write {exc.filename or config.out_dir}: {exc}",
              file=sys.stderr)
        return EXIT_SOLVER_FAILURE
    bits = " ".join(f"{name}={int(bit)}" for name, bit in sorted(readout.bits.items()))
    print(f"{config.gate} {config.bc} x={config.x} y={config.y} -> {bits} "
          f"({trace.termination} at iteration {trace.iterations})")
    return EXIT_OK


def cmd_truth_table(config: RunConfig) -> int:
    """Run all four input pairs; exit 3 unless the table matches the gate."""
    if config.out_dir is None:
        print("error: no output directory (use --out or [output] dir)", file=sys.stderr)
        return EXIT_INVALID_CONFIG
    try:
        spec, params = config.build()
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_CONFIG

    out_dir = Path(config.out_dir)
    table = gates.TruthTable(spec=spec)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for x, y in gates.INPUT_ROWS:
            row = gates.evaluate_row(spec, params, x, y)
            table.rows.append(row)
            row_config = RunConfig(gate=config.gate, bc=config.bc, x=x, y=y,
                                   out_dir=out_dir / f"row_x{x}_y{y}",
                                   formats=config.formats, overrides=config.overrides)
            if row.trace is not None and row.readout is not None:
                _write_run_artifacts(row_config.out_dir, row_config, spec, params,
                                     row.trace, row.readout)
    except OSError as exc:
        print(f"error: cannot write {exc.filename or out_dir}: {exc}", file=sys.stderr)
        return EXIT_SOLVER_FAILURE

    output_names = [site.name for site in spec.outputs()]
    header = ["x", "y"]
    for name in output_names:
        header += [f"bit_{name}", f"rho_{name}"]
    header += ["iterations", "termination"]
    csv_lines = [",".join(header)]
    print(" ".join(header))
    for row in table.rows:
        if row.readout is None:
            cells = [str(row.x), str(row.y)] + ["-", "-"] * len(output_names)
            cells += ["-", "error"]
        else:
            cells = [str(row.x), str(row.y)]
            for name in output_names:
                cells += [str(int(row.readout.bits[name])),
                          _fmt(row.readout.densities[name])]
            cells += [str(row.trace.iterations), row.trace.termination]
        csv_lines.append(",".join(cells))
        print(" ".join(cells))
    (out_dir / "truth_table.csv").write_text("\n".join(csv_lines) + "\n")

    if not table.matches_expected():
        print("error: observed table disagrees with the gate function", file=sys.stderr)
        return EXIT_TABLE_MISMATCH
    return EXIT_OK


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heatgates",
        description="Grow heat-conduction logic gates and read their truth tables.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--gate", choices=sorted(_GATE_ALIASES))
        p.add_argument("--bc", choices=list(gates.BC_KINDS))
        p.add_argument("--iters", type=int, help="iteration cap")
        p.add_argument("--theta", type=float, help="density increment per step")
        p.add_argument("--mass", type=float, help="target material mass M")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--snapshot-stride", type=int,
                       help="iterations between snapshots (0 = terminal only)")
        p.add_argument("--format", choices=sorted(FORMATS),
                       help="snapshot file format")
        p.add_argument("--config", type=Path, help="config or manifest file")

    run_p = sub.add_parser("run", help="run a single input pair")
    add_common(run_p)
    run_p.add_argument("--x", type=int, choices=(0, 1))
    run_p.add_argument("--y", type=int, choices=(0, 1))

    table_p = sub.add_parser("truth-table", help="run all four input pairs")
    add_common(table_p)
    return parser


def _config_from_args(args) -> RunConfig:
    settings: dict = {"overrides": {}}
    if args.config is not None:
        settings.update(load_config_file(args.config))

    if args.gate is not None:
        settings["gate"] = _GATE_ALIASES[args.gate]
    if args.bc is not None:
        settings["bc"] = args.bc
    if getattr(args, "x", None) is not None:
        settings["x"] = args.x
    if getattr(args, "y", None) is not None:
        settings["y"] = args.y
    if args.out is not None:
        settings["out_dir"] = args.out
    if args.format is not None:
        settings["formats"] = FORMATS[args.format]
    if args.iters is not None:
        settings["overrides"]["max_iters"] = args.iters
    if args.theta is not None:
        settings["overrides"]["theta"] = args.theta
    if args.mass is not None:
        settings["overrides"]["mass"] = args.mass
    if args.snapshot_stride is not None:
        settings["overrides"]["snapshot_stride"] = args.snapshot_stride

    if "gate" not in settings or "bc" not in settings:
        raise ConfigError("gate kind and bc kind are required (flags or config file)")
    return RunConfig(**settings)


def main(argv=None) -> int:
    args = build_arg_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_CONFIG
    if args.command == "run":
        return cmd_run(config)
    return cmd_truth_table(config)


if __name__ == "__main__":
    sys.exit(main())
