"""Command-line interface.

Exit codes: 0 success, 1 configuration or input error, 2 solver
nonconvergence.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .fem.mesh import write_mesh
from .material import MaterialError
from .scenarios import (ConfigError, apply_overrides, build_mesh, compare_stress_modes,
                        config_from_dict, load_config, msd, preset_dict, preset_names,
                        read_csv, run_scenario)
from .solvers import SolverError


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="viscofrac", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log step rejections")
    sub = ap.add_subparsers(dest="command", required=True)

    def overrides(p):
        p.add_argument("--override", "-s", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted config override, e.g. material.alpha=0.7")
        p.add_argument("-o", "--output", help="output directory (CSV and VTK files)")

    p = sub.add_parser("run", help="run a scenario config file")
    p.add_argument("config")
    overrides(p)
    p = sub.add_parser("preset", help="run a built-in preset")
    p.add_argument("name", choices=preset_names())
    overrides(p)
    p = sub.add_parser("compare-stress", help="partial vs complete stress MSD")
    p.add_argument("config", help="config file or preset name")
    p.add_argument("--override", "-s", action="append", default=[], metavar="KEY=VALUE")
    p = sub.add_parser("msd", help="MSD between one column of two CSV files")
    p.add_argument("csv_a")
    p.add_argument("csv_b")
    p.add_argument("--col", required=True)
    p.add_argument("--normalize", choices=("by_a", "by_b"), default="by_b")
    p = sub.add_parser("mesh-gen", help="write the mesh of a preset in text format")
    p.add_argument("preset", choices=preset_names())
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--override", "-s", action="append", default=[], metavar="KEY=VALUE")
    sub.add_parser("list-presets", help="list built-in presets")
    return ap


def _config(source: str, overrides):
    if Path(source).is_file():
        return load_config(source, overrides)
    return config_from_dict(apply_overrides(preset_dict(source), overrides))


def _run(cfg, output) -> int:
    if output:
        cfg.output.directory = output
    result = run_scenario(cfg)
    s = result.series
    print(f"{cfg.name}: {len(s)} steps to t = {s.times[-1]:.6g} s" if len(s) else f"{cfg.name}: no steps")
    for f in result.files:
        if str(f).endswith(".csv"):
            print(f"wrote {f}")
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return _run(load_config(args.config, args.override), args.output)
        if args.command == "preset":
            return _run(_config(args.name, args.override), args.output)
        if args.command == "compare-stress":
            res = compare_stress_modes(_config(args.config, args.override))
            print(f"msd {res['msd']:.6e}")
            print(f"strain_pct {res['strain_pct']:.4f}")
            return 0
        if args.command == "msd":
            a, b = read_csv(args.csv_a), read_csv(args.csv_b)
            if args.col not in a.names or args.col not in b.names:
                raise ConfigError(f"column {args.col!r} missing from one of the files")
            print(f"{msd(a[args.col], b[args.col], args.normalize):.6e}")
            return 0
        if args.command == "mesh-gen":
            mesh = build_mesh(_config(args.preset, args.override))
            write_mesh(mesh, args.output)
            print(f"wrote {args.output} ({mesh.n_nodes} nodes, {mesh.n_elements} {mesh.kind})")
            return 0
        if args.command == "list-presets":
            print("\n".join(preset_names()))
            return 0
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, MaterialError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
