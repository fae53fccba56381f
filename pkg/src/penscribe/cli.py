"""Command-line interface.

    penscribe write --text "hello world" --out trace.svg
    penscribe home
    penscribe eval --text "hello"
    penscribe bom [--file bom.txt]
    penscribe serve --port 8776 --speed 1.0

`write` runs the full pipeline on the virtual machine and saves the
overlay SVG plus an optional JSON report; `eval` prints the measured
deviation, speed, and depth error for a text without writing files;
`serve` starts the HTTP control service the operator console talks to.
A config file may be given with --config or the PENSCRIBE_CONFIG
environment variable, and individual keys overridden with --set.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import Settings, load_settings
from .evaluation import BOMFormatError, bom_total, load_bom
from .font import UnsupportedGlyph
from .machine import ConfigError
from .pipeline import OutOfWorkArea
from .session import MachineFault, VirtualMachine, home_machine, run_job


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="path to a key=value config file")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one config key (repeatable)",
    )


def _settings(args: argparse.Namespace) -> Settings:
    overrides = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    return load_settings(args.config, overrides)


def _read_text(args: argparse.Namespace) -> str:
    if args.text is not None:
        return args.text
    return Path(args.text_file).read_text(encoding="utf-8")


def _fmt_opt(v: float | None, unit: str) -> str:
    return "n/a" if v is None else f"{v:.4f} {unit}"


def cmd_write(args: argparse.Namespace) -> int:
    settings = _settings(args)
    if args.strict_glyphs:
        from dataclasses import replace

        settings = Settings(settings.machine, replace(settings.host, strict_glyphs=True))
    result = run_job(_read_text(args), settings)
    if args.out:
        Path(args.out).write_bytes(result.svg)
    if args.report:
        Path(args.report).write_bytes(result.report_json())
    print(f"status: {result.status}")
    print(f"lines: {len(result.plan.lines)}  points: {result.stream.points_done}/{result.stream.points_total}")
    print(f"homing: {result.homing_s:.2f} s  writing: {result.stream.duration_s:.2f} s (simulated)")
    print(f"max deviation: {_fmt_opt(result.max_deviation_mm, 'mm')}")
    print(f"writing speed: {_fmt_opt(result.writing_speed_mm_min, 'mm/min')}")
    print(f"max depth error: {_fmt_opt(result.max_depth_error_mm, 'mm')}")
    if args.out:
        print(f"trace SVG: {args.out}")
    return 0 if result.status == "ok" else 1


def cmd_eval(args: argparse.Namespace) -> int:
    args.out = None
    args.report = None
    args.strict_glyphs = False
    return cmd_write(args)


def cmd_home(args: argparse.Namespace) -> int:
    settings = _settings(args)
    vm = VirtualMachine(settings)
    took = home_machine(vm)
    x, y, z = vm.tip_mm()
    print(f"homed in {took:.2f} s (simulated); position ({x:.3f}, {y:.3f}, {z:.3f}) mm")
    return 0


def cmd_bom(args: argparse.Namespace) -> int:
    items = load_bom(args.file)
    width = max(len(i.name) for i in items) if items else 4
    for item in items:
        print(f"{item.name:<{width}}  x{item.count:<3} {item.total_cost_usd:>8}")
    print(f"{'Total':<{width}}       {bom_total(items):>8}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(_settings(args), speed=args.speed, console_dir=args.console)
    if args.console:
        print(f"console at http://{args.host}:{args.port}/ui/")
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="penscribe", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("write", help="write text on the virtual machine")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--text")
    g.add_argument("--text-file")
    p.add_argument("--out", help="write the overlay SVG here")
    p.add_argument("--report", help="write the JSON job report here")
    p.add_argument("--strict-glyphs", action="store_true",
                   help="fail on characters missing from the font")
    _add_common(p)
    p.set_defaults(func=cmd_write)

    p = sub.add_parser("eval", help="measure deviation/speed for a text")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--text")
    g.add_argument("--text-file")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("home", help="home the virtual machine")
    _add_common(p)
    p.set_defaults(func=cmd_home)

    p = sub.add_parser("bom", help="print the component cost table")
    p.add_argument("--file", help="BOM file (defaults to the packaged table)")
    p.set_defaults(func=cmd_bom)

    p = sub.add_parser("serve", help="start the HTTP control service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8776)
    p.add_argument("--speed", type=float, default=1.0,
                   help="simulation speed vs wall clock (0 = unthrottled)")
    p.add_argument("--console",
                   help="serve a built operator console directory at /ui/")
    _add_common(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, BOMFormatError, OutOfWorkArea, UnsupportedGlyph, MachineFault,
            FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
