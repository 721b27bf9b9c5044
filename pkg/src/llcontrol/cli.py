"""Command-line entry point: ``llcontrol <subcommand> --config FILE --out DIR``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from .errors import ConfigError
from .scenario.config import load_config, parse_config
from .scenario.runner import EXIT_VALIDATION, config_text, run_scenario

SUBCOMMAND_KINDS = {
    "simulate": ("simulate",),
    "steer": ("steer", "steer_sequence"),
    "hysteresis": ("hysteresis_sweep",),
    "spectrum": ("spectrum",),
    "verify": ("verify",),
}

log = logging.getLogger("llcontrol")


def _common(p, config_required=True):
    p.add_argument("--config", required=config_required, help="scenario file (INI sections)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one config entry (repeatable)")
    p.add_argument("--allow-large-dt", action="store_true",
                   help="skip the step-size stability guard")


def build_parser():
    ap = argparse.ArgumentParser(prog="llcontrol", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMAND_KINDS:
        _common(sub.add_parser(name, help=f"run a {name} scenario"))
    rp = sub.add_parser("replay-manifest", help="re-run the scenario recorded in a manifest")
    rp.add_argument("--manifest", required=True)
    rp.add_argument("--out", required=True)
    rp.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")
    rp.add_argument("--allow-large-dt", action="store_true")
    pp = sub.add_parser("plot", help="static PNG plots from a run directory")
    pp.add_argument("--run", required=True, help="directory written by a previous run")
    pp.add_argument("--out", help="where to put the PNGs (default: the run directory)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "plot":
        from .plotting import plot_run
        for path in plot_run(Path(args.run), Path(args.out or args.run)):
            print(path)
        return 0
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            if args.command == "replay-manifest":
                manifest = json.loads(Path(args.manifest).read_text())
                cfg = parse_config(config_text(manifest["config"]), args.manifest, args.override)
                allow = args.allow_large_dt or bool(manifest.get("allow_large_dt", False))
            else:
                cfg = load_config(args.config, args.override, SUBCOMMAND_KINDS[args.command])
                allow = args.allow_large_dt
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = run_scenario(cfg, args.out, allow_large_dt=allow)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    status = result.manifest["status"]
    print(f"{cfg.kind}: {status} -> {result.out_dir}")
    if result.manifest.get("failure"):
        print(f"  {result.manifest['failure']}", file=sys.stderr)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
