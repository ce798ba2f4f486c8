"""``simulate`` command: run a sweep from a config file and write results."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .harness import MODES, emit_results, run_sweep
from .scenario import PROFILES, ConfigError, load_config, profile_values

log = logging.getLogger("cransim")


def _override(text):
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key.strip(), value.strip()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="simulate",
        description="Monte Carlo BER and sum-rate sweeps of quantized C-RAN uplink receivers.",
        epilog="Unrecognized '--key value' pairs are treated as config overrides.")
    p.add_argument("--config", type=Path, help="key = value config file")
    p.add_argument("--profile", choices=sorted(PROFILES),
                   help="built-in defaults the config file may override")
    p.add_argument("--override", action="append", type=_override, default=[],
                   metavar="KEY=VALUE", help="override one config key (repeatable)")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--mode", choices=MODES, default="ber")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--stage-rates", action="store_true",
                   help="also write per-stage SIC rates to stage_rates.csv")
    p.add_argument("-v", "--verbose", action="count", default=0,
                   help="-v for progress, -vv for per-stage diagnostics")
    return p


def _extra_overrides(extra):
    out = []
    it = iter(extra)
    for tok in it:
        if not tok.startswith("--") or len(tok) == 2:
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            value = next(it, None)
            if value is None:
                raise ConfigError(f"missing value for --{key}", key)
        out.append((key, value))
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config is None and args.profile is None:
            raise ConfigError("give --config, --profile or both")
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        overrides = dict(args.override)
        overrides.update(_extra_overrides(extra))
        base = profile_values(args.profile) if args.profile else None
        source = args.config if args.config is not None else ""
        cfg = load_config(source, overrides, base=base)
        report = run_sweep(cfg, args.mode, args.workers, keep_stages=args.stage_rates)
        csv_path, json_path = emit_results(report, args.out)
    except ConfigError as exc:
        print(f"simulate: config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, ArithmeticError) as exc:
        print(f"simulate: error: {exc}", file=sys.stderr)
        return 1
    status = "partial" if report.partial else "complete"
    print(f"{status}: {len(report.completed_trials)}/{cfg.trials} trials, "
          f"results in {csv_path} and {json_path}")
    return 130 if report.partial else 0


if __name__ == "__main__":
    sys.exit(main())
