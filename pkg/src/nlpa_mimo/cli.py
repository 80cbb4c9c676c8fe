"""Command-line runner.

    nlpa-mimo <subcommand> [--config cfg.json] [--out DIR] [--seed N] [--threads N] [--format csv|json]

Each subcommand writes its data tables plus ``<subcommand>.manifest.json``
(config echo and hash, seeds, wall time, version) into ``--out``.

Exit status: 0 success, 1 validation check failed, 2 invalid config,
3 numerical failure at some grid point (the point is named on stderr and
in the manifest).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

from nlpa_mimo import __version__
from nlpa_mimo.config import ExperimentConfig, SchemaError, load_schema
from nlpa_mimo.errors import ConfigurationError
from nlpa_mimo import experiments as ex

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

SUBCOMMANDS = {
    "sweep-power": ex.run_sweep_power,
    "sweep-antennas": ex.run_sweep_antennas,
    "beampattern": ex.run_beampattern,
    "ee-sweep": ex.run_ee_sweep,
    "optimize-ee": ex.run_optimize_ee,
    "compare-schemes": ex.run_compare_schemes,
    "validate": ex.run_validate,
}

HELP = {
    "sweep-power": "SE / consumed power / EE versus total input power, per Nt",
    "sweep-antennas": "SE versus Nt at fixed total input power",
    "beampattern": "desired and distortion beampatterns of the steering examples",
    "ee-sweep": "EE versus total input power on the wide power grid",
    "optimize-ee": "EE-optimal input power per channel (single RF chain)",
    "compare-schemes": "digital / analog / hybrid / quantized-analog comparison",
    "validate": "closed forms against Monte Carlo and enumeration oracles",
}


def format_cell(v) -> str:
    """Shortest round-trip text for floats so reruns are byte-identical."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


def write_table(table: ex.Table, out_dir: Path, fmt: str) -> Path:
    if fmt == "csv":
        path = out_dir / f"{table.name}.csv"
        with path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(table.fields)
            for row in table.rows:
                w.writerow([format_cell(row[k]) for k in table.fields])
    else:
        path = out_dir / f"{table.name}.json"
        rows = [{k: _json_value(row[k]) for k in table.fields} for row in table.rows]
        path.write_text(json.dumps({"fields": list(table.fields), "rows": rows}, indent=1) + "\n",
                        encoding="utf-8")
    return path


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment config (JSON); defaults apply when omitted")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--seed", type=int, help="override seeds.base_seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="data table format")

    p = argparse.ArgumentParser(prog="nlpa-mimo", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=HELP[name])
    sub.add_parser("schema", help="print the config JSON schema")
    sub.add_parser("defaults", help="print the default config")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "schema":
        print(json.dumps(load_schema(), indent=2))
        return EXIT_OK
    if args.command == "defaults":
        print(json.dumps(ExperimentConfig.from_dict().doc, indent=2))
        return EXIT_OK
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG

    try:
        cfg = ExperimentConfig.load(args.config, seed=args.seed)
    except SchemaError as exc:
        print(f"config error at {exc.path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigurationError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    t0 = time.perf_counter()
    report = None
    try:
        result = SUBCOMMANDS[args.command](cfg, threads=args.threads)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        tables, report = result
    else:
        tables = result
    wall = time.perf_counter() - t0

    args.out.mkdir(parents=True, exist_ok=True)
    outputs = [write_table(t, args.out, args.format).name for t in tables]
    failures = [f for t in tables for f in t.failures]
    stem = args.command.replace("-", "_")
    if report is not None:
        (args.out / f"{stem}_report.json").write_text(report.to_json() + "\n", encoding="utf-8")
        outputs.append(f"{stem}_report.json")
    manifest = {
        "subcommand": args.command,
        "version": __version__,
        "config_sha256": cfg.sha256(),
        "config": cfg.doc,
        "seeds": {"base_seed": cfg.base_seed, "n_channels": cfg.n_channels,
                  "channel_seeds": cfg.setup().channel_seeds(cfg.n_channels)},
        "threads": args.threads,
        "wall_time_s": wall,
        "outputs": outputs,
        "n_failed_points": len(failures),
        "failed_points": [{k: _json_value(v) for k, v in f.items()} for f in failures[:50]],
    }
    (args.out / f"{stem}.manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")

    if failures:
        f = failures[0]
        point = ", ".join(f"{k}={f[k]}" for k in ("Nt", "scheme", "pa", "seed", "P_dBm") if k in f)
        print(f"numerical failure at {point}: {f['error']} ({len(failures)} point(s) failed)", file=sys.stderr)
        return EXIT_NUMERIC
    if report is not None and not report.passed:
        print("validation failed: " + ", ".join(report.failed()), file=sys.stderr)
        return EXIT_VALIDATION
    print(f"{args.command}: wrote {', '.join(outputs)} to {args.out} in {wall:.1f} s")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
