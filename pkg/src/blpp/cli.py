"""Command-line entry point: ``blpp <subcommand> [--key value ...]``.

Every config key of a subcommand is also a flag of the same name, and flags
override values read from ``--config``. Exit status is 0 when every gated
check comes out as expected, 1 when one does not and 2 on a configuration
error.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import montecarlo
from .env import GridSpec, LineEnsemble, RngStream, sample_brownian_ensemble, write_ensemble_csv
from .errors import BlppError
from .melon import melon

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2

DESCRIPTIONS = {
    "sample": "emit a Brownian ensemble or its melon as CSV",
    "identities": "exact identity suite on random small ensembles",
    "tw": "top melon line at time 1 against the Tracy-Widom fixture",
    "sheet": "prelimiting sheet stationarity along y = x + c",
    "compose": "1-2-3 composition, degenerate slab, rescale and stationarity checks",
    "geodesic": "Hoelder exponent of rescaled geodesics with a Brownian control",
    "zk": "last times Z_k of the rightmost melon path",
    "busemann": "Busemann and Airy last passage diagnostics",
}


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blpp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")
    for name, text in DESCRIPTIONS.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", type=Path, help="flat key = value config file")
        p.add_argument("--outdir", type=Path, default=Path("runs"), help="root output directory (default: runs)")
        p.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
        for key in montecarlo.DEFAULTS[name]:
            _, helptext = montecarlo.SCHEMA[key]
            default = montecarlo.DEFAULTS[name][key]
            shown = ",".join(map(str, default)) if isinstance(default, tuple) else default
            if key == "melon":
                p.add_argument(_flag(key), dest=key, action="store_const", const="true", help=helptext)
            else:
                p.add_argument(_flag(key), dest=key, metavar="VALUE", help=f"{helptext} (default: {shown})")
    return parser


def effective_config(args) -> montecarlo.ExperimentConfig:
    values = montecarlo.read_config_file(args.config) if args.config else {}
    for key in montecarlo.DEFAULTS[args.command]:
        raw = getattr(args, key)
        if raw is not None:
            values[key] = montecarlo.parse_value(key, raw)
    return montecarlo.make_config(args.command, values)


def _run_sample(cfg: montecarlo.ExperimentConfig, outdir: Path) -> Path:
    grid = GridSpec(0.0, cfg.get("t_end"), cfg.get("steps"))
    stream = RngStream(cfg.master_seed, montecarlo.EXPERIMENT_STREAMS["sample"])
    env = sample_brownian_ensemble(cfg.n, grid, stream)
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S_%fZ")
    target = outdir / "sample" / stamp
    target.mkdir(parents=True)
    if cfg.get("melon"):
        m = melon(env, refine=cfg.get("refine"))
        out = LineEnsemble(m.on_grid(), grid, 0, env.seed, env.stream_id)
        name = "melon.csv"
    else:
        out, name = env, "ensemble.csv"
    write_ensemble_csv(target / name, out)
    manifest = {"experiment": "sample", "effective_config": cfg.flat(), "files": [name], "created_utc": stamp}
    (target / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return target / name


def _print_report(report: montecarlo.ExperimentReport, where: Path):
    for r in report.records:
        if r.gated:
            status = "PASS" if r.ok else "FAIL"
        else:
            status = "DIAG"
        if r.target is None:
            bound = ""
        elif r.tolerance is None:
            bound = f" (reference {r.target:.6g})"
        else:
            bound = f" target {r.target:.6g} +- {r.tolerance:.3g}"
        print(f"{status} {r.name}: {r.estimate:.6g}{bound}")
    print(f"report written to {where}")


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = effective_config(args)
        if args.command == "sample":
            path = _run_sample(cfg, args.outdir)
            print(f"wrote {path}")
            return EXIT_OK
        report = montecarlo.run_experiment(cfg, args.threads)
    except BlppError as exc:
        print(f"blpp: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    where = montecarlo.write_report(report, args.outdir, {"threads": args.threads})
    _print_report(report, where)
    return EXIT_OK if report.all_passed else EXIT_FAILED


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
