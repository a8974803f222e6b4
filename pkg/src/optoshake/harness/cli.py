"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 divergence or instability
of a single run, 4 some sweep points failed.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..meanfield import MeanFieldConvergenceError
from ..observables import phonon_number, phonon_number_raw
from ..sidebands import TruncationError, sideband_table
from .config import ConfigError, RunConfig, SweepSpec, load_config
from .io import write_csv, write_metadata
from .runs import (RESULT_COLUMNS, RWA_COLUMNS, evaluate_point, merged_series,
                   run_rwa_compare, run_stability_map, run_sweep, safe_log_negativity)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSTABLE = 3
EXIT_PARTIAL = 4

COV_COLUMNS = ["t", "V11", "V12", "V13", "V14", "V22", "V23", "V24", "V33", "V34", "V44"]
_IU = np.triu_indices(4)

log = logging.getLogger("optoshake")


def _header(cfg: RunConfig, reduced=None, **extra) -> dict:
    record = cfg.as_dict()
    if reduced is not None:
        record["reduced_resolved"] = reduced.as_dict()
    record.update(extra)
    return record


def _metadata(out: Path, command: str, cfg: RunConfig, **extra) -> None:
    write_metadata(out / "metadata.json", {"command": command, "config_source": cfg.source,
                                           "config": cfg.as_dict(), **extra})


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    reduced = cfg.reduced_params()
    result, trace = evaluate_point(reduced, cfg.simulation)
    header = _header(cfg, reduced)
    t, V = merged_series(trace)
    write_csv(out / "covariance.csv", COV_COLUMNS,
              (np.concatenate([[ti], Vi[_IU]]) for ti, Vi in zip(t, V)), header)
    raw = phonon_number_raw(V)
    write_csv(out / "phonons.csv", ["t", "value", "raw"],
              zip(t, np.atleast_1d(phonon_number(V)), raw), header)
    write_csv(out / "entanglement.csv", ["t", "value"], zip(t, safe_log_negativity(V)), header)
    write_csv(out / "summary.csv", RESULT_COLUMNS, [result.row()], header)
    if reduced.modulated:
        try:
            table = sideband_table(reduced)
            write_csv(out / "sidebands.csv", ["k", "weight", "bs_detuning", "tms_detuning"],
                      table.rows(), header)
        except TruncationError as exc:
            log.warning("sideband table skipped: %s", exc)
    _metadata(out, "simulate", cfg, reduced=reduced.as_dict(), trace=trace.metadata,
              result={k: v for k, v in vars(result).items() if k != "params"})
    if result.unstable:
        what = (f"diverged at t={result.divergence_time:.6g}" if result.diverged
                else f"unstable ({result.verdict}, margin {result.margin:.3g})")
        print(f"simulate: {what}", file=sys.stderr)
        return EXIT_UNSTABLE
    print(f"simulate: n_avg={result.phonons_avg:.6g} E_N_avg={result.log_negativity_avg:.6g} "
          f"settled={result.settled}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out: Path) -> int:
    names, points, results = run_sweep(cfg)
    rows = [[i, *p, *r.row()] for i, (p, r) in enumerate(zip(points, results))]
    write_csv(out / "summary.csv", ["index", *names, *RESULT_COLUMNS], rows, _header(cfg))
    failed = sum(r.failed for r in results)
    _metadata(out, "sweep", cfg, points=len(points), failed=failed)
    print(f"sweep: {len(points)} points, {failed} failed")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_stability_map(cfg: RunConfig, out: Path) -> int:
    smap = run_stability_map(cfg)
    rows = []
    failed = 0
    for i, a in enumerate(smap.values1):
        for j, b in enumerate(smap.values2):
            v = smap.verdicts[i][j]
            error = v.detail.get("error", "")
            failed += bool(error)
            rows.append([a, b, v.verdict.value, v.margin, v.detail.get("G_abs"),
                         v.detail.get("delta_c_prime"), v.method, error])
    header = _header(cfg)
    write_csv(out / "map.csv", [smap.name1, smap.name2, "verdict", "margin", "G_abs",
                                "delta_c_prime_resolved", "method", "error"], rows, header)
    write_csv(out / "boundary.csv", [smap.name1, smap.name2], smap.boundary, header)
    _metadata(out, "stability-map", cfg, points=len(rows), failed=failed)
    print(f"stability-map: {len(rows)} points, {len(smap.boundary)} boundary points, "
          f"{failed} failed")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_rwa_compare(cfg: RunConfig, out: Path) -> int:
    cmp = run_rwa_compare(cfg)
    write_csv(out / "rwa_compare.csv", RWA_COLUMNS, [c.row() for c in cmp], _header(cfg))
    failed = sum(bool(c.error or c.full.error) for c in cmp)
    _metadata(out, "rwa-compare", cfg, failed=failed)
    for c in cmp:
        print(f"nu={c.nu:g}: n_full={c.full.phonons_avg:.6g} n_rwa={c.phonons_rwa:.6g} "
              f"gap={c.phonons_gap:.3g}")
    return EXIT_PARTIAL if failed else EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "stability-map": cmd_stability_map,
    "rwa-compare": cmd_rwa_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="optoshake",
                                     description="Frequency-modulated optomechanics simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--out", help="output directory (default: output.dir of the config)")
        p.add_argument("--parallel", type=int, help="worker processes")
        p.add_argument("--sweep", action="append", default=[], metavar="NAME=START:STOP:COUNT[:log]",
                       help="sweep range; replaces the config sweeps (repeatable)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.parallel is not None:
            if args.parallel < 1:
                raise ConfigError("--parallel", "must be a positive integer")
            cfg = replace(cfg, parallel=args.parallel)
        if args.sweep:
            sweeps = tuple(SweepSpec.parse(s) for s in args.sweep)
            for s in sweeps:
                cfg.with_values(**{s.name: s.start})
            cfg = replace(cfg, sweeps=sweeps)
        if args.command in ("sweep",) and not cfg.sweeps:
            raise ConfigError("task.sweeps", "sweep needs at least one sweep range")
        if args.command == "stability-map" and (
                len(cfg.sweeps) != 2 or cfg.sweeps[0].name == cfg.sweeps[1].name):
            raise ConfigError("task.sweeps", "stability-map needs exactly two distinct sweeps")
        out = Path(args.out or cfg.output_dir)
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MeanFieldConvergenceError as exc:
        print(f"config error: mean-field calibration failed: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
