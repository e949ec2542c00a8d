"""Command-line front end.

Exit codes: 0 success, 1 scenario or model error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import engine
from .errors import DcsimError
from .scenario import builtin_names, builtin_text, load_scenario_text, parse_scenario
from .ups import Mode

EXIT_OK, EXIT_MODEL, EXIT_IO = 0, 1, 2


def _fmt(x) -> str:
    return f"{x:.9g}"


def timeseries_header(log: engine.SimLog) -> list[str]:
    cols = ["t_s"]
    for b in log.bus_names:
        cols += [f"{b}_v_pu", f"{b}_f_hz", f"{b}_rocof_hz_s"]
    for d in log.dc_names:
        cols += [f"{d}_p_grid_mw", f"{d}_q_grid_mvar", f"{d}_mode", f"{d}_e_mwh",
                 f"{d}_p_it_mw", f"{d}_p_cooling_mw"]
    return cols


def emit_csv(log: engine.SimLog, out_dir) -> tuple[Path, Path]:
    """Write ``timeseries.csv`` and ``events.csv``; raises OSError on I/O failure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = [m.name for m in Mode]
    ts_path, ev_path = out / "timeseries.csv", out / "events.csv"
    nb, nd = len(log.bus_names), len(log.dc_names)
    with open(ts_path, "w", newline="") as fh:
        fh.write(",".join(timeseries_header(log)) + "\n")
        for k in range(log.t.size):
            row = [_fmt(log.t[k])]
            for b in range(nb):
                row += [_fmt(log.v[k, b]), _fmt(log.f_hz[k, b]), _fmt(log.rocof[k, b])]
            for j in range(nd):
                row += [_fmt(log.p_grid[k, j]), _fmt(log.q_grid[k, j]), names[log.mode[k, j]],
                        _fmt(log.e_mwh[k, j]), _fmt(log.p_it[k, j]), _fmt(log.p_cooling[k, j])]
            fh.write(",".join(row) + "\n")
    with open(ev_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_s", "kind", "dc_id", "detail"])
        for t, kind, dc_id, detail in log.events:
            w.writerow([_fmt(t), kind, dc_id, detail])
    return ts_path, ev_path


def _load(arg: str, args):
    scn = parse_scenario(arg)
    if args is not None and any(v is not None for v in (args.seed, args.dt, args.duration)):
        scn = scn.with_overrides(seed=args.seed, dt_s=args.dt, duration_s=args.duration)
    return scn


def _run_one(scn, out_dir) -> str:
    log = engine.run(scn)
    emit_csv(log, out_dir)
    n_em = len(log.emergency_entries())
    return f"{scn.name}: {log.t.size} rows, {n_em} emergency entries -> {out_dir}"


def _cmd_run(args) -> int:
    scns = [_load(s, args) for s in args.scenario]
    out = Path(args.out)
    dirs = [out] if len(scns) == 1 else [out / s.name for s in scns]
    if args.jobs > 1 and len(scns) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            msgs = list(pool.map(_run_one, scns, dirs))
    else:
        msgs = [_run_one(s, d) for s, d in zip(scns, dirs)]
    for m in msgs:
        print(m)
    return EXIT_OK


def _cmd_validate(args) -> int:
    for s in args.scenario:
        scn = _load(s, None)
        print(f"ok: {scn.name} ({len(scn.dcs)} data centers, {len(scn.events)} events, "
              f"{scn.n_steps} steps)")
    return EXIT_OK


def _cmd_list(args) -> int:
    for name in builtin_names():
        scn = load_scenario_text(builtin_text(name), f"{name}.scn")
        print(f"{name:28s} {scn.description.strip().splitlines()[0] if scn.description else ''}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dcsim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log warnings and progress")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a scenario and write CSV logs")
    r.add_argument("--scenario", action="append", required=True,
                   help="scenario file or builtin name; repeat for a batch")
    r.add_argument("--seed", type=int)
    r.add_argument("--dt", type=float, help="time step in s")
    r.add_argument("--duration", type=float, help="simulated time in s")
    r.add_argument("--out", default="out", help="output directory (default: out)")
    r.add_argument("--jobs", type=int, default=1, help="parallel scenarios in a batch")
    r.set_defaults(func=_cmd_run)

    v = sub.add_parser("validate", help="check a scenario file without running it")
    v.add_argument("--scenario", action="append", required=True)
    v.set_defaults(func=_cmd_validate)

    b = sub.add_parser("list-builtin", help="list bundled scenarios")
    b.set_defaults(func=_cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DcsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
