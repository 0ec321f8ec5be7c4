"""Command-line front end.

Subcommands::

    sdobs design   CONFIG [--preset NAME] [--out DIR]
    sdobs simulate CONFIG [--preset NAME] [--out DIR]
    sdobs compare  CONFIG [--presets a,b,c] [--out DIR]
    sdobs sweep    CONFIG [--preset NAME] --r-values a,b,c [--breakdown] [--out DIR]

``CONFIG`` is a JSON document (a scenario, or a ``presets`` mapping) or the
word ``builtin`` for the shipped presets. Exit codes: 0 success, 1 config
error, 2 certificate failure, 3 simulation divergence.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from .design import LinearDesign, verify_dissipation
from .errors import (
    ConfigError,
    DissipationFailed,
    IncompatibleScenarios,
    NonFiniteState,
    NotHurwitz,
    NotObservable,
    ObserverError,
    ThetaTooSmall,
)
from .scenarios import (
    SAMPLED,
    ZOH,
    apply_overrides,
    build_design,
    check_compatible,
    load_document,
    parse_scenario,
    resolve,
    run_scenario,
)

log = logging.getLogger("sdobs")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CERTIFICATE = 2
EXIT_DIVERGED = 3

CERTIFICATE_ERRORS = (DissipationFailed, NotHurwitz, NotObservable, ThetaTooSmall)


def _json_default(o):
    if isinstance(o, float) and math.isinf(o):
        return "unbounded"
    return str(o)


def _clean(v):
    if isinstance(v, float) and math.isinf(v):
        return "unbounded"
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_clean(x) for x in v]
    return v


def format_table(rows, columns=None):
    """Aligned plain-text table."""
    if not rows:
        return ""
    columns = columns or list(rows[0])
    cells = [[_cell(r.get(c, "")) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in cells:
        lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)))
    return "\n".join(lines)


def _cell(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def write_rows_csv(path, rows, columns=None):
    columns = columns or (list(rows[0]) if rows else [])
    with open(path, "w", newline="") as fh:
        out = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
        out.writeheader()
        for r in rows:
            out.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def _scenario_from_args(args):
    doc = load_document(args.config)
    sc = resolve(doc, getattr(args, "preset", None))
    return apply_overrides(sc, seed=args.seed, step=args.step, t_end=args.t_end)


def design_report(sc):
    """Design record for a scenario, plus the dissipation check for linear designs."""
    _, design = build_design(sc)
    rep = design.report()
    rep["scenario"] = sc.name
    if isinstance(design, LinearDesign):
        from .plants import get_plant

        plant = get_plant(sc.plant_key)
        rep["dissipation_ok"] = verify_dissipation(
            design.P, plant.a, design.k, plant.c, design.mu, design.gamma
        )
    return design, _clean(rep)


def cmd_design(args):
    sc = _scenario_from_args(args)
    _, rep = design_report(sc)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "design.json"), "w") as fh:
        json.dump(rep, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    for key in sorted(rep):
        print(f"{key:>16}: {rep[key]}")
    return EXIT_OK


def _metrics_row(res):
    row = res.row()
    d = res.design
    for key in ("K", "r_max", "K1", "K2", "mu", "gamma", "theta"):
        val = getattr(d, key, None)
        if key == "r_max" and val is not None:
            continue
        row[key] = "" if val is None else val
    return _clean(row)


def cmd_simulate(args):
    sc = _scenario_from_args(args)
    os.makedirs(args.out, exist_ok=True)
    stride = int(sc.raw.get("stride", 1))
    try:
        res = run_scenario(sc)
    except NonFiniteState as exc:
        partial = exc.partial
        if partial is not None and hasattr(partial, "write_csv"):
            partial.write_csv(os.path.join(args.out, "trajectory.partial.csv"), stride)
        print(f"simulation diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    traj = res.trajectory
    if sc.kind == "discrete":
        traj.write_csv(os.path.join(args.out, "series.csv"))
    else:
        traj.write_csv(os.path.join(args.out, "trajectory.csv"), stride)
        if traj.jumps:
            traj.write_jumps_csv(os.path.join(args.out, "jumps.csv"))
    row = _metrics_row(res)
    write_rows_csv(os.path.join(args.out, "metrics.csv"), [row])
    table = format_table([row])
    with open(os.path.join(args.out, "metrics.txt"), "w") as fh:
        fh.write(table + "\n")
    print(table)
    return EXIT_OK


def compare_rows(scenarios):
    check_compatible(scenarios)
    rows = []
    for sc in scenarios:
        rows.append(_metrics_row(run_scenario(sc)))
    return rows


def cmd_compare(args):
    doc = load_document(args.config)
    names = args.presets.split(",") if args.presets else doc.get("compare")
    if names:
        scenarios = [resolve(doc, n.strip()) for n in names]
    else:
        scenarios = [resolve(doc)]
    scenarios = [apply_overrides(s, args.seed, args.step, args.t_end) for s in scenarios]
    try:
        rows = compare_rows(scenarios)
    except NonFiniteState as exc:
        print(f"simulation diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    os.makedirs(args.out, exist_ok=True)
    columns = _union_columns(rows)
    write_rows_csv(os.path.join(args.out, "comparison.csv"), rows, columns)
    table = format_table(rows, columns)
    with open(os.path.join(args.out, "comparison.txt"), "w") as fh:
        fh.write(table + "\n")
    print(table)
    return EXIT_OK


def _union_columns(rows):
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    return cols


def _sweep_job(job):
    raw, name, kind, r = job
    sc = parse_scenario(raw, name)
    variant = copy.deepcopy(sc.raw)
    variant["observer"]["kind"] = kind
    variant["schedule"]["r"] = r
    variant["name"] = f"{name}[{kind},r={r:g}]"
    vs = parse_scenario(variant, variant["name"])
    base = {"r": r, "observer": kind}
    try:
        res = run_scenario(vs)
    except ObserverError as exc:
        base.update(status="failed", error=type(exc).__name__, certified="", converged="false")
        return base
    row = res.row()
    base.update(
        status="ok",
        error="",
        certified=row["certified"],
        converged=row["converged"],
        r_max=row["r_max"],
        tail_amp=max(res.metrics.amplitude),
        tail_sup=res.metrics.tail_sup,
        convergence_time=row["convergence_time"],
    )
    return base


def sweep(sc, r_values, variants=(SAMPLED, ZOH), jobs=1):
    """One row per ``(r, variant)``, sorted by ``r`` then variant order."""
    order = {v: i for i, v in enumerate(variants)}
    job_list = [(sc.raw, sc.name, v, float(r)) for r in sorted(set(r_values)) for v in variants]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_job, job_list))
    else:
        rows = [_sweep_job(j) for j in job_list]
    rows.sort(key=lambda row: (row["r"], order[row["observer"]]))
    return rows


def _converges(sc, r):
    row = _sweep_job((sc.raw, sc.name, SAMPLED, r))
    return row["status"] == "ok" and row["converged"] == "true"


def find_breakdown(sc, r_lo, r_hi, grid=20, rel_tol=1e-3):
    """Smallest ``r`` in ``[r_lo, r_hi]`` where the sampled-data run stops converging.

    A geometric grid locates the first failure, then bisection refines it.
    Returns ``None`` if every grid point converges.
    """
    ratio = (r_hi / r_lo) ** (1.0 / grid)
    good = r_lo
    if not _converges(sc, good):
        return good
    bad = None
    r = r_lo
    for _ in range(grid):
        r *= ratio
        if _converges(sc, r):
            good = r
        else:
            bad = r
            break
    if bad is None:
        return None
    while bad - good > rel_tol * bad:
        mid = 0.5 * (good + bad)
        if _converges(sc, mid):
            good = mid
        else:
            bad = mid
    return bad


def cmd_sweep(args):
    sc = _scenario_from_args(args)
    if not args.r_values:
        raise ConfigError("--r-values is required")
    try:
        r_values = [float(v) for v in args.r_values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --r-values: {exc}") from exc
    if any(r <= 0 for r in r_values):
        raise ConfigError("r values must be positive")
    rows = sweep(sc, r_values, jobs=args.jobs)
    os.makedirs(args.out, exist_ok=True)
    columns = [
        "r", "observer", "status", "error", "certified", "converged",
        "r_max", "tail_amp", "tail_sup", "convergence_time",
    ]
    write_rows_csv(os.path.join(args.out, "sweep.csv"), [_clean(r) for r in rows], columns)
    print(format_table([_clean(r) for r in rows], columns))
    if args.breakdown:
        _, design = build_design(sc)
        r_max = getattr(design, "r_max", None)
        lo = r_max if r_max and not math.isinf(r_max) else min(r_values)
        r_star = find_breakdown(sc, lo, args.breakdown_max)
        with open(os.path.join(args.out, "breakdown.txt"), "w") as fh:
            fh.write(f"r_max {r_max!r}\nr_star {r_star!r}\n")
        print(f"certified r_max = {r_max:.6g}; empirical breakdown r* = {r_star}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="sdobs", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, preset=True):
        sp.add_argument("config", help="scenario JSON file, or 'builtin'")
        if preset:
            sp.add_argument("--preset", help="preset name inside the config")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--step", type=float)
        sp.add_argument("--t-end", dest="t_end", type=float)

    common(sub.add_parser("design", help="build a design and report its certificate"))
    common(sub.add_parser("simulate", help="run one scenario"))
    cp = sub.add_parser("compare", help="run several scenarios side by side")
    common(cp, preset=False)
    cp.add_argument("--presets", help="comma-separated preset names")
    sp = sub.add_parser("sweep", help="sweep the sampling diameter r")
    common(sp)
    sp.add_argument("--r-values", dest="r_values", help="comma-separated r values")
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--breakdown", action="store_true", help="search for the empirical breakdown r*")
    sp.add_argument("--breakdown-max", dest="breakdown_max", type=float, default=2.0)
    return p


COMMANDS = {
    "design": cmd_design,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    start = time.perf_counter()
    try:
        code = COMMANDS[args.command](args)
    except (ConfigError, IncompatibleScenarios) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CERTIFICATE_ERRORS as exc:
        print(f"certificate failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATE
    except NonFiniteState as exc:
        print(f"simulation diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    log.info("%s finished in %.2fs", args.command, time.perf_counter() - start)
    return code


if __name__ == "__main__":
    sys.exit(main())
