"""Command-line entry point: ``qrouter <command> [options]``."""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io
from .analysis import (contrast_summary, corrected_routing_probability, corrected_visibility,
                       fidelity_from_counts, fit_fringe, mean_fidelity, routing_probability)
from .report import reproduce
from .router import run_router
from .source import simulate_interleaved

EXIT_OK, EXIT_INVALID, EXIT_ACCEPTANCE = 0, 1, 2


class _Fmt:
    def __init__(self, full: bool):
        self.full = full

    def num(self, x):
        if isinstance(x, (bool, np.bool_)):
            return bool(x)
        if isinstance(x, (int, np.integer)):
            return int(x)
        if isinstance(x, (float, np.floating)):
            x = float(x)
            if not math.isfinite(x):
                return str(x)
            return x if self.full else float(f"{x:.6g}")
        if isinstance(x, dict):
            return {k: self.num(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [self.num(v) for v in x]
        return x

    def cell(self, x):
        x = self.num(x)
        return repr(x) if isinstance(x, float) and self.full else str(x)


def _emit(records: list[dict], fmt: str, out: str | None, f: _Fmt):
    if fmt == "json":
        text = json.dumps([f.num(r) for r in records], indent=2) + "\n"
    else:
        buf = _io.StringIO()
        if records:
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(list(records[0]))
            for r in records:
                w.writerow([f.cell(v) for v in r.values()])
        text = buf.getvalue()
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_scenario(args) -> io.Scenario:
    if not args.scenario:
        raise io.ScenarioError("--scenario is required")
    return io.Scenario.load(args.scenario)


def _output_opts(args, scenario: io.Scenario | None, default_fmt: str):
    outs = scenario.section("outputs") if scenario else {}
    fmt = args.format or outs.get("format", default_fmt)
    out = args.out or outs.get("path")
    return fmt, out


def cmd_ideal(args) -> int:
    sc = _load_scenario(args)
    records = []
    for name, sig in sc.signals():
        for ctrl in sc.controls():
            res = run_router(sig, sc.router_config(ctrl))
            rec = {"signal_state": name, **res.to_dict()}
            records.append(rec)
    fmt, out = _output_opts(args, sc, "json")
    _emit(records, fmt, out, _Fmt(args.precision == "full"))
    return EXIT_OK


def cmd_sweep_phi(args) -> int:
    sc = _load_scenario(args)
    grid = None
    if args.grid:
        try:
            start, stop, num = args.grid.split(":")
            grid = np.linspace(float(start), float(stop), int(num))
        except ValueError:
            raise io.ScenarioError(f"--grid expects start:stop:num, got {args.grid!r}") from None
    if grid is None:
        grid = sc.sweep_grid()
    if grid is None or len(grid) == 0:
        raise io.ScenarioError("phi grid is empty; give sweep.phi, sweep.start/stop/num or --grid")
    name, sig = sc.signals()[0]
    records = []
    for phi in grid:
        res = run_router(sig, sc.router_config(float(phi)))
        records.append({"phi": float(phi), "p1": res.p1, "p2": res.p2, "success": res.success_probability})
    fmt, out = _output_opts(args, sc, "csv")
    _emit(records, fmt, out, _Fmt(args.precision == "full"))
    return EXIT_OK


def cmd_simulate_counts(args) -> int:
    sc = _load_scenario(args)
    seed = args.seed if args.seed is not None else sc.seed
    if seed is None:
        raise io.ScenarioError("a seed is required (--seed or run.seed)")
    run = sc.section("run")
    total = run.get("duration_s", 3600.0)
    interval = run.get("interval_s", 120.0)
    params = sc.source_params(duration=interval)
    projections = {k: v for k, v in run.get("projections", {}).items() if v}
    records = []
    cases = [(name, sig, ctrl) for name, sig in sc.signals() for ctrl in sc.controls()]
    streams = np.random.SeedSequence(seed).spawn(len(cases))
    for (name, sig, ctrl), ss in zip(cases, streams):
        res = run_router(sig, sc.router_config(ctrl))
        label = ctrl if isinstance(ctrl, str) else f"{ctrl:.6g}"
        for rec in simulate_interleaved(params, res, total, interval, projections,
                                        seed=int(ss.generate_state(1)[0]),
                                        include_accidentals=run.get("include_accidentals", True)):
            records.append({"signal_state": name, "control_setting": label, **rec.to_row()})
    fmt, out = _output_opts(args, sc, "csv")
    _emit(records, fmt, out, _Fmt(args.precision == "full"))
    return EXIT_OK


def _analyze_counts(path) -> dict:
    rows = io.load_count_table(path)
    agg: dict[tuple[str, str], list[float]] = {}
    for r in rows:
        if r["regime"] != "interfering":
            continue
        tot = agg.setdefault((r["signal_state"], r["control_setting"].upper()), [0, 0, 0.0, 0.0])
        for i, col in enumerate(("cc1", "cc2", "acc1", "acc2")):
            tot[i] += r[col]
    routing = []
    raw_table, corr_table = {}, {}
    for (state, ctrl), (n1, n2, a1, a2) in sorted(agg.items()):
        # groups without usable counts are reported with null estimates
        raw = routing_probability(n1, n2) if n1 + n2 > 0 else None
        corr = corrected_routing_probability(n1, n2, a1, a2) if n1 + n2 - a1 - a2 > 0 else None
        routing.append({"signal_state": state, "control_setting": ctrl, "cc1": int(n1), "cc2": int(n2),
                        "p2": raw and raw.value, "sigma_p2": raw and raw.sigma,
                        "p2_corr": corr and corr.value, "sigma_p2_corr": corr and corr.sigma})
        if raw is not None and corr is not None:
            raw_table.setdefault(state, {})[ctrl] = raw
            corr_table.setdefault(state, {})[ctrl] = corr
    report = {"routing": routing}
    complete = {s: t for s, t in raw_table.items() if {"ON", "OFF"} <= set(t)}
    if complete:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            cr = contrast_summary(complete)
            cc = contrast_summary({s: corr_table[s] for s in complete})
        report["contrast"] = {"raw": {"port1": list(cr.port1), "port2": list(cr.port2)},
                              "corrected": {"port1": list(cc.port1), "port2": list(cc.port2)},
                              "unbounded": [list(u) for u in cc.unbounded + cr.unbounded]}
    return report


def _contrast_block(raw, corr) -> dict:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        cr, cc = contrast_summary(raw), contrast_summary(corr)
    return {"raw": {"port1": list(cr.port1), "port2": list(cr.port2)},
            "corrected": {"port1": list(cc.port1), "port2": list(cc.port2)}}


def cmd_analyze(args) -> int:
    report: dict = {}
    if args.counts:
        report.update(_analyze_counts(args.counts))
    if args.routing_table:
        raw, corr = io.load_routing_table(args.routing_table)
        report["routing_table_contrast"] = _contrast_block(raw, corr)
    if args.fidelity_table:
        raw, corr = io.load_fidelity_table(args.fidelity_table)
        mr, mc = mean_fidelity(raw), mean_fidelity(corr)
        report["fidelity"] = {
            "rows": [{"signal_state": s, "control_setting": c, "f": raw[(s, c)].value,
                      "f_corr": corr[(s, c)].value} for (s, c) in raw],
            "mean": {"raw": list(mr), "corrected": list(mc)}}
    if args.fidelity_counts:
        rows = io.read_table(args.fidelity_counts, ("signal_state", "control_setting", "n_parallel", "n_orthogonal"),
                             ("n_parallel", "n_orthogonal"))
        report["fidelity_from_counts"] = [
            {"signal_state": r["signal_state"], "control_setting": r["control_setting"],
             **dict(zip(("f", "sigma_f"), fidelity_from_counts(r["n_parallel"], r["n_orthogonal"])))}
            for r in rows]
    if args.fringe:
        x, y, s = io.load_fringe_table(args.fringe)
        fit = fit_fringe(x, y, s, frequency=None if args.fringe_frequency is None else args.fringe_frequency)
        block = {"offset": fit.offset, "amplitude": fit.amplitude, "phase0": fit.phase0,
                 "frequency": fit.frequency, "chi2": fit.chi2, "visibility": list(fit.visibility)}
        if args.noise_floor is not None:
            block["corrected_visibility"] = list(corrected_visibility(fit, args.noise_floor))
        report["fringe"] = block
    if not report:
        raise io.ScenarioError("nothing to analyze; pass --counts, --routing-table, --fidelity-table or --fringe")
    f = _Fmt(args.precision == "full")
    text = json.dumps(f.num(report), indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    checks = reproduce(args.data_dir)
    lines = [c.line() for c in checks]
    failed = sum(not c.ok for c in checks)
    lines.append(f"{len(checks) - failed}/{len(checks)} checks passed")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK if failed == 0 else EXIT_ACCEPTANCE


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario JSON file")
    common.add_argument("--seed", type=int, help="seed for Monte Carlo runs")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--precision", choices=("full",), help="print full float precision")

    parser = argparse.ArgumentParser(prog="qrouter", description="Linear-optical quantum router toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ideal", parents=[common], help="exact routing results").set_defaults(func=cmd_ideal)
    p = sub.add_parser("sweep-phi", parents=[common], help="routing table over control phase")
    p.add_argument("--grid", help="start:stop:num")
    p.set_defaults(func=cmd_sweep_phi)
    sub.add_parser("simulate-counts", parents=[common], help="seeded coincidence records").set_defaults(
        func=cmd_simulate_counts)
    p = sub.add_parser("analyze", parents=[common], help="estimate routing, fidelity, visibility")
    p.add_argument("--counts", help="count CSV")
    p.add_argument("--routing-table", help="CSV of P2 estimates (raw and corrected)")
    p.add_argument("--fidelity-table", help="CSV of fidelity estimates (raw and corrected)")
    p.add_argument("--fidelity-counts", help="CSV of parallel/orthogonal projection counts")
    p.add_argument("--fringe", help="fringe CSV (phase_rad, rel_counts, error)")
    p.add_argument("--fringe-frequency", type=float, help="fix the fringe frequency instead of fitting it")
    p.add_argument("--noise-floor", type=float, help="accidental floor subtracted from the fringe offset")
    p.set_defaults(func=cmd_analyze)
    p = sub.add_parser("reproduce-paper", parents=[common], help="check reference numbers")
    p.add_argument("--data-dir", help="directory with routing.csv, fidelity.csv, fringe.csv")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (io.ScenarioError, io.TableError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
