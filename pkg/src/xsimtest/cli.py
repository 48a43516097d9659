"""Command-line front end.

Exit codes: 0 success, 1 internal error, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import campaign as ca
from .analysis import (
    InsufficientDataError,
    NotCriticalError,
    classify,
    mann_whitney_u,
    run_hypervolumes,
    tree_fit,
    xsim_categorize,
    xsim_report,
)
from .config import ConfigError, dump_config, load_config
from .fitness import ScenarioOutcome, evaluate
from .scene import GENES, translate
from .simulator import ConfigurationError, simulate

ALPHA_LEVEL = 0.05

EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG, EXIT_DATA = 0, 1, 2, 3


class DataError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _load(path: str | None, overrides) -> tuple:
    text = ""
    source = "<defaults>"
    if path:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}", None, path) from None
        source = path
    cfg = load_config(text, overrides or (), source)
    return cfg, dump_config(cfg)


def _run_overrides(args) -> list[str]:
    extra = list(args.set or [])
    for flag, key in (("backend", "campaign.backend"), ("runs", "campaign.runs"),
                      ("seed", "campaign.seed"), ("algorithm", "campaign.algorithm"),
                      ("budget", "search.budget")):
        value = getattr(args, flag, None)
        if value is not None:
            extra.append(f"{key} = {value}")
    return extra


def cmd_search(args) -> int:
    cfg, text = _load(args.config, _run_overrides(args))
    results = ca.run_campaign(cfg, jobs=args.jobs)
    summary = ca.write_campaign(
        Path(args.out), cfg, results, text,
        history=not args.no_history, evaluations=not args.no_evaluations,
    )
    print(f"{summary['runs']} runs on {cfg.backend} ({cfg.algorithm}): "
          f"{summary['scenarios']} scenarios, {summary['critical']} critical, "
          f"{summary['violations']} safety violations, "
          f"median HV {summary['median_hypervolume']:.4f}")
    return EXIT_OK


def _source_config(run_dir: Path, overrides):
    path = run_dir / "config.txt"
    if not path.exists():
        raise DataError(f"{path} not found")
    return _load(str(path), overrides)


def cmd_xsim(args) -> int:
    run_dir = Path(args.runs)
    runs = ca.load_runs(run_dir)
    cfg, _ = _source_config(run_dir, args.set)
    target = cfg.backend_config(args.target)
    pairs, rows, skipped = [], [], 0
    for run in runs:
        src_frame = ca.run_frame(run)
        for k, item in enumerate(run["population"]):
            src = ScenarioOutcome.from_dict(item["outcome"])
            native = translate(src.input, src_frame, target.frame)
            rep = evaluate(native, target, cfg.scene, cfg.detector, channel=cfg.channel,
                           seed=src.seed, ttc_source=cfg.ttc_source)
            cs, cr = classify(src), classify(rep)
            try:
                category = xsim_categorize(cs, cr)
                pairs.append((cs, cr))
            except NotCriticalError:
                category = ""
                skipped += 1
            rows.append([ca._fmt(v) for v in (
                run["run"], k, category, cs.critical, cs.violation, cr.critical, cr.violation,
                src.ff1, rep.ff1, abs(src.ff1 - rep.ff1),
                src.ff2, rep.ff2, abs(src.ff2 - rep.ff2),
                src.ff3, rep.ff3, abs(src.ff3 - rep.ff3),
            )])
    source_backend = runs[0]["backend"]["name"]
    report = xsim_report(pairs, direction=f"{source_backend}->{target.name}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = report.to_dict()
    doc["schema_version"] = ca.SCHEMA_VERSION
    doc["skipped_non_critical"] = skipped
    (out / "xsim_report.json").write_text(ca.dumps_json(doc))
    ca.write_csv(out / "ff_differences.csv", (
        "run", "scenario", "category", "source_critical", "source_violation",
        "reproduced_critical", "reproduced_violation",
        "ff1_source", "ff1_reproduced", "ff1_diff", "ff2_source", "ff2_reproduced", "ff2_diff",
        "ff3_source", "ff3_reproduced", "ff3_diff",
    ), rows)
    ca.write_csv(out / "histograms.csv", ("ff", "lo", "hi", "count"), [
        [ff, ca._fmt(b["lo"]), ca._fmt(b["hi"]), b["count"]]
        for ff, bins in report.histograms.items() for b in bins
    ])
    counts = " ".join(f"{k}={v}" for k, v in report.counts.items())
    print(f"{report.direction}: {len(rows)} scenarios, {counts}, skipped {skipped} non-critical")
    return EXIT_OK


def cmd_compare(args) -> int:
    runs_a = ca.load_runs(Path(args.a))
    runs_b = ca.load_runs(Path(args.b))
    if len(runs_a) < 2 or len(runs_b) < 2:
        raise InsufficientDataError("compare needs at least two runs on each side")
    fronts = [ca.front_objectives(r) for r in runs_a + runs_b]
    hv = run_hypervolumes(fronts)
    hv_a, hv_b = hv[: len(runs_a)], hv[len(runs_a):]
    res = mann_whitney_u(hv_a, hv_b)
    verdict = "significant difference" if res.p < ALPHA_LEVEL else "no significant difference"
    doc = {
        "schema_version": ca.SCHEMA_VERSION,
        "a": {"runs": len(hv_a), "median_hv": float(np.median(hv_a)), "hv": hv_a},
        "b": {"runs": len(hv_b), "median_hv": float(np.median(hv_b)), "hv": hv_b},
        "u": res.u,
        "p": res.p,
        "exact": res.exact,
        "alpha": ALPHA_LEVEL,
        "verdict": verdict,
    }
    print(f"A median HV {doc['a']['median_hv']:.6f} ({len(hv_a)} runs)")
    print(f"B median HV {doc['b']['median_hv']:.6f} ({len(hv_b)} runs)")
    print(f"Mann-Whitney U = {res.u:g}, p = {res.p:.6g} -> {verdict} at alpha = {ALPHA_LEVEL}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "comparison.json").write_text(ca.dumps_json(doc))
        ca.write_csv(out / "hypervolumes.csv", ("side", "run", "hv"),
                     [["A", i, ca._fmt(h)] for i, h in enumerate(hv_a)]
                     + [["B", i, ca._fmt(h)] for i, h in enumerate(hv_b)])
    return EXIT_OK


def cmd_diagnose(args) -> int:
    rows = ca.read_scenarios_csv(Path(args.scenarios))
    try:
        X = [[float(r[g]) for g in GENES] for r in rows]
        y = [r["violation"] == "True" for r in rows]
    except ValueError as exc:
        raise DataError(f"{args.scenarios}: {exc}") from None
    tree = tree_fit(X, y, max_depth=args.max_depth, min_leaf=args.min_leaf)
    text = tree.render()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = {"schema_version": ca.SCHEMA_VERSION, "rows": len(rows),
           "max_depth": args.max_depth, "min_leaf": args.min_leaf, "tree": tree.to_dict()}
    (out / "tree.json").write_text(ca.dumps_json(doc))
    (out / "tree.txt").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_replay(args) -> int:
    run_dir = Path(args.runs)
    runs = {r["run"]: r for r in ca.load_runs(run_dir)}
    cfg, _ = _source_config(run_dir, args.set)
    run = runs.get(args.run)
    if run is None or not 0 <= args.scenario < len(run["population"]):
        raise DataError(f"unknown scenario {args.run}:{args.scenario}")
    src = ScenarioOutcome.from_dict(run["population"][args.scenario]["outcome"])
    backend = cfg.backend_config(args.backend or run["backend"]["name"])
    native = translate(src.input, ca.run_frame(run), backend.frame)
    trace = simulate(native, cfg.scene, backend)
    rows = ca.trace_rows(trace, cfg, backend.frame)
    outcome = evaluate(native, backend, cfg.scene, cfg.detector, channel=cfg.channel,
                       seed=src.seed, ttc_source=cfg.ttc_source)
    if args.out:
        ca.write_csv(Path(args.out), ca.TRACE_COLUMNS, rows)
    else:
        import csv
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(ca.TRACE_COLUMNS)
        w.writerows(rows)
    print(json.dumps({"backend": backend.name, "ff1": outcome.ff1, "ff2": outcome.ff2,
                      "ff3": outcome.ff3, "collision": outcome.collision,
                      "detected": outcome.detected, "termination": outcome.termination}),
          file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="xsimtest", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("search", help="run seeded NSGA-II or random-search campaigns")
    s.add_argument("--config", help="key-value config file (defaults if omitted)")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--backend")
    s.add_argument("--algorithm", choices=("nsga2", "random"))
    s.add_argument("--runs", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--budget", type=int)
    s.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    s.add_argument("--jobs", type=int, default=1, help="runs executed in parallel")
    s.add_argument("--no-history", action="store_true", help="omit per-generation fronts")
    s.add_argument("--no-evaluations", action="store_true", help="omit evaluations.csv")
    s.set_defaults(func=cmd_search)

    x = sub.add_parser("xsim", help="re-execute a campaign's scenarios on another backend")
    x.add_argument("runs", help="directory written by 'search'")
    x.add_argument("--target", required=True, help="backend to reproduce on")
    x.add_argument("--out", required=True)
    x.add_argument("--set", action="append", metavar="KEY=VALUE")
    x.set_defaults(func=cmd_xsim)

    c = sub.add_parser("compare", help="compare hypervolumes of two campaigns")
    c.add_argument("a")
    c.add_argument("b")
    c.add_argument("--out")
    c.set_defaults(func=cmd_compare)

    d = sub.add_parser("diagnose", help="fit a decision tree to safety violations")
    d.add_argument("scenarios", help="scenarios CSV")
    d.add_argument("--out", required=True)
    d.add_argument("--max-depth", type=int, default=3)
    d.add_argument("--min-leaf", type=int, default=10)
    d.set_defaults(func=cmd_diagnose)

    r = sub.add_parser("replay", help="re-simulate one stored scenario and dump its trace")
    r.add_argument("runs")
    r.add_argument("--run", type=int, required=True)
    r.add_argument("--scenario", type=int, required=True)
    r.add_argument("--backend")
    r.add_argument("--out", help="trace CSV path (stdout if omitted)")
    r.add_argument("--set", action="append", metavar="KEY=VALUE")
    r.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ConfigurationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ca.ArtifactError, InsufficientDataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
