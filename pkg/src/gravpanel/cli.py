"""Command-line driver.

Exit codes: 0 success, 1 validation error (data or config), 2 estimation error.
Without ``--config`` the bundled example configuration and synthetic data are
used.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .config import load_pipeline_config, mc_config
from .errors import EstimationError, ValidationError
from .gravity import Relation

DATA_DIR = Path(__file__).resolve().parent / "data"
EXAMPLE_CONFIG = DATA_DIR / "example.cfg"
MC_FILE = "mc_summary.csv"


def _reporters(values):
    if not values:
        return None
    out = []
    for v in values:
        out.extend(x.strip() for x in v.split(",") if x.strip())
    return tuple(out)


def _pipeline_cfg(args):
    cfg = load_pipeline_config(args.config or EXAMPLE_CONFIG)
    rels = None
    if getattr(args, "relations", None):
        try:
            rels = tuple(Relation.parse(r) for r in args.relations.split(","))
        except ValueError as exc:
            raise ValidationError(str(exc)) from None
    return cfg.with_overrides(
        input=Path(args.input) if args.input else None,
        reporters=_reporters(args.reporter),
        seed=args.seed,
        out_dir=Path(args.out) if args.out else None,
        relations=rels,
        figures=False if getattr(args, "no_figures", False) else None,
    )


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def cmd_validate(args) -> int:
    from .report import load_stage

    cfg = _pipeline_cfg(args)
    panels, repairs = load_stage(cfg)
    for rep, p in panels.items():
        print(f"{rep}: {p.index.n_entities} partners x {p.index.n_periods} years, {p.n_rows} rows")
    for e, per, action in repairs:
        print(f"repaired {e} {per}: {action}")
    if args.out:
        import csv, io

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["entity", "period", "action"])
        w.writerows(repairs)
        _write(Path(args.out) / "repairs.csv", buf.getvalue())
    print("ok")
    return 0


def cmd_describe(args) -> int:
    from .report import describe_shares, load_stage, read_totals, shares_table

    cfg = _pipeline_cfg(args)
    panels, _ = load_stage(cfg)
    for rep, p in panels.items():
        cee = cfg.cee if cfg.cee is not None else p.cee_set()
        print(
            f"{rep}: partners {', '.join(p.index.entities)}; CEE {', '.join(cee)}; "
            f"years {p.index.periods[0]}-{p.index.periods[-1]}"
        )
    if cfg.totals is not None:
        totals = read_totals(cfg.totals)
        blocks = {r: b for r, p in panels.items() if (b := describe_shares(p, totals.get(r))) is not None}
        if blocks:
            t = shares_table(blocks)
            print(t.to_markdown())
            if args.out:
                _write(Path(args.out) / "shares.csv", t.to_csv())
    return 0


def cmd_cdtest(args) -> int:
    from .report import CD_FILE, cd_stage, cd_table, load_stage

    cfg = _pipeline_cfg(args)
    panels, _ = load_stage(cfg)
    t = cd_table(cd_stage(cfg, panels), tuple(panels), cfg.relations)
    print(t.to_markdown())
    _write(Path(cfg.out_dir) / CD_FILE, t.to_csv())
    return 0


def cmd_urtest(args) -> int:
    from .report import UR_FILE, load_stage, unitroot_stage, unitroot_table

    cfg = _pipeline_cfg(args)
    panels, _ = load_stage(cfg)
    t = unitroot_table(unitroot_stage(cfg, panels), tuple(panels), cfg)
    print(t.to_markdown())
    _write(Path(cfg.out_dir) / UR_FILE, t.to_csv())
    return 0


def cmd_estimate(args) -> int:
    from .report import ESTIMATES_FILE, estimate_stage, estimates_csv, load_stage, regression_file, regression_table

    cfg = _pipeline_cfg(args)
    panels, _ = load_stage(cfg)
    res = estimate_stage(cfg, panels)
    for rel in cfg.relations:
        t = regression_table(rel, res, tuple(panels), cfg)
        print(t.to_markdown())
        _write(Path(cfg.out_dir) / regression_file(rel), t.to_csv())
    _write(Path(cfg.out_dir) / ESTIMATES_FILE, estimates_csv(res))
    return 0


def cmd_pipeline(args) -> int:
    from .report import run_pipeline, write_report

    cfg = _pipeline_cfg(args)
    report = run_pipeline(cfg)
    for p in write_report(report):
        print(p)
    return 0


def cmd_mc(args) -> int:
    from .montecarlo import experiment_from_mapping, run_mc

    path = Path(args.config or EXAMPLE_CONFIG)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    mc = mc_config(text)
    kind = args.experiment or mc.experiment
    # [dgp] parameters describe the configured experiment; another kind starts from its defaults.
    params = dict(mc.params) if kind == mc.experiment else {}
    if args.seed is not None:
        params["seed"] = args.seed
    spec = experiment_from_mapping(kind, params)
    stats = tuple(s for s in args.statistics.split(",") if s.strip()) if args.statistics is not None else mc.statistics
    summary = run_mc(spec, list(stats), args.reps or mc.reps, workers=args.workers or mc.workers)
    out = Path(args.out) if args.out else mc.out_dir
    out.mkdir(parents=True, exist_ok=True)
    summary.to_csv(out / MC_FILE)
    print(f"{summary.reps} replications, {len(summary.failures)} failures, seed {summary.seed}")
    for r in summary.rows:
        print(
            f"{r.statistic:>18}  rej10={r.reject_10:.3f} rej05={r.reject_05:.3f} rej01={r.reject_01:.3f}  "
            f"bias={r.bias:.4g} rmse={r.rmse:.4g} cover={r.coverage:.3f}"
        )
    print(out / MC_FILE)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gravpanel", description="Gravity panel toolkit for bilateral trade and FDI.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="config file (default: bundled example)")
        p.add_argument("--input", help="override [data] input")
        p.add_argument("--reporter", action="append", help="reporter code(s); repeat or comma-separate")
        p.add_argument("--seed", type=int, help="master seed for simulated reference values")
        p.add_argument("--out", help="output directory")
        return p

    common(sub.add_parser("validate", help="load, validate and repair the input panel")).set_defaults(func=cmd_validate)
    common(sub.add_parser("describe", help="panel summary and bilateral share block")).set_defaults(func=cmd_describe)
    for name, fn, hlp in (
        ("cdtest", cmd_cdtest, "cross-sectional dependence tests"),
        ("urtest", cmd_urtest, "panel unit-root tests"),
        ("estimate", cmd_estimate, "FE, RE and 2SLS with diagnostics"),
    ):
        p = common(sub.add_parser(name, help=hlp))
        p.add_argument("--relations", help="comma-separated relations, e.g. exports_outfdi")
        p.set_defaults(func=fn)
    p = common(sub.add_parser("pipeline", help="full report"))
    p.add_argument("--relations", help="comma-separated relations, e.g. exports_outfdi")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("mc", help="Monte Carlo experiment from the [mc] and [dgp] sections")
    p.add_argument("--config", help="config file (default: bundled example)")
    p.add_argument("--experiment", help="gravity | residual | unitroot | effects | iv (another kind than the config's ignores [dgp])")
    p.add_argument("--statistics", help="comma-separated statistic or group names")
    p.add_argument("--reps", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_mc)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except EstimationError as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
