"""Pipeline driver and table rendering.

Stages run in a fixed order per reporter: load and repair, cross-sectional
dependence tests on FE residuals, panel unit-root tests, FE/RE with the
Hausman contrast, then 2SLS with its diagnostics.  Tables are rendered to CSV
(the machine contract) and Markdown; only stars and rounding happen here.
"""

from __future__ import annotations

import csv
import hashlib
import io
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .config import UNIT_ROOT_VARIABLES, PipelineConfig
from .errors import GravPanelError, ValidationError
from .estimators import CONST, IvSpec, fixed_effects, hausman_test, random_effects, two_sls
from .gravity import CONTROL_NAMES, Relation, build_dataset, unit_root_variables
from .ingest import BilateralPanel, SchemaConfig, load_panel, repair_panel
from .ivdiag import DiagnosticsBundle, run_diagnostics
from .results import EstimationResult, TestResult
from .unitroot import AdfSpec, UnitRootResult, cadf_test, ips_test
from .xsdep import ResidualPanel, cd_battery

CD_FILE = "cd_tests.csv"
UR_FILE = "unit_roots.csv"
REPORT_FILE = "report.md"
ESTIMATES_FILE = "estimates.csv"
SHARES_FILE = "shares.csv"
REPAIRS_FILE = "repairs.csv"
ROBUST_MARK = "^r"
TREND_MARK = "^t"
MISSING_CELL = "-"

SHARE_VARIABLES = ("exports", "imports", "outfdi", "infdi")
TOTAL_COLUMNS = tuple(f"{v}_total" for v in SHARE_VARIABLES)


def regression_file(relation: Relation) -> str:
    return f"reg_{relation.key}.csv"


# ---------------------------------------------------------------------------
# Formatting


def format_stars(p: float) -> str:
    """Significance stars: *** for p <= 0.01, ** for p <= 0.05, * for p <= 0.10."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p-value must lie in [0, 1], got {p!r}")
    if p <= 0.01:
        return "***"
    if p <= 0.05:
        return "**"
    if p <= 0.10:
        return "*"
    return ""


def format_coef(x: float) -> str:
    """Three significant figures, positional notation."""
    if x == 0 or not np.isfinite(x):
        return "0" if x == 0 else str(x)
    s = np.format_float_positional(x, precision=3, unique=False, fractional=False, trim="-")
    return "0" if s in ("-0", "") else s


def format_stat(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


def format_p(p: float, digits: int = 2) -> str:
    return f"({p:.{digits}f})"


def relation_label(r: Relation) -> str:
    return f"{r.trade.capitalize()} - {r.direction} FDI"


# ---------------------------------------------------------------------------
# Tables


@dataclass(frozen=True)
class Table:
    """A rendered table: header, rows of display strings and note lines."""

    name: str
    title: str
    header: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        for r in self.rows:
            if len(r) != len(self.header):
                raise ValueError(f"row {r[0]!r} of table {self.name!r} has {len(r)} cells, expected {len(self.header)}")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.header)

    def column(self, label: str) -> list[str]:
        j = self.header.index(label)
        return [r[j] for r in self.rows]

    def cell(self, row_label: str, col_label: str) -> str:
        j = self.header.index(col_label)
        for r in self.rows:
            if r[0] == row_label:
                return r[j]
        raise KeyError(row_label)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        w.writerows(self.rows)
        return buf.getvalue()

    def to_markdown(self) -> str:
        esc = lambda s: s.replace("|", "\\|")  # noqa: E731
        lines = [f"### {self.title}", ""]
        lines.append("| " + " | ".join(esc(h) for h in self.header) + " |")
        lines.append("|" + "|".join("---" for _ in self.header) + "|")
        for r in self.rows:
            lines.append("| " + " | ".join(esc(c) for c in r) + " |")
        if self.notes:
            lines.append("")
            lines.extend(f"- {n}" for n in self.notes)
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Stage results


@dataclass(frozen=True)
class RegressionBundle:
    fe: EstimationResult
    re: EstimationResult
    hausman: TestResult
    iv: EstimationResult
    diagnostics: DiagnosticsBundle


@dataclass
class PipelineReport:
    config: PipelineConfig
    reporters: tuple[str, ...]
    panels: dict
    repairs: list = field(default_factory=list)
    cd: dict = field(default_factory=dict)
    unit_roots: dict = field(default_factory=dict)
    regressions: dict = field(default_factory=dict)
    shares: dict = field(default_factory=dict)
    data_hash: str = ""
    warnings: list = field(default_factory=list)

    # Tables are rendered lazily from the stored results.
    @property
    def cd_table(self) -> Table:
        return cd_table(self.cd, self.reporters, self.config.relations)

    @property
    def unitroot_table(self) -> Table:
        return unitroot_table(self.unit_roots, self.reporters, self.config)

    @property
    def regression_tables(self) -> dict[str, Table]:
        return {
            r.key: regression_table(r, self.regressions, self.reporters, self.config) for r in self.config.relations
        }

    @property
    def shares_table(self) -> Table | None:
        return shares_table(self.shares) if self.shares else None

    def footer(self) -> tuple[str, ...]:
        return (
            f"config sha256: {self.config.config_hash}",
            f"data sha256: {self.data_hash}",
            f"seed: {self.config.seed}",
            f"gravpanel version: {__version__}",
        )


@contextmanager
def stage(name: str, **context):
    """Prefix errors raised inside a pipeline stage with the stage and context."""
    try:
        yield
    except GravPanelError as exc:
        ctx = ", ".join(f"{k}={v}" for k, v in context.items())
        prefix = f"stage '{name}'" + (f" ({ctx})" if ctx else "")
        if not getattr(exc, "stage", None):
            exc.stage = name
            exc.args = (f"{prefix}: {exc.args[0] if exc.args else ''}",) + tuple(exc.args[1:])
        raise


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_stage(cfg: PipelineConfig) -> tuple[dict[str, BilateralPanel], list]:
    """Load, filter and repair panels; returns panels and repair records."""
    with stage("load", file=Path(cfg.input).name):
        schema = SchemaConfig(years=cfg.years, reporters=cfg.reporters, partners=cfg.partners)
        raw = load_panel(cfg.input, schema)
    if cfg.reporters:
        missing = [r for r in cfg.reporters if r not in raw]
        if missing:
            raise ValidationError(f"stage 'load': reporters {missing} not found in {Path(cfg.input).name}")
    panels, repairs = {}, []
    for rep in sorted(raw):
        with stage("repair", reporter=rep):
            fixed, report = repair_panel(raw[rep], cfg.max_gap)
            repairs.extend((f"{rep}-{e}", p, a) for e, p, a in report.entries)
            if not fixed.complete:
                e, p, a = report.unrepaired()[0]
                raise ValidationError(f"panel still has missing cells after repair, first at ({e}, {p}): {a}")
        panels[rep] = fixed
    return panels, repairs


def _cee(cfg: PipelineConfig, panel: BilateralPanel) -> tuple[str, ...]:
    return tuple(cfg.cee) if cfg.cee is not None else panel.cee_set()


def _design(cfg, panel, relation):
    return build_dataset(panel, relation, _cee(cfg, panel), cfg.growth_shift).to_design()


def cd_stage(cfg: PipelineConfig, panels: Mapping[str, BilateralPanel]) -> dict:
    out = {}
    for rep, panel in panels.items():
        for rel in cfg.relations:
            with stage("cd-tests", reporter=rep, relation=rel.key):
                m = _design(cfg, panel, rel)
                r = ResidualPanel.from_design(m, fixed_effects(m).residuals)
                out[(rep, rel.key)] = cd_battery(r, seed=cfg.seed)
    return out


def unitroot_stage(cfg: PipelineConfig, panels: Mapping[str, BilateralPanel]) -> dict:
    out = {}
    for rep, panel in panels.items():
        series = unit_root_variables(panel, cfg.growth_shift)
        trend = set(cfg.trend_for(rep))
        for var in UNIT_ROOT_VARIABLES:
            spec = AdfSpec("ct" if var in trend else "c", cfg.ur_lags)
            with stage("unit-roots", reporter=rep, variable=var):
                out[(rep, var)] = (
                    cadf_test(series[var], spec, seed=cfg.seed),
                    ips_test(series[var], spec, seed=cfg.seed),
                )
    return out


def iv_spec(cfg: PipelineConfig, relation: Relation) -> IvSpec:
    return IvSpec(endogenous=(relation.fdi, "gdpg", "bexr"), lags=tuple(range(1, cfg.iv_lags + 1)))


def estimate_stage(cfg: PipelineConfig, panels: Mapping[str, BilateralPanel], log: list | None = None) -> dict:
    out = {}
    for rep, panel in panels.items():
        for rel in cfg.relations:
            ctx = dict(reporter=rep, relation=rel.key)
            with stage("design", **ctx):
                m = _design(cfg, panel, rel)
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                with stage("fixed-effects", **ctx):
                    fe = fixed_effects(m)
                with stage("random-effects", **ctx):
                    re = random_effects(m, variance_method=cfg.re_variance)
                with stage("hausman", **ctx):
                    h = hausman_test(fe, re, threshold=cfg.hausman_level)
                iv = iv_spec(cfg, rel)
                with stage("iv-diagnostics", **ctx):
                    diag = run_diagnostics(m, iv, level=cfg.robust_level, indicators=cfg.pagan_hall_indicators)
                with stage("2sls", **ctx):
                    fit = two_sls(m, iv, robust=diag.robust)
            if log is not None:
                log.extend(f"{rep} {rel.key}: {w.message}" for w in caught)
            out[(rep, rel.key)] = RegressionBundle(fe, re, h, fit, diag)
    return out


# ---------------------------------------------------------------------------
# Descriptive shares


def read_totals(path) -> dict[str, dict[int, dict[str, float]]]:
    """Read world-partner totals: columns reporter, year and ``<var>_total``."""
    out: dict[str, dict[int, dict[str, float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        header = [h.strip().lower() for h in next(rd, [])]
        need = ("reporter", "year") + TOTAL_COLUMNS
        missing = [c for c in need if c not in header]
        if missing:
            raise ValidationError(f"totals file missing column {missing[0]!r}")
        pos = {c: header.index(c) for c in need}
        for line, row in enumerate(rd, start=2):
            if not row:
                continue
            try:
                year = int(row[pos["year"]])
                vals = {c: float(row[pos[c]]) for c in TOTAL_COLUMNS}
            except (ValueError, IndexError):
                raise ValidationError(f"totals file line {line}: unparsable row") from None
            if any(not v > 0 for v in vals.values()):
                raise ValidationError(f"totals file line {line}: totals must be positive")
            out.setdefault(row[pos["reporter"]].strip(), {})[year] = vals
    return out


@dataclass(frozen=True)
class ShareBlock:
    """Per-year bilateral-to-total shares (percent) for one reporter."""

    reporter: str
    years: tuple[int, ...]
    shares: Mapping[str, np.ndarray]


def describe_shares(panel: BilateralPanel, totals: Mapping[int, Mapping[str, float]] | None) -> ShareBlock | None:
    """Sum bilateral values over partners and divide by world totals per year.

    Returns None without totals.  Years absent from the totals are dropped
    with a warning.
    """
    if not totals:
        return None
    years = [y for y in panel.index.periods if y in totals]
    dropped = [y for y in panel.index.periods if y not in totals]
    if dropped:
        warnings.warn(f"totals for {panel.reporter} lack years {dropped}; share block truncated")
    cols = [panel.index.periods.index(y) for y in years]
    shares = {}
    for v in SHARE_VARIABLES:
        bilateral = np.nansum(panel.series[v].values[:, cols], axis=0)
        total = np.array([totals[y][f"{v}_total"] for y in years])
        shares[v] = 100.0 * bilateral / total
    return ShareBlock(panel.reporter, tuple(years), shares)


def shares_table(blocks: Mapping[str, ShareBlock]) -> Table:
    header = ("reporter", "year") + tuple(f"{v} share (%)" for v in SHARE_VARIABLES)
    rows = []
    for rep in sorted(blocks):
        b = blocks[rep]
        for t, y in enumerate(b.years):
            rows.append((rep, str(y)) + tuple(f"{b.shares[v][t]:.2f}" for v in SHARE_VARIABLES))
    return Table(
        "shares",
        "Bilateral shares of total trade and FDI",
        header,
        tuple(rows),
        ("Bilateral sums over the panel partners divided by world-partner totals.",),
    )


# ---------------------------------------------------------------------------
# Table builders

CD_ROWS = ("Pesaran CD (normal)", "Friedman (chi-square)", "Frees (Q)")


def cd_table(results: Mapping, reporters: Sequence[str], relations: Sequence[Relation]) -> Table:
    header = ("test",) + tuple(reporters)
    rows = []
    crit_lines = []
    for rel in relations:
        rows.append((relation_label(rel),) + ("",) * len(reporters))
        for i, label in enumerate(CD_ROWS):
            cells = []
            for rep in reporters:
                t = results[(rep, rel.key)][i]
                if t.p_value is None:
                    cells.append(format_stat(t.statistic))
                    cv = t.critical_values
                    line = (
                        f"Frees Q critical values: {cv[0.10]:.3f} (10%), {cv[0.05]:.3f} (5%), "
                        f"{cv[0.01]:.3f} (1%); {t.provenance}."
                    )
                    if line not in crit_lines:
                        crit_lines.append(line)
                else:
                    cells.append(f"{format_stat(t.statistic)} {format_p(t.p_value, 3)}")
            rows.append((label,) + tuple(cells))
    notes = (
        "Null hypothesis of every test: residuals are independent across partners.",
        "Statistics with p-values in brackets; tests use fixed-effects residuals.",
    ) + tuple(crit_lines)
    return Table("cd_tests", "Cross-sectional dependence tests", header, tuple(rows), notes)


def unitroot_table(results: Mapping, reporters: Sequence[str], cfg: PipelineConfig) -> Table:
    header = ("variable",) + tuple(f"{rep} {k}" for rep in reporters for k in ("CADF", "IPS"))
    rows = []
    prov: list[str] = []
    for var in UNIT_ROOT_VARIABLES:
        cells = []
        for rep in reporters:
            for res in results[(rep, var)]:
                mark = f" {TREND_MARK}" if res.spec.trend else ""
                cells.append(f"{format_stat(res.tbar)}{mark} {format_p(res.p_value)}")
                line = f"{res.test} reference values: {res.provenance}."
                if line not in prov:
                    prov.append(line)
        rows.append((var,) + tuple(cells))
    notes = (
        "Null hypothesis of both tests: every partner series has a unit root.",
        "CADF allows for cross-sectional dependence; IPS assumes independence.",
        "Average entity t-statistic (t-bar) reported with p-values in brackets.",
        f"{cfg.ur_lags} augmentation lags in both tests.",
        f"{TREND_MARK} marks tests run with a linear trend; otherwise a constant only.",
    ) + tuple(prov)
    return Table("unit_roots", "Panel unit root tests", header, tuple(rows), notes)


DIAGNOSTIC_ROWS = (
    "Hausman test (recommended)",
    "Pagan-Hall test",
    "Wu-Hausman test",
    "Durbin-Wu-Hausman test",
    "Sargan test / Hansen J test",
)


def _coef_cell(res: EstimationResult, name: str) -> str:
    if res.method == "FE" and name == CONST:
        b, p = res.extra["const"], res.extra["const_p"]
    elif name in res.names:
        b, p = res.coef(name), res.pvalue(name)
    else:
        return MISSING_CELL
    return format_coef(b) + format_stars(p)


def _test_cell(t: TestResult) -> str:
    if t.p_value is None:
        return format_stat(t.statistic)
    return f"{format_stat(t.statistic)} {format_p(t.p_value)}"


def regression_table(relation: Relation, results: Mapping, reporters: Sequence[str], cfg: PipelineConfig) -> Table:
    header = ["variable"]
    for rep in reporters:
        b = results[(rep, relation.key)]
        header += [f"{rep} FE", f"{rep} RE", f"{rep} 2SLS" + (ROBUST_MARK if b.iv.robust else "")]
    terms = (CONST, relation.fdi) + CONTROL_NAMES + ("dist", "dummy")
    rows = []
    for term in terms:
        label = "c" if term == CONST else term
        cells = []
        for rep in reporters:
            b = results[(rep, relation.key)]
            cells += [_coef_cell(b.fe, term), _coef_cell(b.re, term), _coef_cell(b.iv, term)]
        rows.append((label,) + tuple(cells))
    for label in DIAGNOSTIC_ROWS:
        cells = []
        for rep in reporters:
            b = results[(rep, relation.key)]
            d = b.diagnostics
            if label.startswith("Hausman"):
                h = b.hausman
                text = f"P > chi2 = {h.p_value:.2f} ({h.extra['recommended']})"
            elif label.startswith("Pagan"):
                text = _test_cell(d.pagan_hall)
            elif label.startswith("Wu"):
                text = _test_cell(d.wu_hausman)
            elif label.startswith("Durbin"):
                text = _test_cell(d.durbin_wu_hausman)
            else:
                text = f"{d.overid.name}: {_test_cell(d.overid)}"
            cells += [text, "", ""]
        rows.append((label,) + tuple(cells))
    obs = []
    for rep in reporters:
        b = results[(rep, relation.key)]
        obs += [str(b.fe.n_obs), str(b.re.n_obs), str(b.iv.n_obs)]
    rows.append(("Observations",) + tuple(obs))
    lags = ", ".join(str(k) for k in range(1, cfg.iv_lags + 1))
    notes = (
        "Stars: *** p <= 0.01, ** p <= 0.05, * p <= 0.10.",
        "Diagnostic p-values in brackets.",
        f"Instruments for the endogenous {relation.fdi}, gdpg and bexr: their own lag(s) {lags}.",
        "Over-identification: Sargan under classical errors, Hansen J when the robust path is on; "
        "0.00 when exactly identified.",
        f"2SLS{ROBUST_MARK}: heteroskedasticity-robust (HC1) errors, chosen when Pagan-Hall rejects "
        f"at {cfg.robust_level:g}.",
        "Endogeneity: Wu-Hausman (F) and Durbin-Wu-Hausman (chi-square) augmented-regression tests.",
        "dummy = 1 for CEE partners, 0 otherwise; FE omits time-invariant terms (-).",
    )
    title = f"{relation.trade.capitalize()} and {relation.direction} FDI"
    return Table(f"reg_{relation.key}", title, tuple(header), tuple(rows), notes)


# ---------------------------------------------------------------------------
# Driver


def run_pipeline(cfg: PipelineConfig) -> PipelineReport:
    """Execute every stage and collect results; no files are written."""
    panels, repairs = load_stage(cfg)
    reporters = tuple(panels)
    report = PipelineReport(cfg, reporters, panels, repairs, data_hash=file_sha256(cfg.input))
    if cfg.totals is not None:
        with stage("describe", file=Path(cfg.totals).name):
            totals = read_totals(cfg.totals)
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                for rep, p in panels.items():
                    blk = describe_shares(p, totals.get(rep))
                    if blk is not None:
                        report.shares[rep] = blk
            report.warnings.extend(str(w.message) for w in caught)
    report.cd = cd_stage(cfg, panels)
    report.unit_roots = unitroot_stage(cfg, panels)
    report.regressions = estimate_stage(cfg, panels, report.warnings)
    return report


def estimates_csv(regressions: Mapping) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["reporter", "relation", "estimator", "term", "estimate", "std_error", "p_value", "robust"])
    for (rep, rel), b in regressions.items():
        for res in (b.fe, b.re, b.iv):
            for name in res.names:
                w.writerow(
                    [rep, rel, res.method, name, repr(res.coef(name)), repr(res.stderr(name)), repr(res.pvalue(name)), int(res.robust)]
                )
            if res.method == "FE":
                w.writerow([rep, rel, "FE", CONST, repr(res.extra["const"]), repr(res.extra["const_se"]), repr(res.extra["const_p"]), 0])
    return buf.getvalue()


def render_markdown(report: PipelineReport, figures: Sequence[str] = ()) -> str:
    cfg = report.config
    parts = ["# Trade and FDI gravity panel report", ""]
    parts.append(f"Reporters: {', '.join(report.reporters)}. Relations: {', '.join(r.key for r in cfg.relations)}.")
    first = next(iter(report.panels.values()))
    parts.append(
        f"Panel per reporter: {first.index.n_entities} partners x {first.index.n_periods} years "
        f"({first.index.periods[0]}-{first.index.periods[-1]})."
    )
    if report.repairs:
        parts.append("Repaired cells: " + "; ".join(f"{e} {p} {a}" for e, p, a in report.repairs) + ".")
    parts.append("")
    tables = []
    if report.shares_table is not None:
        tables.append(report.shares_table)
    tables += [report.cd_table, report.unitroot_table] + list(report.regression_tables.values())
    for t in tables:
        parts.append(t.to_markdown())
    if figures:
        parts.append("### Figures\n")
        parts.extend(f"![{Path(f).stem}]({Path(f).name})" for f in figures)
        parts.append("")
    if report.warnings:
        parts.append("### Warnings\n")
        parts.extend(f"- {w}" for w in dict.fromkeys(report.warnings))
        parts.append("")
    parts.append("---")
    parts.extend(f"{line}  " for line in report.footer())
    return "\n".join(parts) + "\n"


def write_report(report: PipelineReport, out_dir=None) -> list[Path]:
    """Write every table, figure and the Markdown report; returns the paths."""
    out = Path(out_dir if out_dir is not None else report.config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name: str, text: str):
        p = out / name
        p.write_text(text, encoding="utf-8")
        written.append(p)

    put(CD_FILE, report.cd_table.to_csv())
    put(UR_FILE, report.unitroot_table.to_csv())
    for rel in report.config.relations:
        put(regression_file(rel), report.regression_tables[rel.key].to_csv())
    put(ESTIMATES_FILE, estimates_csv(report.regressions))
    if report.shares_table is not None:
        put(SHARES_FILE, report.shares_table.to_csv())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["entity", "period", "action"])
    w.writerows(report.repairs)
    put(REPAIRS_FILE, buf.getvalue())
    figures: list[Path] = []
    if report.config.figures:
        from .plotting import write_figures

        figures = write_figures(report, out)
        written.extend(figures)
    put(REPORT_FILE, render_markdown(report, [f.name for f in figures]))
    return written
