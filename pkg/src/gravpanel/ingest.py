"""CSV ingestion of bilateral reporter-partner-year panels.

File contract: UTF-8, comma separated, '.' decimal point, mandatory header.
One row per (reporter, partner, year).  Missing cells are the empty string or
``NA``.  Header matching is case-insensitive and order-insensitive.

Note on ``bexr``: the source statistics do not say whether the bilateral
exchange rate is an annual average or an end-of-period value; the column is
carried as supplied.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import DataValueError, DuplicateKeyError, PanelError, SchemaError
from .panel import PanelIndex, PanelSeries

KEY_COLUMNS = ("reporter", "partner", "year")
VALUE_COLUMNS = (
    "exports",
    "imports",
    "outfdi",
    "infdi",
    "gdp_reporter",
    "gdp_partner",
    "gdppc_reporter",
    "gdppc_partner",
    "growth_partner",
    "pop_reporter",
    "pop_partner",
    "bexr",
    "dist",
    "cee_partner",
)
COLUMNS = KEY_COLUMNS + VALUE_COLUMNS

# Must be strictly positive whenever present.
POSITIVE_COLUMNS = (
    "exports",
    "imports",
    "outfdi",
    "infdi",
    "gdp_reporter",
    "gdp_partner",
    "gdppc_reporter",
    "gdppc_partner",
    "pop_reporter",
    "pop_partner",
    "bexr",
    "dist",
)
MISSING_TOKENS = ("", "NA")


@dataclass(frozen=True)
class SchemaConfig:
    """Optional restrictions applied while loading."""

    years: tuple[int, int] | None = None
    reporters: tuple[str, ...] | None = None
    partners: tuple[str, ...] | None = None


@dataclass(frozen=True)
class BilateralPanel:
    """Raw series for one reporter; entities are partner countries."""

    reporter: str
    index: PanelIndex
    series: Mapping[str, PanelSeries]

    def __getitem__(self, name: str) -> PanelSeries:
        return self.series[name]

    @property
    def complete(self) -> bool:
        return all(s.complete for s in self.series.values())

    @property
    def n_rows(self) -> int:
        return self.index.n_entities * self.index.n_periods

    def replace_series(self, **updates: PanelSeries) -> "BilateralPanel":
        new = dict(self.series)
        new.update(updates)
        return BilateralPanel(self.reporter, self.index, new)

    def cee_set(self) -> tuple[str, ...]:
        flag = self.series["cee_partner"].values
        return tuple(e for i, e in enumerate(self.index.entities) if np.nanmax(flag[i]) == 1)


@dataclass
class RepairReport:
    """Log of gap repairs: one ``(entity, period, action)`` record per cell."""

    entries: list[tuple[str, int, str]] = field(default_factory=list)

    def add(self, entity: str, period: int, action: str) -> None:
        self.entries.append((entity, period, action))

    def __len__(self) -> int:
        return len(self.entries)

    def unrepaired(self) -> list[tuple[str, int, str]]:
        return [e for e in self.entries if not e[2].startswith("interpolate")]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["entity", "period", "action"])
            w.writerows(self.entries)


def _parse_float(text: str, line: int, column: str) -> float:
    text = text.strip()
    if text in MISSING_TOKENS:
        return math.nan
    try:
        v = float(text)
    except ValueError:
        raise DataValueError(
            f"line {line}, column {column!r}: cannot parse {text!r} as a number", row=line, column=column
        ) from None
    if not math.isfinite(v):
        raise DataValueError(f"line {line}, column {column!r}: non-finite value {text!r}", row=line, column=column)
    return v


def read_records(fh: Iterable[str], schema: SchemaConfig | None = None) -> list[dict]:
    """Parse and validate CSV rows into dictionaries keyed by canonical column names."""
    schema = schema or SchemaConfig()
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None:
        raise SchemaError(f"empty file: missing column {COLUMNS[0]!r}")
    lookup = {h.strip().lower(): j for j, h in enumerate(header)}
    if len(lookup) != len(header):
        raise SchemaError("header contains duplicate column names")
    for c in COLUMNS:
        if c not in lookup:
            raise SchemaError(f"missing column {c!r}")
    records = []
    seen: dict[tuple, int] = {}
    for line, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise DataValueError(f"line {line}: expected {len(header)} fields, got {len(row)}", row=line)
        rec = {}
        for c in ("reporter", "partner"):
            v = row[lookup[c]].strip()
            if not v:
                raise DataValueError(f"line {line}: empty {c!r}", row=line, column=c)
            rec[c] = v
        ytxt = row[lookup["year"]].strip()
        try:
            rec["year"] = int(ytxt)
        except ValueError:
            raise DataValueError(f"line {line}, column 'year': cannot parse {ytxt!r}", row=line, column="year") from None
        for c in VALUE_COLUMNS:
            rec[c] = _parse_float(row[lookup[c]], line, c)
        if schema.reporters is not None and rec["reporter"] not in schema.reporters:
            continue
        if schema.partners is not None and rec["partner"] not in schema.partners:
            continue
        if schema.years is not None and not schema.years[0] <= rec["year"] <= schema.years[1]:
            continue
        key = (rec["reporter"], rec["partner"], rec["year"])
        if key in seen:
            raise DuplicateKeyError(f"duplicate key {key} on lines {seen[key]} and {line}")
        seen[key] = line
        for c in POSITIVE_COLUMNS:
            if rec[c] <= 0:
                raise DataValueError(
                    f"line {line}, column {c!r}: value {rec[c]!r} must be strictly positive", row=line, column=c
                )
        if not math.isnan(rec["cee_partner"]) and rec["cee_partner"] not in (0.0, 1.0):
            raise DataValueError(f"line {line}: cee_partner must be 0 or 1", row=line, column="cee_partner")
        rec["_line"] = line
        records.append(rec)
    return records


def build_panels(records: list[dict], schema: SchemaConfig | None = None) -> dict[str, BilateralPanel]:
    """Assemble validated records into one balanced panel per reporter."""
    schema = schema or SchemaConfig()
    by_reporter: dict[str, list[dict]] = {}
    for rec in records:
        by_reporter.setdefault(rec["reporter"], []).append(rec)
    panels = {}
    for reporter, recs in by_reporter.items():
        partners = list(dict.fromkeys(r["partner"] for r in recs))
        if schema.partners is not None:
            partners = [p for p in schema.partners if p in partners]
        years = sorted({r["year"] for r in recs})
        if schema.years is not None:
            years = list(range(schema.years[0], schema.years[1] + 1))
        else:
            years = list(range(years[0], years[-1] + 1))
        index = PanelIndex(tuple(partners), tuple(years))
        pos = {(p, y): (i, t) for i, p in enumerate(partners) for t, y in enumerate(years)}
        data = {c: np.full((len(partners), len(years)), np.nan) for c in VALUE_COLUMNS}
        filled = np.zeros((len(partners), len(years)), dtype=bool)
        for r in recs:
            i, t = pos[(r["partner"], r["year"])]
            filled[i, t] = True
            for c in VALUE_COLUMNS:
                data[c][i, t] = r[c]
        if not filled.all():
            i, t = np.argwhere(~filled)[0]
            raise PanelError(
                f"unbalanced panel for reporter {reporter!r}: no row for partner "
                f"{partners[i]!r}, year {years[t]} ({int((~filled).sum())} rows missing)"
            )
        for c in ("cee_partner", "dist"):
            vals = data[c]
            for i, p in enumerate(partners):
                obs = vals[i][~np.isnan(vals[i])]
                if obs.size and np.any(obs != obs[0]):
                    raise DataValueError(
                        f"{c!r} must be constant over time for ({reporter}, {p})", column=c, entity=p
                    )
        series = {c: PanelSeries(index, data[c], c) for c in VALUE_COLUMNS}
        panels[reporter] = BilateralPanel(reporter, index, series)
    return panels


def load_panel(path, schema_config: SchemaConfig | None = None) -> dict[str, BilateralPanel]:
    """Read a bilateral CSV file; returns ``{reporter: BilateralPanel}``."""
    if not os.path.exists(path):
        raise SchemaError(f"input file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        records = read_records(fh, schema_config)
    if not records:
        raise SchemaError(f"no data rows in {path}")
    return build_panels(records, schema_config)


def _fmt(v: float, column: str) -> str:
    if math.isnan(v):
        return "NA"
    if column == "cee_partner":
        return str(int(v))
    return repr(float(v))


def panels_to_csv(panels: Iterable[BilateralPanel]) -> str:
    """Canonical CSV text: schema column order, reporter, partner, year order."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for p in panels:
        for i, partner in enumerate(p.index.entities):
            for t, year in enumerate(p.index.periods):
                w.writerow(
                    [p.reporter, partner, year] + [_fmt(p.series[c].values[i, t], c) for c in VALUE_COLUMNS]
                )
    return buf.getvalue()


def write_panel(panels, path) -> None:
    if isinstance(panels, BilateralPanel):
        panels = [panels]
    elif isinstance(panels, Mapping):
        panels = list(panels.values())
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(panels_to_csv(panels))


def interpolate_gaps(series: PanelSeries, max_gap: int = 1, report: RepairReport | None = None) -> PanelSeries:
    """Fill interior runs of at most ``max_gap`` missing cells linearly.

    Leading/trailing gaps and longer interior runs are left missing and
    recorded in ``report`` when one is supplied.
    """
    if max_gap < 0:
        raise ValueError("max_gap must be non-negative")
    values = series.values.copy()
    label = series.name or "value"
    for i, ent in enumerate(series.index.entities):
        row = values[i]
        miss = np.isnan(row)
        t = 0
        T = row.size
        while t < T:
            if not miss[t]:
                t += 1
                continue
            start = t
            while t < T and miss[t]:
                t += 1
            stop = t  # first observed index after the run, or T
            periods = series.index.periods[start:stop]
            if start == 0 or stop == T:
                action = f"unrepairable_edge:{label}"
            elif stop - start > max_gap:
                action = f"unrepairable_gap:{label}"
            else:
                lo, hi = row[start - 1], row[stop]
                span = stop - (start - 1)
                for s in range(start, stop):
                    row[s] = lo + (hi - lo) * (s - (start - 1)) / span
                action = f"interpolate:{label}"
            if report is not None:
                for p in periods:
                    report.add(ent, p, action)
    return series.with_values(values)


def repair_panel(panel: BilateralPanel, max_gap: int = 1) -> tuple[BilateralPanel, RepairReport]:
    """Interpolate every series of a panel; returns the repaired panel and its report."""
    report = RepairReport()
    updates = {c: interpolate_gaps(s, max_gap, report) for c, s in panel.series.items() if not s.complete}
    return panel.replace_series(**updates), report


def log_transform(series: PanelSeries) -> PanelSeries:
    """Element-wise natural log; non-positive populated cells are an error."""
    v = series.values
    bad = ~np.isnan(v) & (v <= 0)
    if bad.any():
        i, t = np.argwhere(bad)[0]
        ent, per = series.index.entities[i], series.index.periods[t]
        raise DataValueError(
            f"cannot take the log of {series.name or 'series'} = {v[i, t]!r} at ({ent}, {per})",
            column=series.name,
            entity=ent,
            period=per,
        )
    return series.with_values(np.log(v), f"ln_{series.name}" if series.name else "")
