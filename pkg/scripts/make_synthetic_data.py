"""Regenerate the bundled synthetic CEE-4 dataset and its totals file.

Run from the repository root::

    python3 scripts/make_synthetic_data.py

Values are rounded to six significant figures so the CSV stays readable.  One
interior outfdi cell (CZE-HUN, 2002) is blanked to exercise gap repair.  The
totals file plants a linear doubling of the bilateral share of total trade
and FDI over the sample, measured on the repaired panel.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from gravpanel.dgp import DgpSpec, generate
from gravpanel.ingest import VALUE_COLUMNS, BilateralPanel, panels_to_csv, repair_panel
from gravpanel.panel import PanelSeries

OUT = Path(__file__).resolve().parents[1] / "src" / "gravpanel" / "data"
CEE4 = ("CZE", "HUN", "POL", "SVK")
EU3 = ("AUT", "DEU", "NLD")
GAP = ("CZE", "HUN", 2002, "outfdi")

# Per-reporter settings: error heteroskedasticity and common-factor loading.
# POL and SVK seeds were picked so that Pagan-Hall rejects in some relations
# and the bundled run exercises the robust 2SLS path.
SETTINGS = {
    "CZE": dict(cross_dependence=0.10, heteroskedasticity="none", seed=101),
    "HUN": dict(cross_dependence=0.0, heteroskedasticity="none", seed=202),
    "POL": dict(cross_dependence=0.10, heteroskedasticity="fdi", seed=306),
    "SVK": dict(cross_dependence=0.10, heteroskedasticity="fdi", seed=314),
}


def _round(v: np.ndarray) -> np.ndarray:
    return np.vectorize(lambda x: float(f"{x:.6g}"))(v)


def build():
    panels = []
    for rep in CEE4:
        partners = tuple(c for c in CEE4 if c != rep) + EU3
        spec = DgpSpec(reporter=rep, partners=partners, cee=partners[:3], **SETTINGS[rep])
        p = generate(spec)
        series = {}
        for c in VALUE_COLUMNS:
            v = p.series[c].values
            v = v.copy() if c == "cee_partner" else _round(v)
            if (rep, c) == (GAP[0], GAP[3]):
                v[partners.index(GAP[1]), p.index.periods.index(GAP[2])] = np.nan
            series[c] = PanelSeries(p.index, v, c)
        panels.append(BilateralPanel(rep, p.index, series))
    return panels


def totals(panels):
    # Shares are planted on the repaired panel, which is what the pipeline sees.
    rows = []
    for p in (repair_panel(q)[0] for q in panels):
        T = p.index.n_periods
        share = np.linspace(0.08, 0.16, T)
        for t, year in enumerate(p.index.periods):
            row = [p.reporter, year]
            for c in ("exports", "imports", "outfdi", "infdi"):
                s = np.nansum(p.series[c].values[:, t])
                row.append(f"{s / share[t]:.6g}")
            rows.append(row)
    return rows


def main():
    panels = build()
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "synthetic_cee4.csv").write_text(panels_to_csv(panels))
    with open(OUT / "synthetic_cee4_totals.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["reporter", "year", "exports_total", "imports_total", "outfdi_total", "infdi_total"])
        w.writerows(totals(panels))
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
