"""Gravity regressors built from a :class:`~gravpanel.ingest.BilateralPanel`.

Every variable enters in natural logs except the partner dummy.  The growth
rate is shifted before logging because it turns negative in recession years.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DataValueError
from .ingest import BilateralPanel
from .panel import DesignMatrix, PanelIndex, PanelSeries

CONTROL_NAMES = ("gdpav", "gdpdif", "gdpcav", "gdpcdif", "gdpg", "popav", "bexr")
TIME_INVARIANT_NAMES = ("dist", "dummy")

# Shift added to the growth rate before taking logs, in percentage points.
GROWTH_SHIFT = 10.0


@dataclass(frozen=True)
class Relation:
    """One of the four trade-FDI pairings: exports/imports x outward/inward."""

    trade: str
    direction: str

    def __post_init__(self):
        if self.trade not in ("exports", "imports"):
            raise ValueError(f"trade must be 'exports' or 'imports', got {self.trade!r}")
        if self.direction not in ("outward", "inward"):
            raise ValueError(f"direction must be 'outward' or 'inward', got {self.direction!r}")

    @property
    def fdi(self) -> str:
        return "outfdi" if self.direction == "outward" else "infdi"

    @property
    def key(self) -> str:
        return f"{self.trade}_{self.fdi}"

    @classmethod
    def parse(cls, text: str) -> "Relation":
        text = text.strip().lower().replace("-", "_")
        for r in ALL_RELATIONS:
            if text in (r.key, f"{r.trade}_{r.direction}"):
                return r
        raise ValueError(f"unknown relation {text!r}; expected one of {[r.key for r in ALL_RELATIONS]}")

    def __str__(self):
        return self.key


ALL_RELATIONS = (
    Relation("exports", "outward"),
    Relation("exports", "inward"),
    Relation("imports", "outward"),
    Relation("imports", "inward"),
)


def _values(x):
    return x.values if isinstance(x, PanelSeries) else np.asarray(x, dtype=float)


def _wrap(like, values, name):
    if isinstance(like, PanelSeries):
        return PanelSeries(like.index, values, name)
    return values


def _locate(like, mask):
    if isinstance(like, PanelSeries):
        i, t = np.argwhere(mask)[0]
        return like.index.entities[i], like.index.periods[t]
    return tuple(int(k) for k in np.argwhere(mask)[0]), None


def _require_positive(x, label):
    v = _values(x)
    bad = ~(v > 0)
    if bad.any():
        ent, per = _locate(x, bad)
        raise DataValueError(f"{label}: non-positive value at ({ent}, {per})", column=label, entity=ent, period=per)


def avg_pair(a, b, name: str = ""):
    """``ln((a + b) / 2)`` element-wise."""
    _require_positive(a, name or "avg_pair")
    _require_positive(b, name or "avg_pair")
    return _wrap(a, np.log((_values(a) + _values(b)) / 2.0), name)


def abs_diff(a, b, name: str = ""):
    """``ln(|a - b|)`` element-wise; exact ties are an error."""
    _require_positive(a, name or "abs_diff")
    _require_positive(b, name or "abs_diff")
    d = np.abs(_values(a) - _values(b))
    tie = d == 0
    if tie.any():
        ent, per = _locate(a, tie)
        raise DataValueError(
            f"{name or 'abs_diff'}: identical values at ({ent}, {per}) give log of zero",
            column=name,
            entity=ent,
            period=per,
        )
    return _wrap(a, np.log(d), name)


def shifted_log_growth(g, shift: float = GROWTH_SHIFT, name: str = "gdpg"):
    """``ln(shift + g)``; with the default shift, g is in percentage points."""
    v = _values(g) + shift
    bad = ~(v > 0)
    if bad.any():
        ent, per = _locate(g, bad)
        raise DataValueError(
            f"{name}: growth rate at ({ent}, {per}) is at or below -{shift:g}", column=name, entity=ent, period=per
        )
    return _wrap(g, np.log(v), name)


def partner_dummy(partners: Sequence[str], cee_set: Sequence[str]) -> np.ndarray:
    """1.0 for partners in ``cee_set``, 0.0 otherwise (one value per partner)."""
    cee = set(cee_set)
    return np.array([1.0 if p in cee else 0.0 for p in partners])


def _log(s: PanelSeries, name: str) -> PanelSeries:
    _require_positive(s, name)
    return PanelSeries(s.index, np.log(s.values), name)


@dataclass(frozen=True)
class GravityDataset:
    """Regression-ready panel for one relation."""

    index: PanelIndex
    relation: Relation
    y: PanelSeries
    fdi: PanelSeries
    controls: Mapping[str, PanelSeries]
    time_invariant: Mapping[str, PanelSeries]

    @property
    def regressor_names(self) -> tuple[str, ...]:
        return (self.fdi.name,) + tuple(self.controls) + tuple(self.time_invariant)

    def regressors(self) -> dict[str, PanelSeries]:
        out = {self.fdi.name: self.fdi}
        out.update(self.controls)
        out.update(self.time_invariant)
        return out

    def to_design(self) -> DesignMatrix:
        return DesignMatrix.from_series(self.y, self.regressors())


def build_controls(panel: BilateralPanel, growth_shift: float = GROWTH_SHIFT) -> dict[str, PanelSeries]:
    """The relation-independent control columns."""
    s = panel.series
    return {
        "gdpav": avg_pair(s["gdp_reporter"], s["gdp_partner"], "gdpav"),
        "gdpdif": abs_diff(s["gdp_reporter"], s["gdp_partner"], "gdpdif"),
        "gdpcav": avg_pair(s["gdppc_reporter"], s["gdppc_partner"], "gdpcav"),
        "gdpcdif": abs_diff(s["gdppc_reporter"], s["gdppc_partner"], "gdpcdif"),
        "gdpg": shifted_log_growth(s["growth_partner"], growth_shift, "gdpg"),
        "popav": avg_pair(s["pop_reporter"], s["pop_partner"], "popav"),
        "bexr": _log(s["bexr"], "bexr"),
    }


def build_time_invariant(panel: BilateralPanel, cee_set: Sequence[str] | None = None) -> dict[str, PanelSeries]:
    idx = panel.index
    if cee_set is None:
        cee_set = panel.cee_set()
    dummy = np.repeat(partner_dummy(idx.entities, cee_set)[:, None], idx.n_periods, axis=1)
    return {
        "dist": _log(panel.series["dist"], "dist"),
        "dummy": PanelSeries(idx, dummy, "dummy"),
    }


def build_dataset(
    panel: BilateralPanel,
    relation: Relation | str,
    cee_set: Sequence[str] | None = None,
    growth_shift: float = GROWTH_SHIFT,
) -> GravityDataset:
    """Construct the dependent variable, FDI regressor and controls for one relation."""
    if isinstance(relation, str):
        relation = Relation.parse(relation)
    for name, s in panel.series.items():
        if not s.complete:
            ent, per = s.missing_cells()[0]
            raise DataValueError(f"{name}: missing value at ({ent}, {per}); repair the panel first", column=name)
    y = _log(panel.series[relation.trade], relation.trade)
    fdi = _log(panel.series[relation.fdi], relation.fdi)
    return GravityDataset(
        index=panel.index,
        relation=relation,
        y=y,
        fdi=fdi,
        controls=build_controls(panel, growth_shift),
        time_invariant=build_time_invariant(panel, cee_set),
    )


def unit_root_variables(panel: BilateralPanel, growth_shift: float = GROWTH_SHIFT) -> dict[str, PanelSeries]:
    """Time-varying logged series in the order of the unit-root table."""
    s = panel.series
    out = {
        "ex": _log(s["exports"], "ex"),
        "im": _log(s["imports"], "im"),
        "outfdi": _log(s["outfdi"], "outfdi"),
        "infdi": _log(s["infdi"], "infdi"),
    }
    out.update(build_controls(panel, growth_shift))
    return out
