"""Balanced panel data model and the demeaning transforms.

Rows are always stacked entity-major, time-minor: all periods of the first
entity, then all periods of the second, and so on.  Missing cells are ``nan``;
arithmetic on them propagates ``nan``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import PanelError

MIN_ENTITIES = 2
MIN_PERIODS = 3


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PanelIndex:
    """Ordered entities (partner countries) and consecutive integer periods."""

    entities: tuple[str, ...]
    periods: tuple[int, ...]

    def __post_init__(self):
        ents = tuple(str(e) for e in self.entities)
        pers = tuple(int(p) for p in self.periods)
        object.__setattr__(self, "entities", ents)
        object.__setattr__(self, "periods", pers)
        if len(set(ents)) != len(ents) or any(e == "" for e in ents):
            raise PanelError(f"entities must be unique and non-empty, got {ents}")
        if len(ents) < MIN_ENTITIES:
            raise PanelError(f"a panel needs at least {MIN_ENTITIES} entities, got {len(ents)}")
        if len(pers) < MIN_PERIODS:
            raise PanelError(f"a panel needs at least {MIN_PERIODS} periods, got {len(pers)}")
        if any(b - a != 1 for a, b in zip(pers, pers[1:])):
            raise PanelError(f"periods must be consecutive integers, got {pers}")

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_periods(self) -> int:
        return len(self.periods)

    @classmethod
    def from_range(cls, entities: Sequence[str], first: int, last: int) -> "PanelIndex":
        return cls(tuple(entities), tuple(range(first, last + 1)))


@dataclass(frozen=True)
class PanelSeries:
    """An N x T matrix of values aligned with a :class:`PanelIndex`."""

    index: PanelIndex
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        v = _frozen(self.values)
        shape = (self.index.n_entities, self.index.n_periods)
        if v.shape != shape:
            raise PanelError(f"series {self.name!r} has shape {v.shape}, index requires {shape}")
        object.__setattr__(self, "values", v)

    @property
    def complete(self) -> bool:
        return not np.isnan(self.values).any()

    def missing_cells(self) -> list[tuple[str, int]]:
        ii, tt = np.nonzero(np.isnan(self.values))
        return [(self.index.entities[i], self.index.periods[t]) for i, t in zip(ii, tt)]

    def stacked(self) -> np.ndarray:
        """Entity-major column of length N*T."""
        return self.values.reshape(-1)

    def with_values(self, values: np.ndarray, name: str | None = None) -> "PanelSeries":
        return PanelSeries(self.index, values, self.name if name is None else name)

    def entity(self, code: str) -> np.ndarray:
        return self.values[self.index.entities.index(code)]


def lag(series: PanelSeries, k: int = 1) -> PanelSeries:
    """Shift each entity's series k periods forward; the first k cells become missing."""
    T = series.index.n_periods
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise PanelError(f"lag order must be a positive integer, got {k!r}")
    if k >= T:
        raise PanelError(f"lag order {k} must be smaller than the number of periods {T}")
    out = np.full_like(series.values, np.nan)
    out[:, k:] = series.values[:, :-k]
    return series.with_values(out, f"L{k}.{series.name}" if series.name else "")


@dataclass(frozen=True)
class DesignMatrix:
    """Stacked regression data: ``y`` on the named columns of ``X``.

    ``entity_of_row`` holds integer codes into ``entities``; ``period_of_row``
    holds the calendar period of each row.  ``instruments`` carries auxiliary
    columns that are not regressors (excluded instruments for 2SLS).
    ``degenerate`` names columns that a transform turned identically zero.
    """

    y: np.ndarray
    X: np.ndarray
    columns: tuple[str, ...]
    entity_of_row: np.ndarray
    period_of_row: np.ndarray
    entities: tuple[str, ...]
    y_name: str = "y"
    instruments: Mapping[str, np.ndarray] = field(default_factory=dict)
    degenerate: frozenset = frozenset()

    def __post_init__(self):
        y = _frozen(self.y).reshape(-1)
        X = _frozen(self.X)
        if X.ndim == 1:
            X = _frozen(X.reshape(-1, 1))
        n = y.shape[0]
        cols = tuple(self.columns)
        if X.shape != (n, len(cols)):
            raise PanelError(f"X has shape {X.shape}, expected ({n}, {len(cols)})")
        if len(set(cols)) != len(cols):
            raise PanelError(f"column names must be unique, got {cols}")
        ent = np.asarray(self.entity_of_row, dtype=int).copy()
        per = np.asarray(self.period_of_row, dtype=int).copy()
        if ent.shape != (n,) or per.shape != (n,):
            raise PanelError("row index maps must have one entry per row")
        if n and (ent.min() < 0 or ent.max() >= len(self.entities)):
            raise PanelError("entity codes out of range")
        if np.isnan(y).any() or np.isnan(X).any():
            raise PanelError("design matrix contains missing values")
        inst = {}
        for k, v in dict(self.instruments).items():
            v = _frozen(v).reshape(-1)
            if v.shape != (n,):
                raise PanelError(f"instrument {k!r} has {v.shape[0]} rows, expected {n}")
            inst[k] = v
        ent.flags.writeable = False
        per.flags.writeable = False
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "entities", tuple(self.entities))
        object.__setattr__(self, "entity_of_row", ent)
        object.__setattr__(self, "period_of_row", per)
        object.__setattr__(self, "instruments", inst)
        object.__setattr__(self, "degenerate", frozenset(self.degenerate))

    @property
    def n_obs(self) -> int:
        return self.y.shape[0]

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    def col(self, name: str) -> np.ndarray:
        return self.X[:, self.columns.index(name)]

    def select(self, rows: np.ndarray) -> "DesignMatrix":
        """Keep the rows where the boolean mask is true."""
        rows = np.asarray(rows, dtype=bool)
        return replace(
            self,
            y=self.y[rows],
            X=self.X[rows],
            entity_of_row=self.entity_of_row[rows],
            period_of_row=self.period_of_row[rows],
            instruments={k: v[rows] for k, v in self.instruments.items()},
        )

    def drop_columns(self, names) -> "DesignMatrix":
        names = set(names)
        keep = [j for j, c in enumerate(self.columns) if c not in names]
        return replace(
            self,
            X=self.X[:, keep],
            columns=tuple(self.columns[j] for j in keep),
            degenerate=self.degenerate - names,
        )

    def time_invariant_columns(self, tol: float = 1e-12) -> list[str]:
        """Columns that are constant within every entity."""
        w = _within(self.X, self.entity_of_row, self.n_entities)
        scale = np.maximum(np.abs(self.X).max(axis=0), 1.0)
        return [c for j, c in enumerate(self.columns) if np.abs(w[:, j]).max() <= tol * scale[j]]

    @classmethod
    def from_series(
        cls,
        y: PanelSeries,
        regressors: Mapping[str, PanelSeries],
        instruments: Mapping[str, PanelSeries] | None = None,
        drop_missing: bool = False,
    ) -> "DesignMatrix":
        """Stack panel series into a design matrix.

        With ``drop_missing`` rows containing a missing cell in any column are
        dropped; otherwise a missing cell is an error.
        """
        idx = y.index
        for nm, s in list(regressors.items()) + list((instruments or {}).items()):
            if s.index != idx:
                raise PanelError(f"series {nm!r} is not aligned with {y.name!r}")
        N, T = idx.n_entities, idx.n_periods
        yy = y.stacked()
        X = np.column_stack([s.stacked() for s in regressors.values()]) if regressors else np.empty((N * T, 0))
        inst = {k: s.stacked() for k, s in (instruments or {}).items()}
        ent = np.repeat(np.arange(N), T)
        per = np.tile(np.asarray(idx.periods), N)
        bad = np.isnan(yy) | np.isnan(X).any(axis=1)
        for v in inst.values():
            bad |= np.isnan(v)
        if bad.any() and not drop_missing:
            i = int(np.flatnonzero(bad)[0])
            raise PanelError(
                f"missing value at entity {idx.entities[ent[i]]!r}, period {per[i]}"
            )
        keep = ~bad
        return cls(
            y=yy[keep],
            X=X[keep],
            columns=tuple(regressors),
            entity_of_row=ent[keep],
            period_of_row=per[keep],
            entities=idx.entities,
            y_name=y.name or "y",
            instruments={k: v[keep] for k, v in inst.items()},
        )


def _group_means(A: np.ndarray, groups: np.ndarray, n_groups: int) -> np.ndarray:
    counts = np.bincount(groups, minlength=n_groups).astype(float)
    if A.ndim == 1:
        return np.bincount(groups, weights=A, minlength=n_groups) / counts
    sums = np.zeros((n_groups, A.shape[1]))
    np.add.at(sums, groups, A)
    return sums / counts[:, None]


def _within(A: np.ndarray, groups: np.ndarray, n_groups: int) -> np.ndarray:
    return A - _group_means(A, groups, n_groups)[groups]


def entity_means(m: DesignMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Per-entity means of y and X (one row per entity)."""
    counts = np.bincount(m.entity_of_row, minlength=m.n_entities)
    if (counts == 0).any():
        raise PanelError("every entity must contribute at least one row")
    return (
        _group_means(m.y, m.entity_of_row, m.n_entities),
        _group_means(m.X, m.entity_of_row, m.n_entities),
    )


def _check_groups(m: DesignMatrix) -> np.ndarray:
    counts = np.bincount(m.entity_of_row, minlength=m.n_entities)
    single = [m.entities[i] for i in np.flatnonzero(counts < 2)]
    if single:
        raise PanelError(f"within transform undefined for entities with fewer than two rows: {single}")
    return counts


def within_transform(m: DesignMatrix) -> DesignMatrix:
    """Replace y and every column by deviations from its entity mean.

    Columns that become identically zero (time-invariant regressors) are kept
    but flagged in ``degenerate``.
    """
    _check_groups(m)
    y = _within(m.y, m.entity_of_row, m.n_entities)
    X = _within(m.X, m.entity_of_row, m.n_entities)
    scale = np.maximum(np.abs(m.X).max(axis=0, initial=0.0), 1.0)
    degenerate = {c for j, c in enumerate(m.columns) if np.abs(X[:, j]).max(initial=0.0) <= 1e-12 * scale[j]}
    for j, c in enumerate(m.columns):
        if c in degenerate:
            X[:, j] = 0.0
    inst = {k: _within(v, m.entity_of_row, m.n_entities) for k, v in m.instruments.items()}
    return replace(m, y=y, X=X, instruments=inst, degenerate=frozenset(degenerate))


def quasi_demean(m: DesignMatrix, theta_per_entity) -> DesignMatrix:
    """GLS quasi-demeaning: ``x_it - theta_i * mean_i(x)``.

    ``theta = 0`` leaves the data unchanged, ``theta = 1`` is the within
    transform.
    """
    theta = np.broadcast_to(np.asarray(theta_per_entity, dtype=float), (m.n_entities,))
    if np.isnan(theta).any() or (theta < 0).any() or (theta > 1).any():
        raise PanelError(f"theta must lie in [0, 1], got {theta}")
    if (theta == 1).any():
        _check_groups(m)
    th = theta[m.entity_of_row]
    ybar = _group_means(m.y, m.entity_of_row, m.n_entities)[m.entity_of_row]
    Xbar = _group_means(m.X, m.entity_of_row, m.n_entities)[m.entity_of_row]
    inst = {
        k: v - th * _group_means(v, m.entity_of_row, m.n_entities)[m.entity_of_row]
        for k, v in m.instruments.items()
    }
    return replace(m, y=m.y - th * ybar, X=m.X - th[:, None] * Xbar, instruments=inst)


def panel_variance_decomposition(x: np.ndarray, groups: np.ndarray, n_groups: int) -> tuple[float, float, float]:
    """Total, within and (row-weighted) between population variances of x."""
    x = np.asarray(x, dtype=float)
    total = float(np.mean((x - x.mean()) ** 2))
    w = _within(x, groups, n_groups)
    within = float(np.mean(w**2))
    means = _group_means(x, groups, n_groups)[groups]
    between = float(np.mean((means - x.mean()) ** 2))
    return total, within, between
