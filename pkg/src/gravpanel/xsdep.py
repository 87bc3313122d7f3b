"""Cross-sectional dependence tests on panel residuals.

Three statistics are provided: Pesaran's CD (Pearson correlations), Friedman's
rank statistic and Frees' squared-rank statistic.  All take an N x T residual
matrix, one row per entity.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import stats

from .errors import EstimationError, PanelError, SimulationDisabledError
from .panel import DesignMatrix, PanelIndex
from .results import CHI2, FREES_Q, NORMAL, TestResult

NULL_INDEPENDENCE = "residuals are cross-sectionally independent"

# Frees' Q critical values (10%, 5%, 1%) embedded for T = 14.
FREES_TABLE = {14: {0.10: 0.184, 0.05: 0.243, 0.01: 0.360}}
FREES_SIM_REPS = 100_000
FREES_SIM_SEED = 20240601


@dataclass(frozen=True)
class ResidualPanel:
    """N x T residual matrix aligned with a panel index."""

    index: PanelIndex
    residuals: np.ndarray

    def __post_init__(self):
        r = np.array(self.residuals, dtype=float)
        shape = (self.index.n_entities, self.index.n_periods)
        if r.shape != shape:
            raise PanelError(f"residual matrix has shape {r.shape}, expected {shape}")
        if np.isnan(r).any():
            raise PanelError("residual panel must be complete")
        r.flags.writeable = False
        object.__setattr__(self, "residuals", r)

    @classmethod
    def from_array(cls, residuals) -> "ResidualPanel":
        r = np.asarray(residuals, dtype=float)
        N, T = r.shape
        return cls(PanelIndex(tuple(f"e{i}" for i in range(N)), tuple(range(T))), r)

    @classmethod
    def from_design(cls, m: DesignMatrix, residuals: np.ndarray) -> "ResidualPanel":
        """Reshape stacked residuals of a balanced design back to N x T."""
        periods = np.unique(m.period_of_row)
        N, T = m.n_entities, periods.size
        if m.n_obs != N * T:
            raise PanelError("residuals must come from a balanced design")
        out = np.full((N, T), np.nan)
        out[m.entity_of_row, np.searchsorted(periods, m.period_of_row)] = residuals
        return cls(PanelIndex(m.entities, tuple(int(p) for p in periods)), out)


def _pairs(N: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(N, k=1)


def _pearson_matrix(r: np.ndarray) -> np.ndarray:
    sd = r.std(axis=1)
    if (sd == 0).any():
        bad = int(np.flatnonzero(sd == 0)[0])
        raise EstimationError(f"entity {bad} has zero residual variance; correlation undefined")
    return np.corrcoef(r)


def _rank_matrix(r: np.ndarray) -> np.ndarray:
    ranks = stats.rankdata(r, axis=1)  # average ranks for ties
    if (ranks.std(axis=1) == 0).any():
        bad = int(np.flatnonzero(ranks.std(axis=1) == 0)[0])
        raise EstimationError(f"entity {bad} has a constant series; ranks are degenerate")
    return np.corrcoef(ranks)


def _resid(r) -> np.ndarray:
    return r.residuals if isinstance(r, ResidualPanel) else np.asarray(r, dtype=float)


def pesaran_cd(r: ResidualPanel) -> TestResult:
    """Pesaran's CD: ``sqrt(2T / (N(N-1))) * sum_{i<j} rho_ij``; two-sided normal p-value."""
    e = _resid(r)
    N, T = e.shape
    if N < 2:
        raise PanelError("Pesaran CD needs at least two entities")
    rho = _pearson_matrix(e)[_pairs(N)]
    cd = float(np.sqrt(2.0 * T / (N * (N - 1))) * rho.sum())
    return TestResult(
        name="Pesaran CD",
        statistic=cd,
        reference_distribution=NORMAL,
        null_hypothesis=NULL_INDEPENDENCE,
        p_value=float(2 * stats.norm.sf(abs(cd))),
        extra={"mean_abs_rho": float(np.abs(rho).mean())},
    )


def mean_spearman(e: np.ndarray) -> float:
    N = e.shape[0]
    return float(_rank_matrix(e)[_pairs(N)].mean())


def friedman_cd(r: ResidualPanel) -> TestResult:
    """Friedman's rank statistic ``(T-1) * ((N-1) * R + 1)``, chi-square(T-1).

    ``R`` is the average pairwise Spearman correlation between entity series.
    Without ties this equals Friedman's two-way rank statistic with entities
    as blocks and periods as treatments.
    """
    e = _resid(r)
    N, T = e.shape
    if N < 2 or T < 3:
        raise PanelError("Friedman test needs N >= 2 and T >= 3")
    rbar = mean_spearman(e)
    stat = float((T - 1) * ((N - 1) * rbar + 1))
    return TestResult(
        name="Friedman",
        statistic=stat,
        reference_distribution=CHI2,
        null_hypothesis=NULL_INDEPENDENCE,
        df=T - 1,
        p_value=float(stats.chi2.sf(stat, T - 1)),
        extra={"mean_rank_correlation": rbar},
    )


def frees_q_weights(T: int) -> tuple[float, float]:
    """Coefficients of the two centred chi-squares making up Frees' Q(T)."""
    a = 4.0 * (T + 2) / (5.0 * (T - 1) ** 2 * (T + 1))
    b = 2.0 * (5 * T + 6) / (5.0 * T * (T - 1) * (T + 1))
    return a, b


@lru_cache(maxsize=64)
def simulate_frees_critical_values(T: int, reps: int = FREES_SIM_REPS, seed: int = FREES_SIM_SEED) -> dict[float, float]:
    """Upper quantiles of Q(T) = a(x1 - (T-1)) + b(x2 - T(T-3)/2) by simulation."""
    a, b = frees_q_weights(T)
    rng = np.random.default_rng([seed, T])
    d2 = T * (T - 3) / 2
    q = a * (rng.chisquare(T - 1, reps) - (T - 1)) + b * (rng.chisquare(d2, reps) - d2)
    return {lvl: float(np.quantile(q, 1 - lvl)) for lvl in (0.10, 0.05, 0.01)}


def frees_critical_values(T: int, simulate: bool = True, seed: int = FREES_SIM_SEED) -> tuple[dict[float, float], str]:
    """Critical values for Frees' test and their provenance label."""
    if T in FREES_TABLE:
        return dict(FREES_TABLE[T]), "embedded-table"
    if not simulate:
        raise SimulationDisabledError(f"no embedded Frees critical values for T={T} and simulation disabled")
    return simulate_frees_critical_values(T, FREES_SIM_REPS, seed), f"simulated (reps={FREES_SIM_REPS}, seed={seed})"


def frees_cd(r: ResidualPanel, simulate: bool = True, seed: int = FREES_SIM_SEED) -> TestResult:
    """Frees' statistic ``N * (mean r_ij^2 - 1/(T-1))`` over Spearman correlations.

    The decision uses critical values of Frees' Q distribution; no p-value.
    """
    e = _resid(r)
    N, T = e.shape
    if N < 2 or T < 4:
        raise PanelError("Frees test needs N >= 2 and T >= 4")
    r2 = float((_rank_matrix(e)[_pairs(N)] ** 2).mean())
    stat = float(N * (r2 - 1.0 / (T - 1)))
    crit, prov = frees_critical_values(T, simulate, seed)
    return TestResult(
        name="Frees",
        statistic=stat,
        reference_distribution=FREES_Q,
        null_hypothesis=NULL_INDEPENDENCE,
        critical_values=crit,
        provenance=prov,
        extra={"mean_sq_rank_correlation": r2},
    )


def cd_battery(r: ResidualPanel, simulate: bool = True, seed: int = FREES_SIM_SEED) -> list[TestResult]:
    return [pesaran_cd(r), friedman_cd(r), frees_cd(r, simulate, seed)]
