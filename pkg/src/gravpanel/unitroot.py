"""Panel unit-root tests: entity ADF regressions, IPS t-bar and Pesaran's CIPS.

The ADF regression for one series is::

    dy_t = a [+ b*t] + rho*y_{t-1} + sum_{l=1..p} c_l*dy_{t-l} + e_t

estimated on the ``T - 1 - p`` usable rows.  The CADF regression augments it
with the lagged cross-section mean ``ybar_{t-1}`` and ``dybar_t, ...,
dybar_{t-p}``.

Reference moments (IPS) and critical values (CIPS) come from embedded tables
when available and from seeded simulation otherwise; every result records the
provenance of its reference values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import stats

from . import _tables
from .errors import EstimationError, PanelError, SimulationDisabledError, SingularRegressionError
from .linalg import batch_tstat, check_rank, inv_xtx, lstsq
from .panel import PanelSeries

CONSTANT = "c"
TREND = "ct"
IPS_SIM_REPS = 50_000
CIPS_SIM_REPS = 50_000
DEFAULT_SEED = 20240601
_CHUNK = 4096


@dataclass(frozen=True)
class AdfSpec:
    """Deterministic terms (``"c"`` or ``"ct"``) and augmentation lag order."""

    deterministic: str = CONSTANT
    lags: int = 2

    def __post_init__(self):
        if self.deterministic not in (CONSTANT, TREND):
            raise ValueError(f"deterministic must be 'c' or 'ct', got {self.deterministic!r}")
        if int(self.lags) != self.lags or self.lags < 0:
            raise ValueError(f"lags must be a non-negative integer, got {self.lags!r}")

    @property
    def trend(self) -> bool:
        return self.deterministic == TREND

    def check_length(self, T: int) -> None:
        if self.lags > T - 4:
            raise EstimationError(f"{self.lags} lags leave no degrees of freedom with T={T} (need lags <= T-4)")


@dataclass(frozen=True)
class UnitRootResult:
    test: str
    spec: AdfSpec
    per_entity_t: np.ndarray
    tbar: float
    standardized: float | None
    p_value: float | None
    critical_values: dict = field(default_factory=dict)
    provenance: str = ""
    null_hypothesis: str = "every entity series has a unit root"

    def rejects(self, level: float = 0.05) -> bool:
        if self.p_value is not None:
            return self.p_value <= level
        return self.tbar < self.critical_values[level]


def _adf_design(Y: np.ndarray, spec: AdfSpec, cs: np.ndarray | None = None):
    """Dependent variable and regressors for a stack of series.

    Y has shape (R, T); ``cs`` (same shape) is the cross-section mean for
    CADF.  Returns ``dep (R, n)``, ``X (R, n, k)`` and the column of y_{t-1}.
    """
    R, T = Y.shape
    p = spec.lags
    dY = np.diff(Y, axis=1)  # dY[:, j] = y_{j+1} - y_j
    rows = np.arange(p, T - 1)  # index into dY of the dependent observations
    n = rows.size
    dep = dY[:, rows]
    cols = [np.ones((R, n))]
    if spec.trend:
        cols.append(np.broadcast_to(rows + 1.0, (R, n)))
    cols.append(Y[:, rows])  # y_{t-1}
    ycol = len(cols) - 1
    for l in range(1, p + 1):
        cols.append(dY[:, rows - l])
    if cs is not None:
        dC = np.diff(cs, axis=1)
        cols.append(cs[:, rows])
        for l in range(0, p + 1):
            cols.append(dC[:, rows - l])
    return dep, np.stack(cols, axis=2), ycol


def _column_names(spec: AdfSpec, cadf: bool) -> list[str]:
    names = ["const"] + (["trend"] if spec.trend else []) + ["y_lag1"]
    names += [f"dy_lag{l}" for l in range(1, spec.lags + 1)]
    if cadf:
        names += ["ybar_lag1"] + [f"dybar_lag{l}" for l in range(0, spec.lags + 1)]
    return names


def _single_t(dep: np.ndarray, X: np.ndarray, ycol: int, names: list[str]) -> float:
    n, k = X.shape
    if n - k <= 0:
        raise EstimationError(f"ADF regression has {n} rows for {k} coefficients; no residual degrees of freedom")
    check_rank(X, names)
    beta = lstsq(X, dep)
    resid = dep - X @ beta
    s2 = resid @ resid / (n - k)
    if not s2 > 1e-14 * max(dep @ dep / n, 1e-300):
        raise SingularRegressionError("ADF regression fits exactly; zero residual variance")
    return float(beta[ycol] / np.sqrt(s2 * inv_xtx(X)[ycol, ycol]))


def adf_t(y, spec: AdfSpec = AdfSpec()) -> float:
    """t-statistic on ``y_{t-1}`` in the ADF regression for one complete series."""
    y = np.asarray(y, dtype=float).reshape(-1)
    if np.isnan(y).any():
        raise PanelError("ADF regression needs a complete series")
    spec.check_length(y.size)
    dep, X, ycol = _adf_design(y[None, :], spec)
    return _single_t(dep[0], X[0], ycol, _column_names(spec, False))


def adf_t_batch(Y: np.ndarray, spec: AdfSpec) -> np.ndarray:
    """ADF t-statistics for each row of ``Y``; ``nan`` for degenerate rows."""
    dep, X, ycol = _adf_design(np.asarray(Y, dtype=float), spec)
    return batch_tstat(dep, X, ycol)


def cadf_t_batch(Y: np.ndarray, spec: AdfSpec) -> np.ndarray:
    """CADF t-statistics for a stack of panels, ``Y`` shaped (R, N, T) -> (R, N)."""
    R, N, T = Y.shape
    cs = Y.mean(axis=1)
    flat = Y.reshape(R * N, T)
    cs_rep = np.repeat(cs, N, axis=0)
    dep, X, ycol = _adf_design(flat, spec, cs_rep)
    return batch_tstat(dep, X, ycol).reshape(R, N)


def _panel_values(panel) -> np.ndarray:
    v = panel.values if isinstance(panel, PanelSeries) else np.asarray(panel, dtype=float)
    if v.ndim == 1:
        v = v[None, :]
    if np.isnan(v).any():
        raise PanelError("unit-root tests need a complete balanced panel")
    return v


# ---------------------------------------------------------------------------
# Reference distributions


def _seed_for(seed: int, *key) -> np.random.Generator:
    return np.random.default_rng([seed, *[int(k) for k in key]])


@lru_cache(maxsize=128)
def simulate_ips_moments(T: int, lags: int, deterministic: str, reps: int = IPS_SIM_REPS, seed: int = DEFAULT_SEED):
    """Mean and variance of the ADF t-statistic under a Gaussian random walk."""
    spec = AdfSpec(deterministic, lags)
    spec.check_length(T)
    rng = _seed_for(seed, T, lags, deterministic == TREND)
    out = []
    done = 0
    while done < reps:
        m = min(_CHUNK, reps - done)
        Y = np.cumsum(rng.standard_normal((m, T)), axis=1)
        out.append(adf_t_batch(Y, spec))
        done += m
    t = np.concatenate(out)
    t = t[np.isfinite(t)]
    return float(t.mean()), float(t.var(ddof=1))


def ips_moments(T: int, spec: AdfSpec, simulate: bool = True, seed: int = DEFAULT_SEED):
    """``(E_T, V_T, provenance)`` for the IPS standardisation."""
    key = (T, spec.lags, spec.deterministic)
    if key in _tables.IPS_MOMENTS:
        mean, var = _tables.IPS_MOMENTS[key]
        return mean, var, f"embedded-table ({_tables.IPS_PROVENANCE})"
    if not simulate:
        raise SimulationDisabledError(f"IPS moments not tabulated for T={T}, p={spec.lags}, {spec.deterministic}")
    mean, var = simulate_ips_moments(T, spec.lags, spec.deterministic, IPS_SIM_REPS, seed)
    return mean, var, f"simulated (reps={IPS_SIM_REPS}, seed={seed})"


def ips_test(panel, spec: AdfSpec = AdfSpec(), simulate: bool = True, seed: int = DEFAULT_SEED) -> UnitRootResult:
    """Im-Pesaran-Shin t-bar test with a lower-tail normal p-value."""
    Y = _panel_values(panel)
    N, T = Y.shape
    spec.check_length(T)
    t = np.array([adf_t(Y[i], spec) for i in range(N)])
    tbar = float(t.mean())
    mean, var, prov = ips_moments(T, spec, simulate, seed)
    w = float(np.sqrt(N) * (tbar - mean) / np.sqrt(var))
    crit = {lvl: mean + stats.norm.ppf(lvl) * np.sqrt(var / N) for lvl in (0.10, 0.05, 0.01)}
    return UnitRootResult(
        test="IPS",
        spec=spec,
        per_entity_t=t,
        tbar=tbar,
        standardized=w,
        p_value=float(stats.norm.cdf(w)),
        critical_values=crit,
        provenance=prov,
    )


def _cips_null_draw(rng: np.random.Generator, m: int, N: int, T: int) -> np.ndarray:
    # Random walks driven by a common factor with loadings U(0, 2) plus
    # idiosyncratic shocks.
    gamma = rng.uniform(0.0, 2.0, size=(m, N, 1))
    f = rng.standard_normal((m, 1, T))
    eps = rng.standard_normal((m, N, T))
    return np.cumsum(gamma * f + eps, axis=2)


@lru_cache(maxsize=64)
def simulate_cips_distribution(N: int, T: int, lags: int, deterministic: str, reps: int = CIPS_SIM_REPS, seed: int = DEFAULT_SEED) -> np.ndarray:
    """Sorted simulated CIPS values under the cross-sectionally correlated null."""
    spec = AdfSpec(deterministic, lags)
    rng = _seed_for(seed, N, T, lags, deterministic == TREND, 7)
    out = []
    done = 0
    block = max(1, _CHUNK // N)
    while done < reps:
        m = min(block, reps - done)
        t = cadf_t_batch(_cips_null_draw(rng, m, N, T), spec)
        out.append(t.mean(axis=1))
        done += m
    c = np.concatenate(out)
    c = np.sort(c[np.isfinite(c)])
    c.flags.writeable = False
    return c


def cips_reference(N: int, T: int, spec: AdfSpec, simulate: bool = True, seed: int = DEFAULT_SEED):
    """Critical values, a p-value function and the provenance for CIPS."""
    if not simulate:
        raise SimulationDisabledError(f"CIPS distribution not tabulated for N={N}, T={T}; simulation disabled")
    dist = simulate_cips_distribution(N, T, spec.lags, spec.deterministic, CIPS_SIM_REPS, seed)
    crit = {lvl: float(np.quantile(dist, lvl)) for lvl in (0.10, 0.05, 0.01)}

    def pvalue(x: float) -> float:
        count = np.searchsorted(dist, x, side="right")
        return float((count + 1) / (dist.size + 1))

    return crit, pvalue, f"simulated (reps={CIPS_SIM_REPS}, seed={seed})"


def cadf_test(panel, spec: AdfSpec = AdfSpec(), simulate: bool = True, seed: int = DEFAULT_SEED) -> UnitRootResult:
    """Pesaran's CIPS: mean of the entity CADF t-statistics."""
    Y = _panel_values(panel)
    N, T = Y.shape
    if N < 2:
        raise PanelError("CADF needs at least two entities for a cross-section average")
    spec.check_length(T)
    cs = np.broadcast_to(Y.mean(axis=0), (1, T))
    names = _column_names(spec, True)
    t = np.empty(N)
    for i in range(N):
        dep, X, ycol = _adf_design(Y[i : i + 1], spec, cs)
        t[i] = _single_t(dep[0], X[0], ycol, names)
    cips = float(t.mean())
    crit, pfun, prov = cips_reference(N, T, spec, simulate, seed)
    return UnitRootResult(
        test="CADF",
        spec=spec,
        per_entity_t=t,
        tbar=cips,
        standardized=None,
        p_value=pfun(cips),
        critical_values=crit,
        provenance=prov,
    )
