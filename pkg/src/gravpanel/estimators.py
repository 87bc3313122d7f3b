"""Linear panel estimators: pooled OLS, fixed effects, random effects, 2SLS.

All estimators take a :class:`~gravpanel.panel.DesignMatrix` without an
intercept column; the intercept is added here where it is identified.
Robust covariances are HC1: the White sandwich scaled by ``n / df_resid``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import EstimationError, PanelError, SingularRegressionError
from .linalg import check_rank, inv_xtx, lstsq, pinv_quadratic_form, projection_fit
from .panel import DesignMatrix, entity_means, quasi_demean, within_transform
from .results import CHI2, EstimationResult, TestResult

CONST = "const"


def _sandwich(X: np.ndarray, u: np.ndarray, bread: np.ndarray, df_resid: int) -> np.ndarray:
    meat = (X * (u**2)[:, None]).T @ X
    return X.shape[0] / df_resid * bread @ meat @ bread


def _with_constant(m: DesignMatrix, constant: bool) -> tuple[np.ndarray, tuple[str, ...]]:
    if not constant:
        return m.X, m.columns
    if CONST in m.columns:
        raise PanelError(f"column name {CONST!r} is reserved for the intercept")
    return np.column_stack([np.ones(m.n_obs), m.X]), (CONST,) + m.columns


def _fit(X, y, names, df_resid, robust):
    check_rank(X, names)
    beta = lstsq(X, y)
    u = y - X @ beta
    bread = inv_xtx(X)
    if df_resid <= 0:
        raise EstimationError(f"no residual degrees of freedom ({df_resid})")
    if robust:
        vcov = _sandwich(X, u, bread, df_resid)
    else:
        vcov = (u @ u / df_resid) * bread
    return beta, u, vcov


def ols(m: DesignMatrix, robust: bool = False, constant: bool = True) -> EstimationResult:
    """Pooled least squares of ``m.y`` on ``m.X`` (plus an intercept)."""
    X, names = _with_constant(m, constant)
    df = m.n_obs - X.shape[1]
    beta, u, vcov = _fit(X, m.y, names, df, robust)
    return EstimationResult("OLS", names, beta, vcov, m.n_obs, df, u, robust=robust)


def fixed_effects(m: DesignMatrix, robust: bool = False) -> EstimationResult:
    """Within estimator; time-invariant regressors are dropped and reported.

    ``extra`` carries the grand-mean-restored intercept ``c = ybar - xbar'b``
    with its standard error, and the entity intercepts.
    """
    dropped = tuple(m.time_invariant_columns())
    kept = m.drop_columns(dropped)
    if not kept.columns:
        raise EstimationError("all regressors are time-invariant; nothing to estimate under fixed effects")
    w = within_transform(kept)
    n, k = w.X.shape
    df = n - m.n_entities - k
    beta, u, vcov = _fit(w.X, w.y, w.columns, df, robust)
    ybar_i, xbar_i = entity_means(kept)
    alpha = ybar_i - xbar_i @ beta
    ybar, xbar = kept.y.mean(), kept.X.mean(axis=0)
    c = float(ybar - xbar @ beta)
    s2 = u @ u / df
    c_var = s2 / n + xbar @ vcov @ xbar
    c_se = float(np.sqrt(c_var))
    c_p = float(2 * stats.t.sf(abs(c / c_se), df)) if c_se > 0 else float("nan")
    return EstimationResult(
        "FE",
        w.columns,
        beta,
        vcov,
        n,
        df,
        u,
        robust=robust,
        dropped=dropped,
        extra={
            "const": c,
            "const_se": c_se,
            "const_p": c_p,
            "entity_effects": dict(zip(m.entities, map(float, alpha))),
            "sigma2_e": float(s2),
        },
    )


def _balanced_T(m: DesignMatrix) -> int:
    counts = np.bincount(m.entity_of_row, minlength=m.n_entities)
    if counts.min() != counts.max():
        raise PanelError("random effects requires a balanced panel")
    return int(counts[0])


def _swamy_arora(m: DesignMatrix, T: int) -> tuple[float, float]:
    N = m.n_entities
    fe = fixed_effects(m)
    sigma2_e = fe.extra["sigma2_e"]
    ybar_i, xbar_i = entity_means(m)
    k = xbar_i.shape[1] + 1
    if N - k <= 0:
        raise EstimationError(
            f"between regression under-identified: {N} entities for {k} between coefficients"
        )
    Xb = np.column_stack([np.ones(N), xbar_i])
    check_rank(Xb, (CONST,) + m.columns)
    ub = ybar_i - Xb @ lstsq(Xb, ybar_i)
    sigma2_between = ub @ ub / (N - k)
    return sigma2_e, max(sigma2_between - sigma2_e / T, 0.0)


def _wallace_hussain(m: DesignMatrix, T: int) -> tuple[float, float]:
    N, n = m.n_entities, m.n_obs
    u = ols(m).residuals
    ubar = np.bincount(m.entity_of_row, weights=u, minlength=N) / T
    within = u - ubar[m.entity_of_row]
    sigma2_e = within @ within / (n - N)
    sigma2_1 = T * (ubar @ ubar) / N
    return sigma2_e, max((sigma2_1 - sigma2_e) / T, 0.0)


VARIANCE_METHODS = ("swamy-arora", "wallace-hussain", "auto")


def random_effects(m: DesignMatrix, variance_method: str = "swamy-arora", theta: float | None = None) -> EstimationResult:
    """Feasible GLS random-effects estimator on quasi-demeaned data.

    ``theta = 1 - sqrt(s2_e / (T s2_u + s2_e))`` from the chosen variance
    components.  ``variance_method="auto"`` uses Swamy-Arora when the between
    regression is identified and Wallace-Hussain otherwise.  Passing ``theta``
    bypasses the variance components (0 gives pooled OLS, 1 the within slopes).
    """
    if variance_method not in VARIANCE_METHODS:
        raise ValueError(f"variance_method must be one of {VARIANCE_METHODS}")
    T = _balanced_T(m)
    method_used = "fixed theta"
    if theta is None:
        if m.n_entities < 3:
            raise EstimationError("random effects needs at least three entities")
        if variance_method == "wallace-hussain":
            s2e, s2u = _wallace_hussain(m, T)
            method_used = "wallace-hussain"
        else:
            try:
                s2e, s2u = _swamy_arora(m, T)
                method_used = "swamy-arora"
            except EstimationError:
                if variance_method != "auto":
                    raise
                s2e, s2u = _wallace_hussain(m, T)
                method_used = "wallace-hussain (between regression under-identified)"
        theta = 1.0 - np.sqrt(s2e / (T * s2u + s2e))
    else:
        s2e = s2u = float("nan")
    theta = float(theta)
    q = quasi_demean(m, np.full(m.n_entities, theta))
    X = np.column_stack([np.full(m.n_obs, 1.0 - theta), q.X])
    names = (CONST,) + m.columns
    scale = np.maximum(np.abs(np.column_stack([np.ones(m.n_obs), m.X])).max(axis=0), 1.0)
    zero = np.abs(X).max(axis=0) <= 1e-12 * scale
    dropped = tuple(nm for nm, z in zip(names, zero) if z)
    X = X[:, ~zero]
    names = tuple(nm for nm, z in zip(names, zero) if not z)
    df = m.n_obs - X.shape[1]
    beta, u, vcov = _fit(X, q.y, names, df, robust=False)
    return EstimationResult(
        "RE",
        names,
        beta,
        vcov,
        m.n_obs,
        df,
        u,
        dropped=dropped,
        variance_components={"sigma2_e": float(s2e), "sigma2_u": float(s2u), "theta": theta, "method": method_used},
    )


def hausman_test(fe: EstimationResult, re: EstimationResult, threshold: float = 0.05) -> TestResult:
    """Hausman contrast of FE and RE on their common slope coefficients.

    Uses the Moore-Penrose inverse of ``V_FE - V_RE`` with df equal to its
    rank.  The recommendation is ``"Fixed"`` when ``p <= threshold``.
    """
    common = [nm for nm in fe.names if nm in re.names and nm != CONST]
    if not common:
        raise EstimationError("FE and RE results share no slope coefficients")
    if fe.n_obs != re.n_obs:
        raise EstimationError("FE and RE must be estimated on the same sample")
    i_fe = [fe.names.index(c) for c in common]
    i_re = [re.names.index(c) for c in common]
    q = fe.params[i_fe] - re.params[i_re]
    V = fe.vcov[np.ix_(i_fe, i_fe)] - re.vcov[np.ix_(i_re, i_re)]
    H, rank = pinv_quadratic_form(q, V)
    notes = []
    if H < 0:
        warnings.warn(f"Hausman statistic {H:.4g} is negative (V_FE - V_RE not positive semi-definite); clamped to 0")
        notes.append(f"negative statistic {H:.4g} clamped to 0")
        H = 0.0
    p = float(stats.chi2.sf(H, rank)) if rank > 0 else 1.0
    rec = "Fixed" if p <= threshold else "Random"
    return TestResult(
        name="Hausman",
        statistic=float(H),
        reference_distribution=CHI2,
        null_hypothesis="entity effects are uncorrelated with the regressors (RE consistent)",
        df=rank,
        p_value=p,
        notes=tuple(notes),
        extra={"recommended": rec, "coefficients": tuple(common)},
    )


# ---------------------------------------------------------------------------
# Instrumental variables


@dataclass(frozen=True)
class IvSpec:
    """Endogenous regressors and the rule generating their instruments.

    Each endogenous column is instrumented by its own lags of orders ``lags``
    (within entity).  ``excluded`` names extra columns of
    ``DesignMatrix.instruments``.  All exogenous regressors instrument
    themselves.
    """

    endogenous: tuple[str, ...]
    lags: tuple[int, ...] = (1,)
    excluded: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "endogenous", tuple(self.endogenous))
        object.__setattr__(self, "lags", tuple(int(l) for l in self.lags))
        object.__setattr__(self, "excluded", tuple(self.excluded))
        if any(l < 1 for l in self.lags):
            raise ValueError("instrument lags must be positive")
        n_inst = len(self.endogenous) * len(self.lags) + len(self.excluded)
        if n_inst < len(self.endogenous):
            raise EstimationError(
                f"order condition fails: {n_inst} excluded instruments for {len(self.endogenous)} endogenous regressors"
            )

    @property
    def n_excluded(self) -> int:
        return len(self.endogenous) * len(self.lags) + len(self.excluded)


@dataclass(frozen=True)
class IvData:
    """Estimation-sample matrices shared by 2SLS and its diagnostics."""

    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    x_names: tuple[str, ...]
    z_names: tuple[str, ...]
    endogenous: tuple[str, ...]
    sample: DesignMatrix
    n_dropped: int
    has_constant: bool

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def exog_names(self) -> tuple[str, ...]:
        return tuple(c for c in self.x_names if c not in self.endogenous)

    @property
    def overid_df(self) -> int:
        return self.Z.shape[1] - self.X.shape[1]

    def columns(self, names, of: str = "X") -> np.ndarray:
        src, nm = (self.X, self.x_names) if of == "X" else (self.Z, self.z_names)
        return src[:, [nm.index(c) for c in names]]


def lagged_column(m: DesignMatrix, values: np.ndarray, k: int) -> np.ndarray:
    """Value of ``values`` k periods earlier within the same entity (nan if absent)."""
    pos = {(e, p): r for r, (e, p) in enumerate(zip(m.entity_of_row.tolist(), m.period_of_row.tolist()))}
    out = np.full(m.n_obs, np.nan)
    for r, (e, p) in enumerate(zip(m.entity_of_row.tolist(), m.period_of_row.tolist())):
        src = pos.get((e, p - k))
        if src is not None:
            out[r] = values[src]
    return out


def prepare_iv(m: DesignMatrix, iv: IvSpec, constant: bool = True) -> IvData:
    """Build the instrument matrix and drop rows with missing lagged instruments."""
    if not iv.endogenous:
        endog_missing = []
    else:
        endog_missing = [e for e in iv.endogenous if e not in m.columns]
    if endog_missing:
        raise EstimationError(f"endogenous regressors not in the design: {endog_missing}")
    missing_ext = [e for e in iv.excluded if e not in m.instruments]
    if missing_ext:
        raise EstimationError(f"excluded instruments not supplied: {missing_ext}")
    inst_cols, inst_names = [], []
    for e in iv.endogenous:
        for k in iv.lags:
            inst_cols.append(lagged_column(m, m.col(e), k))
            inst_names.append(f"L{k}.{e}")
    for e in iv.excluded:
        inst_cols.append(m.instruments[e])
        inst_names.append(e)
    keep = np.ones(m.n_obs, dtype=bool)
    for c in inst_cols:
        keep &= ~np.isnan(c)
    sample = m.select(keep)
    X, x_names = _with_constant(sample, constant)
    exog = [j for j, c in enumerate(x_names) if c not in iv.endogenous]
    Z = np.column_stack([X[:, exog]] + [c[keep] for c in inst_cols]) if (exog or inst_cols) else np.empty((sample.n_obs, 0))
    z_names = tuple(x_names[j] for j in exog) + tuple(inst_names)
    return IvData(
        y=sample.y,
        X=X,
        Z=Z,
        x_names=x_names,
        z_names=z_names,
        endogenous=iv.endogenous,
        sample=sample,
        n_dropped=int((~keep).sum()),
        has_constant=constant,
    )


def two_sls(m: DesignMatrix, iv: IvSpec, robust: bool = False, constant: bool = True) -> EstimationResult:
    """Two-stage least squares ``(X'P_Z X)^{-1} X'P_Z y`` on the lag-complete sample."""
    d = prepare_iv(m, iv, constant)
    return two_sls_from(d, robust)


def two_sls_from(d: IvData, robust: bool = False) -> EstimationResult:
    check_rank(d.Z, d.z_names)
    Xhat = projection_fit(d.Z, d.X)
    try:
        check_rank(Xhat, d.x_names)
    except SingularRegressionError as exc:
        raise SingularRegressionError(f"model is under-identified: {exc}", column=exc.column) from None
    beta = lstsq(Xhat, d.y)
    u = d.y - d.X @ beta
    n, k = d.X.shape
    df = n - k
    if df <= 0:
        raise EstimationError("no residual degrees of freedom for 2SLS")
    bread = inv_xtx(Xhat)
    vcov = _sandwich(Xhat, u, bread, df) if robust else (u @ u / df) * bread
    first_stage = {}
    for e in d.endogenous:
        xe = d.X[:, d.x_names.index(e)]
        g = lstsq(d.Z, xe)
        first_stage[e] = dict(zip(d.z_names, map(float, g)))
    return EstimationResult(
        "2SLS",
        d.x_names,
        beta,
        vcov,
        n,
        df,
        u,
        robust=robust,
        extra={
            "n_dropped": d.n_dropped,
            "instruments": d.z_names,
            "first_stage": first_stage,
            "overid_df": d.overid_df,
        },
    )
