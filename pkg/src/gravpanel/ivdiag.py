"""Diagnostics around 2SLS: endogeneity, heteroskedasticity, over-identification.

* Wu-Hausman (F) and Durbin-Wu-Hausman (chi-square, score form) from the
  augmented regression that appends first-stage residuals to the structural
  equation.
* Pagan-Hall heteroskedasticity test for IV residuals, valid without
  normality and with endogenous regressors.
* Sargan (``n * u'P_Z u / u'u``) and Hansen J (two-step efficient GMM
  criterion with heteroskedasticity-robust weighting).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy import stats

from .errors import EstimationError, SingularRegressionError, WeakInstrumentError
from .estimators import CONST, IvData, IvSpec, prepare_iv, two_sls_from
from .linalg import check_rank, lstsq, projection_fit
from .panel import DesignMatrix
from .results import CHI2, F_DIST, EstimationResult, TestResult

NULL_EXOGENOUS = "the endogenous regressors are exogenous"
NULL_HOMOSKEDASTIC = "the disturbance is homoskedastic"
NULL_OVERID = "the instruments are valid (over-identifying restrictions hold)"


def _data(m, iv, constant=True) -> IvData:
    return m if isinstance(m, IvData) else prepare_iv(m, iv, constant)


def _ssr(X, y) -> float:
    u = y - X @ lstsq(X, y)
    return float(u @ u)


def _endogeneity_parts(d: IvData):
    if not d.endogenous:
        raise EstimationError("endogeneity tests need at least one endogenous regressor")
    check_rank(d.Z, d.z_names)
    Xe = d.columns(d.endogenous)
    V = Xe - projection_fit(d.Z, Xe)
    # An endogenous column lying in the instrument span leaves nothing to test.
    tiny = np.linalg.norm(V, axis=0) <= 1e-10 * np.maximum(np.linalg.norm(Xe, axis=0), 1e-300)
    if tiny.any():
        e = d.endogenous[int(np.flatnonzero(tiny)[0])]
        raise WeakInstrumentError(f"first-stage residuals of {e!r} vanish; endogeneity is not testable", column=e)
    aug = np.column_stack([d.X, V])
    try:
        check_rank(aug, d.x_names + tuple(f"v_{e}" for e in d.endogenous))
    except SingularRegressionError as exc:
        raise WeakInstrumentError(
            f"first-stage residuals are collinear with the regressors ({exc}); instruments too weak"
        ) from None
    ssr_r = _ssr(d.X, d.y)
    ssr_u = _ssr(aug, d.y)
    return ssr_r, ssr_u, len(d.endogenous)


def _clamp(value: float, name: str, notes: list) -> float:
    if value < 0:
        warnings.warn(f"{name} statistic {value:.4g} is negative; clamped to 0")
        notes.append(f"negative statistic {value:.4g} clamped to 0")
        return 0.0
    return value


def wu_hausman(m: DesignMatrix | IvData, iv: IvSpec | None = None) -> TestResult:
    """F-form test of joint significance of the first-stage residuals."""
    d = _data(m, iv)
    ssr_r, ssr_u, ke = _endogeneity_parts(d)
    n, k = d.X.shape
    df2 = n - k - ke
    if df2 <= 0:
        raise EstimationError("Wu-Hausman test has no denominator degrees of freedom")
    notes: list[str] = []
    F = _clamp(((ssr_r - ssr_u) / ke) / (ssr_u / df2), "Wu-Hausman", notes)
    return TestResult(
        name="Wu-Hausman",
        statistic=F,
        reference_distribution=F_DIST,
        null_hypothesis=NULL_EXOGENOUS,
        df=(ke, df2),
        p_value=float(stats.f.sf(F, ke, df2)),
        notes=tuple(notes),
    )


def durbin_wu_hausman(m: DesignMatrix | IvData, iv: IvSpec | None = None) -> TestResult:
    """Score form ``n * (SSR_r - SSR_u) / SSR_r``, chi-square(#endogenous)."""
    d = _data(m, iv)
    ssr_r, ssr_u, ke = _endogeneity_parts(d)
    notes: list[str] = []
    D = _clamp(d.n * (ssr_r - ssr_u) / ssr_r, "Durbin-Wu-Hausman", notes)
    return TestResult(
        name="Durbin-Wu-Hausman",
        statistic=D,
        reference_distribution=CHI2,
        null_hypothesis=NULL_EXOGENOUS,
        df=ke,
        p_value=float(stats.chi2.sf(D, ke)),
        notes=tuple(notes),
    )


def _indicators(d: IvData, fit: EstimationResult, which: str) -> tuple[np.ndarray, tuple[str, ...]]:
    if which == "instruments":
        keep = [j for j, c in enumerate(d.z_names) if c != CONST]
        return d.Z[:, keep], tuple(d.z_names[j] for j in keep)
    if which == "squares":
        keep = [j for j, c in enumerate(d.z_names) if c != CONST]
        L = d.Z[:, keep]
        # squares of 0/1 dummies duplicate their levels
        sq = [j for j in range(L.shape[1]) if not np.allclose(L[:, j] ** 2, L[:, j])]
        names = tuple(d.z_names[j] for j in keep)
        return np.column_stack([L, L[:, sq] ** 2]), names + tuple(f"{names[j]}^2" for j in sq)
    if which == "fitted":
        yhat = projection_fit(d.Z, d.X) @ fit.params
        return np.column_stack([yhat, yhat**2]), ("yhat", "yhat^2")
    raise ValueError(f"unknown Pagan-Hall indicator set {which!r}")


def pagan_hall(m: DesignMatrix | IvData, iv: IvSpec | None = None, indicators: str = "instruments") -> TestResult:
    """Pagan-Hall test that squared 2SLS residuals are unrelated to the indicators.

    With ``u`` the 2SLS residuals, ``P`` the centred indicators and ``D =
    P'u^2 / n``, the statistic is ``n D' B^{-1} D`` where B is the null
    variance of ``sqrt(n) D`` allowing for non-normal errors (third and fourth
    moments) and for estimation of the coefficients.

    ``indicators`` is ``"instruments"`` (levels, the default), ``"squares"``
    (levels and squares) or ``"fitted"`` (fitted value and its square).
    Levels alone cannot detect a variance that is symmetric in a mean-zero
    instrument.
    """
    d = _data(m, iv)
    fit = two_sls_from(d)
    u = fit.residuals
    n = d.n
    Psi, names = _indicators(d, fit, indicators)
    if Psi.shape[1] == 0:
        raise EstimationError("Pagan-Hall test needs at least one non-constant indicator")
    P = Psi - Psi.mean(axis=0)
    try:
        check_rank(P, names)
    except SingularRegressionError as exc:
        raise SingularRegressionError(f"Pagan-Hall indicator matrix is rank deficient: {exc}", column=exc.column) from None
    u2 = u**2
    sigma2 = u2.mean()
    mu3 = (u**3).mean()
    mu4 = (u2**2).mean()
    D = P.T @ u2 / n
    # Influence of the coefficient estimate: sqrt(n)(b - beta) = A n^{-1/2} Z'u.
    Qxz = d.X.T @ d.Z / n
    Qzz_inv = np.linalg.inv(d.Z.T @ d.Z / n)
    H = Qxz @ Qzz_inv @ Qxz.T
    A = np.linalg.solve(H, Qxz @ Qzz_inv)
    M = (P * u[:, None]).T @ d.X / n
    B1 = (mu4 - sigma2**2) * (P.T @ P / n)
    B2 = -2.0 * mu3 * (P.T @ d.Z / n) @ A.T @ M.T
    B4 = 4.0 * sigma2 * M @ np.linalg.solve(H, M.T)
    B = B1 + B2 + B2.T + B4
    stat = float(n * D @ np.linalg.solve(B, D))
    notes: list[str] = []
    stat = _clamp(stat, "Pagan-Hall", notes)
    p = Psi.shape[1]
    return TestResult(
        name="Pagan-Hall",
        statistic=stat,
        reference_distribution=CHI2,
        null_hypothesis=NULL_HOMOSKEDASTIC,
        df=p,
        p_value=float(stats.chi2.sf(stat, p)),
        notes=tuple(notes),
        extra={"indicators": names},
    )


def sargan_statistic(d: IvData) -> float:
    """Raw ``n u'P_Z u / u'u`` at the 2SLS estimate (no exact-identification shortcut)."""
    u = two_sls_from(d).residuals
    pu = projection_fit(d.Z, u[:, None])[:, 0]
    return float(d.n * (pu @ pu) / (u @ u))


def hansen_j_statistic(d: IvData) -> tuple[float, np.ndarray]:
    """Raw two-step GMM criterion and the efficient GMM coefficients.

    With ``S = R'R`` (QR of the score matrix) the criterion is the residual
    sum of squares of the whitened moments ``R^{-T} Z'(y - Xb) / n``, solved
    by least squares rather than by inverting S.
    """
    u = two_sls_from(d).residuals
    n = d.n
    R = np.linalg.qr(d.Z * u[:, None] / np.sqrt(n), mode="r")
    A = sla.solve_triangular(R, d.Z.T @ d.X / n, trans="T")
    c = sla.solve_triangular(R, d.Z.T @ d.y / n, trans="T")
    beta = lstsq(A, c)
    g = c - A @ beta
    return float(n * g @ g), beta


def _overid_result(name: str, stat: float, df: int) -> TestResult:
    if df < 0:
        raise EstimationError("order condition violated")
    if df == 0:
        return TestResult(
            name=name,
            statistic=0.0,
            reference_distribution=CHI2,
            null_hypothesis=NULL_OVERID,
            df=0,
            notes=("exactly identified",),
            extra={"raw_statistic": stat},
        )
    stat = max(stat, 0.0)
    return TestResult(
        name=name,
        statistic=stat,
        reference_distribution=CHI2,
        null_hypothesis=NULL_OVERID,
        df=df,
        p_value=float(stats.chi2.sf(stat, df)),
    )


def sargan(m: DesignMatrix | IvData, iv: IvSpec | None = None) -> TestResult:
    d = _data(m, iv)
    return _overid_result("Sargan", sargan_statistic(d), d.overid_df)


def hansen_j(m: DesignMatrix | IvData, iv: IvSpec | None = None) -> TestResult:
    d = _data(m, iv)
    stat, _ = hansen_j_statistic(d)
    return _overid_result("Hansen J", stat, d.overid_df)


@dataclass(frozen=True)
class DiagnosticsBundle:
    wu_hausman: TestResult
    durbin_wu_hausman: TestResult
    pagan_hall: TestResult
    overid: TestResult
    robust: bool
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def overid_kind(self) -> str:
        return self.overid.name


def run_diagnostics(
    m: DesignMatrix | IvData,
    iv: IvSpec | None = None,
    level: float = 0.05,
    robust: bool | None = None,
    indicators: str = "instruments",
) -> DiagnosticsBundle:
    """Full battery with the robust-path switch.

    When ``robust`` is None the choice is automatic: Pagan-Hall rejecting at
    ``level`` selects robust errors and Hansen J, otherwise classical errors
    and Sargan.
    """
    d = _data(m, iv)
    ph = pagan_hall(d, indicators=indicators)
    notes = [f"Pagan-Hall indicators: {indicators}"]
    if robust is None:
        robust = ph.rejects(level)
        notes.append(f"robust path {'on' if robust else 'off'} (Pagan-Hall p={ph.p_value:.3g}, level {level})")
    else:
        notes.append(f"robust path forced {'on' if robust else 'off'}")
    overid = hansen_j(d) if robust else sargan(d)
    return DiagnosticsBundle(
        wu_hausman=wu_hausman(d),
        durbin_wu_hausman=durbin_wu_hausman(d),
        pagan_hall=ph,
        overid=overid,
        robust=bool(robust),
        notes=tuple(notes),
    )
