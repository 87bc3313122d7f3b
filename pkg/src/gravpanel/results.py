"""Result containers shared by estimators and tests."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy import stats

NORMAL = "standard normal"
CHI2 = "chi-square"
F_DIST = "F"
FREES_Q = "Frees-Q"
SIMULATED = "simulated"


@dataclass(frozen=True)
class TestResult:
    """A test statistic together with its reference distribution.

    Exactly one of ``p_value`` and ``critical_values`` is populated when the
    reference distribution has no closed-form CDF (Frees' Q).
    """

    __test__ = False  # keep pytest from collecting this class

    name: str
    statistic: float
    reference_distribution: str
    null_hypothesis: str
    df: Any = None
    p_value: float | None = None
    critical_values: Mapping[float, float] | None = None
    provenance: str = ""
    notes: tuple[str, ...] = ()
    extra: Mapping[str, Any] = field(default_factory=dict)

    def rejects(self, level: float = 0.05) -> bool:
        """Decision at ``level``: by p-value when present, otherwise by critical value."""
        if self.p_value is not None:
            return self.p_value <= level
        if self.critical_values is None or level not in self.critical_values:
            raise ValueError(f"no decision rule available for {self.name} at level {level}")
        return self.statistic > self.critical_values[level]


@dataclass(frozen=True)
class EstimationResult:
    """Coefficients and covariance of one fitted linear model.

    ``df_resid`` is the residual degrees of freedom used for t-based p-values;
    ``None`` switches the reference distribution to the standard normal.
    """

    method: str
    names: tuple[str, ...]
    params: np.ndarray
    vcov: np.ndarray
    n_obs: int
    df_resid: int | None
    residuals: np.ndarray
    robust: bool = False
    dropped: tuple[str, ...] = ()
    variance_components: Mapping[str, float] | None = None
    extra: Mapping[str, Any] = field(default_factory=dict)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.vcov))

    @property
    def tstats(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.params / self.se

    @property
    def pvalues(self) -> np.ndarray:
        t = np.abs(self.tstats)
        if self.df_resid is None:
            return 2 * stats.norm.sf(t)
        return 2 * stats.t.sf(t, self.df_resid)

    def _pos(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"{self.method} result has no coefficient {name!r}") from None

    def coef(self, name: str) -> float:
        return float(self.params[self._pos(name)])

    def stderr(self, name: str) -> float:
        return float(self.se[self._pos(name)])

    def pvalue(self, name: str) -> float:
        return float(self.pvalues[self._pos(name)])

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, map(float, self.params)))

    def conf_int(self, name: str, level: float = 0.95) -> tuple[float, float]:
        q = stats.norm.ppf if self.df_resid is None else (lambda a: stats.t.ppf(a, self.df_resid))
        c = q(0.5 + level / 2)
        b, s = self.coef(name), self.stderr(name)
        return b - c * s, b + c * s
