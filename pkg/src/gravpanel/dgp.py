"""Synthetic data with known ground truth.

:func:`generate` emits a full :class:`~gravpanel.ingest.BilateralPanel` in the
ingestion schema; the ``simulate_*`` helpers produce the small designs used in
size and power experiments.  Every draw comes from a generator seeded by
``(seed, replication)`` so results never depend on execution order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .errors import ConfigError
from .gravity import CONTROL_NAMES
from .ingest import VALUE_COLUMNS, BilateralPanel
from .panel import DesignMatrix, PanelIndex, PanelSeries

DEFAULT_PARTNERS = ("HUN", "POL", "SVK", "AUT", "DEU", "NLD")
DEFAULT_CEE = ("HUN", "POL", "SVK")

DEFAULT_BETA = {
    "const": -9.0,
    "fdi": 0.10,
    "gdpav": 0.8,
    "gdpdif": 0.05,
    "gdpcav": 0.5,
    "gdpcdif": 0.02,
    "gdpg": 0.05,
    "popav": 0.3,
    "bexr": -0.2,
    "dist": -1.0,
    "dummy": 0.8,
}
HETERO_MODES = ("none", "fdi")
ENDOGENOUS_CANDIDATES = ("fdi", "gdpg", "bexr")


@dataclass(frozen=True)
class DgpSpec:
    """Parameters of the synthetic gravity panel.

    ``beta`` holds the true coefficients on the gravity regressors
    (``fdi`` is the relation's FDI stock).  ``effect_corr`` is the correlation
    between the entity effect and the entity mean of log FDI (0 gives a
    random-effects-consistent design).  ``endogeneity`` maps regressors to the
    correlation of their innovation with the structural error.
    ``persistence`` is the AR coefficient of log FDI (1 = unit root).
    """

    n_entities: int = 6
    n_periods: int = 14
    first_year: int = 2000
    reporter: str = "CZE"
    partners: tuple[str, ...] | None = None
    cee: tuple[str, ...] | None = None
    beta: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_BETA))
    sigma_e: float = 0.10
    sigma_alpha: float = 0.50
    effect_corr: float = 0.0
    endogeneity: Mapping[str, float] = field(default_factory=dict)
    heteroskedasticity: str = "none"
    cross_dependence: float = 0.0
    persistence: float = 0.5
    seed: int = 12345

    def __post_init__(self):
        if self.n_entities < 2 or self.n_periods < 4:
            raise ConfigError("DGP needs at least 2 entities and 4 periods")
        if not -1 <= self.effect_corr <= 1:
            raise ConfigError("effect_corr must lie in [-1, 1]")
        if not -1 <= self.persistence <= 1:
            raise ConfigError("persistence must lie in [-1, 1]")
        for k, v in self.endogeneity.items():
            if k not in ENDOGENOUS_CANDIDATES:
                raise ConfigError(f"endogeneity supported for {ENDOGENOUS_CANDIDATES}, got {k!r}")
            if not -1 <= v <= 1:
                raise ConfigError(f"endogeneity correlation for {k!r} must lie in [-1, 1]")
        if sum(v * v for v in self.endogeneity.values()) > 1:
            raise ConfigError("sum of squared endogeneity correlations must not exceed 1")
        if self.heteroskedasticity not in HETERO_MODES:
            raise ConfigError(f"heteroskedasticity must be one of {HETERO_MODES}")
        unknown = set(self.beta) - set(DEFAULT_BETA)
        if unknown:
            raise ConfigError(f"unknown coefficients in beta: {sorted(unknown)}")
        merged = dict(DEFAULT_BETA)
        merged.update(self.beta)
        object.__setattr__(self, "beta", merged)
        partners = self.partners
        if partners is None:
            if self.n_entities == len(DEFAULT_PARTNERS):
                partners = DEFAULT_PARTNERS
            else:
                partners = tuple(f"P{i:02d}" for i in range(1, self.n_entities + 1))
        if len(partners) != self.n_entities:
            raise ConfigError("partners list must have n_entities entries")
        cee = self.cee
        if cee is None:
            cee = DEFAULT_CEE if partners == DEFAULT_PARTNERS else partners[: self.n_entities // 2]
        if not set(cee) <= set(partners):
            raise ConfigError("cee must be a subset of partners")
        object.__setattr__(self, "partners", tuple(partners))
        object.__setattr__(self, "cee", tuple(cee))

    @property
    def years(self) -> tuple[int, ...]:
        return tuple(range(self.first_year, self.first_year + self.n_periods))

    def with_seed(self, seed: int) -> "DgpSpec":
        return replace(self, seed=seed)


def rng_for(seed, rep: int | None = None) -> np.random.Generator:
    """Independent stream for replication ``rep`` of master ``seed``."""
    key = [int(seed)] if rep is None else [int(seed), int(rep)]
    return np.random.default_rng(np.random.SeedSequence(key))


def _ar_paths(rng, shape, phi, sd, burn=30):
    N, T = shape
    shocks = rng.standard_normal((N, T + burn))
    x = np.zeros((N, T + burn))
    for t in range(1, T + burn):
        x[:, t] = phi * x[:, t - 1] + sd * shocks[:, t]
    if phi == 1.0:
        x = x - x[:, [burn - 1]]
    return x[:, burn:], shocks[:, burn:]


def _standardize(v):
    s = v.std()
    return (v - v.mean()) / s if s > 0 else v * 0.0


def generate(spec: DgpSpec, rep: int | None = None) -> BilateralPanel:
    """Draw one synthetic bilateral panel; deterministic in ``(spec, rep)``."""
    rng = rng_for(spec.seed, rep)
    N, T = spec.n_entities, spec.n_periods
    t = np.arange(T)

    # Macro series.
    g_rep = 3.0 + 2.0 * rng.standard_normal(T)
    g_par = np.maximum(2.5 + 2.5 * rng.standard_normal((N, T)), -9.0)
    gdp_r = 1.5e11 * np.cumprod(1 + g_rep / 100)
    gdp_p = rng.uniform(0.6e11, 3.0e12, size=(N, 1)) * np.cumprod(1 + g_par / 100, axis=1)
    pop_r = 10.5e6 * (1 + 0.001 * t)
    pop_p = rng.uniform(5e6, 82e6, size=(N, 1)) * np.exp(np.cumsum(0.002 * rng.standard_normal((N, T)), axis=1))
    gdppc_r = gdp_r / pop_r
    gdppc_p = gdp_p / pop_p
    bexr = np.exp(rng.normal(0.0, 1.0, size=(N, 1)) + np.cumsum(0.05 * rng.standard_normal((N, T)), axis=1))
    dist = np.repeat(rng.uniform(250.0, 1100.0, size=(N, 1)), T, axis=1)
    cee_flag = np.array([1.0 if p in spec.cee else 0.0 for p in spec.partners])

    # FDI stocks (log), AR(persistence) around entity level plus trend.
    lvl_out = rng.uniform(19.0, 22.0, size=(N, 1))
    lvl_in = rng.uniform(18.5, 21.5, size=(N, 1))
    ar_out, eta_out = _ar_paths(rng, (N, T), spec.persistence, 0.3)
    ar_in, eta_in = _ar_paths(rng, (N, T), spec.persistence, 0.3)
    ln_out = lvl_out + 0.12 * t + ar_out
    ln_in = lvl_in + 0.10 * t + ar_in

    # Entity effects, optionally correlated with mean FDI.
    xi = rng.standard_normal(N)
    common_f = rng.standard_normal(T)
    loadings = rng.uniform(0.5, 1.5, size=N)

    logs = {
        "gdpav": np.log((gdp_r + gdp_p) / 2),
        "gdpdif": np.log(np.abs(gdp_r - gdp_p)),
        "gdpcav": np.log((gdppc_r + gdppc_p) / 2),
        "gdpcdif": np.log(np.abs(gdppc_r - gdppc_p)),
        "gdpg": np.log(10.0 + g_par),
        "popav": np.log((pop_r + pop_p) / 2),
        "bexr": np.log(bexr),
        "dist": np.log(dist),
        "dummy": np.repeat(cee_flag[:, None], T, axis=1),
    }
    std_innov = {
        "gdpg": _standardize(g_par),
        "bexr": _standardize(np.diff(np.log(bexr), axis=1, prepend=np.log(bexr[:, :1]))),
    }

    def trade(ln_fdi, eta):
        innov = dict(std_innov, fdi=eta)
        rho2 = sum(v * v for v in spec.endogeneity.values())
        w = rng.standard_normal((N, T))
        err = np.sqrt(1.0 - rho2) * w
        for k, r in spec.endogeneity.items():
            err = err + r * innov[k]
        if spec.heteroskedasticity == "fdi":
            err = err * np.exp(0.5 * _standardize(ln_fdi))
        err = spec.sigma_e * err + spec.cross_dependence * loadings[:, None] * common_f[None, :]
        zbar = _standardize(ln_fdi.mean(axis=1))
        alpha = spec.sigma_alpha * (spec.effect_corr * zbar + np.sqrt(1 - spec.effect_corr**2) * xi)
        b = spec.beta
        y = b["const"] + b["fdi"] * ln_fdi + alpha[:, None] + err
        for nm in CONTROL_NAMES + ("dist", "dummy"):
            y = y + b[nm] * logs[nm]
        return np.exp(y)

    exports = trade(ln_out, eta_out)
    imports = trade(ln_in, eta_in)

    raw = {
        "exports": exports,
        "imports": imports,
        "outfdi": np.exp(ln_out),
        "infdi": np.exp(ln_in),
        "gdp_reporter": np.repeat(gdp_r[None, :], N, axis=0),
        "gdp_partner": gdp_p,
        "gdppc_reporter": np.repeat(gdppc_r[None, :], N, axis=0),
        "gdppc_partner": gdppc_p,
        "growth_partner": g_par,
        "pop_reporter": np.repeat(pop_r[None, :], N, axis=0),
        "pop_partner": pop_p,
        "bexr": bexr,
        "dist": dist,
        "cee_partner": np.repeat(cee_flag[:, None], T, axis=1),
    }
    for k in VALUE_COLUMNS:
        v = raw[k]
        if k not in ("growth_partner", "cee_partner") and not (np.all(np.isfinite(v)) and np.all(v > 0)):
            raise ConfigError(f"DGP produced non-positive or non-finite {k!r}; adjust the DgpSpec fields")
    index = PanelIndex(spec.partners, spec.years)
    return BilateralPanel(spec.reporter, index, {k: PanelSeries(index, raw[k], k) for k in VALUE_COLUMNS})


# ---------------------------------------------------------------------------
# Small designs for size/power experiments


def _panel_maps(N, T):
    return np.repeat(np.arange(N), T), np.tile(np.arange(T), N), tuple(f"e{i}" for i in range(N))


def simulate_effects_panel(
    rng: np.random.Generator,
    N: int,
    T: int,
    beta=(1.5,),
    effect_corr: float = 0.0,
    sigma_alpha: float = 1.0,
    sigma_e: float = 1.0,
    time_invariant: bool = False,
) -> DesignMatrix:
    """``y = 1 + x'beta + alpha_i + e`` with ``corr(alpha_i, mean_i x_1) = effect_corr``.

    Each regressor is ``a_i + xi_it``; the first regressor's entity level
    ``a_i`` carries the correlation with the effect.
    """
    k = len(beta)
    alpha = rng.standard_normal(N)
    levels = rng.standard_normal((N, k))
    levels[:, 0] = effect_corr * alpha + np.sqrt(1 - effect_corr**2) * levels[:, 0]
    X = np.repeat(levels, T, axis=0) + rng.standard_normal((N * T, k))
    ent, per, ents = _panel_maps(N, T)
    y = 1.0 + X @ np.asarray(beta) + sigma_alpha * alpha[ent] + sigma_e * rng.standard_normal(N * T)
    cols = [f"x{j + 1}" for j in range(k)]
    if time_invariant:
        z = np.repeat(rng.standard_normal(N), T)
        X = np.column_stack([X, z])
        y = y + 0.5 * z
        cols.append("z")
    return DesignMatrix(y, X, cols, ent, per, ents)


def simulate_iv_sample(
    rng: np.random.Generator,
    n: int = 200,
    endog_corr: float = 0.0,
    n_instruments: int = 1,
    hetero: str = "none",
    invalid_corr: float = 0.0,
    strength: float = 0.8,
    beta: float = 1.0,
    z_mean: float = 0.0,
) -> DesignMatrix:
    """Cross-section ``y = 1 + beta*x + 0.5*w + u`` with x instrumented by z1..zL.

    ``endog_corr`` is corr(u, first-stage error).  ``invalid_corr`` makes the
    last instrument correlated with u.  ``hetero="instrument"`` scales u by
    |z1| so that its variance is proportional to z1 squared.  Instruments are
    N(z_mean, 1); with ``z_mean = 0`` a variance in z1 squared is uncorrelated
    with the level of z1.
    """
    L = n_instruments
    Z = z_mean + rng.standard_normal((n, L))
    w = rng.standard_normal(n)
    v = rng.standard_normal(n)
    e = rng.standard_normal(n)
    u = endog_corr * v + np.sqrt(1 - endog_corr**2) * e
    if invalid_corr:
        u = invalid_corr * Z[:, -1] + np.sqrt(1 - invalid_corr**2) * u
    if hetero == "instrument":
        u = u * np.abs(Z[:, 0])
    elif hetero != "none":
        raise ValueError(f"unknown heteroskedasticity mode {hetero!r}")
    x = Z @ np.full(L, strength / np.sqrt(L)) + 0.3 * w + v
    y = 1.0 + beta * x + 0.5 * w + u
    return DesignMatrix(
        y,
        np.column_stack([x, w]),
        ("x", "w"),
        np.arange(n),
        np.zeros(n, dtype=int),
        tuple(str(i) for i in range(n)),
        instruments={f"z{j + 1}": Z[:, j] for j in range(L)},
    )


def simulate_residual_panel(rng: np.random.Generator, N: int, T: int, loading: float = 0.0) -> np.ndarray:
    """N x T Gaussian residuals with an optional one-factor dependence."""
    e = rng.standard_normal((N, T))
    if loading:
        e = e + loading * rng.uniform(0.5, 1.5, size=(N, 1)) * rng.standard_normal((1, T))
    return e


def simulate_ar_panel(
    rng: np.random.Generator,
    N: int,
    T: int,
    ar: float = 1.0,
    factor: tuple[float, float] | None = None,
    factor_in_shocks: bool = True,
    burn: int = 50,
) -> np.ndarray:
    """AR(1) panel ``y_it = ar*y_i,t-1 + u_it``.

    With ``factor=(lo, hi)`` the shocks (``factor_in_shocks``) or the levels
    carry a common standard-normal factor with loadings U(lo, hi).  For
    ``ar = 1`` and shocks-borne factor, every series shares one common
    random-walk component.
    """
    total = T + (0 if ar == 1.0 else burn)
    u = rng.standard_normal((N, total))
    f = None
    if factor is not None:
        lam = rng.uniform(factor[0], factor[1], size=(N, 1))
        f = lam * rng.standard_normal((1, total))
        if factor_in_shocks:
            u = u + f
    if ar == 1.0:
        y = np.cumsum(u, axis=1)
    else:
        y = np.zeros((N, total))
        for t in range(1, total):
            y[:, t] = ar * y[:, t - 1] + u[:, t]
    if f is not None and not factor_in_shocks:
        y = y + f
    return y[:, total - T :]
