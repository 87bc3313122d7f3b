"""Seeded Monte Carlo engine for size, power, bias and coverage.

Replication ``r`` of an experiment with master seed ``s`` draws from
``SeedSequence([s, r])``.  Results are gathered and aggregated in replication
order, so summaries are identical for any number of worker processes.
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import dgp
from .errors import ConfigError, EstimationError, GravPanelError
from .estimators import IvSpec, fixed_effects, ols, random_effects, two_sls, hausman_test
from .gravity import Relation, build_dataset
from .ivdiag import durbin_wu_hausman, hansen_j, pagan_hall, sargan, wu_hausman
from .unitroot import AdfSpec, cadf_test, ips_test
from .xsdep import ResidualPanel, frees_cd, friedman_cd, pesaran_cd

LEVELS = (0.10, 0.05, 0.01)
DEFAULT_MAX_FAILURE_RATE = 0.01


# ---------------------------------------------------------------------------
# Experiments built on the lightweight simulators


@dataclass(frozen=True)
class ResidualExperiment:
    N: int = 6
    T: int = 14
    loading: float = 0.0
    seed: int = 1


@dataclass(frozen=True)
class UnitRootExperiment:
    N: int = 6
    T: int = 14
    ar: float = 1.0
    factor: tuple[float, float] | None = None
    lags: int = 2
    deterministic: str = "c"
    seed: int = 1


@dataclass(frozen=True)
class EffectsExperiment:
    N: int = 200
    T: int = 5
    k: int = 1
    effect_corr: float = 0.0
    seed: int = 1

    @property
    def beta(self) -> tuple[float, ...]:
        return (1.0,) * self.k


@dataclass(frozen=True)
class IvExperiment:
    n: int = 200
    endog_corr: float = 0.0
    n_instruments: int = 2
    hetero: str = "none"
    invalid_corr: float = 0.0
    beta: float = 1.0
    z_mean: float = 0.0
    indicators: str = "instruments"
    seed: int = 1


# ---------------------------------------------------------------------------
# Per-replication outcomes


@dataclass(frozen=True)
class Draw:
    """One statistic from one replication.

    ``rejects`` maps test level to the decision (None for estimates or when
    the test is undefined); ``estimate``/``covers`` describe a coefficient.
    """

    name: str
    rejects: dict | None = None
    estimate: float | None = None
    truth: float | None = None
    covers: bool | None = None


def _from_p(name, p):
    if p is None:
        return Draw(name)
    return Draw(name, rejects={lvl: bool(p <= lvl) for lvl in LEVELS})


def _from_test(name, t):
    if t.p_value is not None:
        return _from_p(name, t.p_value)
    if t.critical_values:
        return Draw(name, rejects={lvl: bool(t.statistic > c) for lvl, c in t.critical_values.items()})
    return Draw(name)


def _coef(label, res, name, truth):
    lo, hi = res.conf_int(name, 0.95)
    return Draw(label, estimate=res.coef(name), truth=truth, covers=bool(lo <= truth <= hi))


_RELATION = Relation("exports", "outward")


def _gravity_design(spec: dgp.DgpSpec, rep: int):
    panel = dgp.generate(spec, rep)
    return build_dataset(panel, _RELATION, spec.cee).to_design()


def _unsupported(group, spec):
    return ConfigError(f"statistics of group {group!r} are not available for {type(spec).__name__}")


def _cd(spec, rep, want):
    if isinstance(spec, ResidualExperiment):
        e = dgp.simulate_residual_panel(dgp.rng_for(spec.seed, rep), spec.N, spec.T, spec.loading)
        r = ResidualPanel.from_array(e)
    elif isinstance(spec, dgp.DgpSpec):
        m = _gravity_design(spec, rep)
        r = ResidualPanel.from_design(m, fixed_effects(m).residuals)
    else:
        raise _unsupported("cd", spec)
    tests = {"pesaran_cd": pesaran_cd, "friedman": friedman_cd, "frees": frees_cd}
    return [_from_test(k, tests[k](r)) for k in want]


def _unitroot(spec, rep, want):
    if isinstance(spec, UnitRootExperiment):
        Y = dgp.simulate_ar_panel(dgp.rng_for(spec.seed, rep), spec.N, spec.T, spec.ar, spec.factor)
        adf = AdfSpec(spec.deterministic, spec.lags)
    elif isinstance(spec, dgp.DgpSpec):
        # log FDI carries a deterministic trend in the generator
        Y = np.log(dgp.generate(spec, rep).series["outfdi"].values)
        adf = AdfSpec("ct", 1)
    else:
        raise _unsupported("unitroot", spec)
    tests = {"ips": ips_test, "cadf": cadf_test}
    return [_from_p(k, tests[k](Y, adf).p_value) for k in want]


def _panel(spec, rep, want):
    if isinstance(spec, EffectsExperiment):
        m = dgp.simulate_effects_panel(dgp.rng_for(spec.seed, rep), spec.N, spec.T, spec.beta, spec.effect_corr)
        name, truth = "x1", spec.beta[0]
    elif isinstance(spec, dgp.DgpSpec):
        m = _gravity_design(spec, rep)
        name, truth = _RELATION.fdi, spec.beta["fdi"]
    else:
        raise _unsupported("panel", spec)
    cache = {}

    def get(key):
        if key not in cache:
            if key == "fe":
                cache[key] = fixed_effects(m)
            elif key == "re":
                cache[key] = random_effects(m, variance_method="auto")
            else:
                cache[key] = ols(m)
        return cache[key]

    out = []
    for k in want:
        if k == "hausman":
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                out.append(_from_test(k, hausman_test(get("fe"), get("re"))))
        else:
            out.append(_coef(k, get(k), name, truth))
    return out


def _iv(spec, rep, want):
    if isinstance(spec, IvExperiment):
        m = dgp.simulate_iv_sample(
            dgp.rng_for(spec.seed, rep),
            spec.n,
            spec.endog_corr,
            spec.n_instruments,
            spec.hetero,
            spec.invalid_corr,
            beta=spec.beta,
            z_mean=spec.z_mean,
        )
        iv = IvSpec(endogenous=("x",), excluded=tuple(m.instruments), lags=())
        name, truth = "x", spec.beta
        indicators = spec.indicators
    elif isinstance(spec, dgp.DgpSpec):
        m = _gravity_design(spec, rep)
        iv = IvSpec(endogenous=(_RELATION.fdi,), lags=(1, 2))
        name, truth = _RELATION.fdi, spec.beta["fdi"]
        indicators = "instruments"
    else:
        raise _unsupported("iv", spec)
    tests = {
        "wu_hausman": wu_hausman,
        "durbin_wu_hausman": durbin_wu_hausman,
        "pagan_hall": pagan_hall,
        "sargan": sargan,
        "hansen_j": hansen_j,
    }
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for k in want:
            if k == "ols":
                out.append(_coef(k, ols(m), name, truth))
            elif k == "2sls":
                out.append(_coef(k, two_sls(m, iv), name, truth))
            elif k == "pagan_hall":
                out.append(_from_test(k, pagan_hall(m, iv, indicators=indicators)))
            else:
                out.append(_from_test(k, tests[k](m, iv)))
    return out


GROUPS: dict[str, tuple[Callable, tuple[str, ...]]] = {
    "cd": (_cd, ("pesaran_cd", "friedman", "frees")),
    "unitroot": (_unitroot, ("ips", "cadf")),
    "panel": (_panel, ("fe", "re", "ols", "hausman")),
    "iv": (_iv, ("ols", "2sls", "wu_hausman", "durbin_wu_hausman", "pagan_hall", "sargan", "hansen_j")),
}
STATISTICS = tuple(dict.fromkeys(s for _, stats in GROUPS.values() for s in stats))
# Experiment types able to feed each group (the gravity DGP feeds all of them).
SUPPORTED = {
    "cd": (ResidualExperiment, dgp.DgpSpec),
    "unitroot": (UnitRootExperiment, dgp.DgpSpec),
    "panel": (EffectsExperiment, dgp.DgpSpec),
    "iv": (IvExperiment, dgp.DgpSpec),
}


def _group_of(stat: str, spec) -> str:
    if stat == "ols":
        return "iv" if isinstance(spec, IvExperiment) else "panel"
    for g, (_, stats) in GROUPS.items():
        if stat in stats:
            return g
    raise ConfigError(f"unknown statistic {stat!r}; choose from {sorted(STATISTICS)} or a group {sorted(GROUPS)}")


def resolve_statistics(names: Sequence[str], spec) -> dict[str, tuple[str, ...]]:
    """Expand group shorthands and bucket statistic names by group."""
    plan: dict[str, list[str]] = {}
    for nm in names:
        nm = nm.strip().lower()
        members = GROUPS[nm][1] if nm in GROUPS else (nm,)
        for s in members:
            g = _group_of(s, spec)
            if not isinstance(spec, SUPPORTED[g]):
                raise _unsupported(g, spec)
            if s not in plan.setdefault(g, []):
                plan[g].append(s)
    return {g: tuple(v) for g, v in plan.items()}


@dataclass(frozen=True)
class _Plan:
    groups: tuple[tuple[str, tuple[str, ...]], ...]

    def __call__(self, spec, rep):
        out = []
        for g, want in self.groups:
            out.extend(GROUPS[g][0](spec, rep, want))
        return out


# ---------------------------------------------------------------------------
# Aggregation


@dataclass(frozen=True)
class McRow:
    statistic: str
    n: int
    reject_10: float = math.nan
    reject_05: float = math.nan
    reject_01: float = math.nan
    mean_estimate: float = math.nan
    bias: float = math.nan
    rmse: float = math.nan
    coverage: float = math.nan

    def rejection(self, level: float) -> float:
        return {0.10: self.reject_10, 0.05: self.reject_05, 0.01: self.reject_01}[level]


@dataclass(frozen=True)
class McSummary:
    experiment: str
    seed: int
    reps: int
    rows: tuple[McRow, ...]
    failures: tuple[tuple[int, str], ...] = field(default_factory=tuple)

    def row(self, statistic: str) -> McRow:
        for r in self.rows:
            if r.statistic == statistic:
                return r
        raise KeyError(f"no statistic {statistic!r} in summary")

    def rejection_rate(self, statistic: str, level: float = 0.05) -> float:
        return self.row(statistic).rejection(level)

    def to_csv(self, path) -> None:
        names = list(McRow.__dataclass_fields__)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["experiment", "seed", "reps", "failures"] + names)
            for r in self.rows:
                vals = asdict(r)
                w.writerow(
                    [self.experiment, self.seed, self.reps, len(self.failures)]
                    + [_fmt(vals[k]) for k in names]
                )


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else f"{v:.6g}"
    return v


def _aggregate(draws_by_rep: Sequence[list[Draw]]) -> tuple[McRow, ...]:
    order: list[str] = []
    grouped: dict[str, list[Draw]] = {}
    for draws in draws_by_rep:
        for d in draws:
            if d.name not in grouped:
                order.append(d.name)
                grouped[d.name] = []
            grouped[d.name].append(d)
    rows = []
    for name in order:
        ds = grouped[name]
        kw = {}
        rej = [d.rejects for d in ds if d.rejects is not None]
        if rej:
            for lvl, key in zip(LEVELS, ("reject_10", "reject_05", "reject_01")):
                kw[key] = float(np.mean([r[lvl] for r in rej]))
        est = [d for d in ds if d.estimate is not None]
        if est:
            e = np.array([d.estimate for d in est])
            err = e - np.array([d.truth for d in est])
            kw.update(
                mean_estimate=float(e.mean()),
                bias=float(err.mean()),
                rmse=float(np.sqrt((err**2).mean())),
                coverage=float(np.mean([d.covers for d in est])),
            )
        rows.append(McRow(name, len(rej) if rej else len(est), **kw))
    return tuple(rows)


_RECOVERABLE = (GravPanelError, np.linalg.LinAlgError, ArithmeticError, ValueError)


def _run_chunk(analysis: Callable, spec, reps: Sequence[int]):
    out = []
    for r in reps:
        try:
            out.append((r, analysis(spec, r), None))
        except _RECOVERABLE as exc:
            out.append((r, None, f"{type(exc).__name__}: {exc}"))
    return out


def _chunks(n: int, parts: int) -> list[range]:
    size = max(1, math.ceil(n / parts))
    return [range(i, min(n, i + size)) for i in range(0, n, size)]


MIN_REPS = 100


def run_mc(
    spec,
    analysis: str | Sequence[str] | Callable,
    reps: int,
    workers: int = 1,
    max_failure_rate: float = DEFAULT_MAX_FAILURE_RATE,
) -> McSummary:
    """Run ``reps`` replications of ``analysis`` on draws from ``spec``.

    ``analysis`` is a list of statistic names from :data:`STATISTICS` (group
    names in :data:`GROUPS` expand to all their members), a single such
    name, or a picklable callable ``(spec, rep) -> list[Draw]``.  Replications
    that raise a recoverable error are recorded as failures; more than
    ``max_failure_rate * reps`` of them aborts with :class:`EstimationError`.
    """
    if reps < MIN_REPS:
        raise ConfigError(f"reps must be at least {MIN_REPS}, got {reps}")
    if workers < 1:
        raise ConfigError("workers must be positive")
    if callable(analysis):
        label, fn = getattr(analysis, "__name__", "custom"), analysis
    else:
        names = [analysis] if isinstance(analysis, str) else list(analysis)
        plan = resolve_statistics(names, spec)
        label = "+".join(n.strip().lower() for n in names)
        if not plan:
            return McSummary(label, int(spec.seed), reps, ())
        fn = _Plan(tuple(plan.items()))
    if workers == 1:
        results = _run_chunk(fn, spec, range(reps))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_chunk, fn, spec, c) for c in _chunks(reps, workers * 4)]
            results = [item for f in futures for item in f.result()]
    results.sort(key=lambda t: t[0])
    failures = tuple((r, msg) for r, _, msg in results if msg is not None)
    if len(failures) > max_failure_rate * reps:
        r, msg = failures[0]
        raise EstimationError(
            f"{len(failures)} of {reps} replications failed (limit {max_failure_rate:.1%}); first at rep {r}: {msg}"
        )
    rows = _aggregate([d for _, d, msg in results if msg is None])
    return McSummary(label, int(spec.seed), reps, rows, failures)


def experiment_from_mapping(kind: str, params: dict):
    """Build an experiment object from string-keyed parameters (config/CLI)."""
    classes = {
        "gravity": dgp.DgpSpec,
        "residual": ResidualExperiment,
        "unitroot": UnitRootExperiment,
        "effects": EffectsExperiment,
        "iv": IvExperiment,
    }
    if kind not in classes:
        raise ConfigError(f"unknown experiment kind {kind!r}; choose from {sorted(classes)}")
    try:
        return classes[kind](**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {kind!r} experiment: {exc}") from None
