"""Pipeline and Monte Carlo configuration from a sectioned key=value file.

Recognised keys (all optional unless noted)::

    [data]
    input = synthetic_cee4.csv          ; required; relative to the config file
    ; (the output dir below is relative to the working directory)
    totals = synthetic_cee4_totals.csv  ; enables the descriptive share block
    reporters = CZE, HUN                ; default: every reporter in the file
    partners = HUN, POL, SVK, AUT, DEU, NLD
    cee = HUN, POL, SVK                 ; default: the cee_partner column
    first_year = 2000
    last_year = 2013
    max_gap = 1

    [model]
    relations = exports_outfdi, imports_infdi   ; default: all four
    iv_lags = 1
    re_variance = auto                  ; swamy-arora | wallace-hussain | auto
    robust_level = 0.05                 ; Pagan-Hall level for the robust switch
    hausman_level = 0.05
    pagan_hall_indicators = instruments ; instruments | squares | fitted
    growth_shift = 10

    [unitroot]
    lags = 2
    trend = outfdi, bexr                ; variables tested with a trend
    trend.SVK = ex                      ; per-reporter override

    [output]
    dir = out
    seed = 20240601
    figures = yes

    [mc]
    experiment = gravity                ; gravity | residual | unitroot | effects | iv
    statistics = fe, hausman
    reps = 1000
    workers = 1

    [dgp]
    ; fields of the chosen experiment, e.g. n_entities = 6, beta.fdi = 0.1

Values are parsed with :mod:`configparser`; ``;`` and ``#`` start comments.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError
from .gravity import ALL_RELATIONS, Relation
from .unitroot import DEFAULT_SEED

RE_METHODS = ("swamy-arora", "wallace-hussain", "auto")
PH_INDICATORS = ("instruments", "squares", "fitted")
UNIT_ROOT_VARIABLES = ("ex", "im", "outfdi", "infdi", "gdpav", "gdpdif", "gdpcav", "gdpcdif", "gdpg", "popav", "bexr")


def _list(text: str | None) -> tuple[str, ...] | None:
    if text is None:
        return None
    items = tuple(s.strip() for s in text.replace("\n", ",").split(",") if s.strip())
    return items or None


@dataclass(frozen=True)
class PipelineConfig:
    input: Path
    totals: Path | None = None
    reporters: tuple[str, ...] | None = None
    partners: tuple[str, ...] | None = None
    cee: tuple[str, ...] | None = None
    years: tuple[int, int] | None = None
    max_gap: int = 1
    relations: tuple[Relation, ...] = ALL_RELATIONS
    iv_lags: int = 1
    re_variance: str = "auto"
    robust_level: float = 0.05
    hausman_level: float = 0.05
    pagan_hall_indicators: str = "instruments"
    growth_shift: float = 10.0
    ur_lags: int = 2
    trend: tuple[str, ...] = ()
    trend_by_reporter: dict = field(default_factory=dict)
    out_dir: Path = Path("out")
    seed: int = DEFAULT_SEED
    figures: bool = True
    source_text: str = ""

    def __post_init__(self):
        if self.partners is not None and len(self.partners) < 2:
            raise ConfigError("partner set needs at least two countries")
        if self.cee is not None and self.partners is not None and not set(self.cee) <= set(self.partners):
            raise ConfigError(f"cee subset {sorted(set(self.cee) - set(self.partners))} not among partners")
        if self.years is not None:
            a, b = self.years
            if b - a + 1 < 4:
                raise ConfigError(f"year range {a}-{b} covers fewer than 4 periods")
        if self.max_gap < 0:
            raise ConfigError("max_gap must be non-negative")
        if not self.relations:
            raise ConfigError("at least one relation is required")
        if self.iv_lags < 1:
            raise ConfigError("iv_lags must be at least 1")
        if self.re_variance not in RE_METHODS:
            raise ConfigError(f"re_variance must be one of {RE_METHODS}")
        if self.pagan_hall_indicators not in PH_INDICATORS:
            raise ConfigError(f"pagan_hall_indicators must be one of {PH_INDICATORS}")
        for lvl in (self.robust_level, self.hausman_level):
            if not 0 < lvl < 1:
                raise ConfigError("significance levels must lie in (0, 1)")
        if self.ur_lags < 0:
            raise ConfigError("unit-root lags must be non-negative")
        for v in self.trend + tuple(x for vs in self.trend_by_reporter.values() for x in vs):
            if v not in UNIT_ROOT_VARIABLES:
                raise ConfigError(f"unknown unit-root variable {v!r} in trend map")

    def trend_for(self, reporter: str) -> tuple[str, ...]:
        return self.trend_by_reporter.get(reporter, self.trend)

    @property
    def config_hash(self) -> str:
        """SHA-256 of the effective settings (paths by name, not location)."""
        h = hashlib.sha256()
        for f in fields(self):
            if f.name in ("source_text", "out_dir"):
                continue
            v = getattr(self, f.name)
            if isinstance(v, Path):
                v = v.name
            elif f.name == "relations":
                v = [r.key for r in v]
            elif f.name == "totals" and v is not None:
                v = v.name
            elif isinstance(v, dict):
                v = sorted(v.items())
            h.update(f"{f.name}={v!r}\n".encode())
        return h.hexdigest()

    def with_overrides(self, **kw) -> "PipelineConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self


def _get(cp, section, key, conv=str, default=None):
    if not cp.has_section(section) or not cp.has_option(section, key):
        return default
    raw = cp.get(section, key).strip()
    if raw == "":
        return default
    try:
        return conv(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {conv.__name__}") from None


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("1", "yes", "true", "on"):
        return True
    if t in ("0", "no", "false", "off"):
        return False
    raise ValueError(text)


_bool.__name__ = "boolean"


def parse_config(text: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str  # keep reporter codes in trend.XXX keys
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    return cp


def pipeline_config(text: str, base_dir: Path | str = ".") -> PipelineConfig:
    """Build a :class:`PipelineConfig` from config text.

    Relative paths are resolved against ``base_dir`` (the config's folder).
    """
    cp = parse_config(text)
    base = Path(base_dir)

    def path(key):
        v = _get(cp, "data", key)
        if v is None:
            return None
        p = Path(v)
        return p if p.is_absolute() else base / p

    inp = path("input")
    if inp is None:
        raise ConfigError("[data] input is required")
    first, last = _get(cp, "data", "first_year", int), _get(cp, "data", "last_year", int)
    if (first is None) != (last is None):
        raise ConfigError("give both first_year and last_year or neither")
    rels = _list(_get(cp, "model", "relations"))
    try:
        relations = tuple(Relation.parse(r) for r in rels) if rels else ALL_RELATIONS
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    trend_by = {}
    if cp.has_section("unitroot"):
        for key in cp.options("unitroot"):
            if key.startswith("trend."):
                trend_by[key.split(".", 1)[1]] = _list(cp.get("unitroot", key)) or ()
    out = Path(_get(cp, "output", "dir", default="out"))
    return PipelineConfig(
        input=inp,
        totals=path("totals"),
        reporters=_list(_get(cp, "data", "reporters")),
        partners=_list(_get(cp, "data", "partners")),
        cee=_list(_get(cp, "data", "cee")),
        years=(first, last) if first is not None else None,
        max_gap=_get(cp, "data", "max_gap", int, 1),
        relations=relations,
        iv_lags=_get(cp, "model", "iv_lags", int, 1),
        re_variance=_get(cp, "model", "re_variance", str, "auto"),
        robust_level=_get(cp, "model", "robust_level", float, 0.05),
        hausman_level=_get(cp, "model", "hausman_level", float, 0.05),
        pagan_hall_indicators=_get(cp, "model", "pagan_hall_indicators", str, "instruments"),
        growth_shift=_get(cp, "model", "growth_shift", float, 10.0),
        ur_lags=_get(cp, "unitroot", "lags", int, 2),
        trend=_list(_get(cp, "unitroot", "trend")) or (),
        trend_by_reporter=trend_by,
        out_dir=out,
        seed=_get(cp, "output", "seed", int, DEFAULT_SEED),
        figures=_get(cp, "output", "figures", _bool, True),
        source_text=text,
    )


def load_pipeline_config(path) -> PipelineConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    return pipeline_config(text, p.parent)


def _scalar(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    low = text.lower()
    if low in ("none", ""):
        return None
    if low in ("true", "yes"):
        return True
    if low in ("false", "no"):
        return False
    if "," in text:
        return tuple(_scalar(x.strip()) for x in text.split(",") if x.strip())
    return text


@dataclass(frozen=True)
class McConfig:
    experiment: str = "gravity"
    statistics: tuple[str, ...] = ()
    reps: int = 1000
    workers: int = 1
    params: dict = field(default_factory=dict)
    out_dir: Path = Path("out")


def mc_config(text: str) -> McConfig:
    """Monte Carlo settings from the ``[mc]`` and ``[dgp]`` sections.

    Keys of the form ``beta.fdi`` or ``endogeneity.fdi`` collect into dicts.
    """
    cp = parse_config(text)
    params: dict = {}
    if cp.has_section("dgp"):
        for key in cp.options("dgp"):
            val = _scalar(cp.get("dgp", key).strip())
            if "." in key:
                head, tail = key.split(".", 1)
                params.setdefault(head, {})[tail] = val
            else:
                params[key] = val
    for k in ("partners", "cee", "factor"):
        if k in params and isinstance(params[k], str):
            params[k] = (params[k],)
    return McConfig(
        experiment=_get(cp, "mc", "experiment", str, "gravity"),
        statistics=_list(_get(cp, "mc", "statistics")) or (),
        reps=_get(cp, "mc", "reps", int, 1000),
        workers=_get(cp, "mc", "workers", int, 1),
        params=params,
        out_dir=Path(_get(cp, "output", "dir", default="out")),
    )
