from pathlib import Path

import pytest

from gravpanel.config import (
    PipelineConfig,
    load_pipeline_config,
    mc_config,
    parse_config,
    pipeline_config,
)
from gravpanel.errors import ConfigError
from gravpanel.gravity import ALL_RELATIONS, Relation

from conftest import EXAMPLE_CFG

MINIMAL = "[data]\ninput = panel.csv\n"


def test_example_config():
    cfg = load_pipeline_config(EXAMPLE_CFG)
    assert cfg.input == EXAMPLE_CFG.parent / "synthetic_cee4.csv"
    assert cfg.totals.name == "synthetic_cee4_totals.csv"
    assert cfg.years == (2000, 2013)
    assert cfg.relations == ALL_RELATIONS
    assert cfg.trend == ("outfdi", "infdi")
    assert cfg.out_dir == Path("gravpanel_out")
    assert cfg.seed == 20240601 and cfg.figures


def test_defaults_and_relative_input(tmp_path):
    cfg = pipeline_config(MINIMAL, tmp_path)
    assert cfg.input == tmp_path / "panel.csv"
    assert cfg.re_variance == "auto" and cfg.iv_lags == 1 and cfg.max_gap == 1
    assert cfg.growth_shift == 10.0


def test_inline_comments_and_trend_override():
    text = MINIMAL + "[unitroot]\ntrend = ex, bexr ; comment\ntrend.SVK = im\n[model]\nrelations = imports_inward\n"
    cfg = pipeline_config(text)
    assert cfg.trend == ("ex", "bexr")
    assert cfg.trend_for("SVK") == ("im",) and cfg.trend_for("CZE") == ("ex", "bexr")
    assert cfg.relations == (Relation("imports", "inward"),)


@pytest.mark.parametrize(
    "text, match",
    [
        ("[model]\niv_lags = 1\n", "input is required"),
        (MINIMAL + "[model]\niv_lags = one\n", "not a valid int"),
        (MINIMAL + "[model]\nre_variance = ml\n", "re_variance"),
        (MINIMAL + "[model]\nrelations = exports_sideways\n", "unknown relation"),
        ("[data]\ninput = p.csv\nfirst_year = 2000\n", "both"),
        (MINIMAL + "[unitroot]\ntrend = gdp\n", "unknown unit-root variable"),
        (MINIMAL + "[output]\nfigures = maybe\n", "boolean"),
        ("not a config", "cannot parse"),
    ],
)
def test_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        pipeline_config(text)


def test_duplicate_section_in_text():
    with pytest.raises(ConfigError):
        pipeline_config(MINIMAL + "[data]\nmax_gap = 2\n")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_pipeline_config(tmp_path / "nope.cfg")


def test_hash_ignores_location_and_output(tmp_path):
    a = pipeline_config(MINIMAL, tmp_path / "a")
    b = pipeline_config(MINIMAL, tmp_path / "b").with_overrides(out_dir=Path("elsewhere"))
    assert a.config_hash == b.config_hash
    assert a.with_overrides(seed=1).config_hash != a.config_hash


def test_overrides_ignore_none():
    cfg = pipeline_config(MINIMAL)
    assert cfg.with_overrides(seed=None) is cfg


def test_validation_in_dataclass():
    with pytest.raises(ConfigError, match="fewer than 4"):
        PipelineConfig(input=Path("x"), years=(2000, 2002))
    with pytest.raises(ConfigError, match="not among partners"):
        PipelineConfig(input=Path("x"), partners=("A", "B"), cee=("C",))


def test_mc_config():
    mc = mc_config(EXAMPLE_CFG.read_text())
    assert mc.experiment == "gravity" and mc.reps == 200
    assert mc.statistics == ("fe", "re", "hausman")
    assert mc.params["beta"] == {"fdi": 0.10}
    assert mc.params["n_entities"] == 6


def test_parse_keeps_case():
    cp = parse_config("[unitroot]\ntrend.SVK = ex\n")
    assert cp.options("unitroot") == ["trend.SVK"]
