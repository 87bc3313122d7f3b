"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the summary section lists
every criterion at the end of the session.
"""

import csv
import io
import time
from pathlib import Path

import numpy as np
import pytest

from gravpanel.config import load_pipeline_config
from gravpanel.dgp import rng_for, simulate_iv_sample
from gravpanel.estimators import IvSpec, fixed_effects, ols, random_effects
from gravpanel.gravity import shifted_log_growth
from gravpanel.ivdiag import hansen_j, sargan
from gravpanel.montecarlo import (
    EffectsExperiment,
    IvExperiment,
    ResidualExperiment,
    UnitRootExperiment,
    run_mc,
)
from gravpanel.panel import within_transform
from gravpanel.report import DIAGNOSTIC_ROWS, ROBUST_MARK, run_pipeline, write_report
from gravpanel.xsdep import frees_critical_values

from conftest import EXAMPLE_CFG, gravity_design, lsdv_oracle, make_design, record_acceptance

GOLDEN = Path(__file__).parent / "golden"
N_PANELS = 200


def random_panels(seed=20240601):
    rng = np.random.default_rng(seed)
    for _ in range(N_PANELS):
        N, T, k = int(rng.integers(3, 11)), int(rng.integers(5, 21)), int(rng.integers(2, 6))
        yield make_design(N, T, k, rng, effects=rng.normal(size=N) * 2)


def check(number, ok, detail):
    record_acceptance(number, bool(ok), detail)
    assert ok, detail


def test_01_lsdv_equivalence():
    t0 = time.perf_counter()
    worst = 0.0
    for m in random_panels():
        b, _, _ = lsdv_oracle(m)
        worst = max(worst, float(np.max(np.abs(fixed_effects(m).params - b))))
    elapsed = time.perf_counter() - t0
    check(1, worst <= 1e-8 and elapsed < 30, f"max |FE - LSDV| = {worst:.2e} (tol 1e-8), {elapsed:.1f} s (limit 30 s)")


def test_02_re_limits():
    worst0 = worst1 = 0.0
    for m in random_panels():
        worst0 = max(worst0, float(np.max(np.abs(random_effects(m, theta=0.0).params - ols(m).params))))
        worst1 = max(worst1, float(np.max(np.abs(random_effects(m, theta=1.0).params - fixed_effects(m).params))))
    check(2, max(worst0, worst1) <= 1e-10, f"theta=0 vs OLS {worst0:.2e}, theta=1 vs FE {worst1:.2e} (tol 1e-10)")


def test_03_exactly_identified_overid():
    worst = 0.0
    for rep in range(50):
        m = simulate_iv_sample(rng_for(3, rep), n=100, endog_corr=0.5, n_instruments=1)
        spec = IvSpec(("x",), lags=(), excluded=("z1",))
        for fn in (sargan, hansen_j):
            r = fn(m, spec)
            worst = max(worst, abs(r.statistic), abs(r.extra["raw_statistic"]))
    for rep in range(3):
        # lag-instrumented gravity regression: one lag per endogenous regressor
        from gravpanel.dgp import DgpSpec, generate
        from gravpanel.ingest import repair_panel

        m = gravity_design(repair_panel(generate(DgpSpec(seed=rep)))[0])
        spec = IvSpec(("outfdi", "gdpg", "bexr"), lags=(1,))
        for fn in (sargan, hansen_j):
            r = fn(m, spec)
            worst = max(worst, abs(r.statistic), abs(r.extra["raw_statistic"]))
    check(3, worst <= 1e-10, f"max |statistic| = {worst:.2e} (tol 1e-10); reported value 0.00")


def test_04_frees_embedded():
    crit, prov = frees_critical_values(14, simulate=False)
    ok = crit == {0.10: 0.184, 0.05: 0.243, 0.01: 0.360} and prov == "embedded-table"
    check(4, ok, f"T=14 values {crit[0.10]}/{crit[0.05]}/{crit[0.01]} ({prov})")


def test_05_cd_size():
    t0 = time.perf_counter()
    s = run_mc(ResidualExperiment(N=6, T=14, seed=5), ["pesaran_cd"], 2000)
    rate, elapsed = s.rejection_rate("pesaran_cd", 0.05), time.perf_counter() - t0
    check(5, 0.03 <= rate <= 0.07 and elapsed < 120, f"Pesaran CD size {rate:.2%} in [3%, 7%], {elapsed:.1f} s (limit 120 s)")


def test_06_ips_size_and_power():
    t0 = time.perf_counter()
    size = run_mc(UnitRootExperiment(N=6, T=14, ar=1.0, lags=2, deterministic="c", seed=6), ["ips"], 2000)
    power = run_mc(UnitRootExperiment(N=10, T=50, ar=0.5, lags=2, deterministic="c", seed=6), ["ips"], 1000)
    r0, r1 = size.rejection_rate("ips"), power.rejection_rate("ips")
    elapsed = time.perf_counter() - t0
    ok = 0.025 <= r0 <= 0.08 and r1 > 0.80 and elapsed < 300
    check(6, ok, f"IPS size {r0:.2%} in [2.5%, 8%], power {r1:.1%} > 80%, {elapsed:.1f} s (limit 300 s)")


def test_07_cadf_robustness():
    spec = UnitRootExperiment(N=10, T=30, ar=1.0, factor=(1.0, 3.0), lags=1, deterministic="c", seed=7)
    s = run_mc(spec, ["cadf", "ips"], 1000)
    cadf, ips = s.rejection_rate("cadf"), s.rejection_rate("ips")
    check(7, 0.02 <= cadf <= 0.09 and ips > 0.12, f"common-factor null: CADF {cadf:.2%} in [2%, 9%], IPS {ips:.2%} > 12%")


def test_08_2sls_bias():
    s = run_mc(IvExperiment(n=200, endog_corr=0.8, n_instruments=1, beta=1.0, seed=8), ["ols", "2sls"], 1000)
    b_ols, b_iv = s.row("ols").bias, s.row("2sls").bias
    check(8, abs(b_iv) < 0.3 * abs(b_ols), f"|2SLS bias| {abs(b_iv):.4f} < 0.3 x |OLS bias| {abs(b_ols):.4f}")


def test_09_hausman():
    null = run_mc(EffectsExperiment(N=200, T=5, k=1, effect_corr=0.0, seed=9), ["hausman"], 500)
    alt = run_mc(EffectsExperiment(N=200, T=5, k=1, effect_corr=0.7, seed=9), ["hausman"], 500)
    r0, r1 = null.rejection_rate("hausman"), alt.rejection_rate("hausman")
    check(9, r0 <= 0.08 and r1 >= 0.80, f"Hausman size {r0:.2%} <= 8%, power {r1:.1%} >= 80% (N=200, T=5)")


def test_10_diagnostic_sizes():
    s = run_mc(
        IvExperiment(n=200, endog_corr=0.0, n_instruments=2, hetero="none", seed=10),
        ["wu_hausman", "durbin_wu_hausman", "pagan_hall", "sargan"],
        1000,
    )
    rates = {k: s.rejection_rate(k) for k in ("wu_hausman", "durbin_wu_hausman", "pagan_hall", "sargan")}
    ok = all(0.025 <= r <= 0.08 for r in rates.values())
    check(10, ok, "sizes " + ", ".join(f"{k} {v:.2%}" for k, v in rates.items()) + " in [2.5%, 8%]")


def test_11_structural_replication(tmp_path):
    cfg = load_pipeline_config(EXAMPLE_CFG)
    problems = []
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        write_report(run_pipeline(cfg), out)
        outs.append(out)
    a, b = outs
    for p in sorted(a.iterdir()):
        if p.read_bytes() != (b / p.name).read_bytes():
            problems.append(f"{p.name} differs between runs")
    for g in sorted(GOLDEN.glob("*.csv")):
        if g.name == "estimates.csv":
            continue
        got = (a / g.name).read_text()
        if got != g.read_text():
            problems.append(f"{g.name} differs from golden")
    n_tables = 0
    for p in sorted(a.glob("reg_*.csv")):
        rows = list(csv.reader(io.StringIO(p.read_text())))
        labels = [r[0] for r in rows]
        n_tables += 1
        if labels[-1] != "Observations" or labels[-6:-1] != list(DIAGNOSTIC_ROWS):
            problems.append(f"{p.name}: diagnostic/observation rows")
        obs = rows[-1][1:]
        if set(obs[0::3]) != {"84"} or set(obs[1::3]) != {"84"}:
            problems.append(f"{p.name}: FE/RE observations are not 84")
        if not all(h.endswith(("FE", "RE", "2SLS", "2SLS" + ROBUST_MARK)) for h in rows[0][1:]):
            problems.append(f"{p.name}: estimator columns")
        if not any(c.endswith("*") for r in rows[1:-6] for c in r[1:]):
            problems.append(f"{p.name}: no significance stars")
    md = (a / "report.md").read_text()
    if md.count("Stars: *** p <= 0.01, ** p <= 0.05, * p <= 0.10.") != 4:
        problems.append("star note lines")
    check(11, not problems and n_tables == 4, "; ".join(problems) or "4 regression tables, CD and unit-root tables match golden files; two runs byte-identical")


def test_12_transform_anchors(repaired_panels):
    g = float(shifted_log_growth(np.array([-9.0]))[0])
    worst = 0.0
    fe_terms = set()
    for p in repaired_panels.values():
        m = gravity_design(p)
        w = within_transform(m)
        for i in range(w.n_entities):
            rows = w.entity_of_row == i
            worst = max(worst, abs(w.y[rows].sum()), float(np.abs(w.X[rows].sum(axis=0)).max()))
        fe_terms |= set(fixed_effects(m).names)
    ok = g == 0.0 and worst <= 1e-10 and not fe_terms & {"dist", "dummy"}
    check(12, ok, f"gdpg(-9) = {g!r}; max within column sum {worst:.1e} (tol 1e-10); FE terms exclude dist/dummy")
