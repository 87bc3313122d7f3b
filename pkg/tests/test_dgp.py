import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gravpanel.dgp import (
    DEFAULT_BETA,
    DgpSpec,
    generate,
    rng_for,
    simulate_ar_panel,
    simulate_effects_panel,
    simulate_iv_sample,
    simulate_residual_panel,
)
from gravpanel.errors import ConfigError
from gravpanel.gravity import build_dataset
from gravpanel.ingest import VALUE_COLUMNS, load_panel, repair_panel, write_panel


class TestSpec:
    def test_defaults(self):
        s = DgpSpec()
        assert s.partners == ("HUN", "POL", "SVK", "AUT", "DEU", "NLD")
        assert s.cee == ("HUN", "POL", "SVK")
        assert s.years == tuple(range(2000, 2014))
        assert s.beta == DEFAULT_BETA

    def test_partial_beta_merges(self):
        s = DgpSpec(beta={"fdi": 0.3})
        assert s.beta["fdi"] == 0.3 and s.beta["dist"] == DEFAULT_BETA["dist"]

    @pytest.mark.parametrize(
        "kw",
        [
            dict(n_entities=1),
            dict(effect_corr=1.5),
            dict(beta={"nope": 1.0}),
            dict(endogeneity={"gdpav": 0.3}),
            dict(endogeneity={"fdi": 0.9, "bexr": 0.9}),
            dict(heteroskedasticity="x"),
            dict(partners=("A", "B")),
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            DgpSpec(**kw)

    def test_generic_partner_names(self):
        s = DgpSpec(n_entities=4)
        assert s.partners == ("P01", "P02", "P03", "P04") and s.cee == ("P01", "P02")


class TestGenerate:
    def test_deterministic(self):
        a, b = generate(DgpSpec(seed=7), rep=3), generate(DgpSpec(seed=7), rep=3)
        for c in VALUE_COLUMNS:
            np.testing.assert_array_equal(a.series[c].values, b.series[c].values)

    def test_reps_differ(self):
        a, b = generate(DgpSpec(), 0), generate(DgpSpec(), 1)
        assert not np.array_equal(a.series["exports"].values, b.series["exports"].values)

    def test_rng_streams_independent_of_order(self):
        x = [rng_for(5, r).standard_normal() for r in (2, 0, 1)]
        y = [rng_for(5, r).standard_normal() for r in (0, 1, 2)]
        assert sorted(x) == sorted(y)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**31), st.sampled_from(["none", "fdi"]), st.floats(0, 0.5))
    def test_passes_ingest_without_repairs(self, seed, het, cd):
        p = generate(DgpSpec(seed=seed, heteroskedasticity=het, cross_dependence=cd))
        fixed, rep = repair_panel(p)
        assert rep.entries == []
        ds = build_dataset(fixed, "imports_infdi")
        assert ds.to_design().n_obs == 84

    def test_round_trip(self, tmp_path):
        p = generate(DgpSpec(seed=99))
        write_panel([p], tmp_path / "g.csv")
        q = load_panel(tmp_path / "g.csv")["CZE"]
        for c in VALUE_COLUMNS:
            np.testing.assert_array_equal(p.series[c].values, q.series[c].values)

    def test_cee_column(self):
        p = generate(DgpSpec())
        assert p.cee_set() == ("HUN", "POL", "SVK")


class TestSimulators:
    def test_effects_panel_shape(self, rng):
        m = simulate_effects_panel(rng, 10, 4, beta=(1.0, 2.0), time_invariant=True)
        assert m.columns == ("x1", "x2", "z") and m.n_obs == 40

    def test_effects_correlation(self):
        m = simulate_effects_panel(rng_for(1, 0), 4000, 2, effect_corr=0.8, sigma_alpha=1.0, sigma_e=0.0)
        x = m.X[:, 0].reshape(4000, 2).mean(axis=1)
        a = m.y.reshape(4000, 2).mean(axis=1) - 1.0 - 1.5 * x
        assert np.corrcoef(a, x)[0, 1] > 0.6

    def test_iv_sample(self, rng):
        m = simulate_iv_sample(rng, n=50, n_instruments=3)
        assert m.columns == ("x", "w") and sorted(m.instruments) == ["z1", "z2", "z3"]

    def test_iv_instrument_mean(self, rng):
        m = simulate_iv_sample(rng, n=20000, n_instruments=2, z_mean=1.0)
        assert all(abs(z.mean() - 1.0) < 0.05 for z in m.instruments.values())

    def test_iv_bad_hetero(self, rng):
        with pytest.raises(ValueError):
            simulate_iv_sample(rng, hetero="wild")

    def test_residual_and_ar(self, rng):
        assert simulate_residual_panel(rng, 6, 14, 1.0).shape == (6, 14)
        y = simulate_ar_panel(rng, 5, 20, ar=1.0, factor=(1, 3))
        assert y.shape == (5, 20) and np.isfinite(y).all()
