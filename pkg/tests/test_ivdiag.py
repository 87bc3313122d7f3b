from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gravpanel.dgp import rng_for, simulate_iv_sample
from gravpanel.errors import EstimationError, SingularRegressionError, WeakInstrumentError
from gravpanel.estimators import IvSpec, prepare_iv, two_sls_from
from gravpanel.ivdiag import (
    durbin_wu_hausman,
    hansen_j,
    hansen_j_statistic,
    pagan_hall,
    run_diagnostics,
    sargan,
    wu_hausman,
)

from conftest import gravity_design


def iv_data(seed, n_instruments=2, **kw):
    m = simulate_iv_sample(rng_for(seed, 0), n=200, n_instruments=n_instruments, **kw)
    return prepare_iv(m, IvSpec(("x",), lags=(), excluded=tuple(m.instruments)))


def ols_fit(X, y):
    b = np.linalg.lstsq(X, y, rcond=None)[0]
    return b, y - X @ b


def pagan_hall_oracle(d):
    # Row-by-row sums with X-hat = P_Z X.
    n = d.n
    Xh = d.Z @ np.linalg.lstsq(d.Z, d.X, rcond=None)[0]
    b = np.linalg.solve(Xh.T @ Xh, Xh.T @ d.y)
    u = d.y - d.X @ b
    Psi = d.Z[:, 1:]
    Pbar = Psi.mean(axis=0)
    s2, m3, m4 = np.mean(u**2), np.mean(u**3), np.mean(u**4)
    q = Psi.shape[1]
    D = np.zeros(q)
    S_pp = np.zeros((q, q))
    S_px = np.zeros((q, Xh.shape[1]))
    Gam = np.zeros((q, d.X.shape[1]))
    for i in range(n):
        p = Psi[i] - Pbar
        D += p * u[i] ** 2
        S_pp += np.outer(p, p)
        S_px += np.outer(p, Xh[i])
        Gam += np.outer(p, d.X[i]) * u[i]
    D, S_pp, S_px, Gam = D / n, S_pp / n, S_px / n, Gam / n
    Qinv = np.linalg.inv(Xh.T @ Xh / n)
    B1 = (m4 - s2**2) * S_pp
    B2 = -2 * m3 * S_px @ Qinv @ Gam.T
    B4 = 4 * s2 * Gam @ Qinv @ Gam.T
    B = B1 + B2 + B2.T + B4
    return n * D @ np.linalg.solve(B, D)


class TestEndogeneity:
    def test_wu_hausman_is_control_function_t_squared(self):
        d = iv_data(3, endog_corr=0.5)
        v = d.columns(("x",)) - d.Z @ np.linalg.lstsq(d.Z, d.columns(("x",)), rcond=None)[0]
        A = np.column_stack([d.X, v])
        b, e = ols_fit(A, d.y)
        s2 = e @ e / (d.n - A.shape[1])
        t = b[-1] / np.sqrt(s2 * np.linalg.inv(A.T @ A)[-1, -1])
        wh = wu_hausman(d)
        assert wh.statistic == pytest.approx(t**2, rel=1e-9)
        assert wh.df == (1, d.n - 3 - 1)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.0, 0.9))
    def test_wu_hausman_and_dwh_concordant(self, seed, rho):
        d = iv_data(seed, endog_corr=rho)
        F = wu_hausman(d)
        D = durbin_wu_hausman(d)
        ke, df2 = F.df
        a = F.statistic * ke / df2
        assert D.statistic == pytest.approx(d.n * a / (1 + a), rel=1e-9, abs=1e-12)

    def test_detects_endogeneity(self):
        assert wu_hausman(iv_data(5, endog_corr=0.8)).p_value < 1e-6

    def test_no_endogenous(self):
        d = prepare_iv(simulate_iv_sample(rng_for(1, 0)), IvSpec((), lags=(), excluded=("z1",)))
        with pytest.raises(EstimationError, match="at least one"):
            wu_hausman(d)

    def test_collinear_instrument_named(self):

        m = simulate_iv_sample(rng_for(2, 0), n=50, n_instruments=1)
        m = replace(m, instruments={"z1": m.col("w") * 2.0})
        d = prepare_iv(m, IvSpec(("x",), lags=(), excluded=("z1",)))
        with pytest.raises(SingularRegressionError, match="z1"):
            durbin_wu_hausman(d)

    def test_exact_first_stage_is_weak_instrument_error(self):

        m = simulate_iv_sample(rng_for(2, 0), n=50, n_instruments=1)
        X = m.X.copy()
        X[:, 0] = 3.0 * m.instruments["z1"] + m.col("w")
        d = prepare_iv(replace(m, X=X), IvSpec(("x",), lags=(), excluded=("z1",)))
        with pytest.raises(WeakInstrumentError):
            wu_hausman(d)


class TestPaganHall:
    def test_matches_oracle(self):
        d = iv_data(11, hetero="instrument")
        assert pagan_hall(d).statistic == pytest.approx(pagan_hall_oracle(d), rel=1e-8)

    def test_gravity_oracle(self, repaired_panels):
        d = prepare_iv(gravity_design(repaired_panels["POL"]), IvSpec(("outfdi",)))
        ph = pagan_hall(d)
        assert ph.statistic == pytest.approx(pagan_hall_oracle(d), rel=1e-6)
        assert ph.df == d.Z.shape[1] - 1

    def test_fitted_indicators(self):
        ph = pagan_hall(iv_data(4), indicators="fitted")
        assert ph.df == 2 and ph.extra["indicators"] == ("yhat", "yhat^2")

    def test_square_indicators(self):
        ph = pagan_hall(iv_data(4), indicators="squares")
        assert ph.df == 6 and ph.extra["indicators"] == ("w", "z1", "z2", "w^2", "z1^2", "z2^2")

    def test_squares_skip_dummies(self, repaired_panels):
        d = prepare_iv(gravity_design(repaired_panels["POL"]), IvSpec(("outfdi",)))
        ph = pagan_hall(d, indicators="squares")
        names = ph.extra["indicators"]
        assert "dummy" in names and "dummy^2" not in names
        assert ph.df == 2 * (d.Z.shape[1] - 1) - 1

    def test_unknown_indicators(self):
        with pytest.raises(ValueError):
            pagan_hall(iv_data(4), indicators="levels")


class TestScaleInvariance:
    @pytest.mark.parametrize("fn", [wu_hausman, durbin_wu_hausman, sargan, hansen_j])
    @pytest.mark.parametrize("c", [1e-3, 7.5, 1e4])
    def test_rescaled_y(self, fn, c):
        d = iv_data(12, n_instruments=3, endog_corr=0.3)
        d2 = replace(d, y=c * d.y)
        assert fn(d2).statistic == pytest.approx(fn(d).statistic, rel=1e-8)


class TestOverid:
    @pytest.mark.parametrize("fn", [sargan, hansen_j])
    def test_exactly_identified_zero(self, fn):
        d = iv_data(8, n_instruments=1, endog_corr=0.3)
        r = fn(d)
        assert r.statistic == 0.0 and r.df == 0 and r.p_value is None
        assert abs(r.extra["raw_statistic"]) <= 1e-10

    def test_sargan_is_n_r2(self):
        d = iv_data(9, n_instruments=3)
        u = d.y - d.X @ two_sls_from(d).params
        _, e = ols_fit(d.Z, u)
        r2 = 1 - (e @ e) / (u @ u)
        s = sargan(d)
        assert s.statistic == pytest.approx(d.n * r2, rel=1e-9)
        assert s.df == 2

    def test_hansen_oracle(self):
        d = iv_data(10, n_instruments=3, hetero="instrument")
        u = d.y - d.X @ two_sls_from(d).params
        S = sum(np.outer(z, z) * e**2 for z, e in zip(d.Z, u)) / d.n
        W = np.linalg.inv(S)
        b = np.linalg.solve(d.X.T @ d.Z @ W @ d.Z.T @ d.X, d.X.T @ d.Z @ W @ d.Z.T @ d.y)
        g = d.Z.T @ (d.y - d.X @ b) / d.n
        J, beta = hansen_j_statistic(d)
        np.testing.assert_allclose(beta, b, rtol=1e-9)
        assert J == pytest.approx(d.n * g @ W @ g, rel=1e-8)

    def test_invalid_instrument_detected(self):
        assert hansen_j(iv_data(12, n_instruments=2, invalid_corr=0.8)).p_value < 0.01


class TestBundle:
    def test_switch(self):
        homo = run_diagnostics(iv_data(13))
        assert homo.robust == homo.pagan_hall.rejects(0.05)
        assert homo.overid_kind == ("Hansen J" if homo.robust else "Sargan")

    def test_forced(self):
        b = run_diagnostics(iv_data(13), robust=True)
        assert b.robust and b.overid_kind == "Hansen J"
        assert "forced on" in b.notes[-1]

    def test_gravity_bundle(self, repaired_panels):
        b = run_diagnostics(gravity_design(repaired_panels["CZE"]), IvSpec(("outfdi",)))
        assert b.overid.df == 0 and b.overid.statistic == 0.0
