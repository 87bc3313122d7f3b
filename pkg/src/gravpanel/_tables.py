"""Embedded reference moments for the IPS standardisation.

Generated by scripts/make_tables.py: mean and variance of the ADF t-statistic
under a Gaussian random walk, for the exact regression used by adf_t.
"""

IPS_PROVENANCE = "precomputed by simulation, reps=200000, seed=19970101"

# (T, lags, deterministic) -> (mean, variance)
IPS_MOMENTS = {
    (14, 0, "c"): (-1.510100, 0.957875),
    (14, 0, "ct"): (-2.165110, 0.928373),
    (14, 1, "c"): (-1.492884, 1.108551),
    (14, 1, "ct"): (-2.163259, 1.171306),
    (14, 2, "c"): (-1.342254, 1.296632),
    (14, 2, "ct"): (-1.932507, 1.409249),
    (20, 0, "c"): (-1.518127, 0.868062),
    (20, 0, "ct"): (-2.169753, 0.782475),
    (20, 1, "c"): (-1.506328, 0.940953),
    (20, 1, "ct"): (-2.171825, 0.879773),
    (20, 2, "c"): (-1.404364, 1.028488),
    (20, 2, "ct"): (-2.026316, 0.963254),
    (50, 0, "c"): (-1.530264, 0.759820),
    (50, 0, "ct"): (-2.175515, 0.637053),
    (50, 1, "c"): (-1.522953, 0.784215),
    (50, 1, "ct"): (-2.175389, 0.656528),
    (50, 2, "c"): (-1.483428, 0.807909),
    (50, 2, "ct"): (-2.131316, 0.670277),
    (100, 0, "c"): (-1.531487, 0.732156),
    (100, 0, "ct"): (-2.180047, 0.599260),
    (100, 1, "c"): (-1.526585, 0.743096),
    (100, 1, "ct"): (-2.179362, 0.605717),
    (100, 2, "c"): (-1.509693, 0.757253),
    (100, 2, "ct"): (-2.157452, 0.614752),
}
