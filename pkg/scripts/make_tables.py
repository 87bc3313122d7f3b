"""Regenerate src/gravpanel/_tables.py (IPS moments by large-sample simulation)."""

from pathlib import Path

from gravpanel.unitroot import simulate_ips_moments

REPS = 200_000
SEED = 19970101
CASES = [(T, p, d) for T in (14, 20, 50, 100) for p in (0, 1, 2) for d in ("c", "ct")]

lines = [
    '"""Embedded reference moments for the IPS standardisation.',
    "",
    "Generated by scripts/make_tables.py: mean and variance of the ADF t-statistic",
    "under a Gaussian random walk, for the exact regression used by adf_t.",
    '"""',
    "",
    f'IPS_PROVENANCE = "precomputed by simulation, reps={REPS}, seed={SEED}"',
    "",
    "# (T, lags, deterministic) -> (mean, variance)",
    "IPS_MOMENTS = {",
]
for T, p, d in CASES:
    m, v = simulate_ips_moments(T, p, d, REPS, SEED)
    lines.append(f'    ({T}, {p}, "{d}"): ({m:.6f}, {v:.6f}),')
lines.append("}")
out = Path(__file__).resolve().parents[1] / "src" / "gravpanel" / "_tables.py"
out.write_text("\n".join(lines) + "\n")
print(out.read_text())
