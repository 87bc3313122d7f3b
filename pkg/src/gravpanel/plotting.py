"""Deterministic PNG figures of pipeline results (Agg backend).

Figures show estimation output only: FDI elasticities with 95% intervals per
reporter and estimator, and the descriptive share series when totals exist.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

COEF_FIGURE = "fig_fdi_coefficients.png"
SHARES_FIGURE = "fig_shares.png"
_STYLE = {"font.size": 8, "svg.hashsalt": "gravpanel", "figure.dpi": 100}
_MARKERS = {"FE": "o", "RE": "s", "2SLS": "^"}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path


def coefficient_figure(report, path: Path) -> Path:
    rels = report.config.relations
    reps = report.reporters
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(1, len(rels), figsize=(3.2 * len(rels), 0.5 * len(reps) + 1.6), sharey=True, squeeze=False)
        for ax, rel in zip(axes[0], rels):
            for j, method in enumerate(("FE", "RE", "2SLS")):
                ys = np.arange(len(reps)) + (j - 1) * 0.22
                est, lo, hi = [], [], []
                for rep in reps:
                    b = report.regressions[(rep, rel.key)]
                    res = {"FE": b.fe, "RE": b.re, "2SLS": b.iv}[method]
                    l, h = res.conf_int(rel.fdi)
                    est.append(res.coef(rel.fdi))
                    lo.append(l)
                    hi.append(h)
                est = np.array(est)
                ax.errorbar(
                    est, ys, xerr=[est - np.array(lo), np.array(hi) - est], fmt=_MARKERS[method], ms=4, capsize=2, label=method
                )
            ax.axvline(0.0, color="0.5", lw=0.8, ls="--")
            ax.set_title(f"{rel.trade} / {rel.fdi}")
            ax.set_xlabel("FDI elasticity (95% CI)")
        axes[0][0].set_yticks(np.arange(len(reps)))
        axes[0][0].set_yticklabels(reps)
        axes[0][0].invert_yaxis()
        axes[0][-1].legend(loc="lower right", frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def shares_figure(report, path: Path) -> Path:
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(8, 3))
        for rep in sorted(report.shares):
            b = report.shares[rep]
            axes[0].plot(b.years, b.shares["exports"], marker="o", ms=3, label=rep)
            axes[1].plot(b.years, b.shares["outfdi"], marker="o", ms=3, label=rep)
        axes[0].set_title("bilateral exports / total exports (%)")
        axes[1].set_title("bilateral outward FDI / total (%)")
        axes[1].legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def write_figures(report, out_dir: Path) -> list[Path]:
    out = [coefficient_figure(report, Path(out_dir) / COEF_FIGURE)]
    if report.shares:
        out.append(shares_figure(report, Path(out_dir) / SHARES_FIGURE))
    return out
