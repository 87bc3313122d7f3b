from pathlib import Path

import numpy as np
import pytest

from gravpanel.ingest import load_panel, repair_panel

DATA = Path(__file__).resolve().parents[1] / "src" / "gravpanel" / "data"
BUNDLED = DATA / "synthetic_cee4.csv"
TOTALS = DATA / "synthetic_cee4_totals.csv"
EXAMPLE_CFG = DATA / "example.cfg"


@pytest.fixture(scope="session")
def bundled_panels():
    return load_panel(BUNDLED)


@pytest.fixture(scope="session")
def repaired_panels(bundled_panels):
    return {r: repair_panel(p)[0] for r, p in bundled_panels.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def make_design(N, T, k, rng, names=None, effects=None, instruments=None):
    """Random balanced design; ``effects`` adds an entity intercept to y."""
    from gravpanel.panel import DesignMatrix

    n = N * T
    names = names or [f"x{j}" for j in range(k)]
    y = rng.normal(size=n)
    if effects is not None:
        y = y + np.repeat(effects, T)
    return DesignMatrix(
        y=y,
        X=rng.normal(size=(n, k)),
        columns=names,
        entity_of_row=np.repeat(np.arange(N), T),
        period_of_row=np.tile(np.arange(2000, 2000 + T), N),
        entities=tuple(f"E{i}" for i in range(N)),
        instruments=instruments or {},
    )


def lsdv_oracle(m):
    """Least squares on entity dummies (no intercept) via the normal equations."""
    D = (m.entity_of_row[:, None] == np.arange(m.n_entities)[None, :]).astype(float)
    W = np.column_stack([m.X, D])
    WtW = W.T @ W
    b = np.linalg.solve(WtW, W.T @ m.y)
    e = m.y - W @ b
    s2 = e @ e / (m.n_obs - W.shape[1])
    k = m.X.shape[1]
    return b[:k], np.sqrt(np.diag(s2 * np.linalg.inv(WtW))[:k]), b[k:]


def gravity_design(panel, relation="exports_outfdi"):
    from gravpanel.gravity import build_dataset

    return build_dataset(panel, relation).to_design()


ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
