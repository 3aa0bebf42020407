import sys

import numpy as np
import pytest

from likertlvm import CutPointSet, ModelParams


def pytest_terminal_summary(terminalreporter):
    # Repeat the acceptance verdicts after the run; per-test prints are
    # swallowed by capture on passing tests.
    mod = next(
        (
            m
            for name, m in sys.modules.items()
            if name.rsplit(".", 1)[-1] == "test_acceptance"
        ),
        None,
    )
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for label, (ok, detail) in results.items():
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{label}: {verdict} ({detail})")


@pytest.fixture(scope="session")
def bench_params() -> ModelParams:
    """Five-item benchmark loadings used throughout the suite."""
    sigma = np.sqrt([0.8, 0.7, 0.6, 0.5, 0.4])
    tau = np.array(
        [np.sqrt(0.1), -np.sqrt(0.15), -np.sqrt(0.2), np.sqrt(0.25), np.sqrt(0.3)]
    )
    return ModelParams(sigma, tau)


@pytest.fixture(scope="session")
def bench_cuts() -> CutPointSet:
    wide = [-1.2, -0.5, 0.4, 0.8]
    narrow = [-0.85, -0.25, 0.25, 0.85]
    return CutPointSet(np.array([wide, narrow, narrow, narrow, wide]))
