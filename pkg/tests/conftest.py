import itertools
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from _acceptance import RESULTS  # noqa: E402
from perishable import IndependentDemand, TransformedCostParams  # noqa: E402

REPO = Path(__file__).resolve().parents[1]


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(RESULTS, key=lambda r: r[0]):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number}: {title}  {detail}")


def random_pmfs(rng, T, support=(0, 1, 2)):
    """Random pmfs on random nonempty subsets of ``support``."""
    out = []
    for _ in range(T):
        k = int(rng.integers(1, len(support) + 1))
        sup = sorted(rng.choice(support, size=k, replace=False))
        pmf = np.zeros(max(support) + 1)
        pmf[sup] = rng.dirichlet(np.ones(k))
        out.append(pmf)
    return out


SUPPORTS = [s for r in (1, 2, 3) for s in itertools.combinations((0, 1, 2), r)]


def small_suite(n_random=40, seed=0, h_values=(0.0,)):
    """Instances with K in {2,3}, T <= 4 and demand on {0,1,2}: every
    support subset with uniform weights on a cost grid, plus random
    non-stationary ones."""
    rng = np.random.default_rng(seed)
    for K in (2, 3):
        for T in (1, 2, 3, 4):
            for sup in SUPPORTS:
                pmf = np.zeros(3)
                pmf[list(sup)] = 1 / len(sup)
                for p, w, b, h in itertools.product((1.0, 5.0, 20.0), (0.0, 2.0, 10.0),
                                                     (1.0, 0.9), h_values):
                    yield K, IndependentDemand([pmf] * T), TransformedCostParams(p, h, w, b)
            for _ in range(n_random):
                par = TransformedCostParams(float(rng.integers(1, 21)),
                                            float(rng.choice(h_values)),
                                            float(rng.integers(0, 21)),
                                            float(rng.choice([1.0, 0.9, 0.5])))
                yield K, IndependentDemand(random_pmfs(rng, T)), par


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def repo():
    return REPO
