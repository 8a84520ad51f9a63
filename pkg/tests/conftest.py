from pathlib import Path

import numpy as np
import pytest

from redunet.data import Dataset, load_csv, zscore_normalize

DATA = Path(__file__).resolve().parents[1] / "data"


def random_dataset(rng, p, n, c=3):
    X = rng.standard_normal((p, n))
    y = np.arange(n) % c
    rng.shuffle(y)
    return Dataset(X, np.eye(c)[:, y], [f"f{j}" for j in range(p)])


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def iris():
    return load_csv(DATA / "iris.csv")


@pytest.fixture(scope="session")
def iris_z(iris):
    return zscore_normalize(iris)[0]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion."""

    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
