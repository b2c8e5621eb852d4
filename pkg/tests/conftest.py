import numpy as np
import pytest

from coopdecode.codes import ParityCheckMatrix, build_gallager_regular, build_hamming74, build_product_code


@pytest.fixture(scope="session")
def hamming():
    return build_hamming74()


@pytest.fixture(scope="session")
def product82():
    return build_product_code(8, 2)


@pytest.fixture(scope="session")
def gallager15():
    return build_gallager_regular(15, 2, 3, seed=0)


def random_h(rng, n, rows, max_weight=None):
    """Random parity-check matrix with every check touching at least two variables."""
    max_weight = max_weight or n
    out = []
    for _ in range(rows):
        w = int(rng.integers(2, max(3, min(n, max_weight) + 1)))
        out.append(sorted(rng.choice(n, size=min(w, n), replace=False).tolist()))
    return ParityCheckMatrix.from_rows(n, out)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def verdict():
    """Record one pass/fail line per acceptance criterion, then assert it."""
    def record(number, title, ok, detail="", elapsed=None):
        timing = f" [{elapsed:.1f}s]" if elapsed is not None else ""
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}{timing} {detail}".rstrip()
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
