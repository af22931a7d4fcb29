import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bvatoms.grid import CellSet, GridFunction

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion number -> (passed, detail); filled by the acceptance module
ACCEPTANCE_RESULTS: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def two_by_two():
    # u(0,0)=0, u(1,0)=1, u(0,1)=0, u(1,1)=2 with u indexed as values[x, y]
    return GridFunction.from_array(np.array([[0.0, 0.0], [1.0, 2.0]]))


@pytest.fixture
def one_cell():
    return CellSet.from_array(np.ones((1, 1), dtype=bool))


def brute_faces(values: np.ndarray, h: float = 1.0) -> dict:
    """Every face of the zero-extended grid as ``(axis, lower cell) -> weight``."""
    d = values.ndim
    out = {}
    shape = values.shape

    def val(c):
        return values[c] if all(0 <= c[k] < shape[k] for k in range(d)) else 0.0

    for l in range(d):
        ranges = [range(-1, n) if k == l else range(n) for k, n in enumerate(shape)]
        for c in np.ndindex(*[len(r) for r in ranges]):
            cell = tuple(r[i] for r, i in zip(ranges, c))
            up = list(cell)
            up[l] += 1
            w = (val(tuple(up)) - val(cell)) * h ** (d - 1)
            if w != 0:
                out[(l, cell)] = w
    return out


def measure_dict(m) -> dict:
    out = {}
    for l in range(m.spec.d):
        for c, w in zip(m.cells[l], m.weights[l]):
            out[(l, tuple(int(v) for v in c))] = float(w)
    return out
