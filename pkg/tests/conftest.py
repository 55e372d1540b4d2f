from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from knnmotif.geometry import PointSet, read_points_csv

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

DATA = Path(__file__).parent / "data"

# v1..v10 of the ten-point example, stored 0-based
TEN_POINTS = [
    (1.7358, 6.0750), (4.2737, 4.0863), (1.3759, 1.4158), (6.0000, 2.0000), (3.9707, 5.3742),
    (2.9479, 3.3855), (6.2813, 5.8856), (3.3646, 1.5105), (6.2624, 3.4423), (2.0767, 4.2757),
]


@pytest.fixture
def ten_points() -> PointSet:
    return PointSet(np.array(TEN_POINTS))


@pytest.fixture
def ten_points_csv() -> Path:
    return DATA / "ten_points.csv"


@pytest.fixture
def shared_head_json() -> Path:
    return DATA / "shared_head.json"


def random_points(seed: int, n: int, d: int) -> PointSet:
    rng = np.random.default_rng(seed)
    return PointSet(rng.random((n, d)))



ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(id, ok, detail)`` returns ``ok``."""

    def record(cid: str, ok: bool, detail: str) -> bool:
        line = f"{cid} {'PASS' if ok else 'FAIL'}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
