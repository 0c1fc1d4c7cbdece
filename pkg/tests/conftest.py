import sys
from pathlib import Path

import pytest

from trigcond.dataset import Dataset, ObjectInstance, SceneRecord

sys.path.insert(0, str(Path(__file__).parent))


def make_dataset(scenes):
    """Dataset from ``{scene_id: [attribute dict, ...]}``."""
    return Dataset(tuple(
        SceneRecord(sid, [ObjectInstance(sid, dict(a)) for a in rows])
        for sid, rows in scenes.items()
    ))


@pytest.fixture
def tiny():
    return make_dataset({
        f"s{i}": [{"A": "a0" if (i + j) % 3 else "a1", "B": "b1" if j % 2 else "b0"} for j in range(4)]
        for i in range(10)
    })


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
