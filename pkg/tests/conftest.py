import pytest

from promptseg.backends.mock import Scene, SceneShape
from promptseg.geometry import BBox
from promptseg.prompts import ClassSpec, PromptSet

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def building_lake():
    return PromptSet(
        (
            ClassSpec(1, "building", ("building", "Roof", "The roof of a building", "House")),
            ClassSpec(2, "lake", ("lake", "pond")),
        ),
        unrelated=("ground", "grass", "car"),
    )


@pytest.fixture
def small_scene():
    """128 x 96 scene: one building, one lake, one car mistaken for a building."""
    return Scene(
        128,
        96,
        (
            SceneShape(BBox(10, 10, 40, 30), "building", 0.9, class_id=1, color=(200.0, 50.0, 50.0)),
            SceneShape(BBox(60, 20, 100, 70), "lake", 0.8, class_id=2, color=(30.0, 60.0, 210.0)),
            SceneShape(BBox(20, 60, 44, 84), "car", 0.7, detect_as=1, color=(220.0, 220.0, 40.0)),
        ),
    )
