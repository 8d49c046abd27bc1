import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import build_scene, obj  # noqa: E402


@pytest.fixture
def two_room_scene():
    """Kitchen with two regions and a bedroom behind a door.

    The kitchen cabinet hides a plate; the bedroom wardrobe hides a shirt.
    """
    return build_scene(
        rooms=[
            {
                "category": "kitchen",
                "position": (2.0, 2.0),
                "regions": [
                    [obj("cabinet", (1.0, 1.0), "on", nested=[("plate", "inside")]),
                     obj("counter", (1.0, 2.0))],
                    [obj("table", (3.0, 3.0), "en", nested=[("mug", "on_top_of")])],
                ],
            },
            {
                "category": "bedroom",
                "position": (6.0, 2.0),
                "regions": [
                    [obj("wardrobe", (6.0, 1.0), "on", nested=[("shirt", "inside")]),
                     obj("bed", (7.0, 2.0))],
                ],
            },
        ],
        doors=[(0, 1, (4.0, 2.0))],
    )


@pytest.fixture
def one_room_scene():
    return build_scene(
        rooms=[
            {
                "category": "studio",
                "position": (1.0, 1.0),
                "regions": [
                    [obj("desk", (0.5, 0.5), "en", nested=[("pen", "on_top_of")]),
                     obj("chair", (1.5, 0.5))],
                ],
            },
        ],
    )
