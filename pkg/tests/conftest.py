import hypothesis
import pytest

from flowseg import generate_scene, preset_scene

hypothesis.settings.register_profile("suite", max_examples=40, deadline=None)
hypothesis.settings.load_profile("suite")


@pytest.fixture(scope="session")
def one_way_scene():
    return generate_scene(preset_scene("one-way"))


@pytest.fixture(scope="session")
def two_way_scene():
    return generate_scene(preset_scene("two-way"))
