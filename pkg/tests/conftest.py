import pathlib
from types import SimpleNamespace

import pytest

from slopenav.pipeline import build_map_from_scenario
from slopenav.scenario import load_scenario
from slopenav.world import load_environment

FIXTURES = pathlib.Path(__file__).parent.parent / "src" / "slopenav" / "fixtures"


@pytest.fixture(scope="session")
def caffe():
    """The shipped caffe scenario with its mapping run (built once)."""
    sc = load_scenario(FIXTURES / "caffe_scenario.json")
    env = load_environment(sc.environment)
    tree, stack, tmap = build_map_from_scenario(env, sc)
    return SimpleNamespace(sc=sc, env=env, tree=tree, stack=stack, tmap=tmap)
