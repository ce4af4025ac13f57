import json
import math

import pytest

from slopenav.scenario import ScenarioError, load_scenario, parse_scenario
from conftest import FIXTURES


def minimal_doc():
    return {
        "environment": "caffe.json",
        "theta_deg": 20,
        "sweep": {"routes": [[[1, 1], [2, 1]]]},
        "tasks": [{"id": "a", "start": [1, 1, 0], "goal": [2, 1]}],
    }


def parse(doc):
    return parse_scenario(doc, FIXTURES)


class TestParseScenario:
    def test_shipped_fixture_roundtrip(self):
        sc = load_scenario(FIXTURES / "caffe_scenario.json")
        assert sc.theta == pytest.approx(math.radians(20.0))
        assert sc.layers.count == 4
        assert sc.octree.resolution == 0.05
        assert {t.task_id for t in sc.tasks} == {"task2", "task4", "task5"}
        assert "task5" in sc.obstacles

    def test_minimal_defaults(self):
        sc = parse(minimal_doc())
        assert sc.seed == 0
        assert sc.octree.p_hit == 0.7
        assert sc.nav.costmap_width == 3.0
        assert sc.planner.max_iterations == 5000

    def test_negative_theta_names_field(self):
        doc = minimal_doc()
        doc["theta_deg"] = -5
        with pytest.raises(ScenarioError, match="theta"):
            parse(doc)

    def test_duplicate_task_ids(self):
        doc = minimal_doc()
        doc["tasks"].append({"id": "a", "start": [1, 1, 0], "goal": [2, 1]})
        with pytest.raises(ScenarioError, match="duplicate"):
            parse(doc)

    def test_unknown_key_rejected_with_path(self):
        doc = minimal_doc()
        doc["typo_key"] = 1
        with pytest.raises(ScenarioError, match="typo_key"):
            parse(doc)

    def test_unknown_nested_key_rejected(self):
        doc = minimal_doc()
        doc["octree"] = {"resolution": 0.05, "bogus": 1}
        with pytest.raises(ScenarioError, match=r"octree.*bogus"):
            parse(doc)

    def test_missing_required_key(self):
        doc = minimal_doc()
        del doc["tasks"]
        with pytest.raises(ScenarioError, match="tasks"):
            parse(doc)

    def test_missing_environment_file(self):
        doc = minimal_doc()
        doc["environment"] = "nope.json"
        with pytest.raises(ScenarioError, match="not found"):
            parse(doc)

    def test_obstacle_unknown_task(self):
        doc = minimal_doc()
        doc["obstacles"] = [{"task": "zz", "center": [1, 1], "radius": 0.3}]
        with pytest.raises(ScenarioError, match="zz"):
            parse(doc)

    def test_bad_point_shape_names_path(self):
        doc = minimal_doc()
        doc["tasks"][0]["goal"] = [1, 2, 3]
        with pytest.raises(ScenarioError, match=r"tasks\[0\].goal"):
            parse(doc)

    def test_p_hit_range(self):
        doc = minimal_doc()
        doc["octree"] = {"p_hit": 0.4}
        with pytest.raises(ScenarioError, match="p_hit"):
            parse(doc)

    def test_yaw_in_degrees(self):
        doc = minimal_doc()
        doc["tasks"][0]["start"] = [1, 1, 90]
        sc = parse(doc)
        assert sc.tasks[0].start[2] == pytest.approx(math.pi / 2)
