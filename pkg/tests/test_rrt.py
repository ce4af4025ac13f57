import collections
import math

import numpy as np
import pytest

from slopenav.octree import FREE, OCCUPIED, UNKNOWN
from slopenav.rrt import (PlanError, PlanFailure, PlannerConfig, PlanPath,
                          PlanSpace, PlanTree, SegmentBlocked, SegmentFree,
                          nearest, plan_fixed, plan_variable, segment_check,
                          shortcut, try_connect)


def free_space(nx=20, ny=20, res=1.0):
    return PlanSpace(np.full((nx, ny), FREE, np.int8), (0.0, 0.0), res)


class TestPlanSpace:
    def test_unknown_blocks(self):
        grid = np.full((4, 4), FREE, np.int8)
        grid[1, 1] = UNKNOWN
        grid[2, 2] = OCCUPIED
        space = PlanSpace(grid, (0, 0), 1.0)
        assert not space.is_free((1.5, 1.5))
        assert not space.is_free((2.5, 2.5))
        assert space.is_free((0.5, 0.5))

    def test_inflation(self):
        grid = np.full((9, 9), FREE, np.int8)
        grid[4, 4] = OCCUPIED
        space = PlanSpace(grid, (0, 0), 1.0, inflation_radius=2.0)
        assert not space.is_free((4.5, 2.5))  # 2 cells away
        assert space.is_free((4.5, 1.5))

    def test_fully_blocked_errors(self):
        with pytest.raises(PlanError):
            PlanSpace(np.full((3, 3), OCCUPIED, np.int8))

    def test_nearest_free(self):
        grid = np.full((5, 5), FREE, np.int8)
        grid[0:2, 0:2] = OCCUPIED
        space = PlanSpace(grid, (0, 0), 1.0)
        p = space.nearest_free((0.5, 0.5))
        assert space.is_free(p)
        q = space.nearest_free((3.5, 3.5))
        assert np.allclose(q, (3.5, 3.5))


class TestSegmentCheck:
    def test_free_diagonal(self):
        space = free_space(5, 5)
        assert isinstance(segment_check(space, (0.5, 0.5), (4.5, 4.5)),
                          SegmentFree)

    def test_blocked_column_backoff(self):
        # occupied column at x index 2: segment along row 2 stops in the
        # last free cell (1, 2)
        grid = np.full((5, 5), FREE, np.int8)
        grid[2, :] = OCCUPIED
        space = PlanSpace(grid, (0, 0), 1.0)
        res = segment_check(space, (0.5, 2.5), (4.5, 2.5))
        assert isinstance(res, SegmentBlocked)
        assert space.to_cell(res.last_free) == (1, 2)

    def test_degenerate_segment(self):
        space = free_space(5, 5)
        assert isinstance(segment_check(space, (2.5, 2.5), (2.5, 2.5)),
                          SegmentFree)

    def test_start_not_free_errors(self):
        grid = np.full((3, 3), FREE, np.int8)
        grid[0, 0] = OCCUPIED
        with pytest.raises(PlanError):
            segment_check(PlanSpace(grid, (0, 0), 1.0), (0.5, 0.5), (2.5, 2.5))

    def test_matches_enumeration_oracle(self):
        from test_raycast import brute_force_cells
        rng = np.random.default_rng(9)
        for _ in range(200):
            grid = np.full((12, 12), FREE, np.int8)
            blocked = rng.random((12, 12)) < 0.2
            grid[blocked] = OCCUPIED
            space = PlanSpace(grid, (0, 0), 1.0)
            a = rng.uniform(0.1, 11.9, 2)
            if not space.is_free(a):
                continue
            b = rng.uniform(0.1, 11.9, 2)
            visited = sorted(
                (c for c in brute_force_cells((a[0], a[1], 0.25),
                                              (b[0], b[1], 0.25), 0, 11)),
                key=lambda c: (c[0] - math.floor(a[0])) ** 2
                + (c[1] - math.floor(a[1])) ** 2)
            res = segment_check(space, a, b)
            all_free = all(not space.blocked[c[0], c[1]] for c in visited)
            assert isinstance(res, SegmentFree) == all_free

    def test_blocked_result_lands_in_free_cell(self):
        # the truncation point is always a free cell on the swept line
        # (the chord a -> last_free itself is re-verified by the planner)
        rng = np.random.default_rng(10)
        for _ in range(100):
            grid = np.full((15, 15), FREE, np.int8)
            grid[rng.random((15, 15)) < 0.25] = OCCUPIED
            space = PlanSpace(grid, (0, 0), 1.0)
            a = space.cell_center(space.free_cells[0])
            b = rng.uniform(0, 15, 2)
            res = segment_check(space, a, b)
            if isinstance(res, SegmentBlocked) and res.last_free is not None:
                assert space.is_free(res.last_free)


class TestNearest:
    def test_basic(self):
        tree = PlanTree(np.array([0.0, 0.0]))
        tree.add(np.array([10.0, 0.0]), 0)
        assert nearest(tree, (7, 1)).tolist() == [10, 0]

    def test_exact_node(self):
        tree = PlanTree(np.array([3.0, 4.0]))
        assert nearest(tree, (3, 4)).tolist() == [3, 4]

    def test_tie_breaks_to_earliest(self):
        tree = PlanTree(np.array([0.0, 0.0]))
        tree.add(np.array([10.0, 0.0]), 0)
        # (5, 3) is equidistant from both: earliest insertion wins
        d0 = np.hypot(5, 3)
        d1 = np.hypot(5, 3)
        assert d0 == d1
        assert nearest(tree, (5, 3)).tolist() == [0, 0]


class TestPlanVariable:
    def test_direct_corridor_zero_iterations(self):
        space = free_space(30, 5)
        path = plan_variable(space, (0.5, 2.5), (29.5, 2.5), PlannerConfig())
        assert isinstance(path, PlanPath)
        assert path.stats.iterations == 0
        assert len(path.waypoints) == 2

    def test_sealed_goal_fails(self):
        grid = np.full((20, 20), FREE, np.int8)
        grid[10:13, 10:13] = OCCUPIED
        grid[11, 11] = FREE  # free but sealed
        space = PlanSpace(grid, (0, 0), 1.0)
        res = plan_variable(space, (0.5, 0.5), (11.5, 11.5),
                            PlannerConfig(max_iterations=200))
        assert isinstance(res, PlanFailure)
        assert res.stats.iterations == 200

    def test_start_not_free_errors(self):
        grid = np.full((5, 5), FREE, np.int8)
        grid[0, 0] = OCCUPIED
        space = PlanSpace(grid, (0, 0), 1.0)
        with pytest.raises(PlanError):
            plan_variable(space, (0.5, 0.5), (4.5, 4.5), PlannerConfig())

    def test_deterministic_under_seed(self):
        grid = np.full((30, 30), FREE, np.int8)
        grid[10:20, 0:25] = OCCUPIED
        space = PlanSpace(grid, (0, 0), 1.0)
        cfg = PlannerConfig(seed=4, connect_tolerance=1.0)
        a = plan_variable(space, (2.5, 2.5), (27.5, 2.5), cfg)
        b = plan_variable(space, (2.5, 2.5), (27.5, 2.5), cfg)
        assert isinstance(a, PlanPath)
        assert np.array_equal(a.waypoints, b.waypoints)
        assert a.stats.iterations == b.stats.iterations

    def test_path_collision_free(self):
        grid = np.full((30, 30), FREE, np.int8)
        grid[10:20, 0:25] = OCCUPIED
        space = PlanSpace(grid, (0, 0), 1.0)
        for seed in range(10):
            res = plan_variable(space, (2.5, 2.5), (27.5, 2.5),
                                PlannerConfig(seed=seed, connect_tolerance=1.0))
            assert isinstance(res, PlanPath)
            w = res.waypoints
            assert np.allclose(w[0], (2.5, 2.5)) and np.allclose(w[-1], (27.5, 2.5))
            for i in range(len(w) - 1):
                assert isinstance(segment_check(space, w[i], w[i + 1]),
                                  SegmentFree)
            assert res.length >= np.linalg.norm(w[-1] - w[0]) - 1e-9


class TestPlanFixed:
    def test_free_corridor_reaches_goal(self):
        space = free_space(12, 5)
        res = plan_fixed(space, (0.5, 2.5), (11.5, 2.5), 20.0,
                         PlannerConfig(seed=0, connect_tolerance=1.0))
        assert isinstance(res, PlanPath)
        assert res.stats.iterations < 50

    def test_tiny_sigma_fails(self):
        space = free_space(12, 12)
        res = plan_fixed(space, (0.5, 0.5), (11.5, 11.5), 1e-6,
                         PlannerConfig(max_iterations=100))
        assert isinstance(res, PlanFailure)

    def test_bad_sigma(self):
        with pytest.raises(PlanError):
            plan_fixed(free_space(), (0.5, 0.5), (1.5, 1.5), 0.0,
                       PlannerConfig())


class TestTryConnect:
    def test_shared_node(self):
        a = PlanTree(np.array([1.0, 1.0]))
        b = PlanTree(np.array([1.0, 1.0]))
        path = try_connect(a, b, free_space(5, 5), 0.3)
        assert path is not None

    def test_across_wall_fails(self):
        grid = np.full((9, 9), FREE, np.int8)
        grid[4, :] = OCCUPIED
        space = PlanSpace(grid, (0, 0), 1.0)
        a = PlanTree(np.array([1.5, 4.5]))
        b = PlanTree(np.array([7.5, 4.5]))
        assert try_connect(a, b, space, 0.3) is None

    def test_within_tolerance(self):
        a = PlanTree(np.array([1.00, 1.0]))
        b = PlanTree(np.array([1.04, 1.0]))
        assert try_connect(a, b, free_space(5, 5), 0.05) is not None


class TestShortcut:
    def test_collinear_elision(self):
        space = free_space(10, 10)
        p = PlanPath(np.array([[0.5, 0.5], [4.5, 4.5], [9.5, 9.5]]),
                     stats=None)
        out = shortcut(p, space)
        assert len(out.waypoints) == 2

    def test_corner_kept(self):
        grid = np.full((10, 10), FREE, np.int8)
        grid[3:10, 3:7] = OCCUPIED
        space = PlanSpace(grid, (0, 0), 1.0)
        p = PlanPath(np.array([[1.5, 1.5], [1.5, 8.5], [9.5, 8.5]]), stats=None)
        out = shortcut(p, space)
        assert len(out.waypoints) == 3
        assert out.length <= p.length + 1e-9

    def test_two_point_identity(self):
        space = free_space(5, 5)
        p = PlanPath(np.array([[0.5, 0.5], [4.5, 4.5]]), stats=None)
        assert np.array_equal(shortcut(p, space).waypoints, p.waypoints)


def bfs_reachable(blocked: np.ndarray, start, goal) -> bool:
    """8-connected BFS between cells on the inflated grid."""
    if blocked[start] or blocked[goal]:
        return False
    nx, ny = blocked.shape
    seen = np.zeros_like(blocked)
    seen[start] = True
    q = collections.deque([start])
    while q:
        c = q.popleft()
        if c == goal:
            return True
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                n = (c[0] + dx, c[1] + dy)
                if (0 <= n[0] < nx and 0 <= n[1] < ny
                        and not blocked[n] and not seen[n]):
                    seen[n] = True
                    q.append(n)
    return False


class TestSoundness:
    def test_canonical_blocked_cell_example(self):
        # Algorithm misuse guard: the canonical 5x5 wall example
        grid = np.full((5, 5), FREE, np.int8)
        grid[2, 2] = OCCUPIED
        space = PlanSpace(grid, (0, 0), 1.0)
        res = segment_check(space, (0.5, 2.5), (4.5, 2.5))
        assert isinstance(res, SegmentBlocked)
        assert res.last_free is not None
        assert space.to_cell(res.last_free) == (1, 2)
