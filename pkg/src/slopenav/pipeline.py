"""End-to-end orchestration: sweep an environment with the simulated
sensors, build the 3D occupancy map, project the layer stack, and fuse the
traversable 2D map. Shared by the command-line interface and the tests.
"""

from __future__ import annotations

import math

from .octree import OccupancyOctree
from .scenario import LayerParams, OctreeParams, Scenario, SweepParams
from .traverse import GradientParams, LayerStack, TraversableMap, build_traversable
from .world import EnvironmentSpec, Pose, SensorIntrinsics


def build_octree(env: EnvironmentSpec, sweep: SweepParams,
                 params: OctreeParams = OctreeParams(),
                 layers: LayerParams = LayerParams(),
                 sensor: SensorIntrinsics = SensorIntrinsics()) -> OccupancyOctree:
    """Drive the sweep routes and integrate every scan into one octree.

    The vertical extent starts at the layer-stack base so slab boundaries
    align with voxel boundaries.
    """
    z_lo = min(layers.z_base, 0.0)
    tree = OccupancyOctree(
        (env.bounds_min[0], env.bounds_min[1], z_lo),
        (env.bounds_max[0], env.bounds_max[1], env.bounds_max[2]),
        resolution=params.resolution, p_hit=params.p_hit,
        p_miss=params.p_miss, p_occ=params.p_occ)
    for route in sweep.routes:
        for pose in env.sweep_trajectory(route, sweep.spacing):
            for dyaw in sweep.scan_yaws:
                view = Pose(pose.x, pose.y, pose.z, pose.yaw + dyaw)
                cloud = env.simulate_depth_scan(view, sensor)
                if len(cloud):
                    origin = (pose.x, pose.y,
                              pose.z + sensor.cam_height_above_base)
                    tree.integrate_scan(origin, cloud)
    return tree


def project_stack(tree: OccupancyOctree, layers: LayerParams) -> LayerStack:
    grids = [tree.project_layer(layers.z_base + k * layers.spacing, layers.spacing)
             for k in range(layers.count)]
    return LayerStack(grids, layers.spacing, layers.z_base)


def build_map(env: EnvironmentSpec, sweep: SweepParams, theta: float,
              octree_params: OctreeParams = OctreeParams(),
              layer_params: LayerParams = LayerParams(),
              sensor: SensorIntrinsics = SensorIntrinsics()):
    """Full mapping stage. Returns (octree, layer stack, traversable map)."""
    tree = build_octree(env, sweep, octree_params, layer_params, sensor)
    stack = project_stack(tree, layer_params)
    gparams = GradientParams(theta=theta, resolution=octree_params.resolution)
    tmap = build_traversable(stack, gparams)
    return tree, stack, tmap


def build_map_from_scenario(env: EnvironmentSpec, sc: Scenario,
                            sensor: SensorIntrinsics = SensorIntrinsics()):
    return build_map(env, sc.sweep, sc.theta, sc.octree, sc.layers, sensor)
