"""Navigation stack for uneven indoor terrain.

Pipeline: simulated depth/laser sensing -> 3D occupancy mapping ->
multi-layer projection -> traversable 2D map -> variable step size
bidirectional RRT global planning -> elastic-band local planning ->
closed-loop navigation with dynamic obstacles.
"""

__version__ = "0.1.0"

from .world import EnvironmentSpec, Pose, SensorIntrinsics, load_environment
from .octree import OccupancyOctree, LayerGrid, FREE, OCCUPIED, UNKNOWN
from .traverse import (GradientParams, LayerStack, TraversableMap,
                       build_traversable, layer_gradient, classify_gradient)
from .rrt import PlannerConfig, PlanSpace, PlanPath, PlanFailure, plan_variable, plan_fixed
from .band import Band, Bubble, LocalCostmap, build_band, optimize_band
from .navsim import (NavParams, RobotState, RunMetrics, Task, DynamicObstacle,
                     follow_band, run_task)
