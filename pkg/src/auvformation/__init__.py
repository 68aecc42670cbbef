"""Formation path following for underactuated 5-DOF AUVs.

Deterministic simulation of n-vehicle formations combining a
task-priority (null-space projection) guidance layer, 3D line-of-sight
path following and sliding-mode surge/pitch/yaw autopilots with
adaptive ocean-current observers, plus numerical verification of the
closed-loop error dynamics and stability conditions.
"""

__version__ = "1.0.0"

from .kernels import BACKEND as KERNEL_BACKEND  # noqa: F401
