"""Task-priority guidance: collision avoidance, formation keeping and
line-of-sight path following composed through null-space projections.

Each task produces desired velocities for the stacked vehicle positions
p = [p_1; ...; p_n].  Lower-priority velocities are projected into the
null space of the higher-priority task Jacobians:

    with active collision avoidance:
        v = v_1 + (I - J1+ J1) (v_2 + (I - J2+ J2) v_3)
    otherwise:
        v = v_2 + (I - J2+ J2) v_3

The combined velocity is decomposed per vehicle into surge/pitch/yaw
references with angle-of-attack and sideslip compensation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np

from .paths import PathPoint, direction_factors

PINV_RCOND = 1e-8


class GuidanceError(ValueError):
    pass


@dataclass(frozen=True)
class FormationSpec:
    """Zero-mean offset vectors defining the formation shape."""

    offsets: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.offsets, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < 1:
            raise GuidanceError("offsets must be an (n, 3) array with n >= 1")
        if np.abs(arr.sum(axis=0)).max() > 1e-12:
            raise GuidanceError("formation offsets must sum to zero")
        object.__setattr__(self, "offsets", arr)

    @property
    def n(self) -> int:
        return self.offsets.shape[0]


@dataclass(frozen=True)
class TaskOutput:
    """Task value, desired value/rate and Jacobian over stacked positions."""

    sigma: np.ndarray
    sigma_d: np.ndarray
    sigma_d_dot: np.ndarray
    jacobian: np.ndarray
    active: bool

    def __post_init__(self):
        if self.jacobian.shape[0] != self.sigma.shape[0]:
            raise GuidanceError("jacobian row count must match task dimension")

    @property
    def error(self) -> np.ndarray:
        return self.sigma - self.sigma_d


@dataclass
class GuidanceCommand:
    """Per-vehicle surge/pitch/yaw reference."""

    u_d: float
    theta_d: float
    psi_d: float

    def __post_init__(self):
        if not abs(self.theta_d) < math.pi / 2:
            raise GuidanceError("pitch reference must satisfy |theta_d| < pi/2")
        if self.u_d < 0.0:
            raise GuidanceError("surge reference must be nonnegative")


def colav_pairs(positions: np.ndarray, d_colav: float):
    """Vehicle index pairs closer than the activation distance."""
    out = []
    for i, j in combinations(range(positions.shape[0]), 2):
        if np.linalg.norm(positions[i] - positions[j]) < d_colav:
            out.append((i, j))
    return out


def colav_task(
    positions: np.ndarray,
    d_colav: float,
    pairs=None,
    one_sided: bool = False,
) -> TaskOutput:
    """Collision avoidance task over the pairwise distances below d_colav.

    ``pairs`` overrides the active set (used for hysteresis).  With
    ``one_sided`` the error is clamped so pairs already beyond d_colav
    contribute no attracting velocity while they remain in the set.
    """
    if d_colav <= 0:
        raise GuidanceError("d_colav must be positive")
    positions = np.asarray(positions, dtype=float)
    n = positions.shape[0]
    if pairs is None:
        pairs = colav_pairs(positions, d_colav)
    m = len(pairs)
    sigma = np.zeros(m)
    J = np.zeros((m, 3 * n))
    for k, (i, j) in enumerate(pairs):
        diff = positions[i] - positions[j]
        dist = float(np.linalg.norm(diff))
        if dist < 1e-9:
            raise GuidanceError(f"vehicles {i} and {j} are coincident")
        sigma[k] = dist
        grad = diff / dist
        J[k, 3 * i : 3 * i + 3] = grad
        J[k, 3 * j : 3 * j + 3] = -grad
    sigma_d = np.full(m, d_colav)
    if one_sided:
        sigma = np.minimum(sigma, sigma_d)
    return TaskOutput(
        sigma=sigma,
        sigma_d=sigma_d,
        sigma_d_dot=np.zeros(m),
        jacobian=J,
        active=m > 0,
    )


@lru_cache(maxsize=None)
def _formation_jacobian_cached(n: int):
    J = np.zeros((3 * (n - 1), 3 * n))
    for i in range(n - 1):
        for j in range(n):
            coef = (1.0 - 1.0 / n) if i == j else (-1.0 / n)
            J[3 * i : 3 * i + 3, 3 * j : 3 * j + 3] = coef * np.eye(3)
    J.setflags(write=False)
    pinv = np.linalg.pinv(J, rcond=PINV_RCOND) if n > 1 else np.zeros((3 * n, 0))
    proj = np.eye(3 * n) - pinv @ J if n > 1 else np.eye(3 * n)
    pinv.setflags(write=False)
    proj.setflags(write=False)
    return J, pinv, proj


def formation_jacobian(n: int) -> np.ndarray:
    """Constant Jacobian of the barycenter-relative positions (first n-1)."""
    return _formation_jacobian_cached(n)[0]


def formation_task(
    positions: np.ndarray,
    point: PathPoint,
    spec: FormationSpec,
    xi_dot: float = 0.0,
) -> TaskOutput:
    """Formation keeping: barycenter-relative positions track the
    path-frame-rotated offsets.  The desired rate follows the rotating
    frame analytically."""
    positions = np.asarray(positions, dtype=float)
    n = positions.shape[0]
    if n != spec.n:
        raise GuidanceError("position count does not match the formation spec")
    if n < 2:
        return TaskOutput(
            sigma=np.zeros(0),
            sigma_d=np.zeros(0),
            sigma_d_dot=np.zeros(0),
            jacobian=np.zeros((0, 3 * n)),
            active=False,
        )
    p_b = positions.mean(axis=0)
    R = point.rotation()
    omega = point.angular_velocity(xi_dot)
    sigma = (positions[:-1] - p_b).reshape(-1)
    sigma_d = (spec.offsets[:-1] @ R.T).reshape(-1)
    sigma_d_dot = (np.cross(omega, spec.offsets[:-1]) @ R.T).reshape(-1)
    return TaskOutput(
        sigma=sigma,
        sigma_d=sigma_d,
        sigma_d_dot=sigma_d_dot,
        jacobian=formation_jacobian(n),
        active=True,
    )


def clik_velocity(task: TaskOutput, lam) -> np.ndarray:
    """Closed-loop inverse kinematics: v = J+ (sigma_d_dot - Lambda error).

    ``lam`` is a positive scalar or positive definite gain matrix.  The
    pseudoinverse truncates singular values below 1e-8 of the largest.
    """
    m = task.sigma.shape[0]
    if m == 0:
        return np.zeros(task.jacobian.shape[1])
    lam = np.asarray(lam, dtype=float)
    if lam.ndim == 0:
        if lam <= 0:
            raise GuidanceError("task gain must be positive")
        drive = task.sigma_d_dot - float(lam) * task.error
    else:
        if np.linalg.eigvalsh((lam + lam.T) / 2).min() <= 0:
            raise GuidanceError("task gain matrix must be positive definite")
        drive = task.sigma_d_dot - lam @ task.error
    return np.linalg.pinv(task.jacobian, rcond=PINV_RCOND) @ drive


def los_velocity(p_b_p: np.ndarray, point: PathPoint, u_los: float, delta0: float):
    """Line-of-sight velocity for the barycenter.

    Returns (v_los, gamma_los, chi_los).  The lookahead distance grows
    with the error: Delta = sqrt(delta0^2 + |p_b_p|^2).
    """
    if delta0 <= 0 or u_los <= 0:
        raise GuidanceError("delta0 and u_los must be positive")
    x, y, z = (float(c) for c in p_b_p)
    delta = math.sqrt(delta0 * delta0 + x * x + y * y + z * z)
    gamma = point.theta_p + math.atan(z / delta)
    chi = point.psi_p - math.atan(y / delta)
    cg, sg = math.cos(gamma), math.sin(gamma)
    v = u_los * np.array([math.cos(chi) * cg, cg * math.sin(chi), -sg])
    return v, gamma, chi


def null_space_projector(J: np.ndarray) -> np.ndarray:
    """I - J+ J (orthogonal projector onto the Jacobian null space)."""
    n = J.shape[1]
    if J.shape[0] == 0:
        return np.eye(n)
    return np.eye(n) - np.linalg.pinv(J, rcond=PINV_RCOND) @ J


def nsb_combine(v_d1, v_d2, v_d3, J1, J2, colav_active: bool) -> np.ndarray:
    """Hierarchic composition of the three task velocities."""
    inner = v_d2 + null_space_projector(J2) @ v_d3
    if not colav_active:
        return inner
    return v_d1 + null_space_projector(J1) @ inner


@dataclass
class DecomposeOptions:
    u_d_floor: float = 0.05  # fraction of the commanded speed
    theta_d_max: float = math.radians(80.0)


def decompose_reference(
    v_nsb_i: np.ndarray,
    v_i: float,
    w_i: float,
    gamma_i: float,
    chi_i: float,
    options: DecomposeOptions | None = None,
    previous: GuidanceCommand | None = None,
) -> GuidanceCommand:
    """Per-vehicle surge/pitch/yaw reference from a velocity command.

    The surge reference blends the commanded speed with the alignment
    between the commanded and actual course/flight-path angles; the
    pitch/yaw references compensate the angle of attack (heave) and
    sideslip (sway).  A zero-speed command holds the previous reference.
    """
    opts = options or DecomposeOptions()
    vx, vy, vz = (float(c) for c in v_nsb_i)
    u_nsb = math.sqrt(vx * vx + vy * vy + vz * vz)
    if u_nsb < 1e-12:
        if previous is not None:
            return GuidanceCommand(previous.u_d, previous.theta_d, previous.psi_d)
        return GuidanceCommand(0.0, 0.0, 0.0)
    gamma_nsb = -math.asin(max(-1.0, min(1.0, vz / u_nsb)))
    chi_nsb = math.atan2(vy, vx)

    blend = (1.0 + math.cos(gamma_nsb - gamma_i) * math.cos(chi_nsb - chi_i)) / 2.0
    u_d = u_nsb * max(blend, opts.u_d_floor)

    alpha_d = math.atan2(w_i, u_d)
    theta_d = gamma_nsb + alpha_d
    theta_d = max(-opts.theta_d_max, min(opts.theta_d_max, theta_d))

    u_total = math.sqrt(u_d * u_d + v_i * v_i + w_i * w_i)
    beta_d = math.asin(max(-1.0, min(1.0, v_i / u_total)))
    psi_d = chi_nsb - beta_d
    return GuidanceCommand(u_d=u_d, theta_d=theta_d, psi_d=psi_d)


@dataclass
class NsbConfig:
    lambda1: float | np.ndarray = 1.0
    lambda2: float | np.ndarray = 0.05
    d_colav: float = 10.0
    d_min: float = 5.0
    hysteresis: float = 0.5


@dataclass
class GuidanceState:
    """Discrete guidance memory: hysteresis set and previous commands."""

    active_pairs: set = field(default_factory=set)
    previous: dict = field(default_factory=dict)

    def update_pairs(self, positions: np.ndarray, d_colav: float, hysteresis: float):
        """Refresh the collision-avoidance active set with hysteresis:
        a pair joins below d_colav and leaves above d_colav + hysteresis."""
        positions = np.asarray(positions, dtype=float)
        current = set()
        for i, j in combinations(range(positions.shape[0]), 2):
            d = float(np.linalg.norm(positions[i] - positions[j]))
            if d < d_colav:
                current.add((i, j))
            elif (i, j) in self.active_pairs and d < d_colav + hysteresis:
                current.add((i, j))
        self.active_pairs = current
        return sorted(current)


@dataclass(frozen=True)
class GuidanceOutput:
    commands: list
    v_nsb: np.ndarray
    sigma2_error: np.ndarray
    colav_active: bool
    gamma_los: float
    chi_los: float
    xi_dot: float
    p_b_p: np.ndarray


def guidance_step(
    positions: np.ndarray,
    vehicle_angles,  # list of (U_i, gamma_i, chi_i)
    sway_heave,  # list of (v_i, w_i)
    point: PathPoint,
    p_b_p: np.ndarray,
    xi_dot: float,
    formation: FormationSpec,
    nsb: NsbConfig,
    u_los: float,
    delta0: float,
    gstate: GuidanceState,
    options: DecomposeOptions | None = None,
    update_pairs: bool = True,
) -> GuidanceOutput:
    """One guidance evaluation for the whole fleet.

    ``update_pairs`` refreshes the hysteresis set (done once per control
    tick; continuous-mode stage evaluations reuse the frozen set).
    """
    n = positions.shape[0]
    v_los, gamma_los, chi_los = los_velocity(p_b_p, point, u_los, delta0)
    v_d3 = np.tile(v_los, n)

    ft = formation_task(positions, point, formation, xi_dot)
    # the formation Jacobian is constant: use its cached pseudoinverse
    # and null-space projector (equal to the generic clik/combine path)
    _, J2_pinv, P2 = _formation_jacobian_cached(n)
    lam2 = np.asarray(nsb.lambda2, dtype=float)
    if ft.sigma.shape[0]:
        drive = ft.sigma_d_dot - (
            float(lam2) * ft.error if lam2.ndim == 0 else lam2 @ ft.error
        )
        v_d2 = J2_pinv @ drive
    else:
        v_d2 = np.zeros(3 * n)

    if update_pairs:
        gstate.update_pairs(positions, nsb.d_colav, nsb.hysteresis)
    pairs = sorted(gstate.active_pairs)
    inner = v_d2 + P2 @ v_d3
    if pairs:
        ct = colav_task(positions, nsb.d_colav, pairs=pairs, one_sided=True)
        v_d1 = clik_velocity(ct, nsb.lambda1)
        v_nsb = v_d1 + null_space_projector(ct.jacobian) @ inner
    else:
        v_nsb = inner

    commands = []
    opts = options or DecomposeOptions()
    for i in range(n):
        _, gamma_i, chi_i = vehicle_angles[i]
        v_i, w_i = sway_heave[i]
        cmd = decompose_reference(
            v_nsb[3 * i : 3 * i + 3],
            v_i,
            w_i,
            gamma_i,
            chi_i,
            options=opts,
            previous=gstate.previous.get(i),
        )
        if update_pairs:  # commit discrete memory on tick-level calls only
            gstate.previous[i] = cmd
        commands.append(cmd)

    return GuidanceOutput(
        commands=commands,
        v_nsb=v_nsb,
        sigma2_error=ft.error,
        colav_active=bool(pairs),
        gamma_los=gamma_los,
        chi_los=chi_los,
        xi_dot=xi_dot,
        p_b_p=np.asarray(p_b_p, dtype=float),
    )
