"""5-DOF underactuated AUV model in component and matrix-vector form.

State: pose eta = [x, y, z, theta, psi] (NED positions, pitch, yaw) and
body velocities nu = [u, v, w, q, r].  Roll is disregarded.  The ocean
current is constant, irrotational and given in the inertial frame; the
actuators produce surge force and pitch/yaw torque but no sway or heave
force.

Two independent formulations are provided and cross-checked by the test
suite:

* the component form (closed-form scalar ODEs with the current isolated
  in regressor terms), served by the kernel backend, and
* the matrix-vector form ``M nu_r_dot + C(nu_r) nu_r + D nu_r + g(eta)
  = B f`` assembled and solved with numpy.

Note on the current terms: F_u, F_q, F_r take the *absolute* velocities
(the reading consistent with the matrix form; verified to 1e-12 by
``matrix_acceleration``).  Converting the relative-velocity matrix form
back to absolute rates uses nu_c_dot = [r*v_c - q*w_c, -r*u_c, q*u_c,
0, 0]: the rotation rate of the current in the body frame keeps the
pitch/yaw rates only, consistent with the 5-DOF reduction that drops
the roll rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .params import VehicleParams


class PitchDomainError(ValueError):
    """Pitch angle reached +-pi/2 where the yaw kinematics degenerate."""


@dataclass
class VehicleState:
    """Pose and body velocity of one vehicle."""

    eta: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        self.eta = np.asarray(self.eta, dtype=float)
        self.nu = np.asarray(self.nu, dtype=float)
        if self.eta.shape != (5,) or self.nu.shape != (5,):
            raise ValueError("eta and nu must be length-5 vectors")

    @property
    def position(self) -> np.ndarray:
        return self.eta[:3]

    @property
    def theta(self) -> float:
        return float(self.eta[3])

    @property
    def psi(self) -> float:
        return float(self.eta[4])


@dataclass
class OceanCurrent:
    """Constant irrotational current in the inertial frame."""

    v: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)
        if self.v.shape != (3,):
            raise ValueError("current must be a 3-vector")

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.v))

    def regressor(self) -> np.ndarray:
        return kernels.current_regressor(self.v)


@dataclass
class GeneralizedForces:
    """Specific surge force and pitch/yaw torques (mass-normalized)."""

    f_u: float = 0.0
    t_q: float = 0.0
    t_r: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.f_u, self.t_q, self.t_r])


@dataclass(frozen=True)
class ComponentTerms:
    """Closed-form terms of the component dynamics at one state."""

    F_u: float
    phi_u: np.ndarray
    X_v: float
    Y_v: float
    X_w: float
    Y_w: float
    G: float
    F_q: float
    phi_q: np.ndarray
    F_r: float
    phi_r: np.ndarray


def rotation_matrix(theta: float, psi: float) -> np.ndarray:
    """Body-to-inertial rotation for pitch/yaw attitude (roll = 0).

    Raises PitchDomainError for |theta| >= pi/2.
    """
    if abs(theta) >= math.pi / 2:
        raise PitchDomainError(f"|theta| = {abs(theta):.4f} >= pi/2")
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    return np.array(
        [
            [cp * ct, -sp, cp * st],
            [sp * ct, cp, sp * st],
            [-st, 0.0, ct],
        ]
    )


def transform_matrix(eta: np.ndarray) -> np.ndarray:
    """5x5 kinematic map J(eta): eta_dot = J(eta) nu."""
    theta = float(eta[3])
    if abs(theta) >= math.pi / 2:
        raise PitchDomainError(f"|theta| = {abs(theta):.4f} >= pi/2")
    J = np.zeros((5, 5))
    J[:3, :3] = rotation_matrix(theta, float(eta[4]))
    J[3, 3] = 1.0
    J[4, 4] = 1.0 / math.cos(theta)
    return J


def kinematics(state: VehicleState) -> np.ndarray:
    """eta_dot of the pose kinematics (component form)."""
    theta, psi = state.theta, state.psi
    if abs(theta) >= math.pi / 2:
        raise PitchDomainError(f"|theta| = {abs(theta):.4f} >= pi/2")
    u, v, w, q, r = state.nu
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    return np.array(
        [
            u * cp * ct - v * sp + w * cp * st,
            u * ct * sp + v * cp + w * sp * st,
            -u * st + w * ct,
            q,
            r / ct,
        ]
    )


def current_in_body(state: VehicleState, current: OceanCurrent) -> np.ndarray:
    """Current velocity expressed in the body frame: [R^T V_c, 0, 0]."""
    R = rotation_matrix(state.theta, state.psi)
    nu_c = np.zeros(5)
    nu_c[:3] = R.T @ current.v
    return nu_c


def coriolis(params: VehicleParams, nu_r: np.ndarray) -> np.ndarray:
    """Coriolis/centripetal matrix at relative velocity nu_r (skew-symmetric)."""
    _, v_r, w_r, q, r = np.asarray(nu_r, dtype=float)
    u_r = float(nu_r[0])
    c1 = params.m34 * q + params.m33 * w_r
    c2 = params.m25 * r + params.m22 * v_r
    c3 = params.m11 * u_r
    return np.array(
        [
            [0.0, 0.0, 0.0, c1, -c2],
            [0.0, 0.0, 0.0, 0.0, c3],
            [0.0, 0.0, 0.0, -c3, 0.0],
            [-c1, 0.0, c3, 0.0, 0.0],
            [c2, -c3, 0.0, 0.0, 0.0],
        ]
    )


def gravity_vector(params: VehicleParams, eta: np.ndarray) -> np.ndarray:
    g = np.zeros(5)
    g[3] = params.W * math.sin(float(eta[3]))
    return g


def component_terms(
    params: VehicleParams, state: VehicleState, current: OceanCurrent
) -> ComponentTerms:
    """Evaluate the closed-form component terms at one state."""
    out = np.empty(kernels.TERMS_WIDTH)
    kernels.component_terms_into(
        params.kernel_row(), state.eta, state.nu, current.v, out
    )
    vals = out
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("non-finite component terms")
    return ComponentTerms(
        F_u=float(vals[0]),
        phi_u=vals[1:4].copy(),
        X_v=float(vals[4]),
        Y_v=float(vals[5]),
        X_w=float(vals[6]),
        Y_w=float(vals[7]),
        G=float(vals[8]),
        F_q=float(vals[9]),
        phi_q=vals[10:19].copy(),
        F_r=float(vals[19]),
        phi_r=vals[20:29].copy(),
    )


def dynamics(
    params: VehicleParams,
    state: VehicleState,
    current: OceanCurrent,
    forces: GeneralizedForces,
) -> np.ndarray:
    """nu_dot from the component-form equations of motion."""
    fvec = forces.as_array()
    if not np.all(np.isfinite(fvec)):
        raise ValueError("non-finite force input")
    t = component_terms(params, state, current)
    nu_c = current_in_body(state, current)
    v_c, w_c = nu_c[1], nu_c[2]
    u, v, w, q, r = state.nu
    theta_vc = current.regressor()
    return np.array(
        [
            forces.f_u + t.F_u + t.phi_u @ current.v,
            t.X_v * r + t.Y_v * (v - v_c),
            t.X_w * q + t.Y_w * (w - w_c) + t.G,
            forces.t_q + t.F_q + t.phi_q @ theta_vc,
            forces.t_r + t.F_r + t.phi_r @ theta_vc,
        ]
    )


def matrix_acceleration(
    params: VehicleParams,
    state: VehicleState,
    current: OceanCurrent,
    forces: GeneralizedForces,
) -> np.ndarray:
    """nu_dot from the matrix-vector form (independent cross-check route).

    Solves M nu_r_dot = B f - C(nu_r) nu_r - D nu_r - g(eta) for the
    relative acceleration and converts back with the body-frame current
    rate (see module docstring).  B f is assembled as
    M [f_u, 0, 0, t_q, t_r]^T per the no-sway/no-heave actuation
    structure.
    """
    M = params.mass_matrix()
    D = params.damping_matrix()
    nu_c = current_in_body(state, current)
    nu_r = state.nu - nu_c
    C = coriolis(params, nu_r)
    bf = M @ np.array([forces.f_u, 0.0, 0.0, forces.t_q, forces.t_r])
    rhs = bf - C @ nu_r - D @ nu_r - gravity_vector(params, state.eta)
    nu_r_dot = np.linalg.solve(M, rhs)
    u_c, v_c, w_c = nu_c[0], nu_c[1], nu_c[2]
    q, r = state.nu[3], state.nu[4]
    nu_c_dot = np.array([r * v_c - q * w_c, -r * u_c, q * u_c, 0.0, 0.0])
    return nu_r_dot + nu_c_dot


def flight_path_angles(state: VehicleState):
    """(U, gamma, chi) of the inertial velocity vector.

    Falls back to the vehicle attitude when the speed vanishes.
    """
    p_dot = rotation_matrix(state.theta, state.psi) @ state.nu[:3]
    U = float(np.linalg.norm(p_dot))
    if U < 1e-12:
        return 0.0, state.theta, state.psi
    gamma = -math.asin(max(-1.0, min(1.0, p_dot[2] / U)))
    chi = math.atan2(p_dot[1], p_dot[0])
    return U, gamma, chi
