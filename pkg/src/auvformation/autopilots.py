"""Surge, pitch and yaw autopilots with adaptive ocean-current observers.

Each controller output-linearizes its axis by canceling the closed-form
model terms with the current replaced by an adaptive estimate, then adds
proportional(-derivative) feedback and a sliding-mode term.  The sign
function is smoothed to tanh(x/eps) by default (eps = 0.01) to avoid
chattering under fixed-step integration; eps = 0 restores the exact
sign for fidelity runs.

The pitch loop uses the composite error s_q = (q - theta_d_dot) +
lambda_q (theta - theta_d); the yaw loop the analogous s_r built from
psi_dot = r / cos(theta).  With the reference gains (k_theta = k_psi =
0.0625, k_q = k_r = 0.25, lambda = 0.75) both loops are critically
damped with a double pole at -0.5.

Observer estimates are not projected or saturated by default; an
optional cap exists for robustness experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .vehicle import ComponentTerms, VehicleState

_FIELD_ORDER = (
    "k_u", "k_c", "c_u", "k_theta", "k_q", "k_d", "lambda_q", "c_q",
    "k_psi", "k_r", "lambda_r", "c_r",
)


@dataclass(frozen=True)
class AutopilotGains:
    """Controller and observer gains (defaults: reference tuning)."""

    k_u: float = 0.05
    k_c: float = 0.1
    c_u: float = 5.0
    k_theta: float = 0.0625
    k_q: float = 0.25
    k_d: float = 0.1
    lambda_q: float = 0.75
    c_q: float = 1.0
    k_psi: float = 0.0625
    k_r: float = 0.25
    lambda_r: float = 0.75
    c_r: float = 1.0
    smoothing_eps: float = 0.01
    observer_cap: float = 0.0  # 0 disables the cap

    def __post_init__(self):
        for name in _FIELD_ORDER:
            if getattr(self, name) <= 0.0:
                raise ValueError(f"gain {name} must be positive")

    def kernel_vector(self, omega_f: float) -> np.ndarray:
        vals = [getattr(self, name) for name in _FIELD_ORDER]
        return np.array(vals + [self.smoothing_eps, omega_f])


@dataclass
class ObserverState:
    """Adaptive estimates: current vector (surge) and quadratic
    current regressors (pitch, yaw)."""

    v_hat_c: np.ndarray = field(default_factory=lambda: np.zeros(3))
    theta_hat_q: np.ndarray = field(default_factory=lambda: np.zeros(9))
    theta_hat_r: np.ndarray = field(default_factory=lambda: np.zeros(9))

    def __post_init__(self):
        self.v_hat_c = np.asarray(self.v_hat_c, dtype=float)
        self.theta_hat_q = np.asarray(self.theta_hat_q, dtype=float)
        self.theta_hat_r = np.asarray(self.theta_hat_r, dtype=float)
        if (self.v_hat_c.shape, self.theta_hat_q.shape, self.theta_hat_r.shape) != (
            (3,), (9,), (9,)
        ):
            raise ValueError("observer state dimensions must be (3, 9, 9)")


@dataclass
class References:
    """Desired surge velocity and pitch/yaw angles with derivatives."""

    u_d: float = 0.0
    u_d_dot: float = 0.0
    theta_d: float = 0.0
    theta_d_dot: float = 0.0
    theta_d_ddot: float = 0.0
    psi_d: float = 0.0
    psi_d_dot: float = 0.0
    psi_d_ddot: float = 0.0

    def __post_init__(self):
        if not abs(self.theta_d) < math.pi / 2:
            raise ValueError("|theta_d| must stay below pi/2")


def smooth_sign(x: float, eps: float) -> float:
    if eps > 0.0:
        return math.tanh(x / eps)
    return float(np.sign(x))


def surge_control(
    state: VehicleState,
    refs: References,
    gains: AutopilotGains,
    obs: ObserverState,
    terms: ComponentTerms,
):
    """Surge force and current-observer rate.

    f_u = u_d_dot - F_u - phi_u . V_hat_c - k_u u_err - k_c sgn(u_err)
    V_hat_c_dot = c_u phi_u u_err
    """
    u_err = float(state.nu[0]) - refs.u_d
    f_u = (
        refs.u_d_dot
        - terms.F_u
        - float(terms.phi_u @ obs.v_hat_c)
        - gains.k_u * u_err
        - gains.k_c * smooth_sign(u_err, gains.smoothing_eps)
    )
    v_hat_dot = gains.c_u * terms.phi_u * u_err
    return f_u, v_hat_dot


def pitch_control(
    state: VehicleState,
    refs: References,
    gains: AutopilotGains,
    obs: ObserverState,
    terms: ComponentTerms,
):
    """Pitch torque and regressor-observer rate (PD sliding mode)."""
    theta_err = state.theta - refs.theta_d
    q_err = float(state.nu[3]) - refs.theta_d_dot
    s_q = q_err + gains.lambda_q * theta_err
    t_q = (
        refs.theta_d_ddot
        - terms.F_q
        - float(terms.phi_q @ obs.theta_hat_q)
        - gains.lambda_q * q_err
        - gains.k_theta * theta_err
        - gains.k_q * s_q
        - gains.k_d * smooth_sign(s_q, gains.smoothing_eps)
    )
    theta_hat_dot = gains.c_q * terms.phi_q * s_q
    return t_q, theta_hat_dot


def yaw_control(
    state: VehicleState,
    refs: References,
    gains: AutopilotGains,
    obs: ObserverState,
    terms: ComponentTerms,
):
    """Yaw torque and regressor-observer rate.

    Works on psi_dot = r / cos(theta); the -r tan(theta) theta_dot term
    compensates the attitude coupling and the bracket is scaled back by
    cos(theta).
    """
    theta = state.theta
    if abs(theta) >= math.pi / 2:
        raise ValueError("pitch out of domain in yaw controller")
    ct = math.cos(theta)
    q = float(state.nu[3])
    r = float(state.nu[4])
    psi_err = wrap_angle(state.psi - refs.psi_d)
    psi_err_dot = r / ct - refs.psi_d_dot
    s_r = psi_err_dot + gains.lambda_r * psi_err
    t_r = (
        -terms.F_r
        - float(terms.phi_r @ obs.theta_hat_r)
        - r * math.tan(theta) * q
        + ct
        * (
            refs.psi_d_ddot
            - gains.lambda_r * psi_err_dot
            - gains.k_psi * psi_err
            - gains.k_r * s_r
            - gains.k_d * smooth_sign(s_r, gains.smoothing_eps)
        )
    )
    theta_hat_dot = gains.c_r * terms.phi_r * s_r
    return t_r, theta_hat_dot


def wrap_angle(a: float) -> float:
    return math.atan2(math.sin(a), math.cos(a))


def apply_observer_cap(obs: ObserverState, cap: float) -> None:
    """Optional norm cap on the estimates (disabled when cap <= 0)."""
    if cap <= 0.0:
        return
    for vec in (obs.v_hat_c, obs.theta_hat_q, obs.theta_hat_r):
        norm = float(np.linalg.norm(vec))
        if norm > cap:
            vec *= cap / norm


class ReferenceFilter:
    """Critically damped second-order filter producing smooth
    (value, rate, acceleration) triples from a sampled reference.

    The continuous dynamics are val'' = omega^2 (ref - val) - 2 omega
    val'; ``advance`` applies the exact zero-order-hold discretization.
    DC gain is exactly 1.  With ``angular`` the input error is wrapped,
    so reference jumps across +-pi filter along the short way.
    """

    def __init__(self, omega: float, value: float = 0.0, rate: float = 0.0,
                 angular: bool = False):
        if omega <= 0:
            raise ValueError("filter natural frequency must be positive")
        self.omega = omega
        self.value = value
        self.rate = rate
        self.angular = angular

    def acceleration(self, ref: float) -> float:
        err = ref - self.value
        if self.angular:
            err = wrap_angle(err)
        return self.omega**2 * err - 2.0 * self.omega * self.rate

    def advance(self, ref: float, dt: float):
        """Exact update over one sample period with the reference held."""
        om = self.omega
        if self.angular:
            ref = self.value + wrap_angle(ref - self.value)
        dv = self.value - ref
        e = math.exp(-om * dt)
        # exp(At) = e^{-om t} (I + t (A + om I)) for the critically
        # damped companion matrix A
        value = ref + e * ((1.0 + om * dt) * dv + dt * self.rate)
        rate = e * (self.rate - om * dt * (om * dv + self.rate))
        self.value, self.rate = value, rate
        return self.value, self.rate, self.acceleration(ref)


def reference_derivatives(samples, dt: float, omega: float, angular=(False, True, True)):
    """Filter a sampled (u_d, theta_d, psi_d) stream into References.

    Returns one References object per sample (after the corresponding
    filter update).  Filters start at the first sample with zero rate.
    """
    samples = np.asarray(samples, dtype=float)
    filters = [
        ReferenceFilter(omega, value=samples[0, k], angular=angular[k])
        for k in range(3)
    ]
    out = []
    for row in samples:
        vals = [f.advance(row[k], dt) for k, f in enumerate(filters)]
        (u, du, _), (th, dth, ddth), (ps, dps, ddps) = vals
        out.append(
            References(
                u_d=u, u_d_dot=du,
                theta_d=th, theta_d_dot=dth, theta_d_ddot=ddth,
                psi_d=ps, psi_d_dot=dps, psi_d_ddot=ddps,
            )
        )
    return out
