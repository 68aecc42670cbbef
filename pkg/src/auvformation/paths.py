"""Parametric C2 paths, the path-tangential frame and its kinematics.

A path is a smooth map xi -> p(xi) in NED coordinates with nonvanishing
first derivative.  The tangential frame at p(xi) is defined by the
tangent angles

    psi_p = atan2(y', x'),     theta_p = atan2(-z', hypot(x', y')),

(sign convention: positive theta_p for an upward tangent, z down) and
rotates with body-frame angular velocity

    omega = [-iota*xi_dot*sin(theta_p), kappa*xi_dot, iota*xi_dot*cos(theta_p)]

where kappa = d theta_p / d xi and iota = d psi_p / d xi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .vehicle import rotation_matrix

_FD_STEP = 1e-5


class PathError(ValueError):
    pass


@dataclass(frozen=True)
class PathPoint:
    """Path evaluation result at one parameter value."""

    xi: float
    position: np.ndarray
    theta_p: float
    psi_p: float
    kappa: float
    iota: float
    speed: float  # |dp/dxi|

    def rotation(self) -> np.ndarray:
        return rotation_matrix(self.theta_p, self.psi_p)

    def angular_velocity(self, xi_dot: float) -> np.ndarray:
        """Frame angular velocity (path-frame components) at rate xi_dot."""
        return np.array(
            [
                -self.iota * xi_dot * math.sin(self.theta_p),
                self.kappa * xi_dot,
                self.iota * xi_dot * math.cos(self.theta_p),
            ]
        )


@dataclass
class PathState:
    """Path parameter and its last update rate (owned by the sim loop)."""

    xi: float = 0.0
    xi_dot: float = 0.0


class PathSpec:
    """Parametric path defined by position/derivative evaluators.

    ``d2`` may be None; curvature derivatives then fall back to central
    differences with step 1e-5.
    """

    def __init__(
        self,
        d0: Callable[[float], np.ndarray],
        d1: Callable[[float], np.ndarray],
        d2: Callable[[float], np.ndarray] | None = None,
        kind: str = "custom",
        metadata: dict | None = None,
    ):
        self._d0 = d0
        self._d1 = d1
        self._d2 = d2
        self.kind = kind
        # optional analytic bounds: max_kappa, max_iota, max_theta_p
        self.metadata = dict(metadata or {})

    def position(self, xi: float) -> np.ndarray:
        return np.asarray(self._d0(xi), dtype=float)

    def tangent(self, xi: float) -> np.ndarray:
        return np.asarray(self._d1(xi), dtype=float)

    def _angles(self, xi: float):
        t = self.tangent(xi)
        h = math.hypot(t[0], t[1])
        s = math.sqrt(h * h + t[2] * t[2])
        if s < 1e-12:
            raise PathError(f"degenerate tangent at xi = {xi}")
        return math.atan2(-t[2], h), math.atan2(t[1], t[0]), s

    def evaluate(self, xi: float) -> PathPoint:
        xi = float(xi)
        theta_p, psi_p, speed = self._angles(xi)
        if self._d2 is not None:
            t = self.tangent(xi)
            a = np.asarray(self._d2(xi), dtype=float)
            h2 = t[0] * t[0] + t[1] * t[1]
            h = math.sqrt(h2)
            iota = (t[0] * a[1] - t[1] * a[0]) / h2
            hp = (t[0] * a[0] + t[1] * a[1]) / h
            kappa = (-a[2] * h + t[2] * hp) / (h2 + t[2] * t[2])
        else:
            tp0, pp0, _ = self._angles(xi - _FD_STEP)
            tp1, pp1, _ = self._angles(xi + _FD_STEP)
            kappa = (tp1 - tp0) / (2 * _FD_STEP)
            iota = _wrapped_diff(pp1, pp0) / (2 * _FD_STEP)
        return PathPoint(
            xi=xi,
            position=self.position(xi),
            theta_p=theta_p,
            psi_p=psi_p,
            kappa=kappa,
            iota=iota,
            speed=speed,
        )

    def curvature_bounds(self, xi_range=(0.0, 200.0), samples=2000):
        """(max|kappa|, max|iota|, max|theta_p|) sampled over a parameter range."""
        xs = np.linspace(xi_range[0], xi_range[1], samples)
        mk = mi = mt = 0.0
        for x in xs:
            p = self.evaluate(float(x))
            mk = max(mk, abs(p.kappa))
            mi = max(mi, abs(p.iota))
            mt = max(mt, abs(p.theta_p))
        return mk, mi, mt


def _wrapped_diff(a: float, b: float) -> float:
    return math.atan2(math.sin(a - b), math.cos(a - b))


def spiral_path(a: float, b: float, omega: float, origin=(0.0, 0.0, 0.0)) -> PathSpec:
    """Spiral advancing along x while circling in y (radius a) and z (radius b).

    p(xi) = origin + [xi, a cos(omega xi), b sin(omega xi)].  The
    attached metadata carries the classical closed-form curvature
    bounds max|iota| = a omega^2 and max|kappa| = b omega^2 /
    sqrt(a^2 omega^2 + 1).  The iota bound is exact; the kappa bound is
    the value at the pitch extremes and slightly understates the true
    interior maximum (~10% for the reference geometry) -- sampled
    maxima are available through ``curvature_bounds``.
    """
    if a <= 0 or b <= 0 or omega <= 0:
        raise PathError("spiral parameters must be positive")
    o = np.asarray(origin, dtype=float)
    meta = {
        "max_iota": a * omega**2,
        "max_kappa": b * omega**2 / math.sqrt(a**2 * omega**2 + 1.0),
        "max_theta_p": math.atan(b * omega),
    }

    def d0(xi):
        return o + np.array([xi, a * math.cos(omega * xi), b * math.sin(omega * xi)])

    def d1(xi):
        return np.array(
            [1.0, -a * omega * math.sin(omega * xi), b * omega * math.cos(omega * xi)]
        )

    def d2(xi):
        w2 = omega * omega
        return np.array(
            [0.0, -a * w2 * math.cos(omega * xi), -b * w2 * math.sin(omega * xi)]
        )

    return PathSpec(d0, d1, d2, kind="spiral", metadata=meta)


def line_path(direction=(1.0, 0.0, 0.0), origin=(0.0, 0.0, 0.0)) -> PathSpec:
    d = np.asarray(direction, dtype=float)
    if np.linalg.norm(d) < 1e-12:
        raise PathError("line direction must be nonzero")
    o = np.asarray(origin, dtype=float)
    zero = np.zeros(3)
    meta = {
        "max_kappa": 0.0,
        "max_iota": 0.0,
        "max_theta_p": abs(math.atan2(-d[2], math.hypot(d[0], d[1]))),
    }
    return PathSpec(lambda xi: o + xi * d, lambda xi: d.copy(), lambda xi: zero.copy(),
                    kind="line", metadata=meta)


def spline_path(waypoints: Sequence[Sequence[float]]) -> PathSpec:
    """C2 clamped cubic spline through waypoints (documented extension point)."""
    from scipy.interpolate import CubicSpline

    pts = np.asarray(waypoints, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 2:
        raise PathError("spline needs at least two 3D waypoints")
    # chord-length parameterization keeps |dp/dxi| near 1; clamp the end
    # slopes to the chord directions so the tangent never degenerates
    t = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    s0 = (pts[1] - pts[0]) / max(t[1] - t[0], 1e-12)
    s1 = (pts[-1] - pts[-2]) / max(t[-1] - t[-2], 1e-12)
    cs = CubicSpline(t, pts, bc_type=((1, s0), (1, s1)))
    d1 = cs.derivative(1)
    d2 = cs.derivative(2)
    return PathSpec(lambda xi: cs(xi), lambda xi: d1(xi), lambda xi: d2(xi),
                    kind="spline")


def make_path(cfg: dict) -> PathSpec:
    """Build a path from a scenario config block."""
    kind = cfg.get("type", "spiral")
    if kind == "spiral":
        return spiral_path(
            cfg["a"], cfg["b"], cfg["omega"], origin=cfg.get("origin", (0.0, 0.0, 0.0))
        )
    if kind == "line":
        return line_path(
            direction=cfg.get("direction", (1.0, 0.0, 0.0)),
            origin=cfg.get("origin", (0.0, 0.0, 0.0)),
        )
    if kind in ("spline", "polyline-spline"):
        return spline_path(cfg["waypoints"])
    raise PathError(f"unknown path type {kind!r}")


def path_error(p_b: np.ndarray, point: PathPoint) -> np.ndarray:
    """Barycenter position expressed in the path-tangential frame."""
    return point.rotation().T @ (np.asarray(p_b, dtype=float) - point.position)


def direction_factors(gamma: float, theta_p: float, chi: float, psi_p: float):
    """Projections of a unit velocity with angles (gamma, chi) onto the
    path frame axes."""
    cg, sg = math.cos(gamma), math.sin(gamma)
    ct, st = math.cos(theta_p), math.sin(theta_p)
    cd = math.cos(psi_p - chi)
    o_x = st * sg + ct * cg * cd
    o_y = -cg * math.sin(psi_p - chi)
    o_z = -ct * sg + cg * st * cd
    return o_x, o_y, o_z


def xi_update(
    speeds_angles: Sequence[tuple[float, float, float]],
    point: PathPoint,
    x_b_p: float,
    k_xi: float,
) -> float:
    """Path parameter rate: mean along-track vehicle speed plus a
    saturated along-track error correction, normalized by |dp/dxi|.

    speeds_angles holds (U_i, gamma_i, chi_i) per vehicle.
    """
    if k_xi <= 0:
        raise ValueError("k_xi must be positive")
    acc = 0.0
    for U, gamma, chi in speeds_angles:
        o_x, _, _ = direction_factors(gamma, point.theta_p, chi, point.psi_p)
        acc += U * o_x
    acc /= max(len(speeds_angles), 1)
    sat = x_b_p / math.sqrt(1.0 + x_b_p * x_b_p)
    return (acc + k_xi * sat) / point.speed


def barycenter_rates(
    speeds_angles: Sequence[tuple[float, float, float]],
    point: PathPoint,
    xi_dot: float,
    p_b_p: np.ndarray,
) -> np.ndarray:
    """Rates of the path-frame barycenter error (exact kinematics)."""
    n = max(len(speeds_angles), 1)
    sx = sy = sz = 0.0
    for U, gamma, chi in speeds_angles:
        o_x, o_y, o_z = direction_factors(gamma, point.theta_p, chi, point.psi_p)
        sx += U * o_x
        sy += U * o_y
        sz += U * o_z
    sx /= n
    sy /= n
    sz /= n
    wx, wy, wz = point.angular_velocity(xi_dot)
    x, y, z = p_b_p
    return np.array(
        [
            sx - point.speed * xi_dot + wz * y - wy * z,
            sy + wx * z - wz * x,
            sz + wy * x - wx * y,
        ]
    )
