"""Vehicle parameter set: mass/damping coefficients and validation.

The shipped coefficient file ``data/lauv_surrogate.yaml`` is a surrogate
torpedo-shaped AUV, not a published data set.  It satisfies the model
structure (symmetric positive definite mass matrix, linear damping,
neutral buoyancy with CG below CB) and is tuned so that the smallest
|Y_v/X_v| and |Y_w/X_w| over the operating envelope are approximately
0.26.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

_COEFF_FIELDS = (
    "m11", "m22", "m25", "m33", "m34", "m44", "m55",
    "d11", "d22", "d25", "d33", "d34", "d43", "d44", "d52", "d55",
    "W",
)


class ParameterError(ValueError):
    """Raised when a coefficient set violates the model structure."""


@dataclass(frozen=True)
class VehicleParams:
    """Hydrodynamic coefficients of one 5-DOF vehicle.

    m11..m55 are the mass/inertia entries including added mass, d11..d55
    the linear damping entries, W = m*g*z_g the restoring moment
    coefficient and ``length`` the hull length (used for documentation
    and collision-distance sanity checks only).  ``u_max``/``v_c_max``
    declare the operating envelope over which the sway/heave coefficient
    signs are certified at load time.
    """

    m11: float
    m22: float
    m25: float
    m33: float
    m34: float
    m44: float
    m55: float
    d11: float
    d22: float
    d25: float
    d33: float
    d34: float
    d43: float
    d44: float
    d52: float
    d55: float
    W: float
    length: float = 2.4
    u_max: float = 2.5
    v_c_max: float = 0.3
    name: str = ""

    def __post_init__(self):
        M = self.mass_matrix()
        if not np.allclose(M, M.T):
            raise ParameterError("mass matrix must be symmetric")
        eig = np.linalg.eigvalsh(M)
        if eig.min() <= 0.0:
            raise ParameterError(
                f"mass matrix must be positive definite (eigenvalues {eig})"
            )
        # the sway/yaw and heave/pitch sub-blocks are inverted in the
        # component-form equations; guard them explicitly
        if self.m22 * self.m55 - self.m25**2 <= 0.0:
            raise ParameterError("singular sway/yaw mass sub-block")
        if self.m33 * self.m44 - self.m34**2 <= 0.0:
            raise ParameterError("singular heave/pitch mass sub-block")
        certify_envelope(self)

    def mass_matrix(self) -> np.ndarray:
        m = self
        return np.array(
            [
                [m.m11, 0.0, 0.0, 0.0, 0.0],
                [0.0, m.m22, 0.0, 0.0, m.m25],
                [0.0, 0.0, m.m33, m.m34, 0.0],
                [0.0, 0.0, m.m34, m.m44, 0.0],
                [0.0, m.m25, 0.0, 0.0, m.m55],
            ]
        )

    def damping_matrix(self) -> np.ndarray:
        m = self
        return np.array(
            [
                [m.d11, 0.0, 0.0, 0.0, 0.0],
                [0.0, m.d22, 0.0, 0.0, m.d25],
                [0.0, 0.0, m.d33, m.d34, 0.0],
                [0.0, 0.0, m.d43, m.d44, 0.0],
                [0.0, m.d52, 0.0, 0.0, m.d55],
            ]
        )

    def kernel_row(self) -> np.ndarray:
        """Flat coefficient row in the layout the kernels expect."""
        return np.array([getattr(self, f) for f in _COEFF_FIELDS])

    @classmethod
    def from_dict(cls, data: dict) -> "VehicleParams":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown parameter keys: {sorted(unknown)}")
        missing = set(_COEFF_FIELDS) - set(data)
        if missing:
            raise ParameterError(f"missing parameter keys: {sorted(missing)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "VehicleParams":
        with open(path) as fh:
            data = yaml.safe_load(fh)
        if not isinstance(data, dict):
            raise ParameterError(f"{path}: expected a mapping of parameters")
        return cls.from_dict(data)


def sway_heave_coefficients(params: VehicleParams, u, u_c):
    """(X_v, Y_v, X_w, Y_w) over arrays of surge u and body current u_c."""
    u = np.asarray(u, dtype=float)
    u_c = np.asarray(u_c, dtype=float)
    u_r = u - u_c
    p = params
    det_vr = p.m22 * p.m55 - p.m25**2
    det_zq = p.m33 * p.m44 - p.m34**2
    x_v = -u_c - (p.m55 * (p.d25 + p.m11 * u_r) - p.m25 * (p.d55 + p.m25 * u_r)) / det_vr
    y_v = -(p.d22 * p.m55 - p.m25 * (p.d52 - u_r * (p.m11 - p.m22))) / det_vr
    x_w = u_c - (p.m44 * (p.d34 - p.m11 * u_r) - p.m34 * (p.d44 - p.m34 * u_r)) / det_zq
    y_w = -(p.d33 * p.m44 - p.m34 * (p.d43 + u_r * (p.m11 - p.m33))) / det_zq
    return x_v, y_v, x_w, y_w


def envelope_scan(params: VehicleParams, u_max=None, v_c_max=None, grid=100):
    """Scan the operating envelope; return (min|Yv/Xv|, min|Yw/Xw|, Yv_max, Yw_max).

    Grid points where X vanishes are skipped for the ratio (the local
    ratio is unbounded there, so they never bind the minimum).
    """
    u_max = params.u_max if u_max is None else u_max
    v_c_max = params.v_c_max if v_c_max is None else v_c_max
    u = np.linspace(0.0, u_max, grid)
    uc = np.linspace(-v_c_max, v_c_max, grid)
    U, UC = np.meshgrid(u, uc)
    x_v, y_v, x_w, y_w = sway_heave_coefficients(params, U, UC)
    tiny = 1e-12
    rv = np.where(np.abs(x_v) > tiny, np.abs(y_v) / np.maximum(np.abs(x_v), tiny), np.inf)
    rw = np.where(np.abs(x_w) > tiny, np.abs(y_w) / np.maximum(np.abs(x_w), tiny), np.inf)
    return float(rv.min()), float(rw.min()), float(y_v.max()), float(y_w.max())


def certify_envelope(params: VehicleParams, grid=100) -> None:
    """Require Y_v < 0 and Y_w < 0 over the declared envelope."""
    _, _, yv_max, yw_max = envelope_scan(params, grid=grid)
    if yv_max >= 0.0 or yw_max >= 0.0:
        raise ParameterError(
            "sway/heave damping coefficients must stay negative over the "
            f"declared envelope (max Y_v = {yv_max:.4g}, max Y_w = {yw_max:.4g})"
        )
