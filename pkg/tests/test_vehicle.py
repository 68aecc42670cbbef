"""Vehicle model tests: component form cross-checked against the
matrix-vector form, which is assembled independently with numpy."""

import math

import numpy as np
import pytest

from auvformation.params import ParameterError, VehicleParams, envelope_scan
from auvformation.vehicle import (
    GeneralizedForces,
    OceanCurrent,
    PitchDomainError,
    VehicleState,
    component_terms,
    coriolis,
    current_in_body,
    dynamics,
    kinematics,
    matrix_acceleration,
    rotation_matrix,
    transform_matrix,
)

from conftest import random_current, random_state


def elementary_y(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def elementary_z(psi):
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


class TestRotation:
    def test_identity(self):
        assert np.allclose(rotation_matrix(0.0, 0.0), np.eye(3))

    def test_orthonormal(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            R = rotation_matrix(rng.uniform(-1.5, 1.5), rng.uniform(-np.pi, np.pi))
            assert np.abs(R @ R.T - np.eye(3)).max() < 1e-12
            assert abs(np.linalg.det(R) - 1.0) < 1e-12

    def test_matches_composed_axis_rotations(self):
        # independent oracle: compose elementary z- and y-rotations
        R = rotation_matrix(0.3, 1.1)
        expected = elementary_z(1.1) @ elementary_y(0.3)
        assert np.abs(R - expected).max() < 1e-15

    def test_pitch_domain(self):
        with pytest.raises(PitchDomainError):
            rotation_matrix(math.pi / 2, 0.0)


class TestKinematics:
    def test_zero_velocity(self):
        s = VehicleState(np.array([1.0, 2, 3, 0.4, -0.9]), np.zeros(5))
        assert np.all(kinematics(s) == 0.0)

    def test_pure_surge(self):
        s = VehicleState(np.zeros(5), np.array([1.0, 0, 0, 0, 0]))
        assert np.allclose(kinematics(s), [1, 0, 0, 0, 0])

    def test_matches_matrix_form(self):
        rng = np.random.default_rng(2)
        for _ in range(300):
            s = random_state(rng)
            expected = transform_matrix(s.eta) @ s.nu
            assert np.abs(kinematics(s) - expected).max() < 1e-14

    def test_pitch_domain(self):
        s = VehicleState(np.array([0, 0, 0, math.pi / 2, 0.0]), np.ones(5))
        with pytest.raises(PitchDomainError):
            kinematics(s)


class TestCoriolis:
    def test_zero_velocity(self, surrogate):
        assert np.all(coriolis(surrogate, np.zeros(5)) == 0.0)

    def test_skew_symmetric(self, surrogate):
        rng = np.random.default_rng(3)
        for _ in range(300):
            C = coriolis(surrogate, rng.uniform(-3, 3, 5))
            assert np.abs(C + C.T).max() < 1e-14

    def test_pure_surge_pattern(self, surrogate):
        # only the +-m11*u_r entries survive, in the sway/yaw and
        # heave/pitch off-diagonal slots
        C = coriolis(surrogate, np.array([1.0, 0, 0, 0, 0]))
        expected = np.zeros((5, 5))
        expected[1, 4] = surrogate.m11
        expected[2, 3] = -surrogate.m11
        expected[3, 2] = surrogate.m11
        expected[4, 1] = -surrogate.m11
        assert np.array_equal(C, expected)


class TestCurrentInBody:
    def test_zero(self, surrogate):
        s = VehicleState(np.array([0, 0, 0, 0.5, 1.0]), np.zeros(5))
        assert np.all(current_in_body(s, OceanCurrent()) == 0.0)

    def test_identity_attitude_passthrough(self):
        s = VehicleState(np.zeros(5), np.zeros(5))
        nu_c = current_in_body(s, OceanCurrent(np.array([0.0, 0.25, 0.05])))
        assert np.allclose(nu_c, [0.0, 0.25, 0.05, 0.0, 0.0])

    def test_norm_preserved(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            s = random_state(rng)
            cur = random_current(rng)
            nu_c = current_in_body(s, cur)
            assert abs(np.linalg.norm(nu_c[:3]) - cur.speed) < 1e-12
            assert nu_c[3] == 0.0 and nu_c[4] == 0.0


class TestComponentTerms:
    def test_gravity_term_vanishes_level(self, surrogate, table_current):
        s = VehicleState(np.array([0, 0, 0, 0.0, 0.7]), np.ones(5) * 0.3)
        t = component_terms(surrogate, s, table_current)
        assert t.G == 0.0

    def test_rest_no_current(self, surrogate):
        s = VehicleState(np.zeros(5), np.zeros(5))
        t = component_terms(surrogate, s, OceanCurrent())
        assert t.F_u == 0.0 and t.F_q == 0.0 and t.F_r == 0.0

    def test_regressor_identity(self, surrogate):
        # phi_q . regressor(V_c) must turn the absolute-velocity F_q into
        # the relative-velocity form; check via the full matrix oracle
        rng = np.random.default_rng(5)
        worst = 0.0
        for _ in range(1000):
            s = random_state(rng)
            cur = random_current(rng)
            f = GeneralizedForces(*rng.uniform(-1, 1, 3))
            a = dynamics(surrogate, s, cur, f)
            b = matrix_acceleration(surrogate, s, cur, f)
            scale = max(1.0, np.abs(b).max())
            worst = max(worst, np.abs(a - b).max() / scale)
        assert worst < 1e-10

    def test_envelope_certificate(self, surrogate):
        rv, rw, yv_max, yw_max = envelope_scan(surrogate)
        assert yv_max < 0.0 and yw_max < 0.0
        # surrogate is tuned for the reference stability margin
        rv_t, rw_t, _, _ = envelope_scan(surrogate, v_c_max=0.2549509756796392)
        assert 0.255 <= rv_t <= 0.265
        assert 0.255 <= rw_t <= 0.265


class TestDynamics:
    def test_drift_equilibrium(self, surrogate):
        # drifting with the current at level pitch: all rates are zero
        cur = OceanCurrent(np.array([0.3, -0.2, 0.1]))
        s = VehicleState(np.array([0, 0, 0, 0.0, 0.6]), np.zeros(5))
        s.nu[:] = current_in_body(s, cur)
        nu_dot = dynamics(surrogate, s, cur, GeneralizedForces())
        assert np.abs(nu_dot).max() < 1e-14

    def test_unit_surge_force(self, surrogate):
        s = VehicleState(np.zeros(5), np.zeros(5))
        nu_dot = dynamics(surrogate, s, OceanCurrent(), GeneralizedForces(f_u=1.0))
        assert np.allclose(nu_dot, [1, 0, 0, 0, 0])

    def test_matches_matrix_form(self, surrogate):
        rng = np.random.default_rng(6)
        for _ in range(200):
            s = random_state(rng)
            cur = random_current(rng)
            f = GeneralizedForces(*rng.uniform(-2, 2, 3))
            a = dynamics(surrogate, s, cur, f)
            b = matrix_acceleration(surrogate, s, cur, f)
            assert np.abs(a - b).max() / max(1.0, np.abs(b).max()) < 1e-10

    def test_nonfinite_force_rejected(self, surrogate):
        s = VehicleState(np.zeros(5), np.zeros(5))
        with pytest.raises(ValueError):
            dynamics(surrogate, s, OceanCurrent(), GeneralizedForces(f_u=np.nan))


class TestParams:
    def test_loader_round_trip(self, surrogate):
        assert surrogate.name == "lauv-surrogate"
        M = surrogate.mass_matrix()
        assert np.linalg.eigvalsh(M).min() > 0

    def test_rejects_indefinite_mass(self, surrogate):
        bad = {f: getattr(surrogate, f) for f in (
            "m11", "m22", "m25", "m33", "m34", "m44", "m55",
            "d11", "d22", "d25", "d33", "d34", "d43", "d44", "d52", "d55", "W",
        )}
        bad["m25"] = 60.0  # makes the sway/yaw block indefinite
        with pytest.raises(ParameterError):
            VehicleParams.from_dict(bad)

    def test_rejects_unknown_keys(self):
        with pytest.raises(ParameterError):
            VehicleParams.from_dict({"m99": 1.0})
