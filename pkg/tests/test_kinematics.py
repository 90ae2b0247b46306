import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hrcsim.geometry import Pose, quat_conj, quat_mul, quat_normalize, quat_rotvec
from hrcsim.kinematics import (
    DimensionMismatch,
    IkOptions,
    JointSpec,
    MaxIterationsError,
    RobotModel,
    UnreachableError,
    forward_kinematics,
    inverse_kinematics,
    jacobian,
    pose_residual,
    within_limits,
)

from conftest import make_planar2, make_sevendof


def numeric_jacobian(model, q, h=1e-6):
    """Central finite differences of forward_kinematics; the oracle for the
    geometric Jacobian (angular rows via relative-quaternion rotation vector)."""
    n = model.n_joints
    jac = np.empty((6, n))
    for i in range(n):
        qp, qm = np.array(q, dtype=float), np.array(q, dtype=float)
        qp[i] += h
        qm[i] -= h
        fp = forward_kinematics(model, qp)
        fm = forward_kinematics(model, qm)
        jac[:3, i] = (fp.position - fm.position) / (2 * h)
        rel = quat_normalize(quat_mul(fp.orientation, quat_conj(fm.orientation)))
        jac[3:, i] = quat_rotvec(rel) / (2 * h)
    return jac


class TestForwardKinematics:
    def test_straight_chain(self, planar2):
        pose = forward_kinematics(planar2, [0.0, 0.0])
        np.testing.assert_allclose(pose.position, [2.0, 0.0, 0.0], atol=1e-12)

    def test_rotated_chain(self, planar2):
        pose = forward_kinematics(planar2, [math.pi / 2, 0.0])
        np.testing.assert_allclose(pose.position, [0.0, 2.0, 0.0], atol=1e-12)

    def test_right_angle(self, planar2):
        pose = forward_kinematics(planar2, [math.pi / 2, -math.pi / 2])
        np.testing.assert_allclose(pose.position, [1.0, 1.0, 0.0], atol=1e-12)

    def test_dimension_mismatch(self, planar2):
        with pytest.raises(DimensionMismatch):
            forward_kinematics(planar2, [0.0, 0.0, 0.0])

    def test_deterministic_bitwise(self, sevendof, rng):
        q = rng.uniform(-1, 1, 7)
        a = forward_kinematics(sevendof, q)
        b = forward_kinematics(sevendof, q)
        assert a.position.tobytes() == b.position.tobytes()
        assert a.orientation.tobytes() == b.orientation.tobytes()

    def test_base_frame_offset(self):
        base = Pose.from_xyz_quat(0.5, -0.25, 1.0, 1, 0, 0, 0)
        model = make_sevendof(base=base)
        pose = forward_kinematics(model, np.zeros(7))
        ref = forward_kinematics(make_sevendof(), np.zeros(7))
        np.testing.assert_allclose(pose.position, ref.position + [0.5, -0.25, 1.0], atol=1e-12)


class TestJacobian:
    def test_single_joint_angular_row_is_axis(self):
        model = RobotModel(
            "one", [JointSpec("j1", dh=(0.5, 0.0, 0.0, 0.0), limits=(-3, 3), v_max=1, a_max=1)]
        )
        for q in (-1.0, 0.0, 0.7):
            jac = jacobian(model, [q])
            np.testing.assert_allclose(jac[3:, 0], [0.0, 0.0, 1.0], atol=1e-12)

    def test_matches_finite_differences(self, sevendof, rng):
        for _ in range(100):
            q = rng.uniform(sevendof.lower * 0.9, sevendof.upper * 0.9)
            jac = jacobian(sevendof, q)
            num = numeric_jacobian(sevendof, q)
            assert np.max(np.abs(jac - num)) < 1e-5

    def test_planar_matches_finite_differences(self, planar2, rng):
        q = rng.uniform(-1.5, 1.5, 2)
        assert np.max(np.abs(jacobian(planar2, q) - numeric_jacobian(planar2, q))) < 1e-5

    def test_zero_length_links_zero_linear_rows(self):
        joints = [
            JointSpec(f"j{i}", dh=(0.0, 0.0, 0.0, 0.0), limits=(-3, 3), v_max=1, a_max=1)
            for i in (1, 2, 3)
        ]
        model = RobotModel("zero", joints)
        jac = jacobian(model, [0.3, -0.2, 0.9])
        np.testing.assert_allclose(jac[:3, :], 0.0, atol=1e-12)


class TestInverseKinematics:
    def test_already_converged_returns_seed(self, sevendof, rng):
        q0 = rng.uniform(-1, 1, 7)
        target = forward_kinematics(sevendof, q0)
        out = inverse_kinematics(sevendof, target, q0)
        assert out.tobytes() == q0.tobytes()

    def test_round_trip_with_noisy_seed(self, sevendof, rng):
        for _ in range(100):
            q0 = rng.uniform(sevendof.lower * 0.9, sevendof.upper * 0.9)
            target = forward_kinematics(sevendof, q0)
            seed = np.clip(q0 + rng.uniform(-0.1, 0.1, 7), sevendof.lower, sevendof.upper)
            q = inverse_kinematics(sevendof, target, seed)
            pos_err, rot_err = pose_residual(sevendof, q, target)
            assert pos_err < 1e-6 and rot_err < 1e-6
            assert within_limits(sevendof, q)

    def test_unreachable_fails_fast(self, sevendof):
        target = Pose.from_xyz_quat(2 * sevendof.total_reach, 0, 0, 1, 0, 0, 0)
        with pytest.raises(UnreachableError):
            inverse_kinematics(sevendof, target, np.zeros(7))

    def test_max_iterations(self, sevendof, rng):
        q0 = rng.uniform(-1.5, 1.5, 7)
        target = forward_kinematics(sevendof, q0)
        far_seed = np.clip(q0 + 2.0, sevendof.lower, sevendof.upper)
        with pytest.raises(MaxIterationsError):
            inverse_kinematics(sevendof, target, far_seed, IkOptions(max_iters=1))


class TestWithinLimits:
    def test_zeros_inside(self, planar2):
        assert within_limits(planar2, [0.0, 0.0])

    def test_above_upper(self, planar2):
        assert not within_limits(planar2, [math.pi + 1e-3, 0.0])

    def test_boundary_is_inside(self, planar2):
        assert within_limits(planar2, [math.pi, -math.pi])

    @given(st.lists(st.floats(-10, 10), min_size=7, max_size=7))
    @settings(max_examples=50, deadline=None)
    def test_clamping_yields_within(self, values):
        model = make_sevendof()
        assert within_limits(model, model.clamp(np.array(values)))
