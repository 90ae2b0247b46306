import math

import numpy as np
import pytest

from hrcsim.trajectory import JointTrajectory, segment_duration, straight_joint_path, time_parameterize

from conftest import make_planar2, make_sevendof


class TestStraightJointPath:
    def test_three_points(self):
        path = straight_joint_path([0.0], [1.0], 3)
        np.testing.assert_allclose(path, [[0.0], [0.5], [1.0]])

    def test_equal_endpoints(self):
        path = straight_joint_path([0.3, -0.2], [0.3, -0.2], 5)
        assert len(path) == 5
        for q in path:
            np.testing.assert_allclose(q, [0.3, -0.2])

    def test_two_points_endpoints_only(self):
        path = straight_joint_path([0.0, 0.0], [1.0, -1.0], 2)
        np.testing.assert_allclose(path, [[0.0, 0.0], [1.0, -1.0]])

    def test_rejects_short(self):
        with pytest.raises(ValueError):
            straight_joint_path([0.0], [1.0], 1)


class TestTimeParameterize:
    def test_trapezoid_closed_form(self):
        # cruise reached: t = d/v + v/a
        assert segment_duration([1.0], [1.0], [2.0]) == pytest.approx(1.5)

    def test_triangle_closed_form(self):
        # short move: t = 2*sqrt(d/a)
        assert segment_duration([0.25], [1.0], [2.0]) == pytest.approx(2 * math.sqrt(0.25 / 2.0))

    def test_limiting_joint_wins(self):
        slow = segment_duration([1.0, 0.1], [1.0, 1.0], [2.0, 2.0])
        assert slow == pytest.approx(1.5)

    def test_duplicate_waypoints_dropped(self, planar2):
        q = np.array([0.1, 0.2])
        traj = time_parameterize([q, q, q + 0.5, q + 0.5], planar2)
        assert traj.n_points == 2
        assert traj.times[0] == 0.0

    def test_single_waypoint(self, planar2):
        traj = time_parameterize([np.zeros(2)], planar2)
        assert traj.duration == 0.0 and traj.n_points == 1

    def test_empty_rejected(self, planar2):
        with pytest.raises(ValueError):
            time_parameterize([], planar2)

    def test_reversal_invariance(self, rng):
        model = make_sevendof()
        pts = [rng.uniform(-1, 1, 7) for _ in range(6)]
        fwd = time_parameterize(pts, model)
        rev = time_parameterize(pts[::-1], model)
        assert fwd.duration == pytest.approx(rev.duration, abs=1e-12)

    def test_velocity_bound_respected(self, rng):
        model = make_sevendof()
        pts = [rng.uniform(model.lower, model.upper) for _ in range(8)]
        traj = time_parameterize(pts, model)
        traj.validate(model)


class TestJointTrajectory:
    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            JointTrajectory(times=[0.5, 1.0], configurations=[[0.0], [1.0]])
        with pytest.raises(ValueError):
            JointTrajectory(times=[0.0, 0.0], configurations=[[0.0], [1.0]])
        with pytest.raises(ValueError):
            JointTrajectory(times=[0.0], configurations=[[0.0]], phase_marks=[(0.0, "warp")])

    def test_interpolation_linear(self):
        traj = JointTrajectory(times=[0.0, 2.0], configurations=[[0.0, 0.0], [1.0, -2.0]])
        np.testing.assert_allclose(traj.interpolate(1.0), [0.5, -1.0])
        np.testing.assert_allclose(traj.interpolate(-5.0), [0.0, 0.0])
        np.testing.assert_allclose(traj.interpolate(99.0), [1.0, -2.0])

    def test_phase_at(self):
        traj = JointTrajectory(
            times=[0.0, 1.0, 2.0],
            configurations=[[0.0], [1.0], [2.0]],
            phase_marks=[(0.0, "approach"), (1.0, "grasp"), (2.0, "release")],
        )
        assert traj.phase_at(0.5) == "approach"
        assert traj.phase_at(1.0) == "grasp"
        assert traj.phase_at(5.0) == "release"

    def test_round_trip_dict(self):
        traj = JointTrajectory(
            times=[0.0, 1.5],
            configurations=[[0.1, 0.2], [0.3, 0.4]],
            phase_marks=[(0.0, "approach"), (1.5, "hold")],
        )
        back = JointTrajectory.from_dict(traj.to_dict())
        np.testing.assert_array_equal(back.times, traj.times)
        np.testing.assert_array_equal(back.configurations, traj.configurations)
        assert back.phase_marks == traj.phase_marks
