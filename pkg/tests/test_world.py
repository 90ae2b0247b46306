import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hrcsim.geometry import Pose, Transform
from hrcsim.kinematics import forward_kinematics
from hrcsim.world import (
    Aabb,
    Capsule,
    DuplicateId,
    Sphere,
    UnknownId,
    World,
    WorldObject,
    arm_collision,
    arm_link_segments,
    collide,
    shape_from_dict,
)

from conftest import make_sevendof
from mc_oracle import (
    bounding_radius,
    mc_overlap_volume,
    random_shape_dict,
    random_unit_quat,
    shape_volume,
)


def obj(oid, x=0.0, y=0.0, z=0.0, shape=None, kind="piece"):
    return WorldObject(
        id=oid, pose=Pose.from_xyz_quat(x, y, z, 1, 0, 0, 0), shape=shape or Sphere(0.05), kind=kind
    )


class TestRegistry:
    def test_register_then_query(self):
        w = World()
        w.register_object(obj("screwdriver", 0.1, 0.2, 0.0))
        np.testing.assert_allclose(w.object_pose("screwdriver").position, [0.1, 0.2, 0.0])

    def test_duplicate_id(self):
        w = World()
        w.register_object(obj("hammer"))
        with pytest.raises(DuplicateId):
            w.register_object(obj("hammer"))

    def test_twenty_objects_all_retrievable(self):
        w = World()
        for i in range(20):
            w.register_object(obj(f"piece_{i}", x=0.1 * i))
        assert len(w) == 20
        for i in range(20):
            assert abs(w.object_pose(f"piece_{i}").position[0] - 0.1 * i) < 1e-12

    def test_unknown_id(self):
        w = World()
        with pytest.raises(UnknownId):
            w.object_pose("banana")
        with pytest.raises(UnknownId):
            w.update_object_pose("banana", Pose.identity())

    def test_update_pose_plan_source(self):
        w = World()
        seen = []
        w.intervention_sink = lambda oid, pose: seen.append(oid)
        w.register_object(obj("dowel_box"))
        w.update_object_pose("dowel_box", Pose.from_xyz_quat(0.4, 0.2, 0, 1, 0, 0, 0), source="plan")
        np.testing.assert_allclose(w.object_pose("dowel_box").position, [0.4, 0.2, 0.0])
        assert seen == []

    def test_update_pose_intervention_emits(self):
        w = World()
        seen = []
        w.intervention_sink = lambda oid, pose: seen.append(oid)
        w.register_object(obj("screwdriver", 0.1, 0, 0))
        moved = Pose.from_xyz_quat(0.13, 0, 0, 1, 0, 0, 0)
        w.update_object_pose("screwdriver", moved, source="intervention")
        np.testing.assert_allclose(w.object_pose("screwdriver").position, [0.13, 0.0, 0.0])
        assert seen == ["screwdriver"]


class TestCollidePairs:
    def test_spheres_apart(self):
        a, b = Sphere(1.0), Sphere(1.0)
        assert not collide(a, Pose.identity(), b, Pose.from_xyz_quat(3, 0, 0, 1, 0, 0, 0))

    def test_spheres_overlap(self):
        a, b = Sphere(1.0), Sphere(1.0)
        assert collide(a, Pose.identity(), b, Pose.from_xyz_quat(1.5, 0, 0, 1, 0, 0, 0))

    def test_spheres_touching_counts(self):
        a, b = Sphere(1.0), Sphere(1.0)
        assert collide(a, Pose.identity(), b, Pose.from_xyz_quat(2.0, 0, 0, 1, 0, 0, 0))

    def test_sphere_aabb_spec_case_matches_oracle(self, rng):
        sphere = {"type": "sphere", "radius": 0.5}
        box = {"type": "aabb", "half_extents": [0.4, 0.4, 0.4]}
        pose_s = {"position": [1.0, 0.0, 0.0], "orientation": [1, 0, 0, 0]}
        pose_b = {"position": [0.0, 0.0, 0.0], "orientation": [1, 0, 0, 0]}
        vol, hits = mc_overlap_volume(sphere, pose_s, box, pose_b, 100_000, rng)
        got = collide(
            Sphere(0.5), Pose.from_dict(pose_s), Aabb([0.4, 0.4, 0.4]), Pose.from_dict(pose_b)
        )
        assert got == (hits > 0) == False  # gap is 0.1 m

    def test_random_pairs_match_oracle(self, rng):
        # smaller/faster sibling of the acceptance criterion run
        for _ in range(8):
            sa, sb = random_shape_dict(rng), random_shape_dict(rng)
            sep = rng.uniform(0, 1.2) * (bounding_radius(sa) + bounding_radius(sb))
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            pa = {"position": [0.0, 0.0, 0.0], "orientation": random_unit_quat(rng)}
            pb = {"position": [float(v) for v in sep * direction], "orientation": random_unit_quat(rng)}
            vol, hits = mc_overlap_volume(sa, pa, sb, pb, 100_000, rng)
            got = collide(
                shape_from_dict(sa), Pose.from_dict(pa), shape_from_dict(sb), Pose.from_dict(pb)
            )
            if got != (hits > 0):
                assert vol < 1e-6 * min(shape_volume(sa), shape_volume(sb))

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=60, deadline=None)
    def test_collide_symmetric(self, seed):
        rng = np.random.default_rng(seed)
        sa, sb = random_shape_dict(rng), random_shape_dict(rng)
        sep = rng.uniform(0, 1.2) * (bounding_radius(sa) + bounding_radius(sb))
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        pa = Pose(np.zeros(3), np.array(random_unit_quat(rng)))
        pb = Pose(sep * direction, np.array(random_unit_quat(rng)))
        a, b = shape_from_dict(sa), shape_from_dict(sb)
        assert collide(a, pa, b, pb) == collide(b, pb, a, pa)

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=60, deadline=None)
    def test_collide_rigid_invariance(self, seed):
        rng = np.random.default_rng(seed)
        sa, sb = random_shape_dict(rng), random_shape_dict(rng)
        aabb_involved = sa["type"] == "aabb" or sb["type"] == "aabb"
        sep = rng.uniform(0, 1.2) * (bounding_radius(sa) + bounding_radius(sb))
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        pa = Pose(np.zeros(3), np.array(random_unit_quat(rng)))
        pb = Pose(sep * direction, np.array(random_unit_quat(rng)))
        if aabb_involved:
            # aabbs are axis-aligned by definition: only translations preserve them
            t = Transform(rng.uniform(-2, 2, 3), np.array([1.0, 0, 0, 0]))
        else:
            t = Transform(rng.uniform(-2, 2, 3), np.array(random_unit_quat(rng)))
        a, b = shape_from_dict(sa), shape_from_dict(sb)
        assert collide(a, pa, b, pb) == collide(a, t @ pa, b, t @ pb)


class TestArmCollision:
    def test_empty_world(self, sevendof):
        assert arm_collision(sevendof, np.zeros(7), World()) == []

    def test_sphere_on_link2_midpoint(self, sevendof):
        q = np.array([0.3, -0.6, 0.4, -1.0, 0.2, 0.5, 0.0])
        segments = arm_link_segments(sevendof, q)
        mid = 0.5 * (segments[1][0] + segments[1][1])  # link 2 connects frames 1 and 2
        w = World()
        w.register_object(
            WorldObject(id="blob", pose=Pose(mid, np.array([1.0, 0, 0, 0])), shape=Sphere(0.08))
        )
        contacts = arm_collision(sevendof, q, w)
        assert (2, "blob") in contacts

    def test_far_object_ignored(self, sevendof):
        w = World()
        w.register_object(obj("moon", x=10.0))
        assert arm_collision(sevendof, np.zeros(7), w) == []

    def test_exclude_list(self, sevendof):
        q = np.zeros(7)
        ee = forward_kinematics(sevendof, q).position
        w = World()
        w.register_object(WorldObject(id="held", pose=Pose(ee, np.array([1.0, 0, 0, 0])), shape=Sphere(0.05)))
        assert arm_collision(sevendof, q, w) != []
        assert arm_collision(sevendof, q, w, exclude=("held",)) == []


class TestCalibrate:
    def test_identity(self):
        w = World()
        res = w.calibrate(Transform.identity(), Transform.identity())
        np.testing.assert_allclose(res.base_in_viewer.position, [0, 0, 0], atol=1e-15)

    def test_translation_only(self):
        w = World()
        res = w.calibrate(Transform.from_xyz_quat(0.5, 0, 0.2, 1, 0, 0, 0), Transform.identity())
        np.testing.assert_allclose(res.base_in_viewer.position, [0.5, 0, 0.2], atol=1e-15)

    def test_yaw_plus_offset_matches_matrix_product(self):
        yaw = math.pi / 2
        marker = Transform.from_xyz_quat(0.3, -0.1, 0.0, math.cos(yaw / 2), 0, 0, math.sin(yaw / 2))
        offset = Transform.from_xyz_quat(0.0, 0.1, 0.0, 1, 0, 0, 0)
        res = World().calibrate(marker, offset)
        expect = marker.matrix() @ offset.matrix()
        np.testing.assert_allclose(res.base_in_viewer.matrix(), expect, atol=1e-12)

    def test_inverse_recovers_offset(self, rng):
        q1 = np.array(random_unit_quat(rng))
        q2 = np.array(random_unit_quat(rng))
        t1 = Transform(rng.uniform(-1, 1, 3), q1)
        t2 = Transform(rng.uniform(-1, 1, 3), q2)
        res = World().calibrate(t1, t2)
        recovered = t1.inverse() @ res.base_in_viewer
        assert recovered.almost_equal(t2, tol=1e-9)

    def test_recalibration_replaces_anchor(self):
        w = World()
        w.calibrate(Transform.identity(), Transform.identity())
        second = w.calibrate(Transform.from_xyz_quat(1, 0, 0, 1, 0, 0, 0), Transform.identity())
        assert w.calibration is second
