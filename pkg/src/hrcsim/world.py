"""Workspace registry: objects with poses and collision shapes, collision
queries, arm-against-world checks, and viewer-frame calibration.

Shapes are closed sets: touching surfaces count as a collision. AABBs stay
axis-aligned in the world frame regardless of object orientation; orientation
affects only spheres (trivially) and capsules.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Union

import numpy as np

from hrcsim import kernels
from hrcsim.geometry import Pose, Transform
from hrcsim.kinematics import RobotModel

OBJECT_KINDS = ("tool", "piece", "box", "fixture")

DEFAULT_LINK_RADIUS = 0.06


class DuplicateId(ValueError):
    pass


class UnknownId(KeyError):
    pass


@dataclass
class Sphere:
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("sphere radius must be > 0")

    def bounding_radius(self) -> float:
        return self.radius

    def to_dict(self) -> dict:
        return {"type": "sphere", "radius": self.radius}


@dataclass
class Aabb:
    half_extents: np.ndarray

    def __post_init__(self):
        self.half_extents = np.asarray(self.half_extents, dtype=float).reshape(3)
        if np.any(self.half_extents <= 0):
            raise ValueError("aabb half extents must be > 0")

    def bounding_radius(self) -> float:
        return float(np.linalg.norm(self.half_extents))

    def to_dict(self) -> dict:
        return {"type": "aabb", "half_extents": [float(v) for v in self.half_extents]}


@dataclass
class Capsule:
    radius: float
    half_length: float

    def __post_init__(self):
        if self.radius <= 0 or self.half_length <= 0:
            raise ValueError("capsule dimensions must be > 0")

    def bounding_radius(self) -> float:
        return self.radius + self.half_length

    def to_dict(self) -> dict:
        return {"type": "capsule", "radius": self.radius, "half_length": self.half_length}


Shape = Union[Sphere, Aabb, Capsule]


def shape_from_dict(d: dict) -> Shape:
    kind = d["type"]
    if kind == "sphere":
        return Sphere(d["radius"])
    if kind == "aabb":
        return Aabb(np.array(d["half_extents"], dtype=float))
    if kind == "capsule":
        return Capsule(d["radius"], d["half_length"])
    raise ValueError(f"unknown shape type {kind!r}")


@dataclass
class WorldObject:
    id: str
    pose: Pose
    shape: Shape
    kind: str = "piece"
    grasp_offset: Transform = field(default_factory=Transform.identity)

    def __post_init__(self):
        if self.kind not in OBJECT_KINDS:
            raise ValueError(f"object kind must be one of {OBJECT_KINDS}, got {self.kind!r}")

    def grasp_pose(self) -> Pose:
        return self.pose @ self.grasp_offset

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "pose": self.pose.to_dict(),
            "shape": self.shape.to_dict(),
            "grasp_offset": self.grasp_offset.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict) -> "WorldObject":
        return WorldObject(
            id=d["id"],
            pose=Pose.from_dict(d["pose"]),
            shape=shape_from_dict(d["shape"]),
            kind=d.get("kind", "piece"),
            grasp_offset=Transform.from_dict(d["grasp_offset"])
            if "grasp_offset" in d
            else Transform.identity(),
        )


@dataclass
class CalibrationResult:
    base_in_viewer: Transform
    marker_pose_used: Transform
    timestamp: float

    def to_dict(self) -> dict:
        return {
            "base_in_viewer": self.base_in_viewer.to_dict(),
            "marker_pose_used": self.marker_pose_used.to_dict(),
            "timestamp": self.timestamp,
        }


def _capsule_segment(shape: Capsule, pose: Pose) -> tuple[np.ndarray, np.ndarray]:
    axis = np.array([0.0, 0.0, shape.half_length])
    return pose.apply(-axis), pose.apply(axis)


def collide(a: Shape, pose_a: Pose, b: Shape, pose_b: Pose) -> bool:
    """True iff the two shape volumes intersect (touching counts)."""
    if isinstance(a, Sphere):
        if isinstance(b, Sphere):
            d = float(np.linalg.norm(pose_a.position - pose_b.position))
            return d <= a.radius + b.radius
        if isinstance(b, Aabb):
            d = kernels.dist_point_aabb(pose_a.position, pose_b.position, b.half_extents)
            return d <= a.radius
        if isinstance(b, Capsule):
            s0, s1 = _capsule_segment(b, pose_b)
            return kernels.dist_point_segment(pose_a.position, s0, s1) <= a.radius + b.radius
    elif isinstance(a, Capsule):
        if isinstance(b, Capsule):
            a0, a1 = _capsule_segment(a, pose_a)
            b0, b1 = _capsule_segment(b, pose_b)
            return kernels.dist_segment_segment(a0, a1, b0, b1) <= a.radius + b.radius
        if isinstance(b, Aabb):
            a0, a1 = _capsule_segment(a, pose_a)
            return kernels.dist_segment_aabb(a0, a1, pose_b.position, b.half_extents) <= a.radius
        return collide(b, pose_b, a, pose_a)
    elif isinstance(a, Aabb):
        if isinstance(b, Aabb):
            gap = np.abs(pose_a.position - pose_b.position) - (a.half_extents + b.half_extents)
            return bool(np.all(gap <= 0.0))
        return collide(b, pose_b, a, pose_a)
    raise TypeError(f"unsupported shape pair {type(a).__name__}/{type(b).__name__}")


class World:
    """Registry of workspace objects, owned by the simulation loop.

    `intervention_sink` is called with (object_id, pose) whenever a pose
    update is tagged as a human intervention, so metrics can count it.
    """

    def __init__(self):
        self._objects: dict[str, WorldObject] = {}
        self.calibration: CalibrationResult | None = None
        self.intervention_sink: Callable[[str, Pose], None] | None = None
        self._revision = 0
        self._geom_rev = -1
        self._geom: tuple | None = None

    def __contains__(self, object_id: str) -> bool:
        return object_id in self._objects

    def __len__(self) -> int:
        return len(self._objects)

    def ids(self) -> list[str]:
        return list(self._objects)

    def objects(self) -> list[WorldObject]:
        return list(self._objects.values())

    def get(self, object_id: str) -> WorldObject:
        try:
            return self._objects[object_id]
        except KeyError:
            raise UnknownId(object_id) from None

    def register_object(self, obj: WorldObject) -> None:
        if obj.id in self._objects:
            raise DuplicateId(obj.id)
        self._objects[obj.id] = obj
        self._revision += 1

    def object_pose(self, object_id: str) -> Pose:
        return self.get(object_id).pose

    def update_object_pose(self, object_id: str, pose: Pose, source: str = "plan") -> None:
        if source not in ("plan", "intervention"):
            raise ValueError(f"source must be 'plan' or 'intervention', got {source!r}")
        obj = self.get(object_id)
        obj.pose = pose
        self._revision += 1
        if source == "intervention" and self.intervention_sink is not None:
            self.intervention_sink(object_id, pose)

    def geometry(self) -> tuple[list[str], np.ndarray, np.ndarray]:
        """(ids, type codes, packed shape rows) for the fused contact kernel;
        rebuilt lazily when any pose or the registry changes."""
        if self._geom_rev != self._revision:
            ids = list(self._objects)
            k = len(ids)
            types = np.empty(k, dtype=np.int32)
            data = np.zeros((k, 11))
            for j, oid in enumerate(ids):
                obj = self._objects[oid]
                pos = obj.pose.position
                shape = obj.shape
                data[j, 7] = shape.bounding_radius()
                data[j, 8:11] = pos
                if isinstance(shape, Sphere):
                    types[j] = 0
                    data[j, 0:3] = pos
                    data[j, 6] = shape.radius
                elif isinstance(shape, Aabb):
                    types[j] = 1
                    data[j, 0:3] = pos
                    data[j, 3:6] = shape.half_extents
                else:
                    types[j] = 2
                    a, b = _capsule_segment(shape, obj.pose)
                    data[j, 0:3] = a
                    data[j, 3:6] = b
                    data[j, 6] = shape.radius
            self._geom = (ids, types, data)
            self._geom_rev = self._revision
        return self._geom

    def calibrate(
        self, marker_pose_in_viewer: Transform, marker_to_base: Transform, timestamp: float = 0.0
    ) -> CalibrationResult:
        """Anchor the robot base in the viewer frame from one marker sighting.

        Single-shot per session: a later call replaces the anchor.
        """
        result = CalibrationResult(
            base_in_viewer=marker_pose_in_viewer @ marker_to_base,
            marker_pose_used=marker_pose_in_viewer,
            timestamp=timestamp,
        )
        self.calibration = result
        return result

    def to_dict(self) -> dict:
        return {"objects": [o.to_dict() for o in self._objects.values()]}

    @staticmethod
    def from_dict(d: dict) -> "World":
        world = World()
        for od in d.get("objects", []):
            world.register_object(WorldObject.from_dict(od))
        return world


def load_world(path: str | Path) -> World:
    with open(path, encoding="utf-8") as fh:
        return World.from_dict(json.load(fh))


def arm_link_segments(model: RobotModel, q) -> list[tuple[np.ndarray, np.ndarray]]:
    """World-frame segments between consecutive chain frame origins.

    Segment k (1-based link index k) connects frame k-1 to frame k.
    """
    frames = model.frames(q)
    origins = frames[:, :3, 3]
    return [(origins[i - 1], origins[i]) for i in range(1, len(origins))]


def arm_collision(
    model: RobotModel,
    q,
    world: World,
    link_radius: float = DEFAULT_LINK_RADIUS,
    exclude: tuple[str, ...] = (),
    frames: np.ndarray | None = None,
) -> list[tuple[int, str]]:
    """Every (link_index, object_id) overlap of the arm against the world.

    Each link is approximated as a capsule of `link_radius` between
    consecutive DH frame origins (link i joins frames i-1 and i). Objects
    whose id is in `exclude` (e.g. a grasped object) are skipped. Pass
    precomputed `frames` to avoid recomputing forward kinematics.
    """
    if frames is None:
        frames = model.frames(q)
    origins = np.ascontiguousarray(frames[:, :3, 3])
    ids, types, data = world.geometry()
    if not ids:
        return []
    skip = np.zeros(len(ids), dtype=np.uint8)
    for name in exclude:
        if name in world:
            skip[ids.index(name)] = 1
    return [
        (link, ids[j])
        for link, j in kernels.arm_world_contacts(origins, link_radius, types, data, skip)
    ]
