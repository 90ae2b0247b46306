import math

import numpy as np
import pytest

from hrcsim.geometry import Transform
from hrcsim.kinematics import JointSpec, RobotModel


def make_planar2(link: float = 1.0) -> RobotModel:
    """Two-link planar arm in the xy plane (the textbook check case)."""
    joints = [
        JointSpec(f"j{i}", dh=(link, 0.0, 0.0, 0.0), limits=(-math.pi, math.pi), v_max=1.0, a_max=2.0)
        for i in (1, 2)
    ]
    return RobotModel("planar2", joints)


def make_sevendof(base: Transform | None = None) -> RobotModel:
    """7-DOF spherical-revolute-spherical arm, total reach 1.18 m."""
    dh = [
        (0.0, -math.pi / 2, 0.28, 0.0),
        (0.0, math.pi / 2, 0.0, 0.0),
        (0.0, -math.pi / 2, 0.36, 0.0),
        (0.0, math.pi / 2, 0.0, 0.0),
        (0.0, -math.pi / 2, 0.36, 0.0),
        (0.0, math.pi / 2, 0.0, 0.0),
        (0.0, 0.0, 0.18, 0.0),
    ]
    joints = [
        JointSpec(f"j{i + 1}", dh=d, limits=(-2.8, 2.8), v_max=1.8, a_max=4.0)
        for i, d in enumerate(dh)
    ]
    return RobotModel("sevendof", joints, base_frame=base or Transform.identity())


@pytest.fixture
def planar2():
    return make_planar2()


@pytest.fixture
def sevendof():
    return make_sevendof()


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
