"""Robot body description: five expressive joints, an LCD face, and a
minimal kinematic chain for visualization.

The description is a single JSON document (the robot description file)
loaded by the simulator, the expression engine, and the twin UI, so limit
values exist in exactly one place. Nothing here knows about dynamics or
collision; the chain exists to pose simple link shapes in a viewport.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Iterable, Mapping

import numpy as np

from .errors import MError


class ModelError(MError):
    pass


class MissingJoint(ModelError, KeyError):
    pass


class JointId(str, Enum):
    """The five expressive degrees of freedom, in canonical order."""

    BASE_YAW = "base_yaw"
    HEAD_PITCH = "head_pitch"
    HEAD_YAW = "head_yaw"
    LEFT_ARM = "left_arm"
    RIGHT_ARM = "right_arm"


JOINT_ORDER: tuple[JointId, ...] = (
    JointId.BASE_YAW, JointId.HEAD_PITCH, JointId.HEAD_YAW,
    JointId.LEFT_ARM, JointId.RIGHT_ARM)


@dataclass(frozen=True)
class JointLimits:
    min_rad: float
    max_rad: float
    v_max: float  # rad/s

    def __post_init__(self):
        if not self.min_rad < self.max_rad:
            raise ModelError(f"limits require min < max, got "
                             f"[{self.min_rad}, {self.max_rad}]")
        if not self.v_max > 0:
            raise ModelError(f"v_max must be positive, got {self.v_max}")

    def clamp(self, value: float) -> float:
        return min(self.max_rad, max(self.min_rad, value))


@dataclass(frozen=True)
class LinkGeometry:
    """Where a joint's child link attaches and how it may rotate."""

    parent: str                       # parent link name
    child: str                        # child link name
    origin: tuple[float, float, float]  # offset in parent frame, meters
    axis: tuple[float, float, float]    # rotation axis, unit, child frame
    shape: str                        # box | cylinder, for the viewport
    size: tuple[float, float, float]


@dataclass(frozen=True)
class DisplaySpec:
    width_px: int
    height_px: int
    expressions: tuple[str, ...]


@dataclass(frozen=True)
class JointState:
    """Snapshot of all five joints at one monotonic instant."""

    t_mono: int
    position: Mapping[JointId, float]
    velocity: Mapping[JointId, float]

    def validate(self, desc: "RobotDescription") -> None:
        for j in JOINT_ORDER:
            lim = desc.joints[j]
            if not lim.min_rad <= self.position[j] <= lim.max_rad:
                raise ModelError(
                    f"{j.value} position {self.position[j]} outside limits")
            if abs(self.velocity[j]) > lim.v_max * (1 + 1e-9):
                raise ModelError(
                    f"{j.value} velocity {self.velocity[j]} exceeds v_max")

    def to_payload(self) -> dict:
        return {
            "t_mono": self.t_mono,
            "position": {j.value: self.position[j] for j in JOINT_ORDER},
            "velocity": {j.value: self.velocity[j] for j in JOINT_ORDER},
        }

    @classmethod
    def from_payload(cls, payload: Mapping) -> "JointState":
        return cls(
            t_mono=payload["t_mono"],
            position={JointId(k): v for k, v in payload["position"].items()},
            velocity={JointId(k): v for k, v in payload["velocity"].items()},
        )


class RobotDescription:
    """Immutable source of truth for joint limits, link layout, and the face
    display. The kinematic tree is rooted at `base_link`."""

    ROOT_LINK = "base_link"

    def __init__(self, joints: Mapping[JointId, JointLimits],
                 geometry: Mapping[JointId, LinkGeometry],
                 display: DisplaySpec,
                 name: str = "m"):
        missing = [j for j in JOINT_ORDER if j not in joints]
        if missing:
            raise ModelError(f"description missing joints: {missing}")
        extra = [j for j in joints if j not in JOINT_ORDER]
        if extra:
            raise ModelError(f"unknown joints in description: {extra}")
        if set(geometry) != set(JOINT_ORDER):
            raise ModelError("geometry must cover exactly the five joints")
        self.name = name
        self.joints = dict(joints)
        self.geometry = dict(geometry)
        self.display = display
        self._check_tree()

    def _check_tree(self) -> None:
        links = {self.ROOT_LINK}
        pending = dict(self.geometry)
        # children become available parents as the tree grows from the root
        while pending:
            attached = [j for j, g in pending.items() if g.parent in links]
            if not attached:
                raise ModelError("kinematic tree is not rooted at base_link")
            for j in attached:
                child = pending.pop(j).child
                if child in links:
                    raise ModelError(f"duplicate link name: {child}")
                links.add(child)
        self.link_names = tuple(sorted(links))

    # -- limits -------------------------------------------------------------

    def limits(self, joint: JointId) -> JointLimits:
        return self.joints[joint]

    def rest_pose(self) -> dict[JointId, float]:
        return {j: self.joints[j].clamp(0.0) for j in JOINT_ORDER}

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "joints": {
                j.value: {
                    "min": self.joints[j].min_rad,
                    "max": self.joints[j].max_rad,
                    "v_max": self.joints[j].v_max,
                    "parent": self.geometry[j].parent,
                    "child": self.geometry[j].child,
                    "origin": list(self.geometry[j].origin),
                    "axis": list(self.geometry[j].axis),
                    "shape": self.geometry[j].shape,
                    "size": list(self.geometry[j].size),
                } for j in JOINT_ORDER},
            "display": {
                "width_px": self.display.width_px,
                "height_px": self.display.height_px,
                "expressions": list(self.display.expressions),
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "RobotDescription":
        joints: dict[JointId, JointLimits] = {}
        geometry: dict[JointId, LinkGeometry] = {}
        for name, spec in data["joints"].items():
            jid = JointId(name)
            joints[jid] = JointLimits(spec["min"], spec["max"], spec["v_max"])
            geometry[jid] = LinkGeometry(
                parent=spec["parent"], child=spec["child"],
                origin=tuple(spec["origin"]), axis=tuple(spec["axis"]),
                shape=spec["shape"], size=tuple(spec["size"]))
        disp = data["display"]
        display = DisplaySpec(disp["width_px"], disp["height_px"],
                              tuple(disp["expressions"]))
        return cls(joints, geometry, display, name=data.get("name", "m"))

    @classmethod
    def load(cls, path: str) -> "RobotDescription":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def default(cls) -> "RobotDescription":
        text = resources.files("mbot.assets").joinpath("description.json") \
            .read_text(encoding="utf-8")
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# operations

def clamp(desc: RobotDescription,
          q: Mapping[JointId, float]) -> dict[JointId, float]:
    """Clamp a full joint position map into the description limits."""
    out: dict[JointId, float] = {}
    for j in JOINT_ORDER:
        if j not in q:
            raise MissingJoint(f"position map missing {j.value}")
        out[j] = desc.joints[j].clamp(q[j])
    return out


def _rotation(axis: tuple[float, float, float], angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    x, y, z = axis
    c, s = math.cos(angle), math.sin(angle)
    cc = 1.0 - c
    return np.array([
        [c + x * x * cc, x * y * cc - z * s, x * z * cc + y * s],
        [y * x * cc + z * s, c + y * y * cc, y * z * cc - x * s],
        [z * x * cc - y * s, z * y * cc + x * s, c + z * z * cc],
    ])


def joint_transform(geom: LinkGeometry, angle: float) -> np.ndarray:
    """Homogeneous transform from parent frame to the joint's child frame."""
    t = np.eye(4)
    t[:3, :3] = _rotation(geom.axis, angle)
    t[:3, 3] = geom.origin
    return t


def forward_pose(desc: RobotDescription,
                 q: Mapping[JointId, float]) -> dict[str, np.ndarray]:
    """Pose of every link as a 4x4 transform in the base frame."""
    for j in JOINT_ORDER:
        if j not in q:
            raise MissingJoint(f"position map missing {j.value}")
    poses: dict[str, np.ndarray] = {desc.ROOT_LINK: np.eye(4)}
    pending = dict(desc.geometry)
    while pending:
        ready = [j for j, g in pending.items() if g.parent in poses]
        for j in ready:
            g = pending.pop(j)
            poses[g.child] = poses[g.parent] @ joint_transform(g, q[j])
    return poses


def chain_lipschitz_constant(desc: RobotDescription) -> float:
    """Upper bound L with max-link |pose(q1) - pose(q2)|_F <= L * |q1 - q2|_inf.

    Each joint contributes at most (sqrt(2) + reach) per radian of change
    (sqrt(2) bounding the rotation block, reach bounding translation of any
    downstream point); summing over joints bounds the infinity-norm case.
    A 2x margin absorbs the crude geometry estimate.
    """
    reach = sum(math.hypot(*g.origin) + math.hypot(*g.size)
                for g in desc.geometry.values())
    per_joint = math.sqrt(2.0) + reach
    return 2.0 * per_joint * len(JOINT_ORDER)


def pose_distance(a: dict[str, np.ndarray], b: dict[str, np.ndarray]) -> float:
    """Max Frobenius distance between matching link transforms."""
    return max(float(np.linalg.norm(a[k] - b[k])) for k in a)
