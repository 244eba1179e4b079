"""Rigid transforms, twists, and serial-arm kinematics.

Frame convention: ``Pose(from_frame="base", to_frame="probe")`` is the pose of
the probe frame expressed in the base frame (often written T_p^b). Its matrix
maps probe coordinates into base coordinates, so poses chain left to right:
``compose(base->flange, flange->probe) == base->probe``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.transform import Rotation

FRAMES = ("base", "flange", "probe")

_ORTHO_TOL = 1e-9


class FrameError(ValueError):
    """Raised when frame tags of poses or twists do not line up."""


class NumericError(ValueError):
    """Raised on non-finite inputs to an integrator."""


class SingularityError(np.linalg.LinAlgError):
    """Raised when an undamped pseudo-inverse hits a singular J J^T."""


def skew(w) -> np.ndarray:
    """Return the 3x3 cross-product matrix ``[w]`` so that ``[w] @ x == w x x``."""
    return np.array([[0.0, -w[2], w[1]],
                     [w[2], 0.0, -w[0]],
                     [-w[1], w[0], 0.0]])


def exp_so3(w) -> np.ndarray:
    """Rodrigues' formula for the rotation vector ``w``."""
    x, y, z = (float(c) for c in w)
    theta = math.sqrt(x * x + y * y + z * z)
    if theta < 1e-14:
        return _I3 + skew((x, y, z))
    x, y, z = x / theta, y / theta, z / theta
    s, c = math.sin(theta), math.cos(theta)
    C = 1.0 - c
    return np.array([[c + x * x * C, x * y * C - z * s, x * z * C + y * s],
                     [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
                     [z * x * C - y * s, z * y * C + x * s, c + z * z * C]])


def orthonormalize(R: np.ndarray) -> np.ndarray:
    """Project a near-rotation matrix onto SO(3) (nearest in Frobenius norm)."""
    u, _, vt = np.linalg.svd(R)
    out = u @ vt
    if np.linalg.det(out) < 0:
        u[:, -1] = -u[:, -1]
        out = u @ vt
    return out


_I3 = np.eye(3)


def _rotation_drift(R: np.ndarray) -> float:
    return float(np.abs(R.T @ R - _I3).max())


def _det3(R: np.ndarray) -> float:
    return float(R[0] @ cross3(R[1], R[2]))


def cross3(a, b) -> np.ndarray:
    """Cross product of two 3-vectors (much cheaper than ``np.cross`` for single pairs)."""
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


def _check_frame(name: str) -> str:
    if name not in FRAMES:
        raise FrameError(f"unknown frame tag {name!r}; expected one of {FRAMES}")
    return name


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform with frame tags; see the module docstring for direction."""

    rotation: np.ndarray
    translation: np.ndarray
    from_frame: str = "base"
    to_frame: str = "probe"

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        p = np.array(self.translation, dtype=float).reshape(3)
        if not (np.isfinite(R).all() and np.isfinite(p).all()):
            raise NumericError("pose contains non-finite values")
        if _rotation_drift(R) > _ORTHO_TOL or _det3(R) <= 0:
            raise ValueError("rotation is not a proper orthonormal matrix")
        R.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", p)
        _check_frame(self.from_frame)
        _check_frame(self.to_frame)

    @classmethod
    def _trusted(cls, R: np.ndarray, p: np.ndarray, from_frame: str, to_frame: str) -> "Pose":
        """Skip validation; callers guarantee a proper rotation and finite values."""
        self = object.__new__(cls)
        R.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", p)
        object.__setattr__(self, "from_frame", from_frame)
        object.__setattr__(self, "to_frame", to_frame)
        return self

    @classmethod
    def identity(cls, frame: str = "base") -> "Pose":
        return cls(np.eye(3), np.zeros(3), frame, frame)

    @classmethod
    def from_matrix(cls, T, from_frame: str = "base", to_frame: str = "probe") -> "Pose":
        T = np.asarray(T, dtype=float)
        return cls(T[:3, :3], T[:3, 3], from_frame, to_frame)

    @classmethod
    def from_rpy(cls, translation, rpy, from_frame: str = "base",
                 to_frame: str = "probe") -> "Pose":
        """Build from roll/pitch/yaw (extrinsic x-y-z, radians)."""
        R = Rotation.from_euler("xyz", rpy).as_matrix()
        return cls(orthonormalize(R), translation, from_frame, to_frame)

    def as_matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def inverse(self) -> "Pose":
        Rt = self.rotation.T
        return Pose(Rt, -Rt @ self.translation, self.to_frame, self.from_frame)

    def apply(self, points) -> np.ndarray:
        """Map points (..., 3) from ``to_frame`` coordinates into ``from_frame``."""
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def quaternion_wxyz(self) -> np.ndarray:
        x, y, z, w = Rotation.from_matrix(self.rotation).as_quat()
        return np.array([w, x, y, z])

    def __repr__(self) -> str:
        return (f"Pose({self.from_frame}->{self.to_frame}, "
                f"p={np.round(self.translation, 6).tolist()})")


def compose_pose(a: Pose, b: Pose) -> Pose:
    """Chain ``a`` (X->Y) with ``b`` (Y->Z) into X->Z."""
    if a.to_frame != b.from_frame:
        raise FrameError(f"cannot compose {a.from_frame}->{a.to_frame} "
                         f"with {b.from_frame}->{b.to_frame}")
    R = a.rotation @ b.rotation
    if _rotation_drift(R) > _ORTHO_TOL:
        R = orthonormalize(R)
    return Pose(R, a.rotation @ b.translation + a.translation, a.from_frame, b.to_frame)


@dataclass(frozen=True, eq=False)
class Twist:
    """Linear (m/s) and angular (rad/s) velocity, tagged with its frame."""

    linear: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular: np.ndarray = field(default_factory=lambda: np.zeros(3))
    frame: str = "probe"

    def __post_init__(self):
        v = np.array(self.linear, dtype=float).reshape(3)
        w = np.array(self.angular, dtype=float).reshape(3)
        object.__setattr__(self, "linear", v)
        object.__setattr__(self, "angular", w)
        _check_frame(self.frame)

    @classmethod
    def from_vector(cls, xi, frame: str = "probe") -> "Twist":
        xi = np.asarray(xi, dtype=float)
        return cls(xi[:3], xi[3:], frame)

    @classmethod
    def zero(cls, frame: str = "probe") -> "Twist":
        return cls(np.zeros(3), np.zeros(3), frame)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.linear, self.angular])

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.linear).all() and np.isfinite(self.angular).all())

    def __add__(self, other: "Twist") -> "Twist":
        if other.frame != self.frame:
            raise FrameError(f"cannot add twists in {self.frame} and {other.frame}")
        return Twist(self.linear + other.linear, self.angular + other.angular, self.frame)

    def __mul__(self, k: float) -> "Twist":
        return Twist(self.linear * k, self.angular * k, self.frame)

    __rmul__ = __mul__


def adjoint(pose: Pose) -> np.ndarray:
    """6x6 adjoint ``[[R, [p]R], [0, R]]`` mapping probe twists to base twists."""
    R, p = pose.rotation, pose.translation
    ad = np.zeros((6, 6))
    ad[:3, :3] = R
    ad[:3, 3:] = skew(p) @ R
    ad[3:, 3:] = R
    return ad


def transform_twist(t: Twist, pose: Pose) -> Twist:
    """Express a probe-frame twist in the base frame.

    ``pose`` is base->probe. The result is the spatial twist
    ``v_b = R v_p + p x (R w_p)``, ``w_b = R w_p``.
    """
    if t.frame != "probe":
        raise FrameError(f"expected a probe-frame twist, got {t.frame!r}")
    if pose.from_frame != "base" or pose.to_frame != "probe":
        raise FrameError(f"expected a base->probe pose, got {pose.from_frame}->{pose.to_frame}")
    R, p = pose.rotation, pose.translation
    w = R @ t.angular
    return Twist(R @ t.linear + cross3(p, w), w, "base")


def point_velocity(t: Twist, point) -> np.ndarray:
    """Velocity of a body point at ``point`` (base coordinates) under spatial twist ``t``."""
    if t.frame != "base":
        raise FrameError(f"expected a base-frame twist, got {t.frame!r}")
    return t.linear + cross3(t.angular, np.asarray(point, dtype=float))


def integrate_pose(pose: Pose, t: Twist, dt: float) -> Pose:
    """Advance ``pose`` by one step of a base-frame velocity.

    ``t.linear`` is taken as the velocity of the pose origin and ``t.angular``
    as the angular velocity, both in base coordinates. Translation is updated
    to first order, rotation by the exact exponential of ``w dt`` followed by
    re-orthonormalization.
    """
    if t.frame != pose.from_frame:
        raise FrameError(f"twist frame {t.frame!r} does not match pose frame {pose.from_frame!r}")
    if not (0.0 < dt <= 0.01):
        raise ValueError(f"dt must be in (0, 0.01] s, got {dt}")
    if not t.is_finite():
        raise NumericError("non-finite twist")
    R = exp_so3(t.angular * dt) @ pose.rotation
    if _rotation_drift(R) > 1e-12:
        R = orthonormalize(R)
    return Pose._trusted(R, pose.translation + t.linear * dt, pose.from_frame, pose.to_frame)


@dataclass(frozen=True, eq=False)
class Joint:
    """Revolute joint: fixed transform from the parent frame, then rotation about ``axis``."""

    origin: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        object.__setattr__(self, "origin", np.array(self.origin, dtype=float).reshape(3))
        object.__setattr__(self, "rotation", orthonormalize(np.array(self.rotation, dtype=float)))
        a = np.array(self.axis, dtype=float).reshape(3)
        object.__setattr__(self, "axis", a / np.linalg.norm(a))


def _mdh_joint(a: float, alpha: float, d: float) -> Joint:
    # modified DH: RotX(alpha) TransX(a) TransZ(d), then RotZ(q)
    Rx = exp_so3([alpha, 0.0, 0.0])
    return Joint(origin=np.array([a, 0.0, 0.0]) + Rx @ np.array([0.0, 0.0, d]), rotation=Rx)


# Franka Panda modified-DH table (a, alpha, d), joints 1..7, then the flange.
PANDA_MDH = [
    (0.0, 0.0, 0.333),
    (0.0, -np.pi / 2, 0.0),
    (0.0, np.pi / 2, 0.316),
    (0.0825, np.pi / 2, 0.0),
    (-0.0825, -np.pi / 2, 0.384),
    (0.0, np.pi / 2, 0.0),
    (0.088, np.pi / 2, 0.0),
]
PANDA_FLANGE_D = 0.107
PANDA_READY = np.array([0.0, -np.pi / 4, 0.0, -3 * np.pi / 4, 0.0, np.pi / 2, np.pi / 4])


@dataclass(frozen=True, eq=False)
class ArmModel:
    """Serial revolute chain mounted in the base frame."""

    joints: tuple
    flange: Pose = field(default_factory=lambda: Pose.identity("flange"))
    flange_to_probe: Pose = field(
        default_factory=lambda: Pose(np.eye(3), [0.0, 0.0, 0.15], "flange", "probe"))
    mount: np.ndarray = field(default_factory=lambda: np.eye(4))
    q_home: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))
        if len(self.joints) < 1:
            raise ValueError("an arm needs at least one joint")
        if self.flange_to_probe.from_frame != "flange" or self.flange_to_probe.to_frame != "probe":
            raise FrameError("flange_to_probe must be a flange->probe pose")
        object.__setattr__(self, "mount", np.array(self.mount, dtype=float).reshape(4, 4))
        if self.q_home is None:
            object.__setattr__(self, "q_home", np.zeros(len(self.joints)))
        else:
            object.__setattr__(self, "q_home", np.array(self.q_home, dtype=float))

    @property
    def n(self) -> int:
        return len(self.joints)

    @classmethod
    def from_mdh(cls, table: Sequence, flange_d: float = 0.0, **kwargs) -> "ArmModel":
        joints = [_mdh_joint(*row) for row in table]
        flange = Pose(np.eye(3), [0.0, 0.0, flange_d], "flange", "flange")
        return cls(joints=joints, flange=flange, **kwargs)

    @classmethod
    def panda(cls, flange_to_probe: Pose | None = None, mount=None) -> "ArmModel":
        """7-DOF Panda-like arm; default mount puts the arm root 0.4 m behind the origin."""
        if flange_to_probe is None:
            # probe axis along flange z, image x rotated to undo the 45 deg flange yaw
            flange_to_probe = Pose(exp_so3([0.0, 0.0, -np.pi / 4]), [0.0, 0.0, 0.15],
                                   "flange", "probe")
        if mount is None:
            mount = np.eye(4)
            mount[:3, 3] = [-0.40, 0.0, -0.28]
        return cls.from_mdh(PANDA_MDH, PANDA_FLANGE_D, flange_to_probe=flange_to_probe,
                            mount=mount, q_home=PANDA_READY)


@dataclass
class JointState:
    q: np.ndarray
    qd: np.ndarray | None = None

    def __post_init__(self):
        self.q = np.array(self.q, dtype=float)
        self.qd = np.zeros_like(self.q) if self.qd is None else np.array(self.qd, dtype=float)
        if self.q.shape != self.qd.shape:
            raise ValueError("q and qd must have the same length")


def _q_of(arm: ArmModel, q) -> np.ndarray:
    q = np.asarray(q.q if isinstance(q, JointState) else q, dtype=float)
    if q.shape != (arm.n,):
        raise ValueError(f"expected {arm.n} joint values, got shape {q.shape}")
    return q


def _chain(arm: ArmModel, q):
    """Joint axes and origins in base coordinates, plus the flange transform."""
    T = arm.mount.copy()
    axes, origins = [], []
    for joint, qi in zip(arm.joints, q):
        Tf = np.eye(4)
        Tf[:3, :3] = joint.rotation
        Tf[:3, 3] = joint.origin
        T = T @ Tf
        axes.append(T[:3, :3] @ joint.axis)
        origins.append(T[:3, 3].copy())
        Tq = np.eye(4)
        Tq[:3, :3] = exp_so3(joint.axis * qi)
        T = T @ Tq
    T = T @ arm.flange.as_matrix()
    return np.array(axes), np.array(origins), T


def forward_kinematics(arm: ArmModel, q, flange_to_probe: Pose | None = None) -> Pose:
    """Base->probe pose at joint configuration ``q``."""
    q = _q_of(arm, q)
    _, _, T = _chain(arm, q)
    tool = arm.flange_to_probe if flange_to_probe is None else flange_to_probe
    T = T @ tool.as_matrix()
    return Pose(orthonormalize(T[:3, :3]), T[:3, 3], "base", "probe")


def geometric_jacobian(arm: ArmModel, q, flange_to_probe: Pose | None = None) -> np.ndarray:
    """6xn Jacobian of the probe point: column i is ``[z_i x (p_e - p_i); z_i]``."""
    q = _q_of(arm, q)
    axes, origins, T = _chain(arm, q)
    tool = arm.flange_to_probe if flange_to_probe is None else flange_to_probe
    p_e = T[:3, :3] @ tool.translation + T[:3, 3]
    J = np.empty((6, arm.n))
    J[:3] = np.cross(axes, p_e - origins).T
    J[3:] = axes.T
    return J


def joint_velocities(J: np.ndarray, t, damping: float = 1e-3) -> np.ndarray:
    """Damped least-squares resolution ``qd = J^T (J J^T + damping^2 I)^-1 t``.

    With ``damping == 0`` and full row rank this is the Moore-Penrose solution.
    ``t`` may be a :class:`Twist` (must be base frame) or a 6-vector.
    """
    if isinstance(t, Twist):
        if t.frame != "base":
            raise FrameError(f"joint velocities need a base-frame twist, got {t.frame!r}")
        t = t.as_vector()
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise NumericError("non-finite twist")
    if damping < 0:
        raise ValueError("damping must be >= 0")
    J = np.asarray(J, dtype=float)
    A = J @ J.T + damping ** 2 * np.eye(J.shape[0])
    if damping == 0.0:
        if np.linalg.matrix_rank(A) < A.shape[0]:
            raise SingularityError("J J^T is singular; supply damping > 0")
    return J.T @ np.linalg.solve(A, t)


def pose_error_twist(current: Pose, target: Pose) -> np.ndarray:
    """6-vector (dp, rotvec) in base coordinates taking ``current`` toward ``target``."""
    dp = target.translation - current.translation
    dR = target.rotation @ current.rotation.T
    return np.concatenate([dp, Rotation.from_matrix(dR).as_rotvec()])


def solve_ik(arm: ArmModel, target: Pose, q0=None, tol: float = 1e-10,
             max_iter: int = 200, damping: float = 1e-4,
             flange_to_probe: Pose | None = None) -> np.ndarray:
    """Iterative damped least-squares IK for the probe pose ``target``."""
    q = np.array(arm.q_home if q0 is None else q0, dtype=float)
    for _ in range(max_iter):
        cur = forward_kinematics(arm, q, flange_to_probe)
        err = pose_error_twist(cur, target)
        if np.linalg.norm(err) < tol:
            return q
        J = geometric_jacobian(arm, q, flange_to_probe)
        q = q + joint_velocities(J, err, damping)
    raise RuntimeError(f"IK did not converge (residual {np.linalg.norm(err):.3g})")
