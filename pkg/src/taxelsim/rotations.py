"""Rigid transforms and rotation representations.

Matrix products are written as explicit sums of elementwise products rather
than ``@``/BLAS so that a batched call and a loop of single calls give
bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from taxelsim.errors import DegenerateInputError, InvalidRotationError

ENCODE_TOLERANCE = 1e-6


def matmul33(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Multiply stacks of 3x3 matrices, broadcasting leading dimensions."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return (
        a[..., :, 0, None] * b[..., None, 0, :]
        + a[..., :, 1, None] * b[..., None, 1, :]
        + a[..., :, 2, None] * b[..., None, 2, :]
    )


def rotate(rotation: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Apply ``rotation`` (..., 3, 3) to ``vectors`` (..., 3)."""
    r = np.asarray(rotation, dtype=float)
    v = np.asarray(vectors, dtype=float)
    return r[..., :, 0] * v[..., 0, None] + r[..., :, 1] * v[..., 1, None] + r[..., :, 2] * v[..., 2, None]


def transpose33(rotation: np.ndarray) -> np.ndarray:
    return np.swapaxes(np.asarray(rotation, dtype=float), -1, -2)


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.stack(
        [
            a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
            a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
            a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
        ],
        axis=-1,
    )


def dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def norm3(v: np.ndarray) -> np.ndarray:
    return np.sqrt(dot(v, v))


def is_rotation(matrix: np.ndarray, tol: float = 1e-9) -> bool:
    """Return True when every matrix in the stack is orthonormal with det +1."""
    m = np.asarray(matrix, dtype=float)
    if m.shape[-2:] != (3, 3) or not np.all(np.isfinite(m)):
        return False
    gram = matmul33(transpose33(m), m)
    if np.max(np.abs(gram - np.eye(3))) > tol:
        return False
    return bool(np.all(np.abs(np.linalg.det(m) - 1.0) <= tol))


def axis_angle_matrix(axis: np.ndarray, angle: np.ndarray) -> np.ndarray:
    """Rodrigues' formula, batched over ``angle`` (axis broadcasts).

    ``axis`` must be unit length.
    """
    axis = np.asarray(axis, dtype=float)
    angle = np.asarray(angle, dtype=float)
    c = np.cos(angle)[..., None, None]
    s = np.sin(angle)[..., None, None]
    x, y, z = axis[..., 0], axis[..., 1], axis[..., 2]
    zero = np.zeros_like(x)
    k = np.stack(
        [
            np.stack([zero, -z, y], axis=-1),
            np.stack([z, zero, -x], axis=-1),
            np.stack([-y, x, zero], axis=-1),
        ],
        axis=-2,
    )
    outer = axis[..., :, None] * axis[..., None, :]
    return c * np.eye(3) + s * k + (1.0 - c) * outer


def quarter_turn(axis: np.ndarray) -> np.ndarray:
    """+90 degree rotation about ``axis``.

    Entries are snapped to exact 0/±1 for coordinate axes so that four
    compositions return exactly to the starting matrix.
    """
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    m = axis_angle_matrix(axis, np.pi / 2.0)
    snapped = np.round(m)
    close = np.abs(m - snapped) < 1e-12
    return np.where(close, snapped, m)


@dataclass(frozen=True)
class Transform:
    """Rigid transform: ``x_parent = rotation @ x_child + translation``."""

    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))

    @classmethod
    def identity(cls) -> Transform:
        return cls()

    @classmethod
    def from_dict(cls, data: dict) -> Transform:
        """Build from ``{"translation": [...], "rotation": [[...]] | "rpy": [...]}``."""
        translation = data.get("translation", [0.0, 0.0, 0.0])
        if "rotation" in data:
            rotation = np.asarray(data["rotation"], dtype=float)
        elif "rpy" in data:
            rotation = Rotation.from_euler("xyz", data["rpy"]).as_matrix()
        else:
            rotation = np.eye(3)
        return cls(translation=translation, rotation=rotation)

    def validate(self, tol: float = 1e-9) -> None:
        if not is_rotation(self.rotation, tol):
            raise InvalidRotationError(f"transform rotation is not in SO(3) within {tol}")

    def compose(self, other: Transform) -> Transform:
        """Return ``self ∘ other``."""
        return Transform(
            translation=rotate(self.rotation, other.translation) + self.translation,
            rotation=matmul33(self.rotation, other.rotation),
        )

    def apply(self, points: np.ndarray) -> np.ndarray:
        return rotate(self.rotation, points) + self.translation

    def apply_vector(self, vectors: np.ndarray) -> np.ndarray:
        return rotate(self.rotation, vectors)

    def inverse(self) -> Transform:
        rt = transpose33(self.rotation)
        return Transform(translation=-rotate(rt, self.translation), rotation=rt)

    def inverse_apply(self, points: np.ndarray) -> np.ndarray:
        return rotate(transpose33(self.rotation), np.asarray(points, dtype=float) - self.translation)


@dataclass(frozen=True)
class Rotation6D:
    """First two columns of a rotation matrix, before orthonormalization."""

    a1: np.ndarray
    a2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a1", np.asarray(self.a1, dtype=float).reshape(3))
        object.__setattr__(self, "a2", np.asarray(self.a2, dtype=float).reshape(3))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.a1, self.a2])

    @classmethod
    def from_array(cls, values: np.ndarray) -> Rotation6D:
        values = np.asarray(values, dtype=float)
        return cls(a1=values[:3], a2=values[3:6])


@dataclass(frozen=True)
class Quaternion:
    """Scalar-first unit quaternion."""

    w: float
    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z], dtype=float)

    def __neg__(self) -> Quaternion:
        return Quaternion(-self.w, -self.x, -self.y, -self.z)

    def to_matrix(self) -> np.ndarray:
        return quaternion_to_matrix(self.as_array())

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> Quaternion:
        return cls(*matrix_to_quaternion(matrix))


def quaternion_to_matrix(q: np.ndarray) -> np.ndarray:
    """Scalar-first quaternion(s) (..., 4) to rotation matrices (..., 3, 3)."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack(
        [
            np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], axis=-1),
            np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], axis=-1),
            np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], axis=-1),
        ],
        axis=-2,
    )


def matrix_to_quaternion(matrix: np.ndarray) -> np.ndarray:
    """Rotation matrices to scalar-first unit quaternions on the w >= 0 hemisphere."""
    m = np.asarray(matrix, dtype=float)
    xyzw = Rotation.from_matrix(m.reshape(-1, 3, 3)).as_quat(canonical=True)
    wxyz = np.concatenate([xyzw[:, 3:], xyzw[:, :3]], axis=-1)
    return wxyz.reshape(m.shape[:-2] + (4,))


def encode6d_batch(matrix: np.ndarray) -> np.ndarray:
    """Stack of rotation matrices to (..., 6) arrays ``[a1, a2]``, no validation."""
    m = np.asarray(matrix, dtype=float)
    return np.concatenate([m[..., :, 0], m[..., :, 1]], axis=-1)


def encode6d(rotation: np.ndarray) -> Rotation6D:
    """Encode a rotation matrix as its first two columns.

    Raises:
        InvalidRotationError: if the input is not orthonormal with det +1
            within 1e-6.
    """
    m = np.asarray(rotation, dtype=float)
    if m.shape != (3, 3) or not is_rotation(m, ENCODE_TOLERANCE):
        raise InvalidRotationError(f"encode6d expects an SO(3) matrix within {ENCODE_TOLERANCE}")
    return Rotation6D(a1=m[:, 0].copy(), a2=m[:, 1].copy())


def decode6d_batch(values: np.ndarray) -> np.ndarray:
    """Gram-Schmidt decode of (..., 6) arrays into rotation matrices.

    Raises:
        DegenerateInputError: if any ``a1`` is zero or parallel to ``a2``.
    """
    values = np.asarray(values, dtype=float)
    a1 = values[..., 0:3]
    a2 = values[..., 3:6]
    n1 = norm3(a1)
    if np.any(~(n1 > 1e-12)):
        raise DegenerateInputError("decode6d: a1 must be nonzero")
    if np.any(~(norm3(cross(a1, a2)) > 1e-12 * n1 * norm3(a2))):
        raise DegenerateInputError("decode6d: a1 and a2 must be linearly independent")
    b1 = a1 / n1[..., None]
    u2 = a2 - dot(b1, a2)[..., None] * b1
    b2 = u2 / norm3(u2)[..., None]
    b3 = cross(b1, b2)
    return np.stack([b1, b2, b3], axis=-1)


def decode6d(r: Rotation6D) -> np.ndarray:
    """Reconstruct the rotation matrix whose first two columns ``r`` approximates."""
    return decode6d_batch(r.as_array())


def orthonormalize(matrix: np.ndarray) -> np.ndarray:
    """Project nearly-orthonormal matrices back onto SO(3) via the 6D decode."""
    return decode6d_batch(encode6d_batch(matrix))


def rot_distance_batch(r1: np.ndarray, r2: np.ndarray) -> np.ndarray:
    """Geodesic angle between rotation stacks, in radians."""
    m = matmul33(transpose33(r1), r2)
    cos_angle = np.clip((m[..., 0, 0] + m[..., 1, 1] + m[..., 2, 2] - 1.0) / 2.0, -1.0, 1.0)
    skew = np.stack(
        [m[..., 2, 1] - m[..., 1, 2], m[..., 0, 2] - m[..., 2, 0], m[..., 1, 0] - m[..., 0, 1]],
        axis=-1,
    )
    sin_angle = np.clip(norm3(skew) / 2.0, 0.0, 1.0)
    return np.clip(np.arctan2(sin_angle, cos_angle), 0.0, np.pi)


def rot_distance(r1: np.ndarray, r2: np.ndarray) -> float:
    """Geodesic distance on SO(3): the angle of ``r1ᵀ r2`` in [0, π]."""
    for r in (r1, r2):
        if not is_rotation(r, ENCODE_TOLERANCE):
            raise InvalidRotationError("rot_distance expects SO(3) matrices")
    return float(rot_distance_batch(r1, r2))


def rotation_vector(matrix: np.ndarray) -> np.ndarray:
    """Axis-angle vectors (..., 3) of rotation matrices."""
    m = np.asarray(matrix, dtype=float)
    return Rotation.from_matrix(m.reshape(-1, 3, 3)).as_rotvec().reshape(m.shape[:-2] + (3,))


def exp_map(omega: np.ndarray) -> np.ndarray:
    """Rotation matrices for axis-angle vectors (..., 3)."""
    omega = np.asarray(omega, dtype=float)
    angle = norm3(omega)
    safe = np.where(angle > 0.0, angle, 1.0)
    axis = np.where((angle > 0.0)[..., None], omega / safe[..., None], np.array([1.0, 0.0, 0.0]))
    return axis_angle_matrix(axis, angle)
