"""Rigid-transform arithmetic in LDraw units, plus the integer quantization rules.

Rotations are proper (det +1) 3x3 float64 matrices; translations are in LDU.
The integer degree / integer LDU grid appears only at serialization
boundaries -- all internal math stays in 64-bit floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Re-orthonormalize whenever a composed rotation drifts past this.
ORTHONORMAL_TOL = 1e-9


def orthonormalize(rotation: np.ndarray) -> np.ndarray:
    """Project a near-rotation matrix onto SO(3) (polar decomposition via SVD)."""
    u, _, vt = np.linalg.svd(np.asarray(rotation, dtype=np.float64))
    if np.linalg.det(u @ vt) < 0:
        u[:, -1] = -u[:, -1]
    return u @ vt


def orthonormality_error(rotation: np.ndarray) -> float:
    """Max-abs deviation of R^T R from the identity."""
    r = np.asarray(rotation, dtype=np.float64)
    return float(np.abs(r.T @ r - np.eye(3)).max())


@dataclass(frozen=True)
class RigidTransform:
    """Proper rigid transform ``x -> rotation @ x + translation`` (LDU).

    Construction repairs small orthonormality drift (> 1e-9) by polar
    projection and rejects matrices that are not within re-projection
    distance of a proper rotation (non-finite or det <= 0).
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not (np.isfinite(r).all() and np.isfinite(t).all()):
            raise ValueError("non-finite transform")
        if np.linalg.det(r) <= 0:
            raise ValueError("rotation must have positive determinant")
        if orthonormality_error(r) > ORTHONORMAL_TOL:
            r = orthonormalize(r)
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -(rt @ self.translation))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one point (3,) or many points (n, 3)."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def rotate(self, vectors: np.ndarray) -> np.ndarray:
        """Rotate direction vectors (no translation)."""
        return np.asarray(vectors, dtype=np.float64) @ self.rotation.T

    def max_abs_diff(self, other: "RigidTransform") -> float:
        return max(
            float(np.abs(self.rotation - other.rotation).max()),
            float(np.abs(self.translation - other.translation).max()),
        )

    def is_close(self, other: "RigidTransform", tol: float = 1e-9) -> bool:
        return self.max_abs_diff(other) <= tol

    def rotation_angle_deg_to(self, other: "RigidTransform") -> float:
        """Geodesic angle between the two rotations, in degrees.

        Uses atan2 of the skew-part magnitude against the trace cosine, which
        stays well conditioned for tiny angles (acos of the trace alone
        cannot resolve below ~1e-6 degrees in float64).
        """
        e = self.rotation.T @ other.rotation
        c = (np.trace(e) - 1.0) / 2.0
        s = float(np.linalg.norm(e - e.T)) / (2.0 * math.sqrt(2.0))
        return math.degrees(math.atan2(s, min(1.0, max(-1.0, c))))


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """a after b: ``compose(a, b).apply(x) == a.apply(b.apply(x))``."""
    return RigidTransform(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def relative(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """The transform r with ``compose(a, r) == b``, i.e. a^-1 o b."""
    rt = a.rotation.T
    return RigidTransform(rt @ b.rotation, rt @ (b.translation - a.translation))


def rotation_about_axis(axis: np.ndarray, degrees: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis."""
    ax = np.asarray(axis, dtype=np.float64)
    ax = ax / np.linalg.norm(ax)
    theta = math.radians(degrees)
    k = np.array(
        [
            [0.0, -ax[2], ax[1]],
            [ax[2], 0.0, -ax[0]],
            [-ax[1], ax[0], 0.0],
        ]
    )
    return np.eye(3) + math.sin(theta) * k + (1.0 - math.cos(theta)) * (k @ k)


@dataclass(frozen=True)
class ConnectorFrame:
    """Local rigid frame of one attachment site.

    ``principal_axis`` is the rotation/slide axis, ``reference_axis`` the
    zero-yaw datum perpendicular to it. Construction renormalizes the axes
    and projects the reference axis into the plane perpendicular to the
    principal axis.
    """

    origin: np.ndarray
    principal_axis: np.ndarray
    reference_axis: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64).reshape(3)
        p = np.asarray(self.principal_axis, dtype=np.float64).reshape(3)
        r = np.asarray(self.reference_axis, dtype=np.float64).reshape(3)
        if not (np.isfinite(o).all() and np.isfinite(p).all() and np.isfinite(r).all()):
            raise ValueError("non-finite connector frame")
        pn = np.linalg.norm(p)
        if pn < 1e-9:
            raise ValueError("zero-length principal axis")
        p = p / pn
        r = r - (r @ p) * p
        rn = np.linalg.norm(r)
        if rn < 1e-9:
            raise ValueError("reference axis parallel to principal axis")
        r = r / rn
        for arr in (o, p, r):
            arr.flags.writeable = False
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "principal_axis", p)
        object.__setattr__(self, "reference_axis", r)

    def as_transform(self) -> RigidTransform:
        """Frame as a rigid transform: x column = reference, z = principal."""
        x = self.reference_axis
        z = self.principal_axis
        y = np.cross(z, x)
        return RigidTransform(np.column_stack([x, y, z]), self.origin)

    @classmethod
    def from_transform(cls, t: RigidTransform) -> "ConnectorFrame":
        return cls(t.translation, t.rotation[:, 2], t.rotation[:, 0])

    def transformed(self, t: RigidTransform) -> "ConnectorFrame":
        """This frame expressed after applying transform t."""
        return ConnectorFrame(
            t.apply(self.origin),
            t.rotate(self.principal_axis),
            t.rotate(self.reference_axis),
        )

    def is_close(self, other: "ConnectorFrame", tol: float = 1e-9) -> bool:
        return (
            np.abs(self.origin - other.origin).max() <= tol
            and np.abs(self.principal_axis - other.principal_axis).max() <= tol
            and np.abs(self.reference_axis - other.reference_axis).max() <= tol
        )


@dataclass(frozen=True)
class QuantizedParams:
    """Integer-grid edge parameters. Which fields are meaningful depends on
    the connection family's DOF spec; the rest stay at their zero values."""

    yaw_deg: int = 0
    flip: bool = False
    slide_ldu: int = 0
    euler_deg: tuple[int, int, int] | None = None

    def __post_init__(self):
        if not 0 <= self.yaw_deg < 360:
            raise ValueError(f"yaw out of range [0, 360): {self.yaw_deg}")
        if self.euler_deg is not None:
            e = tuple(int(v) for v in self.euler_deg)
            if any(not 0 <= v < 360 for v in e):
                raise ValueError(f"euler angles out of range [0, 360): {e}")
            object.__setattr__(self, "euler_deg", e)


def quantize_angle(theta: float) -> int:
    """Nearest integer degree, half-up, normalized into [0, 360)."""
    if not math.isfinite(theta):
        raise ValueError("non-finite angle")
    return int(math.floor(theta + 0.5)) % 360


def quantize_slide(s: float) -> int:
    """Nearest integer LDU, half-up (ties round toward +inf)."""
    if not math.isfinite(s):
        raise ValueError("non-finite slide")
    return int(math.floor(s + 0.5))
