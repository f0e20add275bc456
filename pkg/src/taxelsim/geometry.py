"""Object shapes and the nearest-surface-point query behind contact detection.

Every shape answers queries in its own frame through ``nearest_local``; posed
queries go through ``nearest_surface``. Ties are broken by a fixed priority
(x, then y, then z; the cylinder's radial direction before its caps; the
lowest face index on meshes) so repeated runs agree bit for bit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import trimesh

from taxelsim.errors import ConfigError, InvalidShapeError
from taxelsim.rotations import Transform, norm3

logger = logging.getLogger(__name__)

# Mesh queries are evaluated in blocks of this many points to bound the (P, F) temporaries.
MESH_QUERY_BLOCK = 4096


@dataclass(frozen=True)
class SurfaceQuery:
    nearest_point: np.ndarray
    outward_normal: np.ndarray
    signed_distance: float


@dataclass(frozen=True)
class Sphere:
    radius: float
    variant = "sphere"

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidShapeError(f"sphere radius must be positive, got {self.radius}")

    def nearest_local(self, points: np.ndarray):
        p = np.asarray(points, dtype=float)
        r = norm3(p)
        safe = np.where(r > 0.0, r, 1.0)
        n = np.where((r > 0.0)[..., None], p / safe[..., None], np.array([1.0, 0.0, 0.0]))
        return self.radius * n, n, r - self.radius

    @property
    def bounding_radius(self) -> float:
        return float(self.radius)

    def scaled(self, s: float) -> Sphere:
        return Sphere(self.radius * s)

    def mass_properties(self, density: float):
        mass = density * 4.0 / 3.0 * np.pi * self.radius**3
        return mass, np.eye(3) * 0.4 * mass * self.radius**2

    def to_dict(self) -> dict:
        return {"type": self.variant, "radius": self.radius}


@dataclass(frozen=True)
class Box:
    half_extents: tuple

    variant = "box"

    def __post_init__(self):
        h = tuple(float(v) for v in self.half_extents)
        if len(h) != 3 or not all(v > 0 for v in h):
            raise InvalidShapeError(f"box half-extents must be three positive values, got {self.half_extents}")
        object.__setattr__(self, "half_extents", h)

    def nearest_local(self, points: np.ndarray):
        p = np.asarray(points, dtype=float)
        h = np.asarray(self.half_extents)
        a = np.abs(p)
        excess = a - h
        outside = np.any(excess > 0.0, axis=-1)
        depth = h - a
        owner = np.where(outside, np.argmax(excess, axis=-1), np.argmin(depth, axis=-1))
        axis_mask = owner[..., None] == np.arange(3)
        sign = np.where(np.take_along_axis(p, owner[..., None], axis=-1) >= 0.0, 1.0, -1.0)
        p_out = np.clip(p, -h, h)
        p_in = np.where(axis_mask, sign * h, p)
        nearest = np.where(outside[..., None], p_out, p_in)
        normal = np.where(axis_mask, sign, 0.0)
        signed = np.where(outside, norm3(p - p_out), -np.min(depth, axis=-1))
        return nearest, normal, signed

    @property
    def bounding_radius(self) -> float:
        return float(np.linalg.norm(self.half_extents))

    def scaled(self, s: float) -> Box:
        return Box(tuple(v * s for v in self.half_extents))

    def mass_properties(self, density: float):
        hx, hy, hz = self.half_extents
        mass = density * 8.0 * hx * hy * hz
        return mass, np.diag([hy**2 + hz**2, hx**2 + hz**2, hx**2 + hy**2]) * mass / 3.0

    def to_dict(self) -> dict:
        return {"type": self.variant, "half_extents": list(self.half_extents)}


@dataclass(frozen=True)
class Cylinder:
    """Cylinder with its axis along local z."""

    radius: float
    half_height: float

    variant = "cylinder"

    def __post_init__(self):
        if not (self.radius > 0 and self.half_height > 0):
            raise InvalidShapeError(f"cylinder sizes must be positive, got r={self.radius} h={self.half_height}")

    def nearest_local(self, points: np.ndarray):
        p = np.asarray(points, dtype=float)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        rho = np.hypot(x, y)
        safe = np.where(rho > 0.0, rho, 1.0)
        ux = np.where(rho > 0.0, x / safe, 1.0)
        uy = np.where(rho > 0.0, y / safe, 0.0)
        zsign = np.where(z >= 0.0, 1.0, -1.0)
        er = rho - self.radius
        ez = np.abs(z) - self.half_height
        outside = (er > 0.0) | (ez > 0.0)
        side = np.where(outside, er >= ez, -er <= -ez)

        rho_out = np.minimum(rho, self.radius)
        z_out = np.clip(z, -self.half_height, self.half_height)
        out_pt = np.stack([ux * rho_out, uy * rho_out, z_out], axis=-1)
        side_pt = np.stack([ux * self.radius, uy * self.radius, z], axis=-1)
        cap_pt = np.stack([x, y, zsign * self.half_height], axis=-1)
        in_pt = np.where(side[..., None], side_pt, cap_pt)
        nearest = np.where(outside[..., None], out_pt, in_pt)

        zero = np.zeros_like(rho)
        normal = np.where(
            side[..., None],
            np.stack([ux, uy, zero], axis=-1),
            np.stack([zero, zero, zsign], axis=-1),
        )
        signed = np.where(outside, norm3(p - out_pt), np.maximum(er, ez))
        return nearest, normal, signed

    @property
    def bounding_radius(self) -> float:
        return float(np.hypot(self.radius, self.half_height))

    def scaled(self, s: float) -> Cylinder:
        return Cylinder(self.radius * s, self.half_height * s)

    def mass_properties(self, density: float):
        mass = density * np.pi * self.radius**2 * 2.0 * self.half_height
        ixx = mass * (3.0 * self.radius**2 + (2.0 * self.half_height) ** 2) / 12.0
        return mass, np.diag([ixx, ixx, 0.5 * mass * self.radius**2])

    def to_dict(self) -> dict:
        return {"type": self.variant, "radius": self.radius, "half_height": self.half_height}


@dataclass(frozen=True, eq=False)
class ConvexMesh:
    """Closed, convex, outward-wound triangle mesh.

    Face planes use the support function of the vertex set as offsets, so a
    point is inside exactly when every plane distance is non-positive.
    """

    vertices: np.ndarray
    faces: np.ndarray

    variant = "convex_mesh"

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=float)
        faces = np.asarray(self.faces, dtype=int)
        if vertices.ndim != 2 or vertices.shape[1] != 3 or faces.ndim != 2 or faces.shape[1] != 3:
            raise InvalidShapeError("convex mesh needs (V, 3) vertices and (F, 3) triangle faces")
        mesh = trimesh.Trimesh(vertices=vertices, faces=faces, process=False)
        if not mesh.is_watertight:
            raise InvalidShapeError("convex mesh is not closed")
        if not mesh.is_winding_consistent or not mesh.volume > 0:
            raise InvalidShapeError("convex mesh faces are not consistently outward-wound")
        if not mesh.is_convex:
            raise InvalidShapeError("mesh is not convex")
        triangles = vertices[faces]
        normals = np.cross(triangles[:, 1] - triangles[:, 0], triangles[:, 2] - triangles[:, 0])
        normals /= np.linalg.norm(normals, axis=-1, keepdims=True)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "faces", faces)
        object.__setattr__(self, "_mesh", mesh)
        object.__setattr__(self, "_triangles", triangles)
        object.__setattr__(self, "_normals", normals)
        object.__setattr__(self, "_offsets", np.max(normals @ vertices.T, axis=1))

    @property
    def trimesh(self) -> trimesh.Trimesh:
        return self._mesh

    @property
    def face_normals(self) -> np.ndarray:
        return self._normals

    def _nearest_block(self, p: np.ndarray):
        n = self._normals
        # (P, F) plane distances
        s = p[:, 0, None] * n[:, 0] + p[:, 1, None] * n[:, 1] + p[:, 2, None] * n[:, 2] - self._offsets
        s_max = np.max(s, axis=1)
        owner = np.argmax(s, axis=1)
        nearest = p - s_max[:, None] * self._normals[owner]
        normal = self._normals[owner].copy()
        signed = s_max.copy()

        outside = np.flatnonzero(s_max > 0.0)
        if outside.size:
            # The closest point of a convex body lies on a face whose plane sees the query.
            pi, fi = np.nonzero(s[outside] > 0.0)
            pts = p[outside][pi]
            cand = trimesh.triangles.closest_point(self._triangles[fi], pts)
            dist = np.linalg.norm(pts - cand, axis=1)
            order = np.lexsort((fi, -s[outside][pi, fi], dist, pi))
            _, first = np.unique(pi[order], return_index=True)
            pick = order[first]
            rows = outside[pi[pick]]
            nearest[rows] = cand[pick]
            normal[rows] = self._normals[fi[pick]]
            signed[rows] = dist[pick]
        return nearest, normal, signed

    def nearest_local(self, points: np.ndarray):
        p = np.asarray(points, dtype=float)
        shape = p.shape[:-1]
        flat = p.reshape(-1, 3)
        parts = [self._nearest_block(flat[i : i + MESH_QUERY_BLOCK]) for i in range(0, len(flat), MESH_QUERY_BLOCK)]
        if not parts:
            return np.zeros(shape + (3,)), np.zeros(shape + (3,)), np.zeros(shape)
        nearest, normal, signed = (np.concatenate(x) for x in zip(*parts))
        return nearest.reshape(shape + (3,)), normal.reshape(shape + (3,)), signed.reshape(shape)

    @property
    def bounding_radius(self) -> float:
        """Largest vertex distance from the local origin."""
        return float(np.max(norm3(self.vertices)))

    def scaled(self, s: float) -> ConvexMesh:
        return ConvexMesh(self.vertices * s, self.faces)

    def mass_properties(self, density: float):
        mesh = self._mesh.copy()
        mesh.density = density
        return float(mesh.mass), np.asarray(mesh.moment_inertia)

    def to_dict(self) -> dict:
        return {"type": self.variant, "vertices": self.vertices.tolist(), "faces": self.faces.tolist()}


ObjectShape = Union[Sphere, Box, Cylinder, ConvexMesh]


def load_off(path: Union[str, Path]) -> ConvexMesh:
    """Load a convex mesh from an OFF file, recentred on its center of mass."""
    try:
        mesh = trimesh.load(str(path), file_type="off", process=False, force="mesh")
    except (OSError, ValueError) as e:
        raise InvalidShapeError(f"cannot read OFF mesh {path}: {e}") from e
    vertices = np.asarray(mesh.vertices, dtype=float)
    faces = np.asarray(mesh.faces, dtype=int)
    probe = trimesh.Trimesh(vertices=vertices, faces=faces, process=False)
    if probe.is_watertight and probe.volume > 0:
        vertices = vertices - probe.center_mass
    logger.info(f"[load_off] Loaded {path}: {len(vertices)} vertices, {len(faces)} faces")
    return ConvexMesh(vertices, faces)


def shape_from_dict(data: dict, base_dir: Optional[Path] = None, path: str = "object.shape") -> ObjectShape:
    """Build a shape from its episode-config block."""
    if not isinstance(data, dict) or "type" not in data:
        raise ConfigError(f"{path}.type", "missing field")
    kind = data["type"]
    try:
        if kind == "sphere":
            return Sphere(float(data["radius"]))
        if kind == "box":
            return Box(tuple(data["half_extents"]))
        if kind == "cylinder":
            return Cylinder(float(data["radius"]), float(data["half_height"]))
        if kind == "convex_mesh":
            if "path" in data:
                mesh_path = Path(data["path"])
                if base_dir is not None and not mesh_path.is_absolute():
                    mesh_path = base_dir / mesh_path
                return load_off(mesh_path)
            return ConvexMesh(np.asarray(data["vertices"], dtype=float), np.asarray(data["faces"], dtype=int))
    except KeyError as e:
        raise ConfigError(f"{path}.{e.args[0]}", "missing field") from e
    except InvalidShapeError as e:
        raise ConfigError(path, str(e)) from e
    raise ConfigError(f"{path}.type", f"unknown shape type {kind!r}")


def nearest_surface_arrays(shape: ObjectShape, pose: Transform, points: np.ndarray):
    """Vectorized posed query: arrays of nearest points, normals and signed distances."""
    local = pose.inverse_apply(points)
    nearest, normal, signed = shape.nearest_local(local)
    return pose.apply(nearest), pose.apply_vector(normal), signed


def nearest_surface(shape: ObjectShape, pose: Transform, query: np.ndarray) -> SurfaceQuery:
    """Closest surface point, outward normal and signed distance (negative inside)."""
    nearest, normal, signed = nearest_surface_arrays(shape, pose, np.asarray(query, dtype=float)[None])
    return SurfaceQuery(nearest[0], normal[0], float(signed[0]))


def batch_nearest_surface(shape: ObjectShape, pose: Transform, queries: Sequence[np.ndarray]) -> list[SurfaceQuery]:
    if len(queries) == 0:
        return []
    nearest, normal, signed = nearest_surface_arrays(shape, pose, np.asarray(queries, dtype=float).reshape(-1, 3))
    return [SurfaceQuery(nearest[i], normal[i], float(signed[i])) for i in range(len(signed))]


def contains(shape: ObjectShape, pose: Transform, points: np.ndarray) -> np.ndarray:
    return nearest_surface_arrays(shape, pose, points)[2] < 0.0
