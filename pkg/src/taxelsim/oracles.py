"""Brute-force reference answers for the nearest-surface query and the contact rule.

Analytic shapes are described as parameterized surface patches. A query is
seeded from the nearest of a dense set of surface samples on every patch (found
with a KD-tree) and then refined by bounded local minimization of the squared
distance over the patch parameters. Convex meshes are checked exhaustively
against every triangle. None of this shares code with the production query.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
import trimesh
from scipy import optimize
from scipy.spatial import cKDTree

from taxelsim import geometry
from taxelsim.errors import ConfigError, InvalidShapeError
from taxelsim.geometry import Box, ConvexMesh, Cylinder, ObjectShape, Sphere, shape_from_dict
from taxelsim.kinematics import fk_arrays, load_hand_model
from taxelsim.rotations import Transform
from taxelsim.utils import SCHEMA_VERSION

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 100_000
POSITION_TOLERANCE = 1e-4
NORMAL_TOLERANCE = 1e-3
SURFACE_BAND = 1e-4
BOUNDARY_EPS = 1e-9


@dataclass(frozen=True)
class Patch:
    """A surface piece ``point(u, v)`` over a box of parameters.

    ``bounds`` holds one (low, high) pair per parameter, None where the
    parameter is periodic; ``sharp`` marks which bounds are creases of the
    shape rather than seams of the parameterization.
    """

    point: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]  # (3, 2)
    normal: Callable[[np.ndarray], np.ndarray]
    sample: Callable[[np.random.Generator, int], np.ndarray]  # (n, 2) parameters
    bounds: tuple
    sharp: tuple
    area: float


def _sphere_patches(shape: Sphere) -> list[Patch]:
    r = shape.radius

    def point(uv):
        t, p = uv
        return r * np.array([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)])

    def jacobian(uv):
        t, p = uv
        return r * np.array(
            [[np.cos(t) * np.cos(p), -np.sin(t) * np.sin(p)], [np.cos(t) * np.sin(p), np.sin(t) * np.cos(p)], [-np.sin(t), 0.0]]
        )

    def sample(rng, n):
        d = rng.normal(size=(n, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        return np.stack([np.arccos(np.clip(d[:, 2], -1.0, 1.0)), np.arctan2(d[:, 1], d[:, 0])], axis=1)

    return [
        Patch(point, jacobian, lambda uv: point(uv) / r, sample, ((0.0, np.pi), None), ((False, False), None), 4.0 * np.pi * r**2)
    ]


def _box_patches(shape: Box) -> list[Patch]:
    a = np.asarray(shape.half_extents, dtype=float)
    patches = []
    for k in range(3):
        i, j = [axis for axis in range(3) if axis != k]
        for sign in (1.0, -1.0):

            def point(uv, k=k, i=i, j=j, sign=sign):
                p = np.zeros(3)
                p[k], p[i], p[j] = sign * a[k], uv[0], uv[1]
                return p

            def jacobian(uv, i=i, j=j):
                jac = np.zeros((3, 2))
                jac[i, 0] = jac[j, 1] = 1.0
                return jac

            def normal(uv, k=k, sign=sign):
                n = np.zeros(3)
                n[k] = sign
                return n

            def sample(rng, n, i=i, j=j):
                return rng.uniform(-1.0, 1.0, size=(n, 2)) * np.array([a[i], a[j]])

            patches.append(
                Patch(point, jacobian, normal, sample, ((-a[i], a[i]), (-a[j], a[j])), ((True, True), (True, True)), 4.0 * a[i] * a[j])
            )
    return patches


def _cylinder_patches(shape: Cylinder) -> list[Patch]:
    r, h = shape.radius, shape.half_height

    def side_point(uv):
        return np.array([r * np.cos(uv[0]), r * np.sin(uv[0]), uv[1]])

    def side_jacobian(uv):
        return np.array([[-r * np.sin(uv[0]), 0.0], [r * np.cos(uv[0]), 0.0], [0.0, 1.0]])

    def side_sample(rng, n):
        return np.stack([rng.uniform(-np.pi, np.pi, n), rng.uniform(-h, h, n)], axis=1)

    patches = [
        Patch(
            side_point,
            side_jacobian,
            lambda uv: np.array([np.cos(uv[0]), np.sin(uv[0]), 0.0]),
            side_sample,
            (None, (-h, h)),
            (None, (True, True)),
            4.0 * np.pi * r * h,
        )
    ]
    for sign in (1.0, -1.0):

        def cap_point(uv, sign=sign):
            return np.array([uv[0] * np.cos(uv[1]), uv[0] * np.sin(uv[1]), sign * h])

        def cap_jacobian(uv):
            return np.array([[np.cos(uv[1]), -uv[0] * np.sin(uv[1])], [np.sin(uv[1]), uv[0] * np.cos(uv[1])], [0.0, 0.0]])

        def cap_sample(rng, n):
            return np.stack([r * np.sqrt(rng.uniform(0.0, 1.0, n)), rng.uniform(-np.pi, np.pi, n)], axis=1)

        patches.append(
            Patch(
                cap_point,
                cap_jacobian,
                lambda uv, sign=sign: np.array([0.0, 0.0, sign]),
                cap_sample,
                ((0.0, r), None),
                ((False, True), None),
                np.pi * r**2,
            )
        )
    return patches


def surface_patches(shape: ObjectShape) -> list[Patch]:
    if isinstance(shape, Sphere):
        return _sphere_patches(shape)
    if isinstance(shape, Box):
        return _box_patches(shape)
    if isinstance(shape, Cylinder):
        return _cylinder_patches(shape)
    raise InvalidShapeError(f"no parametric patches for {shape.variant}")


def _evaluate(patch: Patch, uv: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return (
        np.array([patch.point(x) for x in uv]).reshape(-1, 3),
        np.array([patch.normal(x) for x in uv]).reshape(-1, 3),
    )


def sample_surface(shape: ObjectShape, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` points uniformly by area on the surface, with their outward normals.

    Returns:
        tuple: (n, 3) points and (n, 3) unit normals in the shape frame
    """
    if isinstance(shape, ConvexMesh):
        points, faces = trimesh.sample.sample_surface(shape.trimesh, n, seed=int(rng.integers(2**32)))
        return np.asarray(points), shape.face_normals[faces]
    points, normals = [], []
    for patch, uv in zip(*_patch_samples(shape, n, rng)):
        p, nrm = _evaluate(patch, uv)
        points.append(p)
        normals.append(nrm)
    return np.concatenate(points), np.concatenate(normals)


def _patch_samples(shape: ObjectShape, n: int, rng: np.random.Generator):
    patches = surface_patches(shape)
    areas = np.array([p.area for p in patches])
    counts = rng.multinomial(n, areas / areas.sum())
    # Every patch keeps at least one seed so it can always be refined.
    return patches, [p.sample(rng, max(int(c), 1)) for p, c in zip(patches, counts)]


def _on_sharp_boundary(patch: Patch, uv: np.ndarray) -> bool:
    for value, bound, sharp in zip(uv, patch.bounds, patch.sharp):
        if bound is None:
            continue
        if (sharp[0] and value - bound[0] < BOUNDARY_EPS) or (sharp[1] and bound[1] - value < BOUNDARY_EPS):
            return True
    return False


def _refine(patch: Patch, seed_uv: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, float]:
    def objective(uv):
        d = patch.point(uv) - q
        return 0.5 * float(d @ d), patch.jacobian(uv).T @ d

    result = optimize.minimize(
        objective,
        seed_uv,
        jac=True,
        method="L-BFGS-B",
        bounds=[(None, None) if b is None else b for b in patch.bounds],
        options={"ftol": 1e-30, "gtol": 1e-16, "maxiter": 200},
    )
    uv = result.x
    return uv, float(np.linalg.norm(patch.point(uv) - q))


@dataclass(frozen=True)
class OracleResult:
    """Reference answers per query, in the shape frame unless posed."""

    nearest: np.ndarray  # (P, 3)
    normals: np.ndarray  # (P, 3)
    signed_distance: np.ndarray  # (P,)
    normal_defined: np.ndarray  # (P,) False where the nearest point sits on a crease


def _parametric_nearest(shape: ObjectShape, queries: np.ndarray, samples: int, rng: np.random.Generator) -> OracleResult:
    patches, seeds = _patch_samples(shape, samples, rng)
    trees = []
    for patch, uv in zip(patches, seeds):
        points, _ = _evaluate(patch, uv)
        trees.append(cKDTree(points))
    P = len(queries)
    nearest = np.zeros((P, 3))
    normals = np.zeros((P, 3))
    signed = np.zeros(P)
    defined = np.zeros(P, dtype=bool)
    seed_index = [tree.query(queries)[1] for tree in trees]
    for i, q in enumerate(queries):
        best = None
        for k, patch in enumerate(patches):
            uv, dist = _refine(patch, seeds[k][seed_index[k][i]], q)
            if best is None or dist < best[0]:
                best = (dist, patch, uv)
        dist, patch, uv = best
        p, n = patch.point(uv), patch.normal(uv)
        nearest[i], normals[i] = p, n
        inside = float((q - p) @ n) < 0.0
        signed[i] = -dist if inside else dist
        defined[i] = not _on_sharp_boundary(patch, uv)
    return OracleResult(nearest, normals, signed, defined)


def _mesh_nearest(shape: ConvexMesh, queries: np.ndarray) -> OracleResult:
    triangles = shape.trimesh.triangles
    face_normals = shape.face_normals
    F = len(triangles)
    P = len(queries)
    nearest = np.zeros((P, 3))
    normals = np.zeros((P, 3))
    signed = np.zeros(P)
    defined = np.zeros(P, dtype=bool)
    for i, q in enumerate(queries):
        candidates = trimesh.triangles.closest_point(triangles, np.repeat(q[None], F, axis=0))
        dist = np.linalg.norm(candidates - q, axis=1)
        f = int(np.argmin(dist))
        p = candidates[f]
        nearest[i], normals[i] = p, face_normals[f]
        inside = float((q - p) @ face_normals[f]) < 0.0
        signed[i] = -dist[f] if inside else dist[f]
        bary = trimesh.triangles.points_to_barycentric(triangles[f][None], p[None])[0]
        defined[i] = bool(np.min(bary) > BOUNDARY_EPS)
    return OracleResult(nearest, normals, signed, defined)


def brute_force_nearest(
    shape: ObjectShape,
    pose: Transform,
    queries: np.ndarray,
    samples: int = DEFAULT_SAMPLES,
    rng: Optional[np.random.Generator] = None,
) -> OracleResult:
    """Reference nearest surface point for each world-frame query.

    Args:
        shape: Object shape
        pose: Object pose in the world
        queries: (P, 3) world points
        samples: Dense surface samples seeding the search on analytic shapes
        rng: Generator for the surface samples

    Returns:
        OracleResult: world-frame nearest points and normals
    """
    q = pose.inverse_apply(np.asarray(queries, dtype=float).reshape(-1, 3))
    if isinstance(shape, ConvexMesh):
        local = _mesh_nearest(shape, q)
    else:
        local = _parametric_nearest(shape, q, samples, rng or np.random.default_rng(0))
    return OracleResult(
        pose.apply(local.nearest),
        pose.apply_vector(local.normals),
        local.signed_distance,
        local.normal_defined,
    )


@dataclass(frozen=True)
class Scene:
    shape: ObjectShape
    pose: Transform
    queries: np.ndarray
    samples: int = DEFAULT_SAMPLES
    seed: int = 0
    position_tolerance: float = POSITION_TOLERANCE
    normal_tolerance: float = NORMAL_TOLERANCE
    surface_band: float = SURFACE_BAND


def _scene_queries(data: dict, shape: ObjectShape, pose: Transform, base_dir: Optional[Path], rng) -> np.ndarray:
    if "taxels" in data:
        queries = np.asarray(data["taxels"], dtype=float)
        if queries.ndim != 2 or queries.shape[1] != 3:
            raise ConfigError("taxels", "expected a list of 3-vectors")
        return queries
    if "joint_positions" in data:
        hand = data.get("hand_model")
        if hand is not None and base_dir is not None and not Path(hand).is_absolute():
            hand = str(base_dir / hand)
        model = load_hand_model(hand)
        q = np.asarray(data["joint_positions"], dtype=float).reshape(1, -1)
        if q.shape[1] != model.dof:
            raise ConfigError("joint_positions", f"expected {model.dof} values")
        return fk_arrays(model, q).taxel_positions.reshape(-1, 3)
    n = int(data.get("n_queries", 1000))
    spread = float(data.get("spread", 0.005))
    points, normals = sample_surface(shape, n, rng)
    offsets = rng.uniform(-spread, spread, size=(n, 1))
    return pose.apply(points + offsets * normals)


def load_scene(source: Union[str, Path, dict]) -> Scene:
    """Read a validation scene.

    The object is ``shape`` (optionally ``scale``d) at ``pose``. Queries are
    explicit ``taxels``, the taxels of the hand at ``joint_positions``, or
    ``n_queries`` random points within ``spread`` of the surface.
    """
    base_dir = None
    if isinstance(source, dict):
        data = source
    else:
        path = Path(source)
        base_dir = path.parent
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError as e:
            raise ConfigError("scene", f"no such file: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError("scene", f"invalid JSON in {path}: {e}") from e
    if not isinstance(data, dict) or "shape" not in data:
        raise ConfigError("shape", "missing field")
    shape = shape_from_dict(data["shape"], base_dir, "shape")
    if "scale" in data:
        shape = shape.scaled(float(data["scale"]))
    pose = Transform.from_dict(data.get("pose", {}))
    seed = int(data.get("seed", 0))
    rng = np.random.default_rng(seed)
    tolerance = data.get("tolerance", {})
    return Scene(
        shape=shape,
        pose=pose,
        queries=_scene_queries(data, shape, pose, base_dir, rng),
        samples=int(data.get("samples", DEFAULT_SAMPLES)),
        seed=seed,
        position_tolerance=float(tolerance.get("position", POSITION_TOLERANCE)),
        normal_tolerance=float(tolerance.get("normal", NORMAL_TOLERANCE)),
        surface_band=float(tolerance.get("surface_band", SURFACE_BAND)),
    )


def validate_scene(scene: Union[Scene, str, Path, dict]) -> dict:
    """Compare the production nearest-surface query and contact rule against the oracle.

    Returns:
        dict: Schema-versioned report with pass/fail, worst errors, contact
        agreement and the indices of every failing taxel
    """
    if not isinstance(scene, Scene):
        scene = load_scene(scene)
    queries = scene.queries
    nearest, normals, signed = geometry.nearest_surface_arrays(scene.shape, scene.pose, queries)
    oracle = brute_force_nearest(
        scene.shape, scene.pose, queries, scene.samples, np.random.default_rng(scene.seed + 1)
    )

    position_error = np.linalg.norm(nearest - oracle.nearest, axis=1)
    normal_error = np.where(oracle.normal_defined, np.linalg.norm(normals - oracle.normals, axis=1), 0.0)
    contact = np.einsum("ij,ij->i", queries - nearest, normals) < 0.0
    oracle_contact = oracle.signed_distance < 0.0
    disagree = contact != oracle_contact
    near_surface = np.abs(oracle.signed_distance) <= scene.surface_band

    failing = (
        (position_error > scene.position_tolerance)
        | (normal_error > scene.normal_tolerance)
        | (disagree & ~near_surface)
    )
    report = {
        "schema_version": SCHEMA_VERSION,
        "shape": scene.shape.variant,
        "queries": int(len(queries)),
        "passed": bool(not np.any(failing)),
        "max_position_error": float(np.max(position_error, initial=0.0)),
        "max_normal_error": float(np.max(normal_error, initial=0.0)),
        "normals_checked": int(np.sum(oracle.normal_defined)),
        "contact_agreement": int(np.sum(~disagree)),
        "contact_disagreements_near_surface": int(np.sum(disagree & near_surface)),
        "failed_taxels": [int(i) for i in np.flatnonzero(failing)],
    }
    if report["passed"]:
        logger.info(f"[validate] {report['shape']}: {report['queries']} queries passed")
    else:
        logger.warning(f"[validate] {report['shape']}: {len(report['failed_taxels'])} failing taxels")
    return report
