"""Part-part collision detection on inset triangle meshes.

Meshes are inset by moving each vertex inward along its area-weighted
pseudo-normal, scaled so the incident face planes offset by the requested
amount (0.25 LDU by default, so legitimately tight-fitting parts stop
registering as collisions). Pair queries run a BVH-vs-BVH traversal over a
separating-interval triangle test; surface contact within 1e-6 LDU counts as
non-intersecting. Pre-inset meshes may also be supplied directly (offset 0).

CollisionMesh values are immutable after build and safe to share across
threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BrickIrError
from .geometry import RigidTransform

TRI_EPS = 1e-6
DEGENERATE_AREA = 1e-9


# ---------------------------------------------------------------------------
# BVH


class Bvh:
    """Static axis-aligned bounding-volume hierarchy over triangles."""

    LEAF_SIZE = 4

    def __init__(self, tri_vertices: np.ndarray):
        # tri_vertices: (m, 3, 3) triangle corner coordinates
        self.tri_vertices = tri_vertices
        m = len(tri_vertices)
        self.nodes_min: list[np.ndarray] = []
        self.nodes_max: list[np.ndarray] = []
        self.nodes_left: list[int] = []
        self.nodes_right: list[int] = []
        self.nodes_start: list[int] = []
        self.nodes_count: list[int] = []
        if m == 0:
            self.order = np.zeros(0, dtype=np.int64)
            return
        centroids = tri_vertices.mean(axis=1)
        tmin = tri_vertices.min(axis=1)
        tmax = tri_vertices.max(axis=1)
        order = np.arange(m)

        def build(idx: np.ndarray) -> int:
            node = len(self.nodes_min)
            self.nodes_min.append(tmin[idx].min(axis=0))
            self.nodes_max.append(tmax[idx].max(axis=0))
            self.nodes_left.append(-1)
            self.nodes_right.append(-1)
            self.nodes_start.append(-1)
            self.nodes_count.append(0)
            if len(idx) <= self.LEAF_SIZE:
                self.nodes_start[node] = len(self._flat)
                self.nodes_count[node] = len(idx)
                self._flat.extend(idx.tolist())
                return node
            extent = tmax[idx].max(axis=0) - tmin[idx].min(axis=0)
            axis = int(np.argmax(extent))
            med = np.argsort(centroids[idx][:, axis], kind="stable")
            half = len(idx) // 2
            left = build(idx[med[:half]])
            right = build(idx[med[half:]])
            self.nodes_left[node] = left
            self.nodes_right[node] = right
            return node

        self._flat: list[int] = []
        build(order)
        self.order = np.array(self._flat, dtype=np.int64)
        self.nodes_min = [np.asarray(v) for v in self.nodes_min]
        self.nodes_max = [np.asarray(v) for v in self.nodes_max]

    def leaf_triangles(self, node: int) -> np.ndarray:
        s = self.nodes_start[node]
        return self.order[s : s + self.nodes_count[node]]

    def is_leaf(self, node: int) -> bool:
        return self.nodes_start[node] >= 0

    @property
    def root_bounds(self):
        if not self.nodes_min:
            return np.zeros(3), np.zeros(3)
        return self.nodes_min[0], self.nodes_max[0]


@dataclass(frozen=True)
class CollisionMesh:
    """Triangle mesh prepared for collision queries (optionally inset)."""

    vertices: np.ndarray
    triangles: np.ndarray
    bvh: Bvh = field(repr=False)
    source_inset: float = 0.0
    closed: bool = False

    @classmethod
    def build(cls, vertices, triangles, source_inset: float = 0.0) -> "CollisionMesh":
        v = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        t = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if len(t) and (t.min() < 0 or t.max() >= len(v)):
            raise BrickIrError("triangle index out of range")
        v.flags.writeable = False
        t.flags.writeable = False
        return cls(v, t, Bvh(v[t]), source_inset, _is_closed(t))

    def __len__(self):
        return len(self.triangles)


def _is_closed(triangles: np.ndarray) -> bool:
    """Closed iff every undirected edge is shared by exactly two triangles."""
    if len(triangles) == 0:
        return False
    counts: dict[tuple[int, int], int] = {}
    for a, b, c in triangles:
        for u, v in ((a, b), (b, c), (c, a)):
            key = (int(u), int(v)) if u < v else (int(v), int(u))
            counts[key] = counts.get(key, 0) + 1
    return all(n == 2 for n in counts.values())


# ---------------------------------------------------------------------------
# Inset


def inset_mesh(vertices, triangles, offset: float) -> CollisionMesh:
    """Shrink a mesh by ``offset`` LDU along area-weighted vertex pseudo-normals.

    The displacement magnitude is offset / c where c = |sum(A_f n_f)| /
    sum(A_f) over the incident faces, so each incident plane moves inward by
    the requested offset (exactly, when the incident normals are balanced --
    e.g. a 20-LDU cube insets to a 19.5-LDU cube). Degenerate triangles are
    dropped; on open meshes boundary vertices just use their incident faces.
    """
    v = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    t = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    if len(t) == 0 or len(v) == 0:
        raise BrickIrError("empty mesh")

    e1 = v[t[:, 1]] - v[t[:, 0]]
    e2 = v[t[:, 2]] - v[t[:, 0]]
    cross = np.cross(e1, e2)  # |cross| = 2 * area, direction = face normal
    areas2 = np.linalg.norm(cross, axis=1)
    keep = areas2 > 2.0 * DEGENERATE_AREA
    t = t[keep]
    cross = cross[keep]
    areas2 = areas2[keep]
    if len(t) == 0:
        raise BrickIrError("mesh has no non-degenerate triangles")

    normal_sum = np.zeros_like(v)
    area_sum = np.zeros(len(v))
    for corner in range(3):
        np.add.at(normal_sum, t[:, corner], cross)
        np.add.at(area_sum, t[:, corner], areas2)

    norms = np.linalg.norm(normal_sum, axis=1)
    used = area_sum > 0
    displacement = np.zeros_like(v)
    if offset != 0.0:
        c = np.ones(len(v))
        c[used] = norms[used] / area_sum[used]
        c = np.clip(c, 0.1, 1.0)  # guard against runaway moves at spikes
        unit = np.zeros_like(v)
        ok = norms > 1e-12
        unit[ok] = normal_sum[ok] / norms[ok][:, None]
        displacement = -(offset / c)[:, None] * unit
    new_v = v + displacement

    # Drop triangles the inset collapsed, then unused vertices.
    e1 = new_v[t[:, 1]] - new_v[t[:, 0]]
    e2 = new_v[t[:, 2]] - new_v[t[:, 0]]
    areas2 = np.linalg.norm(np.cross(e1, e2), axis=1)
    t = t[areas2 > 2.0 * DEGENERATE_AREA]
    if len(t) == 0:
        raise BrickIrError("inset collapsed the entire mesh")
    used_idx = np.unique(t)
    remap = np.full(len(new_v), -1, dtype=np.int64)
    remap[used_idx] = np.arange(len(used_idx))
    return CollisionMesh.build(new_v[used_idx], remap[t], source_inset=offset)


# ---------------------------------------------------------------------------
# Triangle-triangle intersection (separating-interval test, Moller-style)


def _signed_dists(n, d, pts, eps):
    dv = pts @ n + d
    dv[np.abs(dv) <= eps] = 0.0
    return dv


def tri_tri_intersect(p: np.ndarray, q: np.ndarray, eps: float = TRI_EPS) -> bool:
    """True iff triangles p (3,3) and q (3,3) properly intersect.

    Surface contact within eps (including all coplanar overlap) counts as
    non-intersecting.
    """
    n2 = np.cross(q[1] - q[0], q[2] - q[0])
    d2 = -float(n2 @ q[0])
    dp = _signed_dists(n2, d2, p, eps * float(np.linalg.norm(n2)))
    if (dp >= 0).all() or (dp <= 0).all():
        return False

    n1 = np.cross(p[1] - p[0], p[2] - p[0])
    d1 = -float(n1 @ p[0])
    dq = _signed_dists(n1, d1, q, eps * float(np.linalg.norm(n1)))
    if (dq >= 0).all() or (dq <= 0).all():
        return False

    direction = np.cross(n1, n2)
    axis = int(np.argmax(np.abs(direction)))
    pp = p[:, axis]
    pq = q[:, axis]
    i1 = _crossing_interval(pp, dp)
    i2 = _crossing_interval(pq, dq)
    if i1 is None or i2 is None:
        return False
    lo = max(i1[0], i2[0])
    hi = min(i1[1], i2[1])
    return hi - lo > eps


def _crossing_interval(proj, dv):
    """Interval where a triangle crosses the other's plane, on the chosen axis.

    The pivot vertex must sit strictly on one side alone (zeros count as the
    majority side), so each pivot edge properly crosses the plane.
    """
    if dv[0] * dv[1] > 0:
        alone = 2
    elif dv[0] * dv[2] > 0:
        alone = 1
    elif dv[1] * dv[2] > 0 or dv[0] != 0:
        alone = 0
    elif dv[1] != 0:
        alone = 1
    else:
        alone = 2
    others = [i for i in range(3) if i != alone]
    pts = []
    for o in others:
        denom = dv[alone] - dv[o]
        if denom == 0.0:
            return None
        s = dv[alone] / denom
        pts.append(proj[alone] + (proj[o] - proj[alone]) * s)
    a, b = sorted(pts)
    return a, b


# ---------------------------------------------------------------------------
# Pairwise mesh query


def _transform_aabb(tmin, tmax, transform: RigidTransform):
    """Conservative AABB of a transformed AABB."""
    center = (tmin + tmax) / 2.0
    half = (tmax - tmin) / 2.0
    new_center = transform.apply(center)
    new_half = np.abs(transform.rotation) @ half
    return new_center - new_half, new_center + new_half


def intersects(
    a: CollisionMesh,
    pose_a: RigidTransform,
    b: CollisionMesh,
    pose_b: RigidTransform,
    eps: float = TRI_EPS,
) -> bool:
    """True iff the posed meshes properly intersect (or one closed mesh
    contains the other; containment is only tested when both are closed)."""
    if len(a) == 0 or len(b) == 0:
        return False
    rel = RigidTransform(
        pose_b.rotation.T @ pose_a.rotation,
        pose_b.rotation.T @ (pose_a.translation - pose_b.translation),
    )  # maps a-local into b-local

    ta, tb = a.bvh, b.bvh
    stack = [(0, 0)]
    margin = eps
    while stack:
        na, nb = stack.pop()
        amin, amax = _transform_aabb(ta.nodes_min[na], ta.nodes_max[na], rel)
        if (
            (amin > tb.nodes_max[nb] + margin).any()
            or (amax < tb.nodes_min[nb] - margin).any()
        ):
            continue
        leaf_a = ta.is_leaf(na)
        leaf_b = tb.is_leaf(nb)
        if leaf_a and leaf_b:
            for ia in ta.leaf_triangles(na):
                pa = rel.apply(ta.tri_vertices[ia])
                for ib in tb.leaf_triangles(nb):
                    if tri_tri_intersect(pa, tb.tri_vertices[ib], eps):
                        return True
        elif leaf_a or (not leaf_b and _node_extent(tb, nb) > _node_extent(ta, na)):
            stack.append((na, tb.nodes_left[nb]))
            stack.append((na, tb.nodes_right[nb]))
        else:
            stack.append((ta.nodes_left[na], nb))
            stack.append((ta.nodes_right[na], nb))

    if a.closed and b.closed:
        if point_in_mesh(rel.apply(a.vertices[0]), b):
            return True
        inv = rel.inverse()
        if point_in_mesh(inv.apply(b.vertices[0]), a):
            return True
    return False


def _node_extent(tree: Bvh, node: int) -> float:
    return float((tree.nodes_max[node] - tree.nodes_min[node]).max())


# Oblique fixed ray direction: avoids axis-aligned degeneracies in parity tests.
_RAY_DIR = np.array([0.57735026, 0.51449576, 0.63245553])
_RAY_DIR = _RAY_DIR / np.linalg.norm(_RAY_DIR)


def point_in_mesh(point: np.ndarray, mesh: CollisionMesh) -> bool:
    """Ray-parity containment test (reliable only for closed meshes)."""
    tv = mesh.bvh.tri_vertices
    if len(tv) == 0:
        return False
    # Moller-Trumbore over all triangles, vectorized.
    v0 = tv[:, 0]
    e1 = tv[:, 1] - v0
    e2 = tv[:, 2] - v0
    h = np.cross(_RAY_DIR[None, :], e2)
    det = np.einsum("ij,ij->i", e1, h)
    ok = np.abs(det) > 1e-12
    inv_det = np.zeros(len(tv))
    inv_det[ok] = 1.0 / det[ok]
    s = point[None, :] - v0
    u = np.einsum("ij,ij->i", s, h) * inv_det
    qv = np.cross(s, e1)
    v = (qv @ _RAY_DIR) * inv_det
    t = np.einsum("ij,ij->i", e2, qv) * inv_det
    hits = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 1e-9)
    return bool(hits.sum() % 2 == 1)


# ---------------------------------------------------------------------------
# Assembly-level checks


@dataclass(frozen=True)
class CollisionReport:
    """Deduplicated colliding id pairs; ``first_offender`` is the 0-based
    index of the earliest instance whose placement first created a collision."""

    colliding_pairs: tuple
    first_offender: int | None = None

    def to_json_obj(self) -> dict:
        return {
            "colliding_pairs": [list(p) for p in self.colliding_pairs],
            "first_offender": self.first_offender,
        }


def world_aabb(mesh: CollisionMesh, pose: RigidTransform):
    tmin, tmax = mesh.bvh.root_bounds
    return _transform_aabb(tmin, tmax, pose)


def check_assembly(instances, ids=None, eps: float = TRI_EPS) -> CollisionReport:
    """All-pairs collision over (mesh, pose) instances with an AABB sweep
    broad phase. ``ids`` names the instances in the report (defaults to
    positional indices)."""
    n = len(instances)
    ids = list(ids) if ids is not None else list(range(n))
    boxes = [world_aabb(m, p) for m, p in instances]
    order = sorted(range(n), key=lambda i: boxes[i][0][0])
    pairs = []
    active: list[int] = []
    for i in order:
        imin, imax = boxes[i]
        active = [j for j in active if boxes[j][1][0] + eps >= imin[0]]
        for j in active:
            jmin, jmax = boxes[j]
            if (imin > jmax + eps).any() or (imax < jmin - eps).any():
                continue
            mi, pi = instances[i]
            mj, pj = instances[j]
            if intersects(mi, pi, mj, pj, eps):
                pairs.append(tuple(sorted((i, j))))
        active.append(i)
    pairs = sorted(set(pairs))
    first = min((max(i, j) for i, j in pairs), default=None)
    return CollisionReport(
        colliding_pairs=tuple((ids[i], ids[j]) for i, j in pairs),
        first_offender=first,
    )


class PartColliders:
    """Per-part collision meshes plus a factory for incremental sessions.

    The mesh table is immutable and shareable; each validation run gets its
    own AssemblyChecker session.
    """

    def __init__(self, meshes: dict, eps: float = TRI_EPS):
        self.meshes = dict(meshes)
        self.eps = eps

    @classmethod
    def from_catalog(cls, catalog, inset: float = 0.25, eps: float = TRI_EPS) -> "PartColliders":
        """Build inset collision meshes for every catalog part that has
        geometry (inset 0 keeps meshes verbatim, e.g. pre-inset inputs)."""
        meshes = {}
        for pid, part in catalog.parts.items():
            if part.mesh is None or len(part.mesh) == 0:
                continue
            if inset:
                meshes[pid] = inset_mesh(part.mesh.vertices, part.mesh.triangles, inset)
            else:
                meshes[pid] = CollisionMesh.build(part.mesh.vertices, part.mesh.triangles)
        return cls(meshes, eps)

    def mesh(self, part_id: str) -> CollisionMesh | None:
        return self.meshes.get(part_id)

    def session(self) -> "AssemblyChecker":
        return AssemblyChecker(self.eps)


class AssemblyChecker:
    """Incremental variant: feed placements one by one.

    Not thread-safe; use one checker per worker.
    """

    def __init__(self, eps: float = TRI_EPS):
        self.eps = eps
        self._placed: list[tuple[CollisionMesh, RigidTransform, object, tuple]] = []
        self.first_offender: int | None = None

    def __len__(self):
        return len(self._placed)

    def add(self, mesh: CollisionMesh, pose: RigidTransform, node_id=None):
        """Place one instance; returns the ids it collides with (may be empty)."""
        box = world_aabb(mesh, pose)
        hits = []
        for other_mesh, other_pose, other_id, other_box in self._placed:
            if (box[0] > other_box[1] + self.eps).any() or (
                box[1] < other_box[0] - self.eps
            ).any():
                continue
            if intersects(mesh, pose, other_mesh, other_pose, self.eps):
                hits.append(other_id)
        step = len(self._placed)
        if hits and self.first_offender is None:
            self.first_offender = step
        self._placed.append((mesh, pose, node_id if node_id is not None else step, box))
        return hits


# ---------------------------------------------------------------------------
# Mesh construction and io helpers


def box_mesh(size, center=(0.0, 0.0, 0.0)):
    """Axis-aligned box with the alternating (tetrahedral) triangulation,
    whose corner pseudo-normals are exact space diagonals -- box insets are
    then exact. Returns (vertices, triangles)."""
    half = np.asarray(size, dtype=np.float64) / 2.0
    c = np.asarray(center, dtype=np.float64)
    corners = np.array(
        [[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=np.float64
    )
    verts = c + (corners - 0.5) * 2.0 * half

    def parity(i):
        return (i & 1) ^ ((i >> 1) & 1) ^ ((i >> 2) & 1)

    tris = []
    for axis in range(3):
        for side in (0, 1):
            face = [i for i in range(8) if ((i >> (2 - axis)) & 1) == side]
            evens = [i for i in face if parity(i) == 0]
            odds = [i for i in face if parity(i) == 1]
            d0, d1 = evens
            outward = np.zeros(3)
            outward[axis] = 1.0 if side else -1.0
            for o in odds:
                tri = [d0, o, d1]
                n = np.cross(verts[tri[1]] - verts[tri[0]], verts[tri[2]] - verts[tri[0]])
                if n @ outward < 0:
                    tri = [d0, d1, o]
                tris.append(tri)
    return verts, np.array(tris, dtype=np.int64)


def merge_meshes(parts):
    """Concatenate (vertices, triangles) pairs into one mesh."""
    verts = []
    tris = []
    base = 0
    for v, t in parts:
        verts.append(np.asarray(v, dtype=np.float64))
        tris.append(np.asarray(t, dtype=np.int64) + base)
        base += len(v)
    return np.concatenate(verts), np.concatenate(tris)


def icosphere_mesh(radius: float, subdivisions: int = 1, center=(0.0, 0.0, 0.0)):
    """Geodesic sphere approximation (icosahedron subdivision)."""
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    raw = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    verts = [v / np.linalg.norm(v) for v in raw]
    tris = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(i, j):
            key = (i, j) if i < j else (j, i)
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_tris = []
        for a, b, c in tris:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_tris += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        tris = new_tris
    v = np.array(verts) * radius + np.asarray(center, dtype=np.float64)
    return v, np.array(tris, dtype=np.int64)


def load_mesh_file(path):
    """Read an external mesh: OBJ subset (v/f lines, fan-triangulated) or a
    .npz archive with 'vertices' and 'triangles' arrays."""
    path = str(path)
    if path.endswith(".npz"):
        data = np.load(path)
        return (
            np.asarray(data["vertices"], dtype=np.float64),
            np.asarray(data["triangles"], dtype=np.int64),
        )
    verts = []
    tris = []
    with open(path) as f:
        for raw in f:
            tokens = raw.split()
            if not tokens:
                continue
            if tokens[0] == "v":
                verts.append([float(x) for x in tokens[1:4]])
            elif tokens[0] == "f":
                idx = [int(t.split("/")[0]) - 1 for t in tokens[1:]]
                for k in range(1, len(idx) - 1):
                    tris.append([idx[0], idx[k], idx[k + 1]])
    return np.array(verts, dtype=np.float64), np.array(tris, dtype=np.int64)
