"""Connectivity-graph construction and spanning-tree build-path sampling.

Connector pairing follows the family semantics: coincident, compatible
connector frames become edges carrying the quantized relative-transform
parameters (yaw / flip / slide / euler triple). A structure is then
serializable as a spanning tree whose edges suffice to rebuild every pose.

Conventions fixed here (the canonical-alignment table):
  * A connector frame is (origin, principal axis z, reference axis x).
  * Canonical alignment (all parameters zero, no flip) means the two mated
    connector frames coincide exactly; annotations are authored so paired
    sites share axis direction when assembled.
  * yaw is the signed angle from the existing connector's reference axis to
    the new one's, about the existing principal axis.
  * flip (hinge/axle only) means principal axes anti-parallel instead: the
    180-degree turn about the shared reference axis.
  * slide (axle only) is the new origin's offset along the existing
    principal axis, bounded by the connectors' overlapping axle lengths.
  * ball rotations are intrinsic Z-Y-X euler angles relative to canonical
    alignment.

All graph values are immutable once built; samplers take explicit seeds and
are reentrant.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .catalog import Catalog
from .collision import AssemblyChecker
from .connectors import ConnectorFamily, dof_spec, letter_index
from .errors import CatalogError, MatchError
from .geometry import (
    ConnectorFrame,
    QuantizedParams,
    RigidTransform,
    quantize_angle,
    quantize_slide,
    relative,
)
from .ldraw import PartInstance

# 180-degree rotation about the reference (x) axis: the "flip" of hinge and
# axle connections.
FLIP_ROTATION = np.diag([1.0, -1.0, -1.0])

_GIMBAL_EPS = 1e-12


@dataclass(frozen=True)
class MatchTolerances:
    """Connector-coincidence tolerances. Defaults sit well below the 6-LDU
    stud diameter so distinct sites never alias."""

    position: float = 1.0  # LDU
    axis_deg: float = 2.0


@dataclass(frozen=True)
class ConnEdge:
    """A realized connection between two (node, connector-index) endpoints.
    ``params`` is extracted with endpoint ``a`` as the reference frame."""

    a: tuple[int, str]
    b: tuple[int, str]
    family: ConnectorFamily
    params: QuantizedParams

    def involves(self, node_id: int) -> bool:
        return self.a[0] == node_id or self.b[0] == node_id

    def other_end(self, node_id: int) -> tuple[int, str]:
        if self.a[0] == node_id:
            return self.b
        if self.b[0] == node_id:
            return self.a
        raise ValueError(f"edge does not touch node {node_id}")

    def to_json_obj(self) -> dict:
        return {
            "a": [self.a[0], self.a[1]],
            "b": [self.b[0], self.b[1]],
            "family": self.family.value,
            "params": params_to_json_obj(self.family, self.params),
        }

    @classmethod
    def from_json_obj(cls, obj) -> "ConnEdge":
        family = ConnectorFamily(obj["family"])
        return cls(
            (int(obj["a"][0]), obj["a"][1]),
            (int(obj["b"][0]), obj["b"][1]),
            family,
            params_from_json_obj(family, obj.get("params", {})),
        )


def params_to_json_obj(family: ConnectorFamily, p: QuantizedParams) -> dict:
    if family == ConnectorFamily.BALL:
        return {"euler": list(p.euler_deg or (0, 0, 0))}
    if family == ConnectorFamily.FIXED:
        return {}
    obj = {"yaw": p.yaw_deg}
    if family in (ConnectorFamily.HINGE, ConnectorFamily.AXLE):
        obj["flip"] = p.flip
    if family == ConnectorFamily.AXLE:
        obj["slide"] = p.slide_ldu
    return obj


def params_from_json_obj(family: ConnectorFamily, obj) -> QuantizedParams:
    if family == ConnectorFamily.BALL:
        e = obj.get("euler", (0, 0, 0))
        return QuantizedParams(euler_deg=(int(e[0]), int(e[1]), int(e[2])))
    return QuantizedParams(
        yaw_deg=int(obj.get("yaw", 0)),
        flip=bool(obj.get("flip", False)),
        slide_ldu=int(obj.get("slide", 0)),
    )


class ConnectivityGraph:
    """Nodes (placed instances) plus realized connector edges."""

    def __init__(self, nodes, edges):
        self.nodes: dict[int, PartInstance] = dict(nodes)
        self.edges: list[ConnEdge] = list(edges)

    def __len__(self):
        return len(self.nodes)

    def adjacency(self) -> dict[int, list[tuple[int, ConnEdge]]]:
        adj: dict[int, list[tuple[int, ConnEdge]]] = {n: [] for n in sorted(self.nodes)}
        for e in self.edges:
            adj[e.a[0]].append((e.b[0], e))
            adj[e.b[0]].append((e.a[0], e))
        return adj

    def component(self, start: int) -> set[int]:
        adj = self.adjacency()
        seen = {start}
        todo = [start]
        while todo:
            u = todo.pop()
            for v, _ in adj[u]:
                if v not in seen:
                    seen.add(v)
                    todo.append(v)
        return seen

    def to_json_obj(self) -> dict:
        return {
            "nodes": [
                {
                    "id": nid,
                    "part": inst.part_id,
                    "color": inst.color,
                    "pose": {
                        "rot": [float(v) for v in inst.pose.rotation.reshape(9)],
                        "t": [float(v) for v in inst.pose.translation],
                    },
                }
                for nid, inst in sorted(self.nodes.items())
            ],
            "edges": [e.to_json_obj() for e in self.edges],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)

    @classmethod
    def from_json_obj(cls, obj) -> "ConnectivityGraph":
        nodes = {}
        for n in obj.get("nodes", []):
            pose = RigidTransform(
                np.array(n["pose"]["rot"], dtype=np.float64).reshape(3, 3),
                np.array(n["pose"]["t"], dtype=np.float64),
            )
            nid = int(n["id"])
            nodes[nid] = PartInstance(
                node_id=nid, part_id=n["part"], color=int(n["color"]), pose=pose
            )
        edges = [ConnEdge.from_json_obj(e) for e in obj.get("edges", [])]
        return cls(nodes, edges)

    @classmethod
    def loads(cls, text: str) -> "ConnectivityGraph":
        return cls.from_json_obj(json.loads(text))


@dataclass(frozen=True)
class PathStep:
    """Introduce ``new_node`` and attach it over ``edge`` (whose other
    endpoint was introduced earlier)."""

    new_node: int
    edge: ConnEdge


@dataclass
class BuildPath:
    """Spanning-tree prefix: a root plus ordered attach steps."""

    root: int
    steps: list[PathStep]
    graph: ConnectivityGraph | None = field(default=None, repr=False)

    def nodes_in_order(self) -> list[int]:
        return [self.root] + [s.new_node for s in self.steps]

    def __len__(self):
        return 1 + len(self.steps)


# ---------------------------------------------------------------------------
# Parameter extraction / realization


def _rx(deg):
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _ry(deg):
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rz(deg):
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _euler_zyx_matrix(e1, e2, e3) -> np.ndarray:
    return _rz(e1) @ _ry(e2) @ _rx(e3)


def _euler_zyx_angles(r: np.ndarray) -> tuple[float, float, float]:
    """Intrinsic Z-Y-X euler angles of a rotation; the gimbal-locked case
    pins the third angle to zero."""
    sy = min(1.0, max(-1.0, -float(r[2, 0])))
    b = math.degrees(math.asin(sy))
    if abs(sy) >= 1.0 - _GIMBAL_EPS:
        a = math.degrees(math.atan2(-r[0, 1], r[1, 1]))
        c = 0.0
    else:
        a = math.degrees(math.atan2(r[1, 0], r[0, 0]))
        c = math.degrees(math.atan2(r[2, 1], r[2, 2]))
    return a, b, c


def canonical_ball_euler(euler_deg) -> tuple[int, int, int]:
    """The canonical integer triple equivalent to the given one (the fixed
    point of extract-after-realize)."""
    r = _euler_zyx_matrix(*euler_deg)
    a, b, c = _euler_zyx_angles(r)
    return (quantize_angle(a), quantize_angle(b), quantize_angle(c))


def _mate_rotation(family: ConnectorFamily, params: QuantizedParams) -> np.ndarray:
    if family == ConnectorFamily.BALL:
        return _euler_zyx_matrix(*(params.euler_deg or (0, 0, 0)))
    base = FLIP_ROTATION if params.flip else np.eye(3)
    if family == ConnectorFamily.FIXED:
        return base
    return _rz(params.yaw_deg) @ base


def _validate_params(family: ConnectorFamily, params: QuantizedParams):
    dof = dof_spec(family)
    if params.flip and not dof.has_flip:
        raise MatchError(f"{family.value} connections have no flip parameter")
    if params.slide_ldu and not dof.has_slide:
        raise MatchError(f"{family.value} connections have no slide parameter")
    if family == ConnectorFamily.BALL:
        if params.euler_deg is None:
            raise MatchError("ball connections need an euler triple")
        if params.yaw_deg:
            raise MatchError("ball connections carry euler angles, not yaw")
    else:
        if params.euler_deg is not None:
            raise MatchError(f"{family.value} connections have no euler triple")
        if params.yaw_deg and dof.rotational_dof == 0:
            raise MatchError(f"{family.value} connections have no yaw parameter")


def realize_params(
    existing: ConnectorFrame, params: QuantizedParams, family: ConnectorFamily
) -> ConnectorFrame:
    """World frame of the mated connector implied by quantized parameters."""
    family = ConnectorFamily(family)
    _validate_params(family, params)
    r = _mate_rotation(family, params)
    t = np.array([0.0, 0.0, float(params.slide_ldu)])
    te = existing.as_transform()
    world = RigidTransform(te.rotation @ r, te.rotation @ t + te.translation)
    return ConnectorFrame.from_transform(world)


def _wrap_deg(angle: float) -> float:
    """Wrap to (-180, 180]."""
    a = math.fmod(angle, 360.0)
    if a > 180.0:
        a -= 360.0
    elif a <= -180.0:
        a += 360.0
    return a


def _check_pairing(
    family: ConnectorFamily,
    r: np.ndarray,
    t: np.ndarray,
    tol: MatchTolerances,
    max_slide: float | None,
) -> bool:
    """Family-aware matching predicate on the relative connector transform.

    Ball joints are exempt from the axis-alignment requirement (their three
    rotational DOF make any relative rotation representable); families
    without a flip DOF require the canonical anti-parallel polarity; fixed
    connections additionally require zero yaw within tolerance.
    """
    cos_axis = math.cos(math.radians(tol.axis_deg))
    dist = float(np.linalg.norm(t))
    align = float(r[2, 2])
    if family == ConnectorFamily.BALL:
        return dist <= tol.position
    if family == ConnectorFamily.STUD:
        return dist <= tol.position and align >= cos_axis
    if family == ConnectorFamily.FIXED:
        if dist > tol.position or align < cos_axis:
            return False
        yaw = math.degrees(math.atan2(r[1, 0], r[0, 0]))
        return abs(_wrap_deg(yaw)) <= tol.axis_deg
    if family == ConnectorFamily.HINGE:
        return dist <= tol.position and abs(align) >= cos_axis
    if family == ConnectorFamily.AXLE:
        perp = math.hypot(float(t[0]), float(t[1]))
        if perp > tol.position or abs(align) < cos_axis:
            return False
        if max_slide is None:
            return True
        return abs(float(t[2])) <= max_slide + tol.position
    raise MatchError(f"unknown family {family!r}")


def extract_params(
    frame_a: ConnectorFrame,
    frame_b: ConnectorFrame,
    family: ConnectorFamily,
    tol: MatchTolerances | None = None,
    max_slide: float | None = None,
    _checked: bool = False,
) -> QuantizedParams:
    """Quantized parameters of the connection from frame_a to frame_b.

    Raises MatchError when the frames do not satisfy the family's matching
    predicate at the given tolerances.
    """
    family = ConnectorFamily(family)
    tol = tol or MatchTolerances()
    m = relative(frame_a.as_transform(), frame_b.as_transform())
    r, t = m.rotation, m.translation
    if not _checked and not _check_pairing(family, r, t, tol, max_slide):
        raise MatchError("not a valid pairing")

    if family == ConnectorFamily.FIXED:
        return QuantizedParams()
    if family == ConnectorFamily.BALL:
        a, b, c = _euler_zyx_angles(r)
        return QuantizedParams(
            euler_deg=(quantize_angle(a), quantize_angle(b), quantize_angle(c))
        )
    flip = bool(r[2, 2] < 0.0)
    rz = r @ (FLIP_ROTATION if flip else np.eye(3))
    yaw = quantize_angle(math.degrees(math.atan2(rz[1, 0], rz[0, 0])))
    if family == ConnectorFamily.STUD:
        return QuantizedParams(yaw_deg=yaw)
    if family == ConnectorFamily.HINGE:
        return QuantizedParams(yaw_deg=yaw, flip=flip)
    return QuantizedParams(yaw_deg=yaw, flip=flip, slide_ldu=quantize_slide(float(t[2])))


def reverse_params(family: ConnectorFamily, params: QuantizedParams) -> QuantizedParams:
    """Parameters of the same edge traversed in the opposite direction.

    Exact on the integer grid for stud/hinge/axle/fixed; ball reversal goes
    through float euler decomposition and re-quantizes (the ZYX triple of an
    inverted rotation is generally not on the integer grid). Unflipped yaw
    and slide negate when the edge direction swaps.
    """
    family = ConnectorFamily(family)
    if family == ConnectorFamily.FIXED:
        return params
    if family == ConnectorFamily.STUD:
        return QuantizedParams(yaw_deg=(-params.yaw_deg) % 360)
    if family in (ConnectorFamily.HINGE, ConnectorFamily.AXLE):
        if params.flip:
            return params  # flipping is its own inverse: yaw and slide survive
        return QuantizedParams(
            yaw_deg=(-params.yaw_deg) % 360, flip=False, slide_ldu=-params.slide_ldu
        )
    re = _euler_zyx_matrix(*(params.euler_deg or (0, 0, 0)))
    a, b, c = _euler_zyx_angles(re.T)
    return QuantizedParams(
        euler_deg=(quantize_angle(a), quantize_angle(b), quantize_angle(c))
    )


# ---------------------------------------------------------------------------
# Matching


def _connector_reach(connector) -> float:
    if dof_spec(connector.family).has_slide and connector.axle_length:
        return float(connector.axle_length) / 2.0
    return 0.0


def _endpoint_key(node_id: int, index: str) -> tuple[int, int]:
    return (node_id, letter_index(index))


def _collect_world_connectors(instances, catalog: Catalog):
    """(node_id, connector, world frame, reach) for every rigid instance;
    raises CatalogError naming any part without an annotation entry."""
    out = []
    for inst in instances:
        if inst.nonrigid:
            continue
        if inst.part_id not in catalog:
            raise CatalogError(f"no connector annotation for part {inst.part_id!r}")
        part = catalog.part(inst.part_id)
        for c in part.connectors:
            out.append((inst.node_id, c, c.frame.transformed(inst.pose), _connector_reach(c)))
    return out


def _candidate_pairs(conns, tol: MatchTolerances):
    """Spatial-hash broad phase: ids of connector pairs whose padded AABBs
    share a grid cell."""
    cell = max(8.0, 4.0 * tol.position)
    grid: dict[tuple[int, int, int], list[int]] = {}
    for i, (_, _, frame, reach) in enumerate(conns):
        pad = tol.position + reach
        lo = np.floor((frame.origin - pad) / cell).astype(int)
        hi = np.floor((frame.origin + pad) / cell).astype(int)
        for cx in range(lo[0], hi[0] + 1):
            for cy in range(lo[1], hi[1] + 1):
                for cz in range(lo[2], hi[2] + 1):
                    grid.setdefault((cx, cy, cz), []).append(i)
    pairs = set()
    for bucket in grid.values():
        for ai in range(len(bucket)):
            for bi in range(ai + 1, len(bucket)):
                i, j = bucket[ai], bucket[bi]
                pairs.add((i, j) if i < j else (j, i))
    return pairs


def _resolve_candidates(conns, pairs, catalog: Catalog, tol: MatchTolerances):
    """Narrow phase plus deterministic degree-constraint resolution."""
    rules = catalog.rules
    candidates = []
    for i, j in pairs:
        node_i, conn_i, frame_i, _ = conns[i]
        node_j, conn_j, frame_j, _ = conns[j]
        if node_i == node_j:
            continue
        if not rules.compatible(conn_i.subtype, conn_j.subtype):
            continue
        # canonical direction: smaller (node, connector) endpoint is 'a'
        ka = _endpoint_key(node_i, conn_i.index)
        kb = _endpoint_key(node_j, conn_j.index)
        if kb < ka:
            (node_i, conn_i, frame_i), (node_j, conn_j, frame_j) = (
                (node_j, conn_j, frame_j),
                (node_i, conn_i, frame_i),
            )
            ka, kb = kb, ka
        family = conn_i.family
        max_slide = None
        if dof_spec(family).has_slide:
            max_slide = ((conn_i.axle_length or 0.0) + (conn_j.axle_length or 0.0)) / 2.0
        m = relative(frame_i.as_transform(), frame_j.as_transform())
        if not _check_pairing(family, m.rotation, m.translation, tol, max_slide):
            continue
        params = extract_params(frame_i, frame_j, family, tol, max_slide, _checked=True)
        candidates.append(
            (
                ka,
                kb,
                ConnEdge((node_i, conn_i.index), (node_j, conn_j.index), family, params),
                rules.is_multi_accept(conn_i.subtype),
                rules.is_multi_accept(conn_j.subtype),
            )
        )

    candidates.sort(key=lambda c: (c[0], c[1]))
    used: set[tuple[int, int]] = set()
    edges = []
    for ka, kb, edge, multi_a, multi_b in candidates:
        if (not multi_a and ka in used) or (not multi_b and kb in used):
            continue
        used.add(ka)
        used.add(kb)
        edges.append(edge)
    return edges


def match_connectors(
    instances, catalog: Catalog, tol: MatchTolerances | None = None
) -> ConnectivityGraph:
    """Pair coincident compatible connectors across posed instances.

    Spatial hashing keeps the expected cost near-linear in connector count;
    when several coincident pairs compete for a single-accept connector the
    lexicographically smallest endpoints win (deterministic and invariant
    under global rigid motion).
    """
    tol = tol or MatchTolerances()
    conns = _collect_world_connectors(instances, catalog)
    pairs = _candidate_pairs(conns, tol)
    edges = _resolve_candidates(conns, pairs, catalog, tol)
    nodes = {inst.node_id: inst for inst in instances if not inst.nonrigid}
    return ConnectivityGraph(nodes, edges)


# ---------------------------------------------------------------------------
# Spanning-tree path sampling


def _wilson_tree(adj, root, comp, rng):
    """Uniform random spanning tree (Wilson's loop-erased random walks).

    Returns {node: (parent, edge)} over the component. Parallel edges count
    as distinct trees, matching the multigraph's spanning-tree distribution.
    """
    in_tree = {root}
    nxt: dict[int, tuple[int, ConnEdge]] = {}
    parent: dict[int, tuple[int, ConnEdge]] = {}
    for start in sorted(comp):
        if start in in_tree:
            continue
        u = start
        while u not in in_tree:
            choices = adj[u]
            if not choices:
                raise MatchError(f"node {u} is isolated within its component")
            nxt[u] = choices[int(rng.integers(len(choices)))]
            u = nxt[u][0]
        u = start
        while u not in in_tree:
            in_tree.add(u)
            parent[u] = nxt[u]
            u = nxt[u][0]
    return parent


def sample_path(
    g: ConnectivityGraph,
    root: int | None = None,
    max_parts: int | None = None,
    seed=None,
    rng: np.random.Generator | None = None,
) -> BuildPath:
    """Uniform-random spanning tree of root's component, introduced in
    random frontier order and truncated to ``max_parts`` nodes."""
    if rng is None:
        rng = np.random.default_rng(seed)
    node_ids = sorted(g.nodes)
    if not node_ids:
        raise MatchError("empty graph")
    if root is None:
        root = node_ids[int(rng.integers(len(node_ids)))]
    elif root not in g.nodes:
        raise MatchError(f"root {root} not in graph")
    if max_parts is not None and max_parts < 1:
        raise ValueError("max_parts must be >= 1")

    comp = g.component(root)
    adj = g.adjacency()
    parent = _wilson_tree(adj, root, comp, rng)

    children: dict[int, list[int]] = {n: [] for n in comp}
    for child in sorted(parent):
        children[parent[child][0]].append(child)

    order = [root]
    steps: list[PathStep] = []
    frontier = list(children[root])
    while frontier and (max_parts is None or len(order) < max_parts):
        node = frontier.pop(int(rng.integers(len(frontier))))
        steps.append(PathStep(node, parent[node][1]))
        order.append(node)
        frontier.extend(children[node])
    return BuildPath(root, steps, graph=g)


def select_corpus_indices(sizes, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw graph indices with probability proportional to sqrt(piece count)."""
    if len(sizes) == 0:
        raise MatchError("empty corpus")
    w = np.sqrt(np.asarray(sizes, dtype=np.float64))
    return rng.choice(len(sizes), size=count, p=w / w.sum())


def truncate_on_collision(path: BuildPath, part_meshes, eps=None) -> BuildPath:
    """Cut a path before the first step whose placement (at its graph pose)
    collides with the parts already placed. Parts without a mesh never
    collide."""
    g = path.graph
    checker = AssemblyChecker() if eps is None else AssemblyChecker(eps)

    def mesh_for(node):
        return part_meshes.get(g.nodes[node].part_id)

    root_mesh = mesh_for(path.root)
    if root_mesh is not None:
        checker.add(root_mesh, g.nodes[path.root].pose, path.root)
    kept = []
    for step in path.steps:
        mesh = mesh_for(step.new_node)
        if mesh is not None:
            if checker.add(mesh, g.nodes[step.new_node].pose, step.new_node):
                break
        kept.append(step)
    if len(kept) == len(path.steps):
        return path
    return BuildPath(path.root, kept, graph=g)


def sample_corpus_paths(
    corpus,
    count: int,
    seed=None,
    max_parts: int = 100,
    part_meshes=None,
) -> list[BuildPath]:
    """Sample build paths across a corpus: graphs drawn proportionally to
    sqrt(piece count), each path capped at ``max_parts`` and truncated to its
    longest collision-free prefix when part meshes are supplied."""
    rng = np.random.default_rng(seed)
    sizes = [len(g) for g in corpus]
    picks = select_corpus_indices(sizes, count, rng)
    out = []
    for i in picks:
        path = sample_path(corpus[int(i)], root=None, max_parts=max_parts, rng=rng)
        if part_meshes is not None:
            path = truncate_on_collision(path, part_meshes)
        out.append(path)
    return out
