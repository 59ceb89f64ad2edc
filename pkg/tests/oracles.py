"""Independent oracles for the heavyweight equivalence tests.

Everything here recomputes results from first principles, without touching
the production spatial hash, BVH traversal or executor internals: the
matcher oracle enumerates every connector pair with broadcast numpy, the
collision oracle tests every triangle pair, and the pose oracle replays a
build path with plain homogeneous 4x4 matrix arithmetic.
"""

import math

import numpy as np

from brickir.connectors import ConnectorFamily
from brickir.geometry import QuantizedParams
from brickir.graph import ConnEdge, ConnectivityGraph


# ---------------------------------------------------------------------------
# Exhaustive connector matcher (acceptance criterion 2 oracle)


def _letter_rank(s: str) -> int:
    n = 0
    for c in s:
        n = n * 26 + (ord(c) - ord("a") + 1)
    return n - 1


_FAMILY_ORDER = list(ConnectorFamily)


def exhaustive_match(instances, catalog, tol) -> ConnectivityGraph:
    """O(n^2 c^2) matcher: the full predicate is evaluated on every connector
    pair with broadcast numpy, then the documented degree-constraint
    resolution applies."""
    rules = catalog.rules
    rows = []  # (node_id, connector, world frame, multi_accept)
    for inst in instances:
        if inst.nonrigid:
            continue
        for c in catalog.part(inst.part_id).connectors:
            f = c.frame.transformed(inst.pose)
            rows.append((inst.node_id, c, f, rules.is_multi_accept(c.subtype)))
    nodes = {i.node_id: i for i in instances if not i.nonrigid}
    n = len(rows)
    if n == 0:
        return ConnectivityGraph(nodes, [])

    origins = np.array([r[2].origin for r in rows])
    zaxes = np.array([r[2].principal_axis for r in rows])
    xaxes = np.array([r[2].reference_axis for r in rows])
    yaxes = np.cross(zaxes, xaxes)
    node_ids = np.array([r[0] for r in rows])
    lens = np.array([r[1].axle_length or 0.0 for r in rows])
    fam_ids = np.array([_FAMILY_ORDER.index(r[1].family) for r in rows])

    sub_names = sorted({r[1].subtype for r in rows})
    sub_idx = {s: k for k, s in enumerate(sub_names)}
    compat_table = np.array(
        [[rules.compatible(a, b) for b in sub_names] for a in sub_names]
    )
    subs = np.array([sub_idx[r[1].subtype] for r in rows])

    d = origins[None, :, :] - origins[:, None, :]  # [i, j] = origin_j - origin_i
    dist = np.linalg.norm(d, axis=2)
    align = np.einsum("ik,jk->ij", zaxes, zaxes)
    axial = np.einsum("ijk,ik->ij", d, zaxes)  # offset of j along i's axis
    perp = np.sqrt(np.maximum(dist**2 - axial**2, 0.0))
    cos_axis = math.cos(math.radians(tol.axis_deg))
    pos_ok = dist <= tol.position

    # yaw[i, j]: angle of j's reference axis in i's (x, y) plane
    bx_dot_x = np.einsum("jk,ik->ij", xaxes, xaxes)
    bx_dot_y = np.einsum("jk,ik->ij", xaxes, yaxes)
    yaw = np.degrees(np.arctan2(bx_dot_y, bx_dot_x))
    yaw_wrapped = np.abs((yaw + 180.0) % 360.0 - 180.0)

    fam_i = fam_ids[:, None]
    geo = np.zeros((n, n), dtype=bool)
    fam_of = {f: _FAMILY_ORDER.index(f) for f in ConnectorFamily}
    geo |= (fam_i == fam_of[ConnectorFamily.BALL]) & pos_ok
    geo |= (fam_i == fam_of[ConnectorFamily.STUD]) & pos_ok & (align >= cos_axis)
    geo |= (
        (fam_i == fam_of[ConnectorFamily.FIXED])
        & pos_ok
        & (align >= cos_axis)
        & (yaw_wrapped <= tol.axis_deg)
    )
    geo |= (fam_i == fam_of[ConnectorFamily.HINGE]) & pos_ok & (np.abs(align) >= cos_axis)
    slide_bound = (lens[:, None] + lens[None, :]) / 2.0 + tol.position
    geo |= (
        (fam_i == fam_of[ConnectorFamily.AXLE])
        & (perp <= tol.position)
        & (np.abs(align) >= cos_axis)
        & (np.abs(axial) <= slide_bound)
    )

    mask = (
        geo
        & compat_table[subs[:, None], subs[None, :]]
        & (node_ids[:, None] != node_ids[None, :])
        & np.triu(np.ones((n, n), dtype=bool), k=1)
    )

    candidates = []
    for i, j in np.argwhere(mask):
        ka = (rows[i][0], _letter_rank(rows[i][1].index))
        kb = (rows[j][0], _letter_rank(rows[j][1].index))
        a, b = (i, j) if ka <= kb else (j, i)
        if kb < ka:
            ka, kb = kb, ka
        candidates.append((ka, kb, a, b))

    candidates.sort(key=lambda c: (c[0], c[1]))
    used = set()
    edges = []
    for ka, kb, a, b in candidates:
        if (not rows[a][3] and ka in used) or (not rows[b][3] and kb in used):
            continue
        used.add(ka)
        used.add(kb)
        edges.append(
            ConnEdge(
                (rows[a][0], rows[a][1].index),
                (rows[b][0], rows[b][1].index),
                rows[a][1].family,
                _oracle_params(rows[a][2], rows[b][2], rows[a][1].family),
            )
        )
    return ConnectivityGraph(nodes, edges)


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def _oracle_params(fa, fb, family) -> QuantizedParams:
    """Quantized edge parameters recomputed with explicit vector algebra."""
    z_a, x_a = fa.principal_axis, fa.reference_axis
    y_a = np.cross(z_a, x_a)
    d = fb.origin - fa.origin
    if family == ConnectorFamily.FIXED:
        return QuantizedParams()
    if family == ConnectorFamily.BALL:
        basis_a = np.column_stack([x_a, y_a, z_a])
        z_b, x_b = fb.principal_axis, fb.reference_axis
        basis_b = np.column_stack([x_b, np.cross(z_b, x_b), z_b])
        re = basis_a.T @ basis_b
        sy = min(1.0, max(-1.0, -float(re[2, 0])))
        b = math.degrees(math.asin(sy))
        if abs(sy) >= 1.0 - 1e-12:
            a = math.degrees(math.atan2(-re[0, 1], re[1, 1]))
            c = 0.0
        else:
            a = math.degrees(math.atan2(re[1, 0], re[0, 0]))
            c = math.degrees(math.atan2(re[2, 1], re[2, 2]))
        return QuantizedParams(
            euler_deg=tuple(_round_half_up(v) % 360 for v in (a, b, c))
        )
    flip = bool(float(fa.principal_axis @ fb.principal_axis) < 0.0)
    # yaw: signed angle from a's reference axis to b's, about a's principal
    # axis, i.e. the angle of b's x projected into a's xy plane
    bx = fb.reference_axis
    yaw = math.degrees(math.atan2(float(bx @ y_a), float(bx @ x_a)))
    params = {"yaw_deg": _round_half_up(yaw) % 360}
    if family == ConnectorFamily.STUD:
        return QuantizedParams(**params)
    params["flip"] = flip
    if family == ConnectorFamily.HINGE:
        return QuantizedParams(**params)
    params["slide_ldu"] = _round_half_up(float(d @ z_a))
    return QuantizedParams(**params)


def graphs_equal(g1: ConnectivityGraph, g2: ConnectivityGraph) -> bool:
    """Same node ids and identical canonical edge sets (params included)."""
    if set(g1.nodes) != set(g2.nodes):
        return False

    def canon(g):
        return sorted(
            (e.a, e.b, e.family.value, e.params.yaw_deg, e.params.flip,
             e.params.slide_ldu, e.params.euler_deg)
            for e in g.edges
        )

    return canon(g1) == canon(g2)


# ---------------------------------------------------------------------------
# Brute-force mesh intersection (acceptance criterion 3 oracle)


def brute_force_intersects(mesh_a, pose_a, mesh_b, pose_b, eps: float = 1e-6) -> bool:
    """All-triangle-pairs intersection with broadcast interval tests, plus the
    same parity-based containment rule for closed meshes."""
    ta = pose_a.apply(mesh_a.vertices)[mesh_a.triangles]  # (na, 3, 3)
    tb = pose_b.apply(mesh_b.vertices)[mesh_b.triangles]
    if _any_pair_intersects(ta, tb, eps):
        return True
    if mesh_a.closed and mesh_b.closed:
        if _parity_inside(ta[0, 0], tb) or _parity_inside(tb[0, 0], ta):
            return True
    return False


def _any_pair_intersects(ta, tb, eps) -> bool:
    na, nb = len(ta), len(tb)
    if na == 0 or nb == 0:
        return False
    nrm_b = np.cross(tb[:, 1] - tb[:, 0], tb[:, 2] - tb[:, 0])  # (nb, 3)
    d_b = -np.einsum("ij,ij->i", nrm_b, tb[:, 0])
    nrm_a = np.cross(ta[:, 1] - ta[:, 0], ta[:, 2] - ta[:, 0])
    d_a = -np.einsum("ij,ij->i", nrm_a, ta[:, 0])

    # signed distances of a's corners to b's planes: (na, nb, 3)
    dp = np.einsum("ack,bk->abc", ta, nrm_b) + d_b[None, :, None]
    snap = eps * np.linalg.norm(nrm_b, axis=1)[None, :, None]
    dp = np.where(np.abs(dp) <= snap, 0.0, dp)
    cross_a = ~((dp >= 0).all(axis=2) | (dp <= 0).all(axis=2))

    dq = np.einsum("bck,ak->abc", tb, nrm_a) + d_a[:, None, None]
    snap = eps * np.linalg.norm(nrm_a, axis=1)[:, None, None]
    dq = np.where(np.abs(dq) <= snap, 0.0, dq)
    cross_b = ~((dq >= 0).all(axis=2) | (dq <= 0).all(axis=2))

    pairs = np.argwhere(cross_a & cross_b)
    for ia, ib in pairs:
        axis = int(np.argmax(np.abs(np.cross(nrm_a[ia], nrm_b[ib]))))
        a0, a1 = _project(ta[ia], dp[ia, ib], axis)
        b0, b1 = _project(tb[ib], dq[ia, ib], axis)
        if min(a1, b1) - max(a0, b0) > eps:
            return True
    return False


def _project(tri, dv, axis):
    d01, d02, d12 = dv[0] * dv[1], dv[0] * dv[2], dv[1] * dv[2]
    if d01 > 0:
        alone = 2
    elif d02 > 0:
        alone = 1
    elif d12 > 0 or dv[0] != 0:
        alone = 0
    elif dv[1] != 0:
        alone = 1
    else:
        alone = 2
    others = [k for k in range(3) if k != alone]
    pts = []
    for o in others:
        denom = dv[alone] - dv[o]
        if denom == 0.0:
            return (np.inf, -np.inf)
        s = dv[alone] / denom
        pts.append(tri[alone, axis] + (tri[o, axis] - tri[alone, axis]) * s)
    return (min(pts), max(pts))


_ORACLE_RAY = np.array([0.514229, 0.607062, 0.605913])
_ORACLE_RAY = _ORACLE_RAY / np.linalg.norm(_ORACLE_RAY)


def _parity_inside(point, tris) -> bool:
    v0 = tris[:, 0]
    e1 = tris[:, 1] - v0
    e2 = tris[:, 2] - v0
    h = np.cross(_ORACLE_RAY[None, :], e2)
    det = np.einsum("ij,ij->i", e1, h)
    ok = np.abs(det) > 1e-12
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    s = point[None, :] - v0
    u = np.einsum("ij,ij->i", s, h) * inv
    qv = np.cross(s, e1)
    v = (qv @ _ORACLE_RAY) * inv
    t = np.einsum("ij,ij->i", e2, qv) * inv
    hits = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 1e-9)
    return bool(hits.sum() % 2 == 1)


# ---------------------------------------------------------------------------
# Independent pose replay (acceptance criterion 1 oracle)


def _hom(rot, trans):
    m = np.eye(4)
    m[:3, :3] = rot
    m[:3, 3] = trans
    return m


def _rot_z(deg):
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rot_y(deg):
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_x(deg):
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _frame_hom(frame) -> np.ndarray:
    x = frame.reference_axis
    z = frame.principal_axis
    return _hom(np.column_stack([x, np.cross(z, x), z]), frame.origin)


def replay_path_poses(path, catalog) -> dict:
    """Recompute every node pose of a build path from its edges' quantized
    parameters, using homogeneous matrices only (root at its graph pose)."""
    g = path.graph
    poses = {path.root: _hom(g.nodes[path.root].pose.rotation,
                             g.nodes[path.root].pose.translation)}
    flipmat = np.diag([1.0, -1.0, -1.0])
    for step in path.steps:
        edge = step.edge
        target, target_conn = edge.other_end(step.new_node)
        if edge.a[0] == target:
            params = edge.params
            new_conn = edge.b[1]
            reverse = False
        else:
            params = edge.params
            new_conn = edge.a[1]
            reverse = True
        fam = edge.family
        p = params
        if fam == ConnectorFamily.BALL:
            rel_rot = _rot_z(p.euler_deg[0]) @ _rot_y(p.euler_deg[1]) @ _rot_x(p.euler_deg[2])
        elif fam == ConnectorFamily.FIXED:
            rel_rot = np.eye(3)
        else:
            rel_rot = _rot_z(p.yaw_deg) @ (flipmat if p.flip else np.eye(3))
        rel = _hom(rel_rot, np.array([0.0, 0.0, float(p.slide_ldu)]))
        if reverse:
            rel = np.linalg.inv(rel)
        t_part = catalog.connector(g.nodes[target].part_id, target_conn).frame
        n_part = catalog.connector(g.nodes[step.new_node].part_id, new_conn).frame
        world_conn = poses[target] @ _frame_hom(t_part) @ rel
        poses[step.new_node] = world_conn @ np.linalg.inv(_frame_hom(n_part))
    return poses
