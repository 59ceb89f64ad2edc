import numpy as np
import pytest

from brickir.collision import (
    AssemblyChecker,
    CollisionMesh,
    PartColliders,
    box_mesh,
    check_assembly,
    icosphere_mesh,
    inset_mesh,
    intersects,
    load_mesh_file,
    merge_meshes,
    point_in_mesh,
    tri_tri_intersect,
)
from brickir.errors import BrickIrError
from brickir.geometry import RigidTransform

from conftest import random_rigid
from oracles import brute_force_intersects

I = RigidTransform.identity()


def _mesh(verts_tris) -> CollisionMesh:
    return CollisionMesh.build(*verts_tris)


def _trans(x, y, z):
    return RigidTransform(np.eye(3), np.array([x, y, z], float))


# ---------------------------------------------------------------------------
# Inset


def test_inset_cube_closed_form():
    verts, tris = box_mesh((20.0, 20.0, 20.0))
    out = inset_mesh(verts, tris, 0.25)
    assert out.source_inset == 0.25
    expected = box_mesh((19.5, 19.5, 19.5))[0]
    got = np.array(sorted(map(tuple, out.vertices)))
    want = np.array(sorted(map(tuple, expected)))
    assert np.abs(got - want).max() <= 1e-9


def test_inset_zero_is_identity():
    verts, tris = box_mesh((20.0, 12.0, 8.0), center=(3, 4, 5))
    out = inset_mesh(verts, tris, 0.0)
    assert np.array_equal(out.vertices, verts)
    assert np.array_equal(out.triangles, tris)


def test_inset_sphere_radius_bound():
    r = 10.0
    verts, tris = icosphere_mesh(r, subdivisions=2)
    out = inset_mesh(verts, tris, 0.25)
    radii = np.linalg.norm(out.vertices, axis=1)
    assert radii.max() <= r - 0.25 + 0.05


def test_inset_empty_mesh_errors():
    with pytest.raises(BrickIrError, match="empty"):
        inset_mesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=int), 0.25)


def test_inset_drops_degenerate_triangles():
    verts, tris = box_mesh((10.0, 10.0, 10.0))
    verts = np.vstack([verts, [[0, 0, 0], [0, 0, 0], [0, 0, 0]]])
    tris = np.vstack([tris, [[8, 9, 10]]])  # zero-area sliver
    out = inset_mesh(verts, tris, 0.1)
    assert len(out.triangles) == 12
    assert len(out.vertices) == 8


def test_closed_flag():
    assert _mesh(box_mesh((4, 4, 4))).closed
    verts, tris = box_mesh((4, 4, 4))
    assert not CollisionMesh.build(verts, tris[:-1]).closed  # open: one face missing


# ---------------------------------------------------------------------------
# Pairwise intersection


def test_separated_boxes_do_not_intersect():
    a = _mesh(box_mesh((2, 2, 2)))
    assert not intersects(a, I, a, _trans(5, 0, 0))


def test_identical_box_self_intersects():
    a = _mesh(box_mesh((2, 2, 2)))
    assert intersects(a, I, a, I)


def test_touching_faces_do_not_count():
    a = _mesh(box_mesh((2, 4, 6)))
    assert not intersects(a, I, a, _trans(2.0, 0, 0))
    assert intersects(a, I, a, _trans(2.0 - 1e-3, 1.0, 1.5))


def test_containment_detected_for_closed_meshes():
    big = _mesh(box_mesh((20, 20, 20)))
    small = _mesh(box_mesh((2, 2, 2)))
    assert intersects(big, I, small, _trans(1, 2, 3))
    assert intersects(small, _trans(1, 2, 3), big, I)
    assert brute_force_intersects(big, I, small, _trans(1, 2, 3))


def test_point_in_mesh():
    cube = _mesh(box_mesh((10, 10, 10)))
    assert point_in_mesh(np.array([0.0, 0.0, 0.0]), cube)
    assert point_in_mesh(np.array([4.9, -4.9, 4.9]), cube)
    assert not point_in_mesh(np.array([5.1, 0.0, 0.0]), cube)
    assert not point_in_mesh(np.array([100.0, 3.0, -7.0]), cube)


def test_tri_tri_basic():
    p = np.array([[0, 0, 0], [4, 0, 0], [0, 4, 0]], float)
    q = np.array([[1, 1, -1], [1, 1, 1], [3, 3, 0]], float)  # pierces p
    assert tri_tri_intersect(p, q)
    far = q + np.array([0, 0, 10.0])
    assert not tri_tri_intersect(p, far)
    coplanar = p + np.array([1.0, 1.0, 0.0])
    assert not tri_tri_intersect(p, coplanar)  # coplanar overlap = touching


def _random_box_mesh(rng):
    size = rng.uniform(1.0, 8.0, 3)
    return _mesh(box_mesh(size))


@pytest.mark.parametrize("seed", range(4))
def test_bvh_agrees_with_bruteforce_random(seed):
    rng = np.random.default_rng(300 + seed)
    cases = 0
    hits = 0
    meshes = [_random_box_mesh(rng) for _ in range(6)]
    meshes.append(_mesh(icosphere_mesh(3.0, 1)))
    while cases < 50:
        a = meshes[int(rng.integers(len(meshes)))]
        b = meshes[int(rng.integers(len(meshes)))]
        pa = random_rigid(rng, scale=4.0)
        pb = random_rigid(rng, scale=4.0)
        got = intersects(a, pa, b, pb)
        want = brute_force_intersects(a, pa, b, pb)
        assert got == want
        hits += got
        cases += 1
    assert 0 < hits < cases  # the sample exercises both outcomes


def test_intersects_symmetry():
    rng = np.random.default_rng(7)
    a = _random_box_mesh(rng)
    b = _mesh(icosphere_mesh(2.5, 1))
    for _ in range(20):
        pa = random_rigid(rng, scale=3.0)
        pb = random_rigid(rng, scale=3.0)
        assert intersects(a, pa, b, pb) == intersects(b, pb, a, pa)


def test_inset_monotonicity_sampled():
    rng = np.random.default_rng(8)
    raw = box_mesh((6.0, 6.0, 6.0))
    for _ in range(10):
        gap = rng.uniform(-0.4, 0.6)
        pose = _trans(6.0 + gap, rng.uniform(-1, 1), rng.uniform(-1, 1))
        world = random_rigid(rng)
        pa = world
        pb = RigidTransform(
            world.rotation @ pose.rotation, world.rotation @ pose.translation + world.translation
        )
        previous = None
        for delta in (0.0, 0.1, 0.2, 0.4):
            m = inset_mesh(*raw, delta) if delta else _mesh(raw)
            hit = intersects(m, pa, m, pb)
            if previous is False:
                assert hit is False
            previous = hit


# ---------------------------------------------------------------------------
# Tight fit: peg in sleeve with 0.5 LDU diametral interference


def _peg_and_sleeve():
    peg = box_mesh((6.0, 6.0, 8.0), center=(0, 0, 4))
    walls = [
        box_mesh((3.25, 12, 8), center=(4.375, 0, 8)),
        box_mesh((3.25, 12, 8), center=(-4.375, 0, 8)),
        box_mesh((12, 3.25, 8), center=(0, 4.375, 8)),
        box_mesh((12, 3.25, 8), center=(0, -4.375, 8)),
    ]
    return peg, merge_meshes(walls)


def test_tight_fit_collides_raw_but_not_after_inset():
    peg_raw, sleeve_raw = _peg_and_sleeve()
    assert intersects(_mesh(peg_raw), I, _mesh(sleeve_raw), I)
    assert brute_force_intersects(_mesh(peg_raw), I, _mesh(sleeve_raw), I)
    peg = inset_mesh(*peg_raw, 0.25)
    sleeve = inset_mesh(*sleeve_raw, 0.25)
    assert not intersects(peg, I, sleeve, I)
    assert not brute_force_intersects(peg, I, sleeve, I)


# ---------------------------------------------------------------------------
# Assembly checks


def test_check_assembly_empty_and_single():
    assert check_assembly([]).colliding_pairs == ()
    cube = _mesh(box_mesh((4, 4, 4)))
    report = check_assembly([(cube, I)])
    assert report.colliding_pairs == ()
    assert report.first_offender is None


def test_check_assembly_planted_overlaps():
    rng = np.random.default_rng(17)
    cube = _mesh(box_mesh((20, 20, 20)))
    poses = [_trans(30.0 * i, 0, 0) for i in range(10)]
    poses[4] = _trans(30.0 * 2 + 5, 3, 2)  # overlaps instance 2
    poses[9] = _trans(30.0 * 8 + 7, -4, 1)  # overlaps instance 8
    instances = [(cube, p) for p in poses]
    report = check_assembly(instances)
    assert report.colliding_pairs == ((2, 4), (8, 9))
    assert report.first_offender == 4
    # all-pairs oracle agreement
    oracle_pairs = sorted(
        (i, j)
        for i in range(10)
        for j in range(i + 1, 10)
        if brute_force_intersects(cube, poses[i], cube, poses[j])
    )
    assert list(report.colliding_pairs) == oracle_pairs


def test_assembly_checker_incremental():
    cube = _mesh(box_mesh((20, 20, 20)))
    checker = AssemblyChecker()
    assert checker.add(cube, _trans(0, 0, 0), "a") == []
    assert checker.add(cube, _trans(30, 0, 0), "b") == []
    assert checker.add(cube, _trans(25, 2, 1), "c") == ["b"]
    assert checker.first_offender == 2


def test_part_colliders_from_catalog():
    from brickir.demo import build_demo_catalog

    cat = build_demo_catalog()
    colliders = PartColliders.from_catalog(cat, inset=0.25)
    mesh = colliders.mesh("3024")
    assert mesh is not None
    assert mesh.source_inset == 0.25
    assert colliders.mesh("nope") is None
    session = colliders.session()
    assert session.add(mesh, I) == []


def test_load_mesh_file_obj_and_npz(tmp_path):
    obj = tmp_path / "tri.obj"
    obj.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3 4\n")
    verts, tris = load_mesh_file(obj)
    assert len(verts) == 4
    assert len(tris) == 2  # quad fan-triangulated
    npz = tmp_path / "mesh.npz"
    np.savez(npz, vertices=verts, triangles=tris)
    verts2, tris2 = load_mesh_file(npz)
    assert np.array_equal(verts, verts2)
    assert np.array_equal(tris, tris2)
