import numpy as np
import pytest

import brickir
from brickir.catalog import Catalog, PartDef
from brickir.collision import PartColliders
from brickir.connectors import AnnotatedConnector, ConnectorFamily
from brickir.demo import build_demo_catalog, demo_ldr, generate_random_path
from brickir.errors import CatalogError, ProgramError
from brickir.geometry import ConnectorFrame, QuantizedParams, RigidTransform, compose
from brickir.graph import BuildPath, ConnEdge, ConnectivityGraph, PathStep
from brickir.ldraw import PartInstance
from brickir.program import (
    execute,
    node_letters,
    parse_program,
    render_program,
    serialize,
    validate_prefix,
)

CAT = build_demo_catalog()


def _frame(origin, axis=(0, -1, 0), ref=(1, 0, 0)):
    return ConnectorFrame(np.array(origin, float), np.array(axis, float), np.array(ref, float))


def _single_part_path(part_id="3023", color=22):
    nodes = {0: PartInstance(0, part_id, color, RigidTransform.identity())}
    g = ConnectivityGraph(nodes, [])
    return BuildPath(0, [], graph=g)


# ---------------------------------------------------------------------------
# Serialization


def test_serialize_root_only_line():
    text = serialize(_single_part_path(), CAT)
    assert text == "a plate 1x2 | purple\n"


def test_serialize_canonical_sample_lines():
    # craft a catalog whose 'brick 1x2' exposes studs only, so its second
    # connector (index b) is the stud used in the sample sequence
    parts = dict(CAT.parts)
    parts["b12"] = PartDef(
        "b12",
        "brick 1x2",
        (
            AnnotatedConnector("a", ConnectorFamily.STUD, "stud", _frame((-10, 0, 0))),
            AnnotatedConnector("b", ConnectorFamily.STUD, "stud", _frame((10, 0, 0))),
        ),
    )
    cat = Catalog(parts)
    nodes = {
        0: PartInstance(0, "3023", 22, RigidTransform.identity()),
        1: PartInstance(1, "b12", 22, RigidTransform.identity()),
    }
    edge = ConnEdge((0, "b"), (1, "b"), ConnectorFamily.STUD, QuantizedParams(yaw_deg=90))
    path = BuildPath(0, [PathStep(1, edge)], graph=ConnectivityGraph(nodes, [edge]))
    text = serialize(path, cat)
    assert text.splitlines() == [
        "a plate 1x2 | purple",
        "b brick 1x2 | purple",
        "a stud hole b stud b 90",
    ]


def test_serialize_missing_color_name_errors():
    path = _single_part_path(color=999)
    with pytest.raises(CatalogError, match="999"):
        serialize(path, CAT)


def test_serialize_parse_render_byte_identical():
    rng = np.random.default_rng(11)
    for _ in range(10):
        path = generate_random_path(CAT, rng, 20)
        text = serialize(path, CAT)
        result = parse_program(text, CAT)
        assert result.error is None
        assert render_program(result.program) == text


# ---------------------------------------------------------------------------
# Parsing


def test_parse_empty_program():
    result = parse_program("", CAT)
    assert result.error is None
    assert len(result.program) == 0


VALID = (
    "a plate 1x2 | red\n"
    "b plate 1x2 | blue\n"
    "a stud stud a hole b 0\n"
    "c plate 1x2 | green\n"
    "b stud stud a hole b 0\n"
)


def test_parse_valid_program():
    result = parse_program(VALID, CAT)
    assert result.error is None
    assert result.program.action_count == 3


CORRUPTIONS = [
    # (replace line index, new line, expected code, expected surviving actions)
    (3, "c zzz nonexistent | green", "unknown-part", 2),
    (3, "c plate 1x2 | glittering", "unknown-color", 2),
    (3, "q plate 1x2 | green", "bad-node-id", 2),
    (3, "c | green", "malformed-line", 2),
    (4, "b weld stud a hole b 0", "unknown-family", 2),
    (4, "b stud pin a hole b 0", "unknown-subtype", 2),
    (4, "b stud stud a stud b 0", "incompatible-subtypes", 2),
    (4, "b stud stud a hole b x", "bad-params", 2),
    (4, "b stud stud a hole b", "bad-params", 2),
    (4, "b stud stud a hole b 0 7", "bad-params", 2),
    (4, "c stud stud a hole b 0", "self-attach", 2),
    (4, "q stud stud a hole b 0", "target-not-introduced", 2),
    (4, "b stud stud zz hole b 0", "unknown-connector", 2),
    (4, "b stud stud b hole b 0", "subtype-mismatch", 2),
    (2, "c plate 1x2 | green", "missing-attach", 1),
    (0, "a stud stud a hole b 0", "unexpected-attach", 0),
]


@pytest.mark.parametrize("line_idx,new_line,code,actions", CORRUPTIONS)
def test_parse_error_codes_and_prefix_lengths(line_idx, new_line, code, actions):
    lines = VALID.splitlines()
    lines[line_idx] = new_line
    text = "\n".join(lines) + "\n"
    result = parse_program(text, CAT)
    assert result.error is not None
    assert result.error.code == code
    assert result.error.line == line_idx + 1
    assert result.program.action_count == actions
    with pytest.raises(ProgramError):
        parse_program(text, CAT, strict=True)


def test_parse_attach_before_intro_prefix_is_empty():
    result = parse_program("a stud stud a hole b 0\n", CAT)
    assert result.error.code == "unexpected-attach"
    assert len(result.program) == 0


def test_parse_trailing_unattached_intro():
    text = "a plate 1x2 | red\nb plate 1x2 | blue\n"
    result = parse_program(text, CAT)
    assert result.error.code == "missing-attach"
    assert result.program.action_count == 1


# ---------------------------------------------------------------------------
# Execution


def test_execute_single_part_identity():
    result = parse_program("a plate 1x2 | red\n", CAT)
    poses = execute(result.program, CAT)
    assert set(poses) == {"a"}
    assert poses["a"].is_close(RigidTransform.identity(), tol=0.0)


def _chain_catalog():
    # a link with fixed 'in' at the origin and fixed 'on' 10 LDU along +z:
    # chaining k links shifts exactly (0, 0, 10k)
    link = PartDef(
        "link",
        "chain link",
        (
            AnnotatedConnector(
                "a", ConnectorFamily.FIXED, "in", _frame((0, 0, 0), axis=(0, 0, 1))
            ),
            AnnotatedConnector(
                "b", ConnectorFamily.FIXED, "on", _frame((0, 0, 10), axis=(0, 0, 1))
            ),
        ),
    )
    return Catalog({"link": link})


def test_execute_fixed_chain_closed_form():
    cat = _chain_catalog()
    k = 12
    lines = ["a chain link | red"]
    for i in range(1, k):
        prev = chr(ord("a") + i - 1)
        cur = chr(ord("a") + i)
        lines.append(f"{cur} chain link | red")
        lines.append(f"{prev} fixed on b in a")
    result = parse_program("\n".join(lines) + "\n", cat)
    assert result.error is None
    poses = execute(result.program, cat)
    for i in range(k):
        expected = np.array([0.0, 0.0, 10.0 * i])
        assert np.array_equal(poses[chr(ord("a") + i)].translation, expected)
        assert np.array_equal(poses[chr(ord("a") + i)].rotation, np.eye(3))


def test_execute_connector_occupied():
    text = (
        "a plate 1x2 | red\n"
        "b plate 1x2 | blue\n"
        "a stud stud a hole b 0\n"
        "c plate 1x2 | green\n"
        "a stud stud a hole b 0\n"
    )
    result = parse_program(text, CAT)
    assert result.error is None  # structurally fine; occupancy is execution-time
    with pytest.raises(ProgramError, match="connector-occupied"):
        execute(result.program, CAT)


def test_execute_deterministic_bitwise():
    rng = np.random.default_rng(21)
    path = generate_random_path(CAT, rng, 25)
    text = serialize(path, CAT)
    program = parse_program(text, CAT).program
    p1 = execute(program, CAT)
    p2 = execute(program, CAT)
    for node in p1:
        assert np.array_equal(p1[node].rotation, p2[node].rotation)
        assert np.array_equal(p1[node].translation, p2[node].translation)


def test_roundtrip_geometry_via_matched_graph():
    insts = brickir.parse_structure(demo_ldr("stack4"), CAT)
    g = brickir.match_connectors(insts, CAT)
    path = brickir.sample_path(g, root=0, seed=5)
    text = serialize(path, CAT)
    poses = execute(parse_program(text, CAT).program, CAT)
    letters = node_letters(path)
    root_pose = g.nodes[path.root].pose
    for nid, letter in letters.items():
        reconstructed = compose(root_pose, poses[letter])
        assert reconstructed.max_abs_diff(g.nodes[nid].pose) <= 1e-9


def test_roundtrip_bound_over_mixed_corpus():
    # every component of the all-families structure round-trips within the
    # quantization bound: 0.5 deg rotation per tree depth, plus the matching
    # positional leverage it implies (reversed ball edges re-quantize)
    insts = brickir.parse_structure(demo_ldr("mixed"), CAT)
    g = brickir.match_connectors(insts, CAT)
    seen = set()
    for root in sorted(g.nodes):
        if root in seen:
            continue
        comp = g.component(root)
        seen |= comp
        for seed in range(4):
            path = brickir.sample_path(g, root=root, seed=seed)
            text = serialize(path, CAT)
            result = parse_program(text, CAT)
            assert result.error is None
            poses = execute(result.program, CAT)
            letters = node_letters(path)
            depth = {path.root: 0}
            for step in path.steps:
                target, _ = step.edge.other_end(step.new_node)
                depth[step.new_node] = depth[target] + 1
            root_pose = g.nodes[path.root].pose
            radius = 60.0  # generous bound on part bounding radii (LDU)
            for nid, letter in letters.items():
                src = g.nodes[nid].pose
                got = compose(root_pose, poses[letter])
                rot_err = got.rotation_angle_deg_to(src)
                assert rot_err <= 0.5 * max(depth[nid], 1) + 1e-9
                trans_bound = 0.5 + depth[nid] * radius * np.radians(0.5)
                assert np.abs(got.translation - src.translation).max() <= trans_bound


# ---------------------------------------------------------------------------
# Prefix validation

TEN_VALID = (
    "a plate 1x2 | red\n"
    "b plate 1x2 | blue\n"
    "a stud stud a hole b 0\n"
    "c plate 1x2 | green\n"
    "b stud stud a hole b 0\n"
    "d plate 1x2 | yellow\n"
    "c stud stud a hole b 0\n"
    "e plate 1x2 | red\n"
    "d stud stud a hole b 0\n"
    "f plate 1x2 | blue\n"
    "e stud stud a hole b 0\n"
    "g plate 1x2 | green\n"
    "f stud stud a hole b 0\n"
    "h plate 1x2 | yellow\n"
    "g stud stud a hole b 0\n"
    "i plate 1x2 | red\n"
    "h stud stud a hole b 0\n"
    "j plate 1x2 | blue\n"
    "i stud stud a hole b 0\n"
)


def test_validate_fully_valid_ten_part_program():
    checker = PartColliders.from_catalog(CAT, inset=0.25)
    report = validate_prefix(TEN_VALID, CAT, checker)
    assert (report.connectivity_steps, report.collision_steps) == (10, 10)
    assert report.first_error is None


def test_validate_collision_at_fourth_placement():
    # action 4 hangs a brick off the side at the root's level: connectivity
    # stays valid for all 10 actions but placements collide from action 4 on
    lines = TEN_VALID.splitlines()
    lines[5] = "d brick 1x2 | yellow"
    lines[6] = "b stud hole d stud a 0"
    lines[8] = "c stud stud a hole b 0"  # re-hang the tower on c
    text = "\n".join(lines) + "\n"
    checker = PartColliders.from_catalog(CAT, inset=0.25)
    report = validate_prefix(text, CAT, checker)
    assert report.connectivity_steps == 10
    assert report.collision_steps == 3
    assert report.first_error.code == "collision"
    assert report.first_error.line == 6


def test_validate_garbage_at_step_seven():
    lines = TEN_VALID.splitlines()
    lines[12] = "!! garbage tokens here"
    text = "\n".join(lines) + "\n"
    report = validate_prefix(text, CAT, collision_checker=None)
    assert report.connectivity_steps == 6
    assert report.collision_steps <= 6
    assert report.first_error is not None
    assert report.first_error.line == 13


def test_validate_monotone_in_prefix_length():
    lines = TEN_VALID.splitlines()
    checker = PartColliders.from_catalog(CAT, inset=0.25)
    last = (0, 0)
    for upto in range(1, len(lines) + 1, 2):
        report = validate_prefix("\n".join(lines[:upto]) + "\n", CAT, checker)
        assert report.connectivity_steps >= last[0]
        assert report.collision_steps >= last[1]
        last = (report.connectivity_steps, report.collision_steps)
    full = validate_prefix(TEN_VALID, CAT, checker)
    assert last == (full.connectivity_steps, full.collision_steps)


def test_validate_connector_occupied_counts_prefix():
    text = (
        "a plate 1x2 | red\n"
        "b plate 1x2 | blue\n"
        "a stud stud a hole b 0\n"
        "c plate 1x2 | green\n"
        "a stud stud a hole b 0\n"
        "d plate 1x2 | yellow\n"
        "b stud stud a hole b 0\n"
    )
    report = validate_prefix(text, CAT)
    assert report.connectivity_steps == 2
    assert report.first_error.code == "connector-occupied"


def test_validity_report_json_shape():
    report = validate_prefix(TEN_VALID, CAT)
    obj = report.to_json_obj()
    assert set(obj) == {"connectivity_steps", "collision_steps", "first_error"}
    assert obj["first_error"] is None


def test_multi_attach_on_one_node():
    # the second attach re-binds the newest node: pose already fixed, the
    # extra connection only claims connectors (two-stud contact)
    text = (
        "a plate 1x2 | red\n"
        "b plate 1x2 | blue\n"
        "a stud stud a hole b 0\n"
        "a stud stud c hole d 0\n"
    )
    result = parse_program(text, CAT)
    assert result.error is None
    assert result.program.action_count == 2
    poses = execute(result.program, CAT)
    assert np.allclose(poses["b"].translation, [0, -8, 0])
    report = validate_prefix(text, CAT)
    assert report.connectivity_steps == 2


def test_validate_prefix_accepts_program_objects():
    program = parse_program(TEN_VALID, CAT).program
    report = validate_prefix(program, CAT)
    assert (report.connectivity_steps, report.collision_steps) == (10, 10)
