"""The build-sequence DSL: serializer, parser, executor and prefix validation.

A program is UTF-8 text, one step per line (LF endings). Each placement
action is a part-introduction line followed by one (or more) attach lines
binding the just-introduced part onto the existing structure:

    intro  := node_id SP part_name SP '|' SP color_name
    attach := target_id SP family SP subtype_target SP conn_index_target
              SP subtype_new SP conn_index_new {SP param}

Params by family -- stud: yaw; hinge: ["flip"] yaw; axle: ["flip"] yaw slide;
ball: e1 e2 e3; fixed: none. Node ids are assigned a, b, ..., z, aa, ... in
introduction order; the attach's "new" endpoint is always the most recently
introduced node. This grammar is the normative definition of the format.

Programs are immutable values; execution is a pure function of its inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .catalog import Catalog
from .connectors import ConnectorFamily, dof_spec, letter_id
from .errors import ProgramError
from .geometry import QuantizedParams, RigidTransform, compose
from .graph import BuildPath, realize_params, reverse_params

FAMILY_NAMES = {f.value: f for f in ConnectorFamily}


@dataclass(frozen=True)
class PartIntro:
    node: str
    part_name: str
    color_name: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Attach:
    target: str
    family: ConnectorFamily
    target_subtype: str
    target_index: str
    new_subtype: str
    new_index: str
    params: QuantizedParams
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class BuildProgram:
    """Ordered build steps; the first step introduces the root."""

    steps: tuple

    def __len__(self):
        return len(self.steps)

    def actions(self):
        """Group steps into placement actions: (intro, [attaches]) pairs.
        The root intro is action 1."""
        groups = []
        for step in self.steps:
            if isinstance(step, PartIntro):
                groups.append((step, []))
            else:
                groups[-1][1].append(step)
        return groups

    @property
    def action_count(self) -> int:
        return sum(1 for s in self.steps if isinstance(s, PartIntro))


@dataclass(frozen=True)
class ProgramDiagnosis:
    line: int
    code: str
    message: str

    def to_json_obj(self) -> dict:
        return {"line": self.line, "code": self.code, "message": self.message}


@dataclass(frozen=True)
class ParseResult:
    """Longest valid prefix plus the first invalid line, if any."""

    program: BuildProgram
    error: ProgramDiagnosis | None = None


@dataclass(frozen=True)
class ValidityReport:
    """Longest parse+execute-valid action prefix, and the prefix additionally
    free of part-part collisions."""

    connectivity_steps: int
    collision_steps: int
    first_error: ProgramDiagnosis | None = None

    def steps(self, mode: str) -> int:
        if mode == "connectivity":
            return self.connectivity_steps
        if mode == "collision":
            return self.collision_steps
        raise ValueError(f"unknown validity mode {mode!r}")

    def to_json_obj(self) -> dict:
        return {
            "connectivity_steps": self.connectivity_steps,
            "collision_steps": self.collision_steps,
            "first_error": self.first_error.to_json_obj() if self.first_error else None,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)


# ---------------------------------------------------------------------------
# Serialization


def node_letters(path: BuildPath) -> dict[int, str]:
    """Graph node id -> program letter id, in introduction order."""
    return {nid: letter_id(i) for i, nid in enumerate(path.nodes_in_order())}


def _params_tokens(family: ConnectorFamily, params: QuantizedParams) -> list[str]:
    if family == ConnectorFamily.FIXED:
        return []
    if family == ConnectorFamily.BALL:
        return [str(v) for v in (params.euler_deg or (0, 0, 0))]
    tokens = ["flip"] if params.flip else []
    tokens.append(str(params.yaw_deg))
    if family == ConnectorFamily.AXLE:
        tokens.append(str(params.slide_ldu))
    return tokens


def serialize(path: BuildPath, catalog: Catalog) -> str:
    """Emit a build path as program text (one step per line, LF endings)."""
    if path.graph is None:
        raise ProgramError("unbound-path", "path has no backing graph")
    g = path.graph
    letters = node_letters(path)
    lines = []

    def intro_line(node_id: int) -> str:
        inst = g.nodes[node_id]
        part = catalog.part(inst.part_id)
        color = catalog.color_name(inst.color)
        return f"{letters[node_id]} {part.name} | {color}"

    lines.append(intro_line(path.root))
    for step in path.steps:
        edge = step.edge
        target_node, target_conn = edge.other_end(step.new_node)
        if edge.a[0] == target_node:
            params = edge.params
            new_conn = edge.b[1]
        else:
            params = reverse_params(edge.family, edge.params)
            new_conn = edge.a[1]
        target_subtype = catalog.connector(g.nodes[target_node].part_id, target_conn).subtype
        new_subtype = catalog.connector(g.nodes[step.new_node].part_id, new_conn).subtype
        lines.append(intro_line(step.new_node))
        tokens = [
            letters[target_node],
            edge.family.value,
            target_subtype,
            target_conn,
            new_subtype,
            new_conn,
        ] + _params_tokens(edge.family, params)
        lines.append(" ".join(tokens))
    return "\n".join(lines) + "\n"


def render_program(program: BuildProgram) -> str:
    """Program steps back to text (inverse of parse_program on valid input)."""
    lines = []
    for step in program.steps:
        if isinstance(step, PartIntro):
            lines.append(f"{step.node} {step.part_name} | {step.color_name}")
        else:
            tokens = [
                step.target,
                step.family.value,
                step.target_subtype,
                step.target_index,
                step.new_subtype,
                step.new_index,
            ] + _params_tokens(step.family, step.params)
            lines.append(" ".join(tokens))
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# Parsing


def _parse_params(family: ConnectorFamily, tokens: list[str], line: int) -> QuantizedParams:
    dof = dof_spec(family)
    flip = False
    if dof.has_flip and tokens and tokens[0] == "flip":
        flip = True
        tokens = tokens[1:]
    expected = {
        ConnectorFamily.STUD: 1,
        ConnectorFamily.HINGE: 1,
        ConnectorFamily.AXLE: 2,
        ConnectorFamily.BALL: 3,
        ConnectorFamily.FIXED: 0,
    }[family]
    if len(tokens) != expected:
        raise ProgramError(
            "bad-params", f"{family.value} attach takes {expected} value(s)", line
        )
    try:
        values = [int(t) for t in tokens]
    except ValueError:
        raise ProgramError("bad-params", f"non-integer parameter in {tokens}", line) from None
    try:
        if family == ConnectorFamily.BALL:
            e = tuple(v % 360 for v in values)
            return QuantizedParams(euler_deg=e)  # type: ignore[arg-type]
        if family == ConnectorFamily.FIXED:
            return QuantizedParams()
        yaw = values[0] % 360
        slide = values[1] if family == ConnectorFamily.AXLE else 0
        return QuantizedParams(yaw_deg=yaw, flip=flip, slide_ldu=slide)
    except ValueError as exc:
        raise ProgramError("bad-params", str(exc), line) from None


def parse_program(text: str, catalog: Catalog, strict: bool = False) -> ParseResult:
    """Parse program text into its longest valid prefix.

    In prefix mode the result carries the first invalid line as a structured
    diagnosis; strict mode raises ProgramError instead. An invalid line
    anywhere inside a placement action invalidates the whole action, so the
    returned program only contains complete valid actions.
    """
    steps: list = []
    complete = 0  # number of steps belonging to fully completed actions
    introduced: dict[str, str] = {}  # letter -> part_id
    newest: str | None = None
    newest_attached = True  # the root needs no attach

    def fail(code: str, message: str, line: int):
        raise ProgramError(code, message, line)

    try:
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            if " | " in line:
                if not newest_attached:
                    fail("missing-attach", f"node {newest!r} was never attached", number)
                complete = len(steps)  # the previous action is done
                left, _, color_name = line.partition(" | ")
                tokens = left.split()
                if len(tokens) < 2 or not color_name.strip():
                    fail("malformed-line", "intro needs '<id> <part name> | <color>'", number)
                node_id = tokens[0]
                part_name = " ".join(tokens[1:])
                if node_id != letter_id(len(introduced)):
                    fail(
                        "bad-node-id",
                        f"expected node id {letter_id(len(introduced))!r}, got {node_id!r}",
                        number,
                    )
                part = catalog.part_by_name(part_name)
                if part is None:
                    fail("unknown-part", f"part name {part_name!r} not in catalog", number)
                if not catalog.has_color_name(color_name.strip()):
                    fail("unknown-color", f"color {color_name.strip()!r} not registered", number)
                newest_attached = not introduced  # root completes at its intro
                introduced[node_id] = part.part_id
                newest = node_id
                steps.append(
                    PartIntro(node_id, part.name, color_name.strip().lower(), line=number)
                )
            else:
                tokens = line.split()
                if newest is None:
                    fail("unexpected-attach", "attach before any part introduction", number)
                if len(tokens) < 6:
                    fail("malformed-line", "attach needs at least 6 tokens", number)
                target_id, family_name, sub_t, idx_t, sub_n, idx_n = tokens[:6]
                family = FAMILY_NAMES.get(family_name)
                if family is None:
                    fail("unknown-family", f"unknown family {family_name!r}", number)
                rules = catalog.rules
                for sub in (sub_t, sub_n):
                    if not rules.is_registered(sub) or rules.family_of(sub) != family:
                        fail(
                            "unknown-subtype",
                            f"subtype {sub!r} is not a {family.value} subtype",
                            number,
                        )
                if not rules.compatible(sub_t, sub_n):
                    fail(
                        "incompatible-subtypes",
                        f"{sub_t!r} does not pair with {sub_n!r}",
                        number,
                    )
                params = _parse_params(family, tokens[6:], number)
                if target_id == newest:
                    fail("self-attach", "attach targets the node it introduces", number)
                if target_id not in introduced:
                    fail(
                        "target-not-introduced",
                        f"target node {target_id!r} not introduced yet",
                        number,
                    )
                for part_id, sub, idx, role in (
                    (introduced[target_id], sub_t, idx_t, "target"),
                    (introduced[newest], sub_n, idx_n, "new"),
                ):
                    part = catalog.part(part_id)
                    if not part.has_connector(idx):
                        fail(
                            "unknown-connector",
                            f"part {part.name!r} has no connector {idx!r} ({role})",
                            number,
                        )
                    actual = part.connector(idx).subtype
                    if actual != sub:
                        fail(
                            "subtype-mismatch",
                            f"connector {idx!r} of {part.name!r} is {actual!r}, not {sub!r}",
                            number,
                        )
                steps.append(
                    Attach(target_id, family, sub_t, idx_t, sub_n, idx_n, params, line=number)
                )
                newest_attached = True
    except ProgramError as exc:
        if strict:
            raise
        return ParseResult(
            BuildProgram(tuple(steps[:complete])),
            ProgramDiagnosis(exc.line or 0, exc.code, str(exc)),
        )

    if not newest_attached:
        diag = ProgramDiagnosis(
            steps[-1].line, "missing-attach", f"node {newest!r} was never attached"
        )
        if strict:
            raise ProgramError(diag.code, diag.message, diag.line)
        return ParseResult(BuildProgram(tuple(steps[:complete])), diag)
    return ParseResult(BuildProgram(tuple(steps)), None)


# ---------------------------------------------------------------------------
# Execution


def execute(program: BuildProgram, catalog: Catalog) -> dict[str, RigidTransform]:
    """Run a structurally valid program: the root lands at the identity and
    every attached node's pose satisfies its attach instruction exactly.

    A node's pose is fixed by its first attach; further attaches on the same
    node only claim connectors. Reusing a single-accept connector raises
    ProgramError('connector-occupied').
    """
    poses: dict[str, RigidTransform] = {}
    parts: dict[str, str] = {}
    consumed: set[tuple[str, str]] = set()
    rules = catalog.rules

    def claim(node: str, index: str, subtype: str, line: int):
        key = (node, index)
        if not rules.is_multi_accept(subtype) and key in consumed:
            raise ProgramError(
                "connector-occupied", f"connector {index!r} of node {node!r} reused", line
            )
        consumed.add(key)

    newest: str | None = None
    for step in program.steps:
        if isinstance(step, PartIntro):
            part = catalog.part_by_name(step.part_name)
            if part is None:
                raise ProgramError("unknown-part", step.part_name, step.line)
            parts[step.node] = part.part_id
            newest = step.node
            if len(poses) == 0 and len(parts) == 1:
                poses[step.node] = RigidTransform.identity()
        else:
            if newest is None:
                raise ProgramError(
                    "unexpected-attach", "attach before any introduction", step.line
                )
            if step.target not in poses:
                raise ProgramError(
                    "target-not-introduced", f"target {step.target!r} unplaced", step.line
                )
            target_frame = catalog.connector(parts[step.target], step.target_index).frame
            world_target = target_frame.transformed(poses[step.target])
            claim(step.target, step.target_index, step.target_subtype, step.line)
            claim(newest, step.new_index, step.new_subtype, step.line)
            if newest not in poses:
                realized = realize_params(world_target, step.params, step.family)
                new_local = catalog.connector(parts[newest], step.new_index).frame
                poses[newest] = compose(
                    realized.as_transform(), new_local.as_transform().inverse()
                )
    return poses


# ---------------------------------------------------------------------------
# Prefix validation


def validate_prefix(
    program, catalog: Catalog, collision_checker=None
) -> ValidityReport:
    """Longest valid action prefix of a program (text or BuildProgram).

    connectivity_steps counts actions that parse and execute (the root intro
    is action 1); collision_steps additionally requires each placement to be
    collision-free against everything placed before it. Without a collision
    checker the two counts coincide.
    """
    parse_error = None
    if isinstance(program, str):
        result = parse_program(program, catalog, strict=False)
        parse_error = result.error
        program = result.program

    session = collision_checker.session() if collision_checker is not None else None
    poses: dict[str, RigidTransform] = {}
    parts: dict[str, str] = {}
    consumed: set[tuple[str, str]] = set()
    rules = catalog.rules

    connectivity = 0
    collision = 0
    collision_blocked = False
    diagnoses: list[ProgramDiagnosis] = [parse_error] if parse_error else []

    def try_claim(node, index, subtype, line):
        key = (node, index)
        if not rules.is_multi_accept(subtype) and key in consumed:
            raise ProgramError(
                "connector-occupied", f"connector {index!r} of node {node!r} reused", line
            )
        consumed.add(key)

    newest = None
    for intro, attaches in program.actions():
        try:
            part = catalog.part_by_name(intro.part_name)
            if part is None:
                raise ProgramError("unknown-part", intro.part_name, intro.line)
            parts[intro.node] = part.part_id
            newest = intro.node
            if len(poses) == 0 and len(parts) == 1:
                poses[intro.node] = RigidTransform.identity()
            for att in attaches:
                if att.target not in poses:
                    raise ProgramError(
                        "target-not-introduced", f"target {att.target!r} unplaced", att.line
                    )
                world_target = (
                    catalog.connector(parts[att.target], att.target_index)
                    .frame.transformed(poses[att.target])
                )
                try_claim(att.target, att.target_index, att.target_subtype, att.line)
                try_claim(newest, att.new_index, att.new_subtype, att.line)
                if newest not in poses:
                    realized = realize_params(world_target, att.params, att.family)
                    new_local = catalog.connector(parts[newest], att.new_index).frame
                    poses[newest] = compose(
                        realized.as_transform(), new_local.as_transform().inverse()
                    )
        except ProgramError as exc:
            diagnoses.append(ProgramDiagnosis(exc.line or 0, exc.code, str(exc)))
            break
        connectivity += 1
        if session is not None and not collision_blocked:
            mesh = collision_checker.mesh(parts[intro.node])
            hit = bool(session.add(mesh, poses[intro.node])) if mesh is not None else False
            if hit:
                collision_blocked = True
                diagnoses.append(
                    ProgramDiagnosis(
                        intro.line, "collision", f"placement of {intro.node!r} collides"
                    )
                )
            else:
                collision = connectivity
        elif not collision_blocked:
            collision = connectivity

    first_error = min(diagnoses, key=lambda d: d.line, default=None)
    return ValidityReport(connectivity, collision, first_error)
