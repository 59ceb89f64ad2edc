"""Typed connector taxonomy, pairing rules and per-part annotation.

Five connection families are modeled (stud, hinge, axle, ball, fixed), each
with a fixed DOF signature. Subtypes and their pairing table are data-driven
(data/connector_rules.json) so hinge in/on variants can be extended without
code changes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources

import numpy as np

from .errors import AnnotationError
from .geometry import ConnectorFrame


class ConnectorFamily(str, Enum):
    STUD = "stud"
    HINGE = "hinge"
    AXLE = "axle"
    BALL = "ball"
    FIXED = "fixed"


@dataclass(frozen=True)
class DofSpec:
    rotational_dof: int
    has_flip: bool
    has_slide: bool


DOF_SPECS = {
    ConnectorFamily.STUD: DofSpec(1, False, False),
    ConnectorFamily.HINGE: DofSpec(1, True, False),
    ConnectorFamily.AXLE: DofSpec(1, True, True),
    ConnectorFamily.BALL: DofSpec(3, False, False),
    ConnectorFamily.FIXED: DofSpec(0, False, False),
}


def dof_spec(family: ConnectorFamily) -> DofSpec:
    return DOF_SPECS[ConnectorFamily(family)]


def letter_id(n: int) -> str:
    """Index n (0-based) as a lowercase letter id: a..z, aa, ab, ..."""
    if n < 0:
        raise ValueError("negative index")
    out = []
    n += 1
    while n > 0:
        n, rem = divmod(n - 1, 26)
        out.append(chr(ord("a") + rem))
    return "".join(reversed(out))


def letter_index(s: str) -> int:
    """Inverse of letter_id."""
    if not s or any(not ("a" <= c <= "z") for c in s):
        raise ValueError(f"invalid letter id {s!r}")
    n = 0
    for c in s:
        n = n * 26 + (ord(c) - ord("a") + 1)
    return n - 1


class ConnectorRules:
    """Registered subtypes, their families, pairing table and accept limits."""

    def __init__(self, subtype_family, pairs, multi_accept, version=1):
        self.subtype_family = dict(subtype_family)
        self.pairs = {frozenset(p) for p in pairs}
        self.multi_accept = set(multi_accept)
        self.version = version
        for pair in self.pairs:
            for s in pair:
                if s not in self.subtype_family:
                    raise AnnotationError(f"pair references unregistered subtype {s!r}")
            fams = {self.subtype_family[s] for s in pair}
            if len(fams) != 1:
                raise AnnotationError(f"pair {sorted(pair)} crosses families")

    @classmethod
    def from_json_obj(cls, obj) -> "ConnectorRules":
        subtype_family = {}
        multi = set()
        for name, entry in obj["subtypes"].items():
            subtype_family[name] = ConnectorFamily(entry["family"])
            if entry.get("multi_accept"):
                multi.add(name)
        return cls(subtype_family, obj["pairs"], multi, obj.get("version", 1))

    @classmethod
    def load(cls, path=None) -> "ConnectorRules":
        if path is None:
            text = resources.files("brickir.data").joinpath("connector_rules.json").read_text()
        else:
            text = open(path).read()
        return cls.from_json_obj(json.loads(text))

    def is_registered(self, subtype: str) -> bool:
        return subtype in self.subtype_family

    def family_of(self, subtype: str) -> ConnectorFamily:
        try:
            return self.subtype_family[subtype]
        except KeyError:
            raise AnnotationError(f"unregistered connector subtype {subtype!r}") from None

    def compatible(self, a: str, b: str) -> bool:
        if a == b:
            return False
        return frozenset((a, b)) in self.pairs

    def is_multi_accept(self, subtype: str) -> bool:
        return subtype in self.multi_accept


@lru_cache(maxsize=1)
def default_rules() -> ConnectorRules:
    return ConnectorRules.load()


def compatible(a: str, b: str, rules: ConnectorRules | None = None) -> bool:
    """True iff the two subtypes may pair. Symmetric; unregistered names
    never pair."""
    return (rules or default_rules()).compatible(a, b)


@lru_cache(maxsize=1)
def default_primitive_table() -> dict:
    text = resources.files("brickir.data").joinpath("primitives.json").read_text()
    return json.loads(text)["primitives"]


@dataclass(frozen=True)
class AnnotatedConnector:
    """One attachment site of a part, in the part's local frame."""

    index: str
    family: ConnectorFamily
    subtype: str
    frame: ConnectorFrame
    axle_length: float | None = None

    def to_json_obj(self) -> dict:
        obj = {
            "index": self.index,
            "family": self.family.value,
            "subtype": self.subtype,
            "origin": [float(v) for v in self.frame.origin],
            "principal_axis": [float(v) for v in self.frame.principal_axis],
            "reference_axis": [float(v) for v in self.frame.reference_axis],
        }
        if self.axle_length is not None:
            obj["axle_length"] = float(self.axle_length)
        return obj

    @classmethod
    def from_json_obj(cls, obj, rules: ConnectorRules | None = None) -> "AnnotatedConnector":
        rules = rules or default_rules()
        subtype = obj["subtype"]
        family = ConnectorFamily(obj["family"]) if "family" in obj else rules.family_of(subtype)
        if rules.is_registered(subtype) and rules.family_of(subtype) != family:
            raise AnnotationError(f"subtype {subtype!r} is not in family {family.value!r}")
        frame = ConnectorFrame(
            np.array(obj["origin"], dtype=np.float64),
            np.array(obj["principal_axis"], dtype=np.float64),
            np.array(obj["reference_axis"], dtype=np.float64),
        )
        length = obj.get("axle_length")
        return cls(obj.get("index", "?"), family, subtype, frame, length)


def _sort_key(site):
    family, subtype, frame, _ = site
    return (
        round(float(frame.origin[0]), 9),
        round(float(frame.origin[1]), 9),
        round(float(frame.origin[2]), 9),
        family.value,
        subtype,
        tuple(round(float(v), 9) for v in frame.principal_axis),
        tuple(round(float(v), 9) for v in frame.reference_axis),
    )


def annotate_part(
    part_id: str,
    primitive_refs,
    primitive_table=None,
    overrides=None,
    rules: ConnectorRules | None = None,
    report: list | None = None,
):
    """Derive the typed connector list of one part.

    Procedurally annotated sites come from the primitive scan; manual
    overrides may then add, remove or retype sites (remove/retype reference
    the provisional canonical index assigned to the scanned sites). Final
    indices are re-assigned canonically: sites sorted by local origin,
    lexicographic x -> y -> z.
    """
    from .ldraw import axial_scale  # local import to keep module deps one-way

    rules = rules or default_rules()
    primitive_table = primitive_table if primitive_table is not None else default_primitive_table()

    sites = []  # (family, subtype, frame, axle_length)
    for ref in primitive_refs:
        entry = primitive_table.get(ref.primitive_name)
        if entry is None:
            raise AnnotationError(
                f"{part_id}: primitive {ref.primitive_name!r} not in connector table"
            )
        subtype = entry["subtype"]
        family = rules.family_of(subtype)
        local = ConnectorFrame(
            np.array(entry.get("origin", (0.0, 0.0, 0.0)), dtype=np.float64),
            np.array(entry["principal_axis"], dtype=np.float64),
            np.array(entry["reference_axis"], dtype=np.float64),
        )
        frame = local.transformed(ref.transform)
        length = None
        if "base_length" in entry:
            length = float(entry["base_length"])
            if entry.get("scale_mode") == "axial":
                length *= axial_scale(ref, entry)
        sites.append((family, subtype, frame, length))

    sites.sort(key=_sort_key)

    if overrides:
        by_index = {letter_id(i): i for i in range(len(sites))}
        removed = set()
        retyped = {}
        added = []
        for ov in overrides:
            action = ov.get("action")
            if action == "add":
                subtype = ov["subtype"]
                family = ConnectorFamily(ov["family"]) if "family" in ov else rules.family_of(subtype)
                frame = ConnectorFrame(
                    np.array(ov["origin"], dtype=np.float64),
                    np.array(ov["principal_axis"], dtype=np.float64),
                    np.array(ov["reference_axis"], dtype=np.float64),
                )
                added.append((family, subtype, frame, ov.get("axle_length")))
            elif action in ("remove", "retype"):
                idx = ov.get("index")
                if idx not in by_index:
                    raise AnnotationError(
                        f"{part_id}: override {action} references nonexistent site {idx!r}"
                    )
                if action == "remove":
                    removed.add(by_index[idx])
                else:
                    retyped[by_index[idx]] = ov
            else:
                raise AnnotationError(f"{part_id}: unknown override action {action!r}")
        merged = []
        for i, site in enumerate(sites):
            if i in removed:
                continue
            if i in retyped:
                ov = retyped[i]
                subtype = ov.get("subtype", site[1])
                family = ConnectorFamily(ov["family"]) if "family" in ov else rules.family_of(subtype)
                merged.append((family, subtype, site[2], ov.get("axle_length", site[3])))
            else:
                merged.append(site)
        merged.extend(added)
        sites = sorted(merged, key=_sort_key)

    by_origin: dict[tuple, list] = {}
    for site in sites:
        key = tuple(round(float(v), 9) for v in site[2].origin)
        group = by_origin.setdefault(key, [])
        for other in group:
            if other[2].is_close(site[2], tol=1e-9):
                raise AnnotationError(f"{part_id}: duplicate connector site at {key}")
        group.append(site)

    connectors = [
        AnnotatedConnector(letter_id(i), family, subtype, frame, length)
        for i, (family, subtype, frame, length) in enumerate(sites)
    ]
    if report is not None and not connectors:
        report.append(f"{part_id}: no connector sites")
    return connectors
