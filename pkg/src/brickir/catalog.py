"""Part catalog: definitions, naming tables and loading.

A catalog maps part ids to their display name, triangle mesh and annotated
connector list, plus an LDraw color-code <-> lowercase-name table. Catalogs
load from a JSON file or are built from an LDraw part library directory
(procedural primitive scan + manual overrides).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import ldraw
from .connectors import (
    AnnotatedConnector,
    ConnectorRules,
    annotate_part,
    default_primitive_table,
    default_rules,
)
from .errors import CatalogError


def normalize_part_name(name: str) -> str:
    """Lowercase, collapse whitespace, strip the reserved '|' separator."""
    return re.sub(r"\s+", " ", name.replace("|", " ")).strip().lower()


@dataclass(frozen=True)
class TriMesh:
    """Indexed triangle soup in part-local LDU coordinates."""

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(t) and (t.min() < 0 or t.max() >= len(v)):
            raise CatalogError("triangle index out of range")
        v.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    def __len__(self):
        return len(self.triangles)


@dataclass(frozen=True)
class PartDef:
    """Catalog entry: id, display name, connectors and optional mesh."""

    part_id: str
    name: str
    connectors: tuple[AnnotatedConnector, ...]
    mesh: TriMesh | None = None

    def connector(self, index: str) -> AnnotatedConnector:
        for c in self.connectors:
            if c.index == index:
                return c
        raise CatalogError(f"part {self.part_id!r} has no connector {index!r}")

    def has_connector(self, index: str) -> bool:
        return any(c.index == index for c in self.connectors)


def _load_default_colors() -> dict[int, str]:
    text = resources.files("brickir.data").joinpath("colors.json").read_text()
    return {int(k): v for k, v in json.loads(text).items()}


class Catalog:
    """Read-only registry of parts and color names (immutable after load)."""

    def __init__(self, parts=None, colors=None, rules: ConnectorRules | None = None):
        self.parts: dict[str, PartDef] = dict(parts or {})
        self.colors: dict[int, str] = dict(colors) if colors is not None else _load_default_colors()
        self.rules = rules or default_rules()
        self._by_name = {normalize_part_name(p.name): p for p in self.parts.values()}
        self._color_codes = {name: code for code, name in self.colors.items()}

    def __contains__(self, part_id: str) -> bool:
        return part_id in self.parts

    def __len__(self) -> int:
        return len(self.parts)

    def part(self, part_id: str) -> PartDef:
        try:
            return self.parts[part_id]
        except KeyError:
            raise CatalogError(f"part {part_id!r} not in catalog") from None

    def part_by_name(self, name: str) -> PartDef | None:
        return self._by_name.get(normalize_part_name(name))

    def connector(self, part_id: str, index: str) -> AnnotatedConnector:
        return self.part(part_id).connector(index)

    def color_name(self, code: int) -> str:
        try:
            return self.colors[int(code)]
        except KeyError:
            raise CatalogError(f"color code {code} has no registered name") from None

    def color_code(self, name: str) -> int:
        try:
            return self._color_codes[name.strip().lower()]
        except KeyError:
            raise CatalogError(f"color name {name!r} not registered") from None

    def has_color_name(self, name: str) -> bool:
        return name.strip().lower() in self._color_codes

    def to_json_obj(self) -> dict:
        parts = {}
        for pid, p in sorted(self.parts.items()):
            entry = {
                "name": p.name,
                "connectors": [c.to_json_obj() for c in p.connectors],
            }
            if p.mesh is not None and len(p.mesh):
                entry["mesh"] = {
                    "vertices": [[float(x) for x in v] for v in p.mesh.vertices],
                    "triangles": [[int(i) for i in t] for t in p.mesh.triangles],
                }
            parts[pid] = entry
        return {
            "version": 1,
            "colors": {str(code): name for code, name in sorted(self.colors.items())},
            "parts": parts,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True, indent=1)

    @classmethod
    def from_json_obj(cls, obj, rules: ConnectorRules | None = None) -> "Catalog":
        rules = rules or default_rules()
        parts = {}
        for pid, entry in obj.get("parts", {}).items():
            connectors = tuple(
                AnnotatedConnector.from_json_obj(c, rules) for c in entry.get("connectors", [])
            )
            mesh = None
            if "mesh" in entry:
                mesh = TriMesh(entry["mesh"]["vertices"], entry["mesh"]["triangles"])
            parts[pid] = PartDef(pid, normalize_part_name(entry["name"]), connectors, mesh)
        colors = _load_default_colors()
        for code, name in obj.get("colors", {}).items():
            colors[int(code)] = name.strip().lower()
        return cls(parts, colors, rules)

    @classmethod
    def load(cls, path) -> "Catalog":
        p = Path(path)
        if p.is_dir():
            return build_catalog_from_library(p)
        return cls.from_json_obj(json.loads(p.read_text()))


def build_catalog_from_library(
    library_dir,
    part_ids=None,
    overrides=None,
    primitive_table=None,
    rules: ConnectorRules | None = None,
    warnings: list | None = None,
) -> Catalog:
    """Scan an LDraw-style library directory into a catalog.

    Part files are taken from ``parts/`` (or the directory itself); sub-parts
    and primitives are resolved from ``parts/s``, ``p`` and the same
    directory. ``overrides`` maps part id -> list of override actions.
    """
    root = Path(library_dir)
    rules = rules or default_rules()
    primitive_table = primitive_table if primitive_table is not None else default_primitive_table()
    overrides = overrides or {}

    search_dirs = [d for d in (root / "parts", root / "p", root) if d.is_dir()]
    library: dict[str, str] = {}
    for d in search_dirs:
        for f in sorted(d.rglob("*.dat")):
            key = ldraw.normalize_name(str(f.relative_to(d)))
            library.setdefault(key, f.read_text(errors="replace"))

    part_dir = root / "parts" if (root / "parts").is_dir() else root
    part_files = sorted(part_dir.glob("*.dat"))
    if part_ids is not None:
        wanted = {pid.lower() for pid in part_ids}
        part_files = [f for f in part_files if f.stem.lower() in wanted]

    parts = {}
    for f in part_files:
        text = f.read_text(errors="replace")
        pid = f.stem.lower()
        refs = ldraw.scan_primitives(text, library, primitive_table, warnings=warnings)
        connectors = tuple(
            annotate_part(pid, refs, primitive_table, overrides.get(pid), rules, report=warnings)
        )
        verts, tris = ldraw.extract_triangles(text, library, warnings=warnings)
        mesh = TriMesh(verts, tris) if len(tris) else None
        name = normalize_part_name(ldraw.part_description(text) or pid)
        parts[pid] = PartDef(pid, name, connectors, mesh)
    return Catalog(parts, rules=rules)
