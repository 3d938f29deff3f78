"""Product-type knowledge base: load, validate, and render taxonomy nodes.

Each node is a category | family | type triple with a stable id. The rendered
pipe-joined text is the canonical form used everywhere downstream (embedding,
BM25 indexing, prompts).
"""

import json
from dataclasses import dataclass, field

from .errors import DuplicateId, EmptyTaxonomy, MalformedRecord
from .text import normalize_whitespace

SEPARATOR = " | "


@dataclass(frozen=True)
class PTNode:
    id: str
    category: str
    family: str
    type_name: str
    description: str = ""

    def render(self) -> str:
        """Canonical pipe-joined text; the optional description is appended."""
        base = SEPARATOR.join((self.category, self.family, self.type_name))
        if self.description:
            return base + SEPARATOR + self.description
        return base


@dataclass
class Taxonomy:
    nodes: list[PTNode]
    by_id: dict[str, PTNode] = field(init=False)

    def __post_init__(self):
        self.by_id = {n.id: n for n in self.nodes}

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)

    def __contains__(self, pt_id: str) -> bool:
        return pt_id in self.by_id

    def render(self, pt_id: str) -> str:
        return self.by_id[pt_id].render()

    def ids(self) -> list[str]:
        return [n.id for n in self.nodes]


def render_node(node: PTNode) -> str:
    return node.render()


def parse_rendered(text: str) -> PTNode:
    """Invert render() for the pipe-joined triple (id is not recoverable)."""
    parts = text.split(SEPARATOR)
    if len(parts) < 3:
        raise ValueError(f"not a rendered pt triple: {text!r}")
    category, family, type_name = parts[0], parts[1], parts[2]
    description = SEPARATOR.join(parts[3:]) if len(parts) > 3 else ""
    return PTNode(id="", category=category, family=family,
                  type_name=type_name, description=description)


def _clean_field(record: dict, key: str, line_no: int, required: bool = True) -> str:
    raw = record.get(key)
    if raw is None:
        if required:
            raise MalformedRecord(line_no, f"missing field {key!r}")
        return ""
    if not isinstance(raw, str):
        raise MalformedRecord(line_no, f"field {key!r} is not a string")
    value = normalize_whitespace(raw)
    if required and not value:
        raise MalformedRecord(line_no, f"empty field {key!r}")
    if key != "id" and "|" in value:
        raise MalformedRecord(line_no, f"field {key!r} contains the separator '|'")
    return value


def load_taxonomy(path) -> Taxonomy:
    """Parse a JSONL taxonomy file: one {id, category, family, type} per line.

    Unknown fields are ignored; an optional "description" field is kept.
    Raises MalformedRecord / DuplicateId / EmptyTaxonomy.
    """
    nodes: list[PTNode] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_no, f"invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise MalformedRecord(line_no, "record is not an object")
            node = PTNode(
                id=_clean_field(record, "id", line_no),
                category=_clean_field(record, "category", line_no),
                family=_clean_field(record, "family", line_no),
                type_name=_clean_field(record, "type", line_no),
                description=_clean_field(record, "description", line_no, required=False),
            )
            if node.id in seen:
                raise DuplicateId(node.id)
            seen.add(node.id)
            nodes.append(node)
    if not nodes:
        raise EmptyTaxonomy(f"no taxonomy records in {path}")
    return Taxonomy(nodes)
