"""Semantic class taxonomy and tag classification.

A ClassTable lists the class names per geometry kind (areas, lines, nodes)
and an ordered set of tag rules. Index 0 of every kind is reserved for
"void" (no element); class indices therefore start at 1 in declaration
order. Classification walks the rules top to bottom and the first match
wins, which resolves multi-tag conflicts deterministically.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from importlib import resources

from ..errors import ConfigurationError

KIND_AREA = "area"
KIND_LINE = "line"
KIND_NODE = "node"
KINDS = (KIND_AREA, KIND_LINE, KIND_NODE)


@dataclass(frozen=True)
class TagRule:
    kind: str
    class_name: str
    key: str
    pattern: str  # exact value, "v1|v2|..." alternatives, or "*"

    def matches(self, tags) -> bool:
        value = tags.get(self.key)
        if value is None:
            return False
        if self.pattern == "*":
            return True
        return value in self.pattern.split("|")


@dataclass
class ClassTable:
    areas: list
    lines: list
    nodes: list
    rules: list = field(default_factory=list)

    def __post_init__(self):
        for kind, names in (("areas", self.areas), ("lines", self.lines), ("nodes", self.nodes)):
            if len(set(names)) != len(names):
                raise ConfigurationError(f"duplicate class names in {kind}")
            if "void" in names:
                raise ConfigurationError("'void' is implicit at index 0, do not declare it")
        by_kind = {KIND_AREA: self.areas, KIND_LINE: self.lines, KIND_NODE: self.nodes}
        for rule in self.rules:
            if rule.kind not in by_kind:
                raise ConfigurationError(f"unknown geometry kind {rule.kind!r}")
            if rule.class_name not in by_kind[rule.kind]:
                raise ConfigurationError(
                    f"rule targets undeclared class {rule.kind}/{rule.class_name}"
                )

    def names(self, kind: str) -> list:
        return {KIND_AREA: self.areas, KIND_LINE: self.lines, KIND_NODE: self.nodes}[kind]

    def class_index(self, kind: str, name: str) -> int:
        """1-based class index (0 is void)."""
        try:
            return self.names(kind).index(name) + 1
        except ValueError:
            raise ConfigurationError(f"unknown class {kind}/{name}") from None

    def class_count(self, kind: str) -> int:
        """Number of indices including void."""
        return len(self.names(kind)) + 1

    def serialize(self) -> str:
        """Canonical text form; also the hashing input."""
        out = []
        for kind, names in ((KIND_AREA, self.areas), (KIND_LINE, self.lines), (KIND_NODE, self.nodes)):
            out.extend(f"{kind} {n}" for n in names)
        out.extend(f"rule {r.kind} {r.class_name} {r.key}={r.pattern}" for r in self.rules)
        return "\n".join(out) + "\n"

    def digest(self) -> bytes:
        return hashlib.sha256(self.serialize().encode("utf-8")).digest()


def classify(tags, table: ClassTable):
    """First matching rule wins; returns (kind, class_idx) or None."""
    for rule in table.rules:
        if rule.matches(tags):
            return (rule.kind, table.class_index(rule.kind, rule.class_name))
    return None


def parse_class_table(text: str) -> ClassTable:
    """Parse the class-table config format.

    Lines (``#`` comments and blanks ignored):
      ``area|line|node <name>``      declare a class (order fixes indices)
      ``rule <kind> <name> <key>=<pattern>``   add a tag rule (ordered)

    ``<pattern>`` is an exact value, ``v1|v2`` alternatives, or ``*``.
    Class names use ``_`` instead of spaces.
    """
    declared = {KIND_AREA: [], KIND_LINE: [], KIND_NODE: []}
    rules = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] in KINDS and len(parts) == 2:
            declared[parts[0]].append(parts[1])
        elif parts[0] == "rule" and len(parts) == 4 and "=" in parts[3]:
            kind, name = parts[1], parts[2]
            key, pattern = parts[3].split("=", 1)
            rules.append(TagRule(kind, name, key, pattern))
        else:
            raise ConfigurationError(f"bad class-table line {lineno}: {raw!r}")
    return ClassTable(declared[KIND_AREA], declared[KIND_LINE], declared[KIND_NODE], rules)


def load_class_table(path=None) -> ClassTable:
    """Load a class table file, or the bundled default taxonomy."""
    if path is None:
        text = resources.files("planloc.data").joinpath("default_classes.txt").read_text("utf-8")
    else:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    return parse_class_table(text)
