"""OSM XML parsing and serialization.

The parser is expat-based so malformed input can be reported with a byte
offset. Entity counts and tags are preserved verbatim; ways referencing
nodes absent from the document are collected in ``dangling_refs`` rather
than failing the parse.
"""

from __future__ import annotations

import io
import xml.parsers.expat
from dataclasses import dataclass, field
from xml.sax.saxutils import quoteattr

from ..errors import ParseError, UnsupportedVersionError

SUPPORTED_VERSION_PREFIX = "0.6"


@dataclass
class OsmNode:
    id: int
    lon: float
    lat: float
    tags: dict = field(default_factory=dict)


@dataclass
class OsmWay:
    id: int
    refs: list = field(default_factory=list)
    tags: dict = field(default_factory=dict)


@dataclass
class OsmRelation:
    id: int
    members: list = field(default_factory=list)  # (type, ref, role)
    tags: dict = field(default_factory=dict)


@dataclass
class OsmGraph:
    nodes: dict = field(default_factory=dict)
    ways: dict = field(default_factory=dict)
    relations: dict = field(default_factory=dict)
    dangling_refs: list = field(default_factory=list)  # (way_id, node_id)

    def counts(self):
        return (len(self.nodes), len(self.ways), len(self.relations))


class _Handler:
    def __init__(self):
        self.graph = OsmGraph()
        self.current = None
        self.saw_root = False

    def start(self, name, attrs):
        if name == "osm":
            self.saw_root = True
            version = attrs.get("version")
            if version is not None and not version.startswith(SUPPORTED_VERSION_PREFIX):
                raise UnsupportedVersionError(f"unsupported OSM data version {version!r}")
        elif name == "node":
            node = OsmNode(int(attrs["id"]), float(attrs["lon"]), float(attrs["lat"]))
            if not (-180.0 <= node.lon <= 180.0 and -90.0 <= node.lat <= 90.0):
                raise ParseError(f"node {node.id} has out-of-range coordinates")
            self.graph.nodes[node.id] = node
            self.current = node
        elif name == "way":
            way = OsmWay(int(attrs["id"]))
            self.graph.ways[way.id] = way
            self.current = way
        elif name == "relation":
            rel = OsmRelation(int(attrs["id"]))
            self.graph.relations[rel.id] = rel
            self.current = rel
        elif name == "nd" and isinstance(self.current, OsmWay):
            self.current.refs.append(int(attrs["ref"]))
        elif name == "tag" and self.current is not None:
            self.current.tags[attrs["k"]] = attrs["v"]
        elif name == "member" and isinstance(self.current, OsmRelation):
            self.current.members.append(
                (attrs.get("type", ""), int(attrs["ref"]), attrs.get("role", ""))
            )

    def end(self, name):
        if name in ("node", "way", "relation"):
            self.current = None


def parse_osm_xml(document) -> OsmGraph:
    """Parse an OSM XML document (bytes, str, or binary stream)."""
    if isinstance(document, str):
        document = document.encode("utf-8")
    if isinstance(document, (bytes, bytearray)):
        stream = io.BytesIO(document)
    else:
        stream = document

    handler = _Handler()
    parser = xml.parsers.expat.ParserCreate()
    parser.StartElementHandler = handler.start
    parser.EndElementHandler = handler.end
    parser.buffer_text = True
    try:
        parser.ParseFile(stream)
    except xml.parsers.expat.ExpatError as e:
        raise ParseError(
            f"malformed OSM XML at byte {parser.ErrorByteIndex}: "
            f"{xml.parsers.expat.errors.messages[e.code]}",
            byte_offset=parser.ErrorByteIndex,
        ) from e
    except (ValueError, KeyError) as e:
        raise ParseError(
            f"invalid element near byte {parser.CurrentByteIndex}: {e}",
            byte_offset=parser.CurrentByteIndex,
        ) from e
    if not handler.saw_root:
        raise ParseError("document has no <osm> root element", byte_offset=0)

    graph = handler.graph
    for way in graph.ways.values():
        for ref in way.refs:
            if ref not in graph.nodes:
                graph.dangling_refs.append((way.id, ref))
    return graph


def _tag_lines(tags, indent):
    return [f'{indent}<tag k={quoteattr(k)} v={quoteattr(v)}/>' for k, v in tags.items()]


def serialize_osm_xml(graph: OsmGraph) -> bytes:
    """Serialize a graph back to OSM XML (inverse of parse for our fields)."""
    out = ['<?xml version="1.0" encoding="UTF-8"?>', '<osm version="0.6" generator="planloc">']
    for node in graph.nodes.values():
        head = f'  <node id="{node.id}" lon="{node.lon!r}" lat="{node.lat!r}"'
        if node.tags:
            out.append(head + ">")
            out.extend(_tag_lines(node.tags, "    "))
            out.append("  </node>")
        else:
            out.append(head + "/>")
    for way in graph.ways.values():
        out.append(f'  <way id="{way.id}">')
        out.extend(f'    <nd ref="{r}"/>' for r in way.refs)
        out.extend(_tag_lines(way.tags, "    "))
        out.append("  </way>")
    for rel in graph.relations.values():
        out.append(f'  <relation id="{rel.id}">')
        out.extend(
            f'    <member type={quoteattr(t)} ref="{r}" role={quoteattr(role)}/>'
            for t, r, role in rel.members
        )
        out.extend(_tag_lines(rel.tags, "    "))
        out.append("  </relation>")
    out.append("</osm>")
    return ("\n".join(out) + "\n").encode("utf-8")
