"""Local-frame geometry extraction from a parsed OSM graph."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import Datum, wgs84_to_local
from .classes import KIND_AREA, KIND_LINE, KIND_NODE, ClassTable, classify


@dataclass
class MapGeometries:
    """Classed geometry in meters: polygons, polylines, points.

    Each entry is (class_idx, coordinates); polygon rings are closed
    (first point equals last) with at least 4 vertices.
    """

    polygons: list = field(default_factory=list)
    polylines: list = field(default_factory=list)
    points: list = field(default_factory=list)
    skipped: list = field(default_factory=list)  # (element kind, id, reason)

    def counts(self):
        return (len(self.polygons), len(self.polylines), len(self.points))


def _way_coords(graph, way, datum):
    lons = [graph.nodes[r].lon for r in way.refs]
    lats = [graph.nodes[r].lat for r in way.refs]
    return wgs84_to_local(datum, np.array(lons), np.array(lats))


def build_geometries(graph, datum: Datum, table: ClassTable) -> MapGeometries:
    """Classify graph elements and convert them to local-frame geometry.

    Closed ways with area classes become polygons (closed buildings also
    emit a building_outline polyline); ways with line classes become
    polylines; tagged nodes become points. Mismatches (an unclosed way with
    an area class, a way with a node class...) are recorded in ``skipped``.
    """
    out = MapGeometries()
    building_idx = table.class_index(KIND_AREA, "building")
    try:
        outline_idx = table.class_index(KIND_LINE, "building_outline")
    except Exception:
        outline_idx = None

    for way in graph.ways.values():
        hit = classify(way.tags, table)
        if hit is None:
            continue
        kind, class_idx = hit
        if any(r not in graph.nodes for r in way.refs):
            out.skipped.append(("way", way.id, "dangling node refs"))
            continue
        if len(way.refs) < 2:
            out.skipped.append(("way", way.id, "fewer than 2 nodes"))
            continue
        closed = way.refs[0] == way.refs[-1] and len(way.refs) >= 4
        coords = _way_coords(graph, way, datum)
        if kind == KIND_AREA:
            if not closed:
                out.skipped.append(("way", way.id, "area class on unclosed way"))
                continue
            out.polygons.append((class_idx, coords))
            if class_idx == building_idx and outline_idx is not None:
                out.polylines.append((outline_idx, coords))
        elif kind == KIND_LINE:
            out.polylines.append((class_idx, coords))
        else:
            out.skipped.append(("way", way.id, "node class on a way"))

    for node in graph.nodes.values():
        hit = classify(node.tags, table)
        if hit is None:
            continue
        kind, class_idx = hit
        if kind != KIND_NODE:
            out.skipped.append(("node", node.id, f"{kind} class on a node"))
            continue
        out.points.append((class_idx, wgs84_to_local(datum, node.lon, node.lat)))

    for rel in graph.relations.values():
        hit = classify(rel.tags, table)
        if hit is None:
            continue
        kind, class_idx = hit
        if kind != KIND_AREA or rel.tags.get("type") != "multipolygon":
            out.skipped.append(("relation", rel.id, "unsupported relation"))
            continue
        outers = [m for m in rel.members if m[0] == "way" and m[2] == "outer"]
        if len(outers) != 1:
            out.skipped.append(("relation", rel.id, "not a single-outer-ring multipolygon"))
            continue
        way = graph.ways.get(outers[0][1])
        if way is None or any(r not in graph.nodes for r in way.refs):
            out.skipped.append(("relation", rel.id, "outer ring incomplete"))
            continue
        if not (way.refs[0] == way.refs[-1] and len(way.refs) >= 4):
            out.skipped.append(("relation", rel.id, "outer ring not closed"))
            continue
        out.polygons.append((class_idx, _way_coords(graph, way, datum)))

    return out
