"""OpenStreetMap ingestion: fetch, parse, classify, and build geometries."""

from .classes import (
    KIND_AREA,
    KIND_LINE,
    KIND_NODE,
    ClassTable,
    TagRule,
    classify,
    load_class_table,
    parse_class_table,
)
from .geoms import MapGeometries, build_geometries
from .overpass import bbox_query, default_endpoint, fetch_overpass
from .parse import OsmGraph, OsmNode, OsmRelation, OsmWay, parse_osm_xml, serialize_osm_xml

__all__ = [
    "KIND_AREA",
    "KIND_LINE",
    "KIND_NODE",
    "ClassTable",
    "TagRule",
    "classify",
    "load_class_table",
    "parse_class_table",
    "MapGeometries",
    "build_geometries",
    "bbox_query",
    "default_endpoint",
    "fetch_overpass",
    "OsmGraph",
    "OsmNode",
    "OsmRelation",
    "OsmWay",
    "parse_osm_xml",
    "serialize_osm_xml",
]
