import os

import numpy as np
import pytest
import requests

from planloc.errors import (
    ConfigurationError,
    DomainError,
    ParseError,
    ThrottledError,
    TransportError,
    UnsupportedVersionError,
)
from planloc.geometry import Datum
from planloc.osm.classes import (
    KIND_AREA,
    KIND_LINE,
    KIND_NODE,
    ClassTable,
    TagRule,
    classify,
    load_class_table,
    parse_class_table,
)
from planloc.osm.geoms import build_geometries
from planloc.osm.overpass import bbox_query, fetch_overpass
from planloc.osm.parse import parse_osm_xml, serialize_osm_xml

FIXTURE = os.path.join(os.path.dirname(__file__), "fixtures", "block.osm")
DATUM = Datum(11.5744, 48.1371)


def fixture_bytes():
    with open(FIXTURE, "rb") as f:
        return f.read()


def osm(body, version="0.6"):
    return f'<?xml version="1.0"?><osm version="{version}">{body}</osm>'.encode()


class TestParse:
    def test_empty_document(self):
        g = parse_osm_xml(osm(""))
        assert g.counts() == (0, 0, 0)
        assert g.dangling_refs == []

    def test_block_fixture_counts(self):
        # entity counts recorded when the fixture was authored
        g = parse_osm_xml(fixture_bytes())
        assert g.counts() == (22, 6, 1)
        assert g.dangling_refs == []

    def test_fixture_tags_and_refs(self):
        g = parse_osm_xml(fixture_bytes())
        assert g.ways[100].tags["building"] == "yes"
        assert g.ways[100].refs[0] == g.ways[100].refs[-1] == 1
        assert g.nodes[16].tags == {"natural": "tree"}
        assert g.relations[200].tags["type"] == "multipolygon"
        assert ("way", 105, "outer") in g.relations[200].members

    def test_dangling_reference_collected(self):
        g = parse_osm_xml(osm('<node id="1" lat="0" lon="0"/>'
                              '<way id="9"><nd ref="1"/><nd ref="77"/></way>'))
        assert g.dangling_refs == [(9, 77)]

    def test_unsupported_version(self):
        with pytest.raises(UnsupportedVersionError):
            parse_osm_xml(osm("", version="0.5"))

    def test_malformed_xml_reports_offset(self):
        doc = b'<?xml version="1.0"?><osm version="0.6"><node id="1"'
        with pytest.raises(ParseError, match="malformed OSM XML at byte") as exc:
            parse_osm_xml(doc)
        assert exc.value.byte_offset >= 0

    def test_missing_root(self):
        with pytest.raises(ParseError, match="no <osm> root") as exc:
            parse_osm_xml(b'<?xml version="1.0"?><notosm/>')
        assert exc.value.byte_offset == 0

    def test_out_of_range_coordinates(self):
        with pytest.raises(ParseError):
            parse_osm_xml(osm('<node id="1" lat="91.0" lon="0"/>'))

    def test_serialize_round_trip(self):
        g = parse_osm_xml(fixture_bytes())
        again = parse_osm_xml(serialize_osm_xml(g))
        assert again.counts() == g.counts()
        assert set(again.nodes) == set(g.nodes)
        for nid, node in g.nodes.items():
            assert again.nodes[nid].lat == node.lat
            assert again.nodes[nid].lon == node.lon
            assert again.nodes[nid].tags == node.tags
        for wid, way in g.ways.items():
            assert again.ways[wid].refs == way.refs
            assert again.ways[wid].tags == way.tags
        assert again.relations[200].members == g.relations[200].members


class TestClassTable:
    def test_default_table_counts(self):
        t = load_class_table()
        assert len(t.areas) == 7
        assert len(t.lines) == 10
        assert len(t.nodes) == 33
        assert t.class_count(KIND_AREA) == 8
        assert t.class_count(KIND_NODE) == 34

    def test_indices_are_one_based(self):
        t = load_class_table()
        assert t.class_index(KIND_AREA, "parking") == 1
        assert t.class_index(KIND_AREA, "building") == 2
        assert t.class_index(KIND_LINE, "road") == 1

    def test_unknown_class(self):
        t = load_class_table()
        with pytest.raises(ConfigurationError, match="unknown class"):
            t.class_index(KIND_AREA, "lake")

    def test_duplicate_names_rejected(self):
        with pytest.raises(ConfigurationError, match="duplicate"):
            ClassTable(["a", "a"], [], [])

    def test_void_reserved(self):
        with pytest.raises(ConfigurationError, match="void"):
            ClassTable(["void"], [], [])

    def test_rule_must_target_declared_class(self):
        with pytest.raises(ConfigurationError, match="undeclared"):
            ClassTable(["building"], [], [], [TagRule(KIND_AREA, "water", "natural", "water")])

    def test_digest_stable_and_sensitive(self):
        t = load_class_table()
        assert t.digest() == load_class_table().digest()
        other = ClassTable(list(t.areas[::-1]), list(t.lines), list(t.nodes), list(t.rules))
        assert other.digest() != t.digest()

    def test_parse_serialize_round_trip(self):
        t = load_class_table()
        again = parse_class_table(t.serialize())
        assert again.serialize() == t.serialize()

    def test_parse_errors_name_the_line(self):
        with pytest.raises(ConfigurationError, match="bad class-table line 2"):
            parse_class_table("area building\nbogus entry here\n")

    def test_comments_and_blanks_ignored(self):
        t = parse_class_table("# heading\n\narea building\nrule area building building=*\n")
        assert t.areas == ["building"]


class TestClassify:
    def test_examples(self):
        t = load_class_table()
        assert classify({"building": "yes"}, t) == (KIND_AREA, 2)
        assert classify({"highway": "cycleway"}, t) == (KIND_LINE, 2)
        assert classify({}, t) is None
        assert classify({"natural": "tree"}, t) == (KIND_NODE, t.class_index(KIND_NODE, "tree"))

    def test_first_match_wins(self):
        t = load_class_table()
        # a building that is also a shop stays a building (area rules first)
        assert classify({"building": "yes", "shop": "bakery"}, t) == (KIND_AREA, 2)

    def test_tag_order_invariance(self):
        t = load_class_table()
        a = classify({"building": "yes", "amenity": "parking"}, t)
        b = classify({"amenity": "parking", "building": "yes"}, t)
        assert a == b  # dict order does not matter, rule order does

    def test_alternatives_and_wildcard(self):
        t = load_class_table()
        assert classify({"highway": "primary"}, t) == (KIND_LINE, 1)
        assert classify({"highway": "residential"}, t) == (KIND_LINE, 1)
        assert classify({"shop": "anything_at_all"}, t)[0] == KIND_NODE


class TestBuildGeometries:
    def test_fixture_geometry_counts(self):
        g = parse_osm_xml(fixture_bytes())
        t = load_class_table()
        geoms = build_geometries(g, DATUM, t)
        assert geoms.counts() == (3, 4, 3)
        assert geoms.skipped == []
        poly_classes = sorted(idx for idx, _ in geoms.polygons)
        assert poly_classes == sorted([t.class_index(KIND_AREA, "parking"),
                                       t.class_index(KIND_AREA, "building"),
                                       t.class_index(KIND_AREA, "water")])

    def test_closed_building_emits_outline(self):
        g = parse_osm_xml(fixture_bytes())
        t = load_class_table()
        geoms = build_geometries(g, DATUM, t)
        outline_idx = t.class_index(KIND_LINE, "building_outline")
        outlines = [c for idx, c in geoms.polylines if idx == outline_idx]
        assert len(outlines) == 1
        buildings = [c for idx, c in geoms.polygons
                     if idx == t.class_index(KIND_AREA, "building")]
        np.testing.assert_array_equal(outlines[0], buildings[0])

    def test_unclosed_area_way_skipped(self):
        doc = osm('<node id="1" lat="0" lon="0"/><node id="2" lat="0" lon="0.0001"/>'
                  '<node id="3" lat="0.0001" lon="0.0001"/>'
                  '<way id="5"><nd ref="1"/><nd ref="2"/><nd ref="3"/>'
                  '<tag k="building" v="yes"/></way>')
        geoms = build_geometries(parse_osm_xml(doc), Datum(0.0, 0.0), load_class_table())
        assert geoms.counts() == (0, 0, 0)
        assert geoms.skipped == [("way", 5, "area class on unclosed way")]

    def test_way_with_dangling_refs_skipped(self):
        doc = osm('<node id="1" lat="0" lon="0"/>'
                  '<way id="5"><nd ref="1"/><nd ref="9"/>'
                  '<tag k="highway" v="residential"/></way>')
        geoms = build_geometries(parse_osm_xml(doc), Datum(0.0, 0.0), load_class_table())
        assert geoms.skipped == [("way", 5, "dangling node refs")]

    def test_node_class_on_way_skipped(self):
        doc = osm('<node id="1" lat="0" lon="0"/><node id="2" lat="0" lon="0.0001"/>'
                  '<way id="5"><nd ref="1"/><nd ref="2"/><tag k="natural" v="tree"/></way>')
        geoms = build_geometries(parse_osm_xml(doc), Datum(0.0, 0.0), load_class_table())
        assert geoms.skipped == [("way", 5, "node class on a way")]

    def test_multipolygon_two_outers_skipped(self):
        ring1 = ('<node id="1" lat="0" lon="0"/><node id="2" lat="0" lon="0.0001"/>'
                 '<node id="3" lat="0.0001" lon="0.0001"/>'
                 '<way id="5"><nd ref="1"/><nd ref="2"/><nd ref="3"/><nd ref="1"/></way>'
                 '<way id="6"><nd ref="1"/><nd ref="3"/><nd ref="2"/><nd ref="1"/></way>')
        doc = osm(ring1 + '<relation id="7"><member type="way" ref="5" role="outer"/>'
                          '<member type="way" ref="6" role="outer"/>'
                          '<tag k="type" v="multipolygon"/><tag k="natural" v="water"/>'
                          '</relation>')
        geoms = build_geometries(parse_osm_xml(doc), Datum(0.0, 0.0), load_class_table())
        assert ("relation", 7, "not a single-outer-ring multipolygon") in geoms.skipped

    def test_geometry_in_meters_near_datum(self):
        g = parse_osm_xml(fixture_bytes())
        geoms = build_geometries(g, DATUM, load_class_table())
        allc = np.vstack([c for _, c in geoms.polygons]
                         + [c for _, c in geoms.polylines]
                         + [c.reshape(1, 2) for _, c in geoms.points])
        # the fixture block spans well under a kilometer around the datum
        assert np.abs(allc).max() < 500.0


class FakeResponse:
    def __init__(self, status_code, content=b""):
        self.status_code = status_code
        self.content = content


class FakeSession:
    def __init__(self, script):
        self.script = list(script)
        self.calls = []

    def post(self, endpoint, data=None, timeout=None):
        self.calls.append((endpoint, data["data"], timeout))
        item = self.script.pop(0)
        if isinstance(item, Exception):
            raise item
        return item

    def close(self):
        pass


BBOX = (11.57, 48.13, 11.58, 48.14)


class TestFetchOverpass:
    def test_bbox_query_order(self):
        q = bbox_query(BBOX)
        assert "48.13,11.57,48.14,11.58" in q
        assert q.startswith("[out:xml]")

    def test_degenerate_bbox(self):
        with pytest.raises(DomainError, match="degenerate"):
            bbox_query((11.57, 48.13, 11.57, 48.14))
        with pytest.raises(DomainError):
            fetch_overpass((0.0, 1.0, 0.0, 2.0))

    def test_success_first_try(self, tmp_path):
        session = FakeSession([FakeResponse(200, b"<osm/>")])
        data = fetch_overpass(BBOX, endpoint="http://test", cache_dir=str(tmp_path),
                              session=session, sleep=lambda s: None)
        assert data == b"<osm/>"
        assert len(session.calls) == 1
        assert session.calls[0][0] == "http://test"

    def test_cache_hit_makes_no_network_calls(self, tmp_path):
        first = FakeSession([FakeResponse(200, b"<osm/>")])
        fetch_overpass(BBOX, endpoint="http://test", cache_dir=str(tmp_path),
                       session=first, sleep=lambda s: None)
        second = FakeSession([])
        data = fetch_overpass(BBOX, endpoint="http://test", cache_dir=str(tmp_path),
                              session=second, sleep=lambda s: None)
        assert data == b"<osm/>"
        assert second.calls == []

    def test_persistent_429_raises_throttled_with_backoff(self):
        session = FakeSession([FakeResponse(429)] * 3)
        sleeps = []
        with pytest.raises(ThrottledError, match="rate limit"):
            fetch_overpass(BBOX, endpoint="http://test", session=session,
                           sleep=sleeps.append)
        assert len(session.calls) == 3
        assert sleeps == [1.0, 2.0]

    def test_transient_500_then_success(self):
        session = FakeSession([FakeResponse(500), FakeResponse(200, b"ok")])
        sleeps = []
        data = fetch_overpass(BBOX, endpoint="http://test", session=session,
                              sleep=sleeps.append)
        assert data == b"ok"
        assert sleeps == [1.0]

    def test_connection_errors_retried(self):
        session = FakeSession([requests.RequestException("boom"),
                               FakeResponse(200, b"ok")])
        data = fetch_overpass(BBOX, endpoint="http://test", session=session,
                              sleep=lambda s: None)
        assert data == b"ok"

    def test_client_error_fails_fast(self):
        session = FakeSession([FakeResponse(404)])
        with pytest.raises(TransportError, match="HTTP 404"):
            fetch_overpass(BBOX, endpoint="http://test", session=session,
                           sleep=lambda s: None)
        assert len(session.calls) == 1

    def test_persistent_connection_failure(self):
        session = FakeSession([requests.RequestException("boom")] * 3)
        with pytest.raises(TransportError, match="request failed"):
            fetch_overpass(BBOX, endpoint="http://test", session=session,
                           sleep=lambda s: None)
