import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfcube import bass_serre as bs
from mfcube import cubecore as C
from mfcube import fileio, fixtures
from mfcube.errors import InputError, MalformedMap

COMPLEX_FIXTURES = [("grid", (2, 2)), ("grid", (3, 1)), ("line", ()), ("ladder", ()), ("comb", (2,)),
                    ("torus", ()), ("klein", ()), ("torus_grid", (3,)), ("cube", ()), ("cube_corner", ()),
                    ("circle", ()), ("rose", ()), ("rose_cover_a", ())]
GOG_FIXTURES = ["tori_gog", "transverse_gog", "circles_gog", "loop_gog", "index2_gog", "identity_gog", "wise_gog"]


def shape(X):
    return (X.name, X.labels, X.edges, X.edge_ids, X.edge_flips,
            tuple((s.corners, s.sides) for s in X.squares), X.cubes3)


@pytest.mark.parametrize("name,params", COMPLEX_FIXTURES)
def test_complex_round_trip(name, params, tmp_path):
    X = fileio.read_complex(fixtures.generate_fixture(name, *params))
    path = tmp_path / "x.json"
    fileio.write_complex(X, path)
    assert shape(fileio.read_complex(path)) == shape(X)


def test_written_file_is_canonical(tmp_path):
    path = fileio.write_fixture(fixtures.grid(2, 2), tmp_path)
    text = path.read_bytes()
    assert b"\r" not in text and text.endswith(b"\n")
    assert text.decode() == fileio.canonical_json(json.loads(text))
    assert path.name == "grid22.json"


def test_torus_file_counts(tmp_path):
    spec = json.loads(fileio.write_fixture(fixtures.torus(), tmp_path).read_text())
    assert (len(spec["vertices"]), len(spec["edges"]), len(spec["squares"])) == (1, 2, 1)


def test_map_round_trip():
    torus = fileio.read_complex(fixtures.torus())
    circle = fileio.read_complex(fixtures.circle())
    spec = {"source": "circle", "target": "torus", "vertex_map": {"o": "o"}, "edge_map": {"c": ["a", -1]}}
    f = fileio.build_map(spec, circle, torus)
    g = fileio.build_map(fileio.map_to_spec(f), circle, torus)
    assert (f.vertex_map, f.edge_map) == (g.vertex_map, g.edge_map)


def test_map_respects_file_orientation():
    # an edge written max-to-min must keep its file orientation in maps
    seg = {"name": "seg", "vertices": [0, 1], "edges": [{"id": "s", "ends": [1, 0]}], "squares": []}
    S = fileio.read_complex(seg)
    T = fileio.read_complex(fixtures.grid(1, 0))
    spec = {"source": "seg", "target": "grid10", "vertex_map": {"0": [1, 0], "1": [0, 0]}, "edge_map": {"s": "0"}}
    f = fileio.build_map(spec, S, T)
    assert C.check_local_isometry(f).ok
    assert fileio.map_to_spec(f)["edge_map"]["s"] == ["0", 1]


def test_map_not_total():
    circle = fileio.read_complex(fixtures.circle())
    rose = fileio.read_complex(fixtures.rose())
    with pytest.raises((MalformedMap, InputError)):
        fileio.build_map({"source": "rose", "target": "circle", "vertex_map": {"o": "o"},
                          "edge_map": {"a": "c"}}, rose, circle)


@pytest.mark.parametrize("name", GOG_FIXTURES)
def test_gog_round_trip_through_files(name, tmp_path):
    spec = fixtures.generate_fixture(name)
    path = fileio.write_fixture(spec, tmp_path)
    G1, G2 = bs.build_gog(spec), bs.build_gog(path)
    assert bs.gog_to_spec(G1) == bs.gog_to_spec(G2)
    G3 = bs.build_gog(bs.gog_to_spec(G2))
    assert bs.gog_to_spec(G3) == bs.gog_to_spec(G2)


def test_tori_gog_files(tmp_path):
    fileio.write_fixture(fixtures.tori_gog(), tmp_path)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["tori_gog.edge.e.json", "tori_gog.json", "tori_gog.map.e.minus.json",
                     "tori_gog.map.e.plus.json", "tori_gog.vertex.v1.json", "tori_gog.vertex.v2.json"]


def test_fixture_generation_is_deterministic(tmp_path):
    a = fileio.write_fixture(fixtures.wise_gog(), tmp_path / "a")
    b = fileio.write_fixture(fixtures.wise_gog(), tmp_path / "b")
    for p in sorted(a.parent.iterdir()):
        assert p.read_bytes() == (b.parent / p.name).read_bytes()


def test_unknown_fixture():
    with pytest.raises(InputError):
        fixtures.generate_fixture("moebius")
    with pytest.raises(InputError):
        fixtures.grid(-1, 2)


def test_digest_tracks_content(tmp_path):
    p = fileio.write_fixture(fixtures.torus(), tmp_path)
    d1 = fileio.digest(p)
    p.write_text(p.read_text().replace("torus", "torus2"))
    assert fileio.digest(p) != d1
    assert fileio.digest(fixtures.torus()) == fileio.digest(fixtures.torus())


def test_load_errors(tmp_path):
    with pytest.raises(InputError):
        fileio.load_json(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(InputError):
        fileio.load_json(bad)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 4), st.integers(0, 4))
def test_grid_round_trip_property(m, n):
    X = fileio.read_complex(fixtures.grid(m, n))
    assert shape(C.build_complex(C.complex_to_spec(X))) == shape(X)
    assert (X.n, len(X.edges), len(X.squares)) == ((m + 1) * (n + 1), m * (n + 1) + n * (m + 1), m * n)
