import copy
import functools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfcube import bass_serre as bs
from mfcube import cubecore as C
from mfcube import fixtures, wise
from mfcube.errors import AttachmentError, InputError, PreconditionError
from oracles import graph_of_graphs_orbit


@pytest.fixture(scope="module")
def tori():
    return bs.build_gog(fixtures.tori_gog())


@pytest.fixture(scope="module")
def tori_w1(tori):
    return bs.tree_window(tori, "v1", 1, 6, 5)


@pytest.fixture(scope="module")
def tori_w2(tori):
    return bs.tree_window(tori, "v1", 2, 6, 5)


def counts(X):
    return X.n, len(X.edges), len(X.squares)


# ---------------------------------------------------------------------------
# graphs of complexes


def test_tori_gog_shape(tori):
    s = bs.gog_summary(tori)
    assert s["vertices"] == ["v1", "v2"] and s["edges"] == [["v1", "v2", "e"]]
    assert s["edge_spaces"]["e"]["edges"] == 1


def test_loop_is_subdivided():
    G = bs.build_gog(fixtures.loop_gog())
    assert G.subdivided == ("e",)
    assert G.vertices == ("v", "e^mid")
    assert [e.id for e in G.edges] == ["e^0", "e^1"]


def test_non_local_isometry_attachment_rejected():
    spec = copy.deepcopy(fixtures.tori_gog())
    spec["edge_spaces"]["e"] = {"name": "rose", "vertices": ["o"],
                                "edges": [{"id": "x", "ends": ["o", "o"]}, {"id": "y", "ends": ["o", "o"]}],
                                "squares": []}
    for side in ("minus", "plus"):
        spec["attachments"]["e"][side] = {"source": "rose", "target": "torus", "vertex_map": {"o": "o"},
                                          "edge_map": {"x": "a", "y": "b"}}
    with pytest.raises(AttachmentError):
        bs.build_gog(spec)


def test_unknown_base_vertex(tori):
    with pytest.raises(InputError):
        bs.tree_window(tori, "nowhere", 1, 4, 2)


@pytest.mark.parametrize("name,expected", [("tori_gog", (2, 5, 3)), ("circles_gog", (2, 3, 1)),
                                           ("transverse_gog", (3, 8, 5)), ("loop_gog", (2, 5, 3))])
def test_total_space_counts(name, expected):
    T = bs.total_space(bs.build_gog(fixtures.generate_fixture(name)))
    assert counts(T) == expected
    assert C.validate_npc(T).ok


# ---------------------------------------------------------------------------
# tree windows and path gates


def test_depth_zero_window(tori):
    W = bs.tree_window(tori, "v1", 0, 6, 5)
    assert (len(W.chambers), len(W.strips)) == (1, 0)
    with pytest.raises(PreconditionError):
        W.paths(1)


def test_depth_one_window(tori_w1):
    assert len(tori_w1.chambers) == 1 and len(tori_w1.strips) == 5
    assert tori_w1.truncated
    assert all((s.edge, s.side) == ("e", "minus") for s in tori_w1.strips)


def test_depth_two_window(tori_w2):
    assert len(tori_w2.chambers) == 6 and len(tori_w2.strips) == 30
    assert len(tori_w2.paths(2)) == 25


def test_window_is_a_tree(tori_w2):
    W = tori_w2
    parent = {0: None}
    for s in W.strips:
        if s.child is not None:
            assert s.child not in parent
            parent[s.child] = s.index
    for c in W.chambers:
        assert c.parent_strip == parent[c.index]
        assert all(W.strips[s].parent == c.index for s in c.strips)


def test_strip_elevations_convex_and_distinct(tori_w1):
    W = tori_w1
    ball = W.root.ball
    seen = set()
    for s in W.strips:
        members = s.upper.members
        assert C.hull(ball.complex, members).members == members
        assert frozenset(s.upper.pairs.items()) not in seen
        seen.add(frozenset(s.upper.pairs.items()))


def test_length_one_gate_is_the_elevation(tori_w1):
    pg = bs.path_gate(tori_w1, [0])
    assert len(pg.members) == 13 and pg.reliable and pg.cross_check


def test_bad_path_rejected(tori_w2):
    with pytest.raises(PreconditionError):
        bs.path_gate(tori_w2, [0, 0])
    with pytest.raises(PreconditionError):
        bs.path_gate(tori_w2, [])


# ---------------------------------------------------------------------------
# stabilizers


@pytest.mark.parametrize("path", [(0,), (1,), (3,)])
def test_parallel_tori_cyclic_unit_shift(tori_w1, path):
    st = bs.path_stabilizer(tori_w1, path)
    assert st.cyclic_verdict == "cyclic" and st.complete and st.reliable
    ball = tori_w1.root.ball
    assert C.distance(ball.complex, st.basepoint, st.primitive) == 1
    assert bs.preserves(tori_w1, path, st.basepoint, st.primitive)


def test_length_two_cyclic(tori_w2):
    for p in tori_w2.paths(2)[:4]:
        assert bs.path_stabilizer(tori_w2, p).cyclic_verdict == "cyclic"


def test_transverse_length_two():
    G = bs.build_gog(fixtures.transverse_gog())
    W = bs.tree_window(G, "v1", 2, 6, 5)
    verdicts = {}
    for p in W.paths(2):
        key = tuple((W.strips[s].edge, W.strips[s].side) for s in p)
        verdicts.setdefault(key, set()).add(bs.path_stabilizer(W, p).cyclic_verdict)
    assert verdicts == {(("e1", "minus"), ("e1", "plus")): {"cyclic"},
                        (("e1", "minus"), ("e2", "minus")): {"trivial"}}


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 4), st.integers(0, 84))
def test_stabilizer_generators_preserve_gate(path_idx, v):
    W = _tori_window()
    st_ = bs.path_stabilizer(W, (path_idx,))
    g = bs.DeckMap(W.root.ball, st_.basepoint, st_.primitive)
    gate = st_.gate.members
    if v in gate and g(v) is not None:
        assert g(v) in gate


@functools.cache
def _tori_window():
    return bs.tree_window(bs.build_gog(fixtures.tori_gog()), "v1", 1, 6, 5)


# ---------------------------------------------------------------------------
# triple quasilines


def test_triple_quasiline_parallel_lines(tori_w1):
    T = bs.triple_quasiline(tori_w1, 0, 1, 0, 3)
    assert T.verdict == "cyclic" and T.quasiline is not None
    assert T.quasiline.translation == 1


def test_triple_needs_moving_translate(tori_w1):
    with pytest.raises(PreconditionError):
        bs.triple_quasiline(tori_w1, 0, 1, 0, 1)


# ---------------------------------------------------------------------------
# cyclonormality


def test_tori_cyclonormal(tori):
    r = bs.check_cyclonormal(tori, "edges", 2, 8, 6)
    assert r.verdict == "pass" and r.counts == {"trivial": 0, "cyclic": 150, "higher": 0, "undecided": 0}


def test_edges_mode_is_paths_one(tori):
    a = bs.check_cyclonormal(tori, "edges", 2, 8, 6)
    b = bs.check_cyclonormal(tori, "paths:1", 2, 8, 6)
    assert a.table() == b.table()


def test_index_two_fails_with_witness():
    r = bs.check_cyclonormal(bs.build_gog(fixtures.index2_gog()), "edges", 2, 8, 6)
    assert r.verdict == "fail"
    bad = [row for row in r.rows if row["verdict"] == "higher"]
    assert bad and bad[0]["witness"]["commute"] is False


def test_identity_gog_vacuous_pass():
    r = bs.check_cyclonormal(bs.build_gog(fixtures.identity_gog()), "edges", 2, 8, 6)
    assert r.verdict == "pass" and r.rows == []


def test_transverse_cyclonormal():
    r = bs.check_cyclonormal(bs.build_gog(fixtures.transverse_gog()), "edges", 2, 8, 6)
    assert r.verdict == "pass" and r.counts["higher"] == 0


@pytest.mark.parametrize("mode", ["paths", "paths:x", "loops", "paths:0"])
def test_bad_mode(tori, mode):
    with pytest.raises(InputError):
        bs.check_cyclonormal(tori, mode)


def test_mode_beyond_depth_bound(tori):
    with pytest.raises(PreconditionError):
        bs.check_cyclonormal(tori, "paths:3", depth_bound=2)


# ---------------------------------------------------------------------------
# stature


def test_tori_stature(tori):
    rep = bs.stature_probe(tori, "v1", 4, 6, 5)
    assert rep.stabilized and rep.stabilization_length == 1
    assert set(rep.tallies.values()) == {1}
    assert rep.budget.B.status == "computed"


def test_empty_stature(tori):
    rep = bs.stature_probe(tori, "v1", 0)
    assert rep.tallies == {} and not rep.stabilized and rep.caveats


def _straight_orbit(L):
    twist = {("ab"[i // 3], i % 3): wise.TWIST[i] for i in range(6)}
    return len(graph_of_graphs_orbit({"a": wise.A_PERM, "b": wise.B_PERM}, twist, (0,) * L))


def test_orbit_oracle_values():
    assert [_straight_orbit(L) for L in range(1, 6)] == [3, 6, 12, 24, 48]


def test_wise_classes_match_orbit_oracle():
    G = bs.build_gog(fixtures.wise_gog())
    rep = bs.stature_probe(G, G.vertices[0], 4, 7, 1)
    assert rep.tallies == {1: 1, 2: 3, 3: 7, 4: 13}
    assert not rep.stabilized
    for L in range(1, 5):
        first = [c for c in rep.classes if c["first_length"] == L]
        assert first and all(c["quotient"]["complete"] for c in first)
        assert {c["quotient"]["classes"] for c in first} == {_straight_orbit(L)}


def test_stature_determinism(tori):
    a = bs.stature_probe(tori, "v1", 2, 6, 5).as_dict()
    b = bs.stature_probe(tori, "v1", 2, 6, 5).as_dict()
    assert a == b
