import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import complex_of, vid
from mfcube import cubecore as C
from mfcube import fileio, fixtures
from mfcube.errors import CellBudgetExceeded, DanglingReference, DeckError, DimensionError, DuplicateCell, InputError
from oracles import bfs_distances, brute_median, interval_closure_hull


# ---------------------------------------------------------------------------
# construction


def test_grid_counts(grid22):
    assert (grid22.n, len(grid22.edges), len(grid22.squares)) == (9, 12, 4)


def test_torus_counts(torus):
    assert (torus.n, len(torus.edges), len(torus.squares)) == (1, 2, 1)


def test_dangling_edge_in_square():
    spec = fixtures.torus()
    spec["squares"][0]["sides"][0] = ["zz", 1]
    with pytest.raises(DanglingReference):
        fileio.read_complex(spec)


def test_dangling_vertex_in_edge():
    spec = fixtures.grid(1, 1)
    spec["edges"].append([[0, 0], [5, 5]])
    with pytest.raises(DanglingReference):
        fileio.read_complex(spec)


def test_duplicate_square_rejected():
    with pytest.raises(DuplicateCell):
        complex_of("double_square")


def test_dimension_above_cap():
    spec = fixtures.solid_cube()
    with pytest.raises(DimensionError):
        C.build_complex(spec, dim_cap=2)


def test_cell_budget_env(monkeypatch, torus):
    monkeypatch.setenv("MF_CELL_BUDGET", "20")
    with pytest.raises(CellBudgetExceeded):
        C.develop_ball(torus, 0, 6)
    monkeypatch.setenv("MF_CELL_BUDGET", "nope")
    with pytest.raises(InputError):
        C.cell_budget()


# ---------------------------------------------------------------------------
# curvature and hyperplanes


def test_npc_examples(grid22, torus):
    assert C.validate_npc(grid22).ok
    assert C.validate_npc(torus).ok
    rep = C.validate_npc(complex_of("cube_corner"))
    assert not rep.ok
    assert rep.witness["problems"][0]["kind"] == "empty_triangle"
    assert C.validate_npc(complex_of("cube")).ok


def test_torus_link_is_four_cycle(torus):
    verts, edges, triangles = torus.link(0)
    assert len(verts) == 4 and len(edges) == 4 and not triangles
    degree = {v: 0 for v in verts}
    for a, b, _ in edges:
        degree[a] += 1
        degree[b] += 1
    assert set(degree.values()) == {2}
    assert not any({a, b} == {(0, 1), (0, -1)} for a, b, _ in edges)


def test_hyperplane_counts(grid22, torus):
    assert len(C.compute_hyperplanes(grid22)) == 4
    hs = C.compute_hyperplanes(torus)
    assert len(hs) == 2 and all(H.sided for H in hs)
    sq = complex_of("grid", 1, 1)
    hs = C.compute_hyperplanes(sq)
    assert len(hs) == 2 and all(len(H.dual_edges) == 2 for H in hs)


def test_grid_hyperplanes_split_by_direction(grid22):
    dirs = []
    for H in C.compute_hyperplanes(grid22):
        ends = [(grid22.labels[u], grid22.labels[v]) for u, v in (grid22.edges[e] for e in H.dual_edges)]
        dirs.append({"v" if a[0] != b[0] else "h" for a, b in ends})
    assert sorted(map(tuple, dirs)) == [("h",), ("h",), ("v",), ("v",)]


def test_cat0_examples(grid22, torus):
    assert C.is_cat0(grid22).ok
    assert not C.is_cat0(torus).ok
    rep = C.is_cat0(complex_of("torus_grid", 2))
    assert not rep.ok and rep.witness is not None
    assert C.is_cat0(complex_of("cube")).ok


def test_halfspaces_partition(grid22):
    for H in C.compute_hyperplanes(grid22):
        if H.halfspaces is None:
            C.is_cat0(grid22)
    for H in C.compute_hyperplanes(grid22):
        assert H.plus | H.minus == frozenset(range(grid22.n))
        assert not H.plus & H.minus


def test_hyperplane_diameter_line_of_squares():
    X = complex_of("grid", 4, 1)
    C.is_cat0(X)
    diams = sorted(C.hyperplane_diameter(X, H) for H in C.compute_hyperplanes(X))
    # dual edges are adjacent when they share a square
    assert diams == [1, 1, 1, 1, 4]


# ---------------------------------------------------------------------------
# metric


@pytest.mark.parametrize("a,b,d", [((0, 0), (2, 1), 3), ((0, 0), (2, 2), 4), ((1, 1), (1, 1), 0)])
def test_distance_examples(grid22, a, b, d):
    assert C.distance(grid22, vid(grid22, a), vid(grid22, b)) == d


@pytest.mark.parametrize("m,n", [(1, 1), (2, 3), (4, 4)])
def test_distance_matches_bfs_and_hyperplanes(m, n):
    X = complex_of("grid", m, n)
    C.is_cat0(X)
    D = bfs_distances(X.n, X.edges)
    for p, q in itertools.combinations(range(X.n), 2):
        assert C.distance(X, p, q) == D[p, q] == len(C.separating_hyperplanes(X, p, q))


def test_distance_off_complex(grid22):
    with pytest.raises(Exception):
        C.distance(grid22, 0, 99)


def test_geodesic_crosses_distinct_hyperplanes(grid22):
    C.is_cat0(grid22)
    for p, q in itertools.combinations(range(grid22.n), 2):
        g = C.geodesic(grid22, p, q)
        assert len(set(g.hyperplanes)) == len(g.hyperplanes) == C.distance(grid22, p, q)
        assert C.is_geodesic_path(grid22, list(g.vertices))


@pytest.mark.parametrize("p,q,r,m", [((0, 0), (2, 0), (0, 2), (0, 0)), ((0, 0), (2, 2), (2, 0), (2, 0)),
                                     ((1, 1), (1, 1), (2, 2), (1, 1))])
def test_median_examples(grid22, p, q, r, m):
    got = C.median(grid22, vid(grid22, p), vid(grid22, q), vid(grid22, r))
    assert grid22.labels[got] == m


def test_median_matches_brute_force():
    X = complex_of("grid", 3, 2)
    D = bfs_distances(X.n, X.edges)
    for p, q, r in itertools.combinations(range(X.n), 3):
        assert C.median(X, p, q, r) == brute_median(D, p, q, r)


def test_median_rejects_non_cat0(torus):
    with pytest.raises(Exception):
        C.median(torus, 0, 0, 0)


def test_hull_examples(grid22):
    H = C.hull(grid22, [vid(grid22, (0, 0)), vid(grid22, (2, 1))])
    assert {grid22.labels[v] for v in H.members} == {(i, j) for i in range(3) for j in range(2)}
    H = C.hull(grid22, [vid(grid22, (0, 0)), vid(grid22, (1, 1))])
    assert {grid22.labels[v] for v in H.members} == {(0, 0), (1, 0), (0, 1), (1, 1)}
    assert C.hull(grid22, [4]).members == {4}
    with pytest.raises(Exception):
        C.hull(grid22, [])


def test_convexity_examples(grid22):
    col = [vid(grid22, (0, j)) for j in range(3)]
    assert C.is_convex(grid22, col)
    assert not C.is_convex(grid22, [vid(grid22, x) for x in ((0, 0), (1, 0), (1, 1))])
    assert C.is_convex(grid22, range(grid22.n))


def _torus_ball(radius):
    X = complex_of("torus")
    ball = C.develop_ball(X, 0, radius)
    C.is_cat0(ball.complex)
    return ball.complex


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_hull_laws(data):
    X = _HULL_BALL
    D = _HULL_D
    S = data.draw(st.sets(st.integers(0, X.n - 1), min_size=1, max_size=4))
    T = data.draw(st.sets(st.integers(0, X.n - 1), min_size=0, max_size=3))
    H = C.hull(X, S).members
    assert H == interval_closure_hull(D, S)
    assert set(S) <= H
    assert C.hull(X, H).members == H
    assert H <= C.hull(X, set(S) | T).members
    assert C.is_convex(X, H)


_HULL_BALL = _torus_ball(4)
_HULL_D = bfs_distances(_HULL_BALL.n, _HULL_BALL.edges)


# ---------------------------------------------------------------------------
# specialness and local isometries


def test_special_examples(grid22, torus):
    assert C.check_special(torus).special
    assert C.check_special(grid22).special
    rep = C.check_special(complex_of("klein"))
    assert not rep.special
    assert any(v["check"] == "one_sided" for v in rep.violations())


@pytest.mark.parametrize("name,params", [("grid", (3, 3)), ("cube", ()), ("grid", (1, 4))])
def test_special_on_cat0_fixtures(name, params):
    X = complex_of(name, *params)
    assert C.is_cat0(X).ok and C.check_special(X).special


def test_local_isometry_examples(torus):
    circle = complex_of("circle", "circle", "c")
    f = fileio.build_map({"source": "circle", "target": "torus", "vertex_map": {"o": "o"},
                          "edge_map": {"c": "a"}}, circle, torus)
    assert C.check_local_isometry(f).ok
    point = C.build_complex({"name": "pt", "vertices": ["o"], "edges": [], "squares": []})
    f = fileio.build_map({"source": "pt", "target": "torus", "vertex_map": {"o": "o"}, "edge_map": {}},
                         point, torus)
    assert C.check_local_isometry(f).ok
    two = complex_of("rose")
    f = fileio.build_map({"source": "rose", "target": "circle", "vertex_map": {"o": "o"},
                          "edge_map": {"a": "c", "b": "c"}}, two, circle)
    rep = C.check_local_isometry(f)
    assert not rep.ok and rep.witness["kind"] == "link_not_injective"


def test_collapsed_edge_is_not_local_isometry(grid22):
    seg = complex_of("grid", 1, 0)
    f = C.make_map(seg, grid22, (0, 0), (None,))
    rep = C.check_local_isometry(f)
    assert not rep.ok and rep.witness["kind"] == "collapsed_edge"


# ---------------------------------------------------------------------------
# development and deck transformations


def test_circle_ball_is_path():
    X = complex_of("circle")
    ball = C.develop_ball(X, 0, 3)
    assert ball.n == 7 and len(ball.complex.edges) == 6


@pytest.mark.parametrize("R", [0, 1, 2, 3, 4])
def test_torus_ball_lattice_count(torus, R):
    ball = C.develop_ball(torus, 0, R)
    assert ball.n == 2 * R * R + 2 * R + 1
    assert C.is_cat0(ball.complex).ok


def test_simply_connected_ball_is_itself(grid22):
    ball = C.develop_ball(grid22, 0, 10)
    assert ball.n == 9 and not ball.boundary
    assert len(ball.complex.squares) == 4


def test_development_is_prefix_stable(torus):
    big, small = C.develop_ball(torus, 0, 4), C.develop_ball(torus, 0, 2)
    assert big.complex.edges[:len(small.complex.edges)] == small.complex.edges
    assert [big.word(v) for v in range(small.n)] == [small.word(v) for v in range(small.n)]


def test_deck_shift_on_torus(torus):
    ball = C.develop_ball(torus, 0, 5)
    target = ball.walk(0, [(0, 1)])
    phi = C.deck_search(ball, {0: target})
    for v in phi.defined:
        assert ball.proj(phi(v)) == ball.proj(v)
        for w in ball.complex.neighbors(v):
            if phi(w) is not None:
                assert phi(w) in ball.complex.neighbors(phi(v))
    assert C.translation_length(ball, phi) == 1
    assert C.deck_search(ball, {0: 0}).is_identity()


def test_deck_search_rejects_other_fiber():
    X = complex_of("ladder")
    ball = C.develop_ball(X, 0, 3)
    other = next(v for v in range(ball.n) if ball.proj(v) != ball.proj(0))
    with pytest.raises(DeckError):
        C.deck_search(ball, {0: other})


def test_diagonal_translation_length(torus):
    ball = C.develop_ball(torus, 0, 6)
    target = ball.walk(0, [(0, 1), (1, 1)])
    phi = C.deck_search(ball, {0: target})
    D = bfs_distances(ball.n, ball.complex.edges)
    brute = min(D[v, phi(v)] for v in ball.interior() if phi(v) is not None)
    assert C.translation_length(ball, phi) == brute == 2
    with pytest.raises(Exception):
        C.translation_length(ball, C.deck_search(ball, {0: 0}))


def test_circle_translation_length():
    X = complex_of("circle")
    ball = C.develop_ball(X, 0, 6)
    phi = C.deck_search(ball, {0: ball.walk(0, [(0, 1)])})
    assert C.translation_length(ball, phi) == 1


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(["torus", "ladder", "comb", "klein"]), st.integers(1, 4), st.data())
def test_developed_balls_are_cat0_and_project(name, R, data):
    X = complex_of(name)
    b = data.draw(st.integers(0, X.n - 1))
    ball = C.develop_ball(X, b, R)
    assert C.is_cat0(ball.complex).ok
    assert np.all(np.asarray(ball.layer) <= R)
    for k, (u, v) in enumerate(ball.complex.edges):
        e, sign = ball.projection.edge_map[k]
        ends = X.edges[e] if sign > 0 else X.edges[e][::-1]
        assert (ball.proj(u), ball.proj(v)) == ends
