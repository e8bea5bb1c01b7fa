import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import vid
from mfcube import cubecore as C
from mfcube import gates as G
from mfcube.errors import NotConvexError, PreconditionError
from oracles import bfs_distances, brute_nearest, random_convex, window_pool

WINDOWS = window_pool()
DISTS = [bfs_distances(X.n, X.edges) for X in WINDOWS]


def col(X, i):
    return [vid(X, (i, j)) for j in range(3)]


def row(X, j):
    return [vid(X, (i, j)) for i in range(3)]


def labels(X, S):
    return {X.labels[v] for v in (S.members if hasattr(S, "members") else S)}


def test_gate_examples(grid22):
    assert grid22.labels[G.gate_vertex(grid22, vid(grid22, (2, 1)), col(grid22, 0)).image] == (0, 1)
    assert G.gate_vertex(grid22, 3, [3]).image == 3
    assert G.gate_vertex(grid22, 5, range(9)).image == 5


def test_gate_rejects_bad_targets(grid22):
    with pytest.raises(NotConvexError):
        G.gate_vertex(grid22, 0, [vid(grid22, (0, 0)), vid(grid22, (1, 1))])
    with pytest.raises(PreconditionError):
        G.gate_vertex(grid22, 0, [])


def test_pitchfork_examples(grid22):
    A, B = col(grid22, 0), col(grid22, 2)
    assert labels(grid22, G.pitchfork(grid22, A, B)) == labels(grid22, A)
    assert labels(grid22, G.pitchfork(grid22, A, A)) == labels(grid22, A)
    assert labels(grid22, G.pitchfork(grid22, row(grid22, 0), B)) == {(2, 0)}


def test_pitchfork_chain_examples(grid22):
    A = col(grid22, 0)
    assert labels(grid22, G.pitchfork_chain(grid22, [A])) == labels(grid22, A)
    chain = [col(grid22, 0), col(grid22, 2), row(grid22, 0)]
    assert labels(grid22, G.pitchfork_chain(grid22, chain)) == {(0, 0)}
    assert labels(grid22, G.pitchfork_chain(grid22, [A, A, A])) == labels(grid22, A)


def test_bridge_parallel_columns(grid22):
    br = G.bridge(grid22, col(grid22, 0), col(grid22, 2))
    assert labels(grid22, br.a_side) == labels(grid22, col(grid22, 0))
    assert len(br.connector) == 3 and len(br.product_witness) == 9
    assert labels(grid22, br.connector) == {(0, 0), (1, 0), (2, 0)}


def test_bridge_point(grid22):
    br = G.bridge(grid22, col(grid22, 0), [vid(grid22, (2, 0))])
    assert labels(grid22, br.a_side) == {(0, 0)}
    assert labels(grid22, br.connector) == {(0, 0), (1, 0), (2, 0)}


def test_bridge_overlapping_sets(grid22):
    br = G.bridge(grid22, col(grid22, 0), row(grid22, 0))
    assert len(br.connector) == 1


@settings(max_examples=60, deadline=None)
@given(st.integers(0, len(WINDOWS) - 1), st.integers(0, 2**32 - 1))
def test_gate_is_nearest(k, seed):
    rng = np.random.default_rng(seed)
    X, D = WINDOWS[k], DISTS[k]
    Y = random_convex(rng, X)
    gates = G.gate_map(X, Y)
    for x in rng.choice(X.n, size=min(6, X.n), replace=False):
        assert gates[x] == brute_nearest(D, int(x), Y)
    for y in Y:
        assert gates[y] == y


@settings(max_examples=60, deadline=None)
@given(st.integers(0, len(WINDOWS) - 1), st.integers(0, 2**32 - 1))
def test_pitchfork_laws(k, seed):
    rng = np.random.default_rng(seed)
    X = WINDOWS[k]
    A, B, Cc = (random_convex(rng, X) for _ in range(3))
    ab = G.pitchfork(X, A, B).members
    assert ab <= A and C.is_convex(X, ab)
    assert ab == {int(G.gate_map(X, A)[b]) for b in B}
    left = G.pitchfork(X, G.pitchfork(X, A, B), Cc).members
    right = G.pitchfork(X, A, G.pitchfork(X, B, Cc)).members
    assert left == right
    assert ab & G.pitchfork(X, A, Cc).members <= right


@settings(max_examples=40, deadline=None)
@given(st.integers(0, len(WINDOWS) - 1), st.integers(0, 2**32 - 1))
def test_bridge_laws(k, seed):
    rng = np.random.default_rng(seed)
    X, D = WINDOWS[k], DISTS[k]
    A, B = random_convex(rng, X), random_convex(rng, X)
    laws = G.bridge_hyperplane_laws(X, A, B)
    assert laws["crossing"][0] == laws["crossing"][1]
    assert laws["separating"][0] == laws["separating"][1]
    br = G.bridge(X, A, B)
    for (p, q), (r, s) in zip(br.isometry, br.isometry[1:]):
        assert D[p, r] == D[q, s]
    assert len(br.product_witness) == len(br.connector) * len(br.a_side)
    gap = C.distance(X, *br.connector_pair)
    assert gap == min(D[a, b] for a in A for b in B)
