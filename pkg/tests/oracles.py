"""Independent reference computations used by the tests."""
from __future__ import annotations

import itertools
from collections import deque

import numpy as np


def bfs_distances(n, edges):
    """All-pairs graph distances by plain breadth-first search."""
    adj = [[] for _ in range(n)]
    for u, v in edges:
        if u != v:
            adj[u].append(v)
            adj[v].append(u)
    out = np.full((n, n), -1, dtype=np.int64)
    for s in range(n):
        out[s, s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if out[s, w] < 0:
                    out[s, w] = out[s, u] + 1
                    queue.append(w)
    return out


def interval_closure_hull(D, S):
    """Smallest set containing S and closed under geodesic intervals."""
    cur = set(S)
    while True:
        grown = set(cur)
        for a, b in itertools.combinations(sorted(cur), 2):
            grown |= {int(x) for x in np.nonzero(D[a] + D[b] == D[a, b])[0]}
        if grown == cur:
            return frozenset(cur)
        cur = grown


def brute_nearest(D, x, Y):
    best = min(D[x, y] for y in Y)
    hits = [y for y in Y if D[x, y] == best]
    assert len(hits) == 1
    return hits[0]


def brute_median(D, p, q, r):
    hits = [m for m in range(len(D)) if D[p, m] + D[m, q] == D[p, q] and D[q, m] + D[m, r] == D[q, r]
            and D[p, m] + D[m, r] == D[p, r]]
    assert len(hits) == 1
    return hits[0]


def graph_of_graphs_orbit(perms, twist, start, letters=("a", "b")):
    """Orbit of a state tuple under the free group acting on chained covers.

    ``perms[g]`` is the sheet permutation of generator ``g`` in the cover,
    ``twist[(g, sheet)]`` the signed letter that the cover edge ``g sheet``
    is sent to by the next attaching map.  A state lists one sheet per cover
    along a straight path; reading a letter moves the first sheet and feeds
    the image letter to the next cover, and so on.  The stabilizer of the
    start state is the path stabilizer, so the orbit size is its index.
    """
    inv = {g: tuple(perms[g].index(s) for s in range(len(perms[g]))) for g in letters}

    def move(state, g, sign):
        out = []
        for s in state:
            if sign > 0:
                nxt, edge = perms[g][s], (g, s)
            else:
                nxt = inv[g][s]
                edge = (g, nxt)
            out.append(nxt)
            g, esign = twist[edge]
            sign *= esign
        return tuple(out)

    seen = {tuple(start)}
    queue = deque(seen)
    while queue:
        st = queue.popleft()
        for g in letters:
            for sign in (1, -1):
                nxt = move(st, g, sign)
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
    return seen


def window_pool():
    """Developed balls of small complexes, as CAT(0) windows with basepoints and radii."""
    from mfcube import cubecore, fileio, fixtures

    out = []
    for name, params, radii in (("torus", (), (2, 3, 4)), ("ladder", (), (3, 5)), ("comb", (1,), (3, 5)),
                                ("klein", (), (3,)), ("torus_grid", (3,), (2,))):
        X = fileio.read_complex(fixtures.generate_fixture(name, *params))
        for b in range(min(X.n, 2)):
            for R in radii:
                ball = cubecore.develop_ball(X, b, R)
                assert cubecore.is_cat0(ball.complex).ok
                out.append(ball.complex)
    return out


def random_convex(rng, X, max_seeds=3):
    from mfcube import cubecore

    k = int(rng.integers(1, max_seeds + 1))
    seeds = [int(v) for v in rng.choice(X.n, size=min(k, X.n), replace=False)]
    return cubecore.hull(X, seeds).members
