"""Gate projections onto convex sets, pitchforks and bridges."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .cubecore import (
    VertexSet,
    _require_cat0,
    as_complex,
    compute_hyperplanes,
    hull,
    is_convex,
)
from .errors import NotConvexError, PreconditionError


@dataclass(frozen=True)
class GateResult:
    source: int
    target: VertexSet
    image: int


@dataclass(frozen=True)
class BridgeDecomposition:
    a_side: VertexSet  # A pitchfork B
    b_side: VertexSet  # B pitchfork A
    connector: VertexSet
    connector_pair: tuple
    product_witness: tuple  # (vertex, connector coordinate, a_side coordinate) rows
    isometry: tuple  # (a_side vertex, b_side vertex) rows


def convex_set(X, S) -> VertexSet:
    """Validate convexity unless the set already carries the mark."""
    X = as_complex(X)
    _require_cat0(X)
    if isinstance(S, VertexSet) and S.convexity == "convex":
        return S
    members = frozenset(X.check_vertex(v) for v in (S.members if isinstance(S, VertexSet) else S))
    if not members:
        raise PreconditionError("empty vertex set")
    if not is_convex(X, members):
        raise NotConvexError("vertex set is not convex")
    return VertexSet(members, "convex")


def gate_map(X, Y) -> np.ndarray:
    """Gate of every vertex onto the convex set Y.

    Multi-source breadth-first search from Y: stepping one edge closer to Y
    crosses a hyperplane separating the vertex from Y, so both ends share a
    gate and labels can be copied along search parents.
    """
    X = as_complex(X)
    Y = convex_set(X, Y)
    gate = np.full(X.n, -1, dtype=np.int64)
    queue = deque()
    for y in sorted(Y.members):
        gate[y] = y
        queue.append(y)
    adj = X.adjacency()
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if gate[w] < 0:
                gate[w] = gate[u]
                queue.append(w)
    return gate


def nearest_brute_force(X, x, Y) -> int:
    """Unique nearest vertex of Y by scanning a distance row."""
    X = as_complex(X)
    row = X.distances_from(x)
    members = sorted(Y.members if isinstance(Y, VertexSet) else Y)
    dists = row[members]
    best = dists.min()
    hits = [m for m, d in zip(members, dists) if d == best]
    if len(hits) != 1:
        raise NotConvexError(f"nearest point of {x} is not unique")
    return hits[0]


def gate_vertex(X, x, Y, check: bool = False) -> GateResult:
    X = as_complex(X)
    Y = convex_set(X, Y)
    x = X.check_vertex(x)
    image = int(gate_map(X, Y)[x])
    if check and image != nearest_brute_force(X, x, Y):
        raise AssertionError("gate disagrees with brute-force nearest point")
    return GateResult(x, Y, image)


def pitchfork(X, A, B) -> VertexSet:
    """A pitchfork B: the gate image of B in A."""
    X = as_complex(X)
    A = convex_set(X, A)
    B = convex_set(X, B)
    gates = gate_map(X, A)
    return VertexSet(frozenset(int(gates[b]) for b in B.members), "convex")


def pitchfork_chain(X, sets) -> VertexSet:
    sets = list(sets)
    if not sets:
        raise PreconditionError("empty chain")
    acc = convex_set(X, sets[-1])
    for S in reversed(sets[:-1]):
        acc = pitchfork(X, S, acc)
    return acc


def crosses(X, H, S) -> bool:
    members = S.members if isinstance(S, VertexSet) else S
    inside = [v in H.plus for v in members]
    return any(inside) and not all(inside)


def separates(X, H, S, T) -> bool:
    s_sides = {v in H.plus for v in (S.members if isinstance(S, VertexSet) else S)}
    t_sides = {v in H.plus for v in (T.members if isinstance(T, VertexSet) else T)}
    return len(s_sides) == 1 and len(t_sides) == 1 and s_sides != t_sides


def bridge(X, A, B) -> BridgeDecomposition:
    """Bridge between A and B with a checked product structure."""
    X = as_complex(X)
    A = convex_set(X, A)
    B = convex_set(X, B)
    ab = pitchfork(X, A, B)
    ba = pitchfork(X, B, A)
    gate_b = gate_map(X, B)
    a = min(ab.members)
    b = int(gate_b[a])
    connector = hull(X, [a, b])
    whole = hull(X, ab.members | ba.members)
    gate_c = gate_map(X, connector)
    gate_ab = gate_map(X, ab)
    rows = tuple((x, int(gate_c[x]), int(gate_ab[x])) for x in sorted(whole.members))
    coords = {x: (c, s) for x, c, s in rows}
    if len(set(coords.values())) != len(rows) or len(rows) != len(connector) * len(ab):
        raise PreconditionError("bridge product witness is not a bijection")
    adj = X.adjacency()
    for x in whole.members:
        for y in adj[x]:
            if y not in whole.members:
                continue
            (c1, s1), (c2, s2) = coords[x], coords[y]
            if not ((c1 == c2 and s2 in adj[s1]) or (s1 == s2 and c2 in adj[c1])):
                raise PreconditionError("bridge product witness does not preserve edges")
    pairs = tuple((s, int(gate_b[s])) for s in sorted(ab.members))
    rows_d = X.distance_rows([p for p, _ in pairs])
    rows_e = X.distance_rows([q for _, q in pairs])
    for i in range(len(pairs)):
        for j in range(len(pairs)):
            if rows_d[i][pairs[j][0]] != rows_e[i][pairs[j][1]]:
                raise PreconditionError("pitchfork sides are not isometric")
    return BridgeDecomposition(ab, ba, connector, (a, b), rows, pairs)


def bridge_hyperplane_laws(X, A, B) -> dict:
    """Compare the two crossing laws as sets of hyperplane ids."""
    X = as_complex(X)
    A = convex_set(X, A)
    B = convex_set(X, B)
    ab = pitchfork(X, A, B)
    ba = pitchfork(X, B, A)
    hs = compute_hyperplanes(X)
    cross_ab = {H.id for H in hs if crosses(X, H, ab)}
    cross_both = {H.id for H in hs if crosses(X, H, A) and crosses(X, H, B)}
    sep_gates = {H.id for H in hs if separates(X, H, ab, ba)}
    sep_sets = {H.id for H in hs if separates(X, H, A, B)}
    return {"crossing": (cross_ab, cross_both), "separating": (sep_gates, sep_sets)}
