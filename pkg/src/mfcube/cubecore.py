"""Finite cube complexes: cells, links, hyperplanes, median metric, development.

Vertices are stored as integers ``0..n-1`` in sorted label order; the user
facing labels live in ``CubeComplex.labels``.  An edge ``(u, v)`` always has
``u <= v``.  A *dart* ``(edge, sign)`` is an oriented edge: sign ``+1`` runs
from the stored first endpoint to the second, ``-1`` runs backwards.  Loops
contribute both darts to the same vertex.

Squares keep corners ``(v00, v10, v01, v11)`` and side darts
``(bottom, left, right, top)`` oriented ``v00->v10``, ``v00->v01``,
``v10->v11`` and ``v01->v11``.  Corners alone cannot tell two loops apart,
which is why the sides are stored explicitly.
"""
from __future__ import annotations

import itertools
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import (
    CellBudgetExceeded,
    DanglingReference,
    DeckError,
    DimensionError,
    DuplicateCell,
    InputError,
    MalformedMap,
    NotCat0Error,
    PreconditionError,
    VertexError,
)

Dart = tuple  # (edge index, +1 | -1)

RAW, NPC_CHECKED, CAT0_CHECKED = "raw", "npc_checked", "cat0_checked"
DEFAULT_CELL_BUDGET = 2_000_000


def rev(dart: Dart) -> Dart:
    return (dart[0], -dart[1])


def label_key(label):
    """Total order on JSON-ish vertex labels (ints < strings < tuples)."""
    if isinstance(label, bool):
        return (0, int(label))
    if isinstance(label, int):
        return (0, label)
    if isinstance(label, str):
        return (1, label)
    if isinstance(label, tuple):
        return (2, tuple(label_key(x) for x in label))
    raise InputError(f"unsupported vertex id {label!r}")


def cell_budget() -> int:
    raw = os.environ.get("MF_CELL_BUDGET")
    if not raw:
        return DEFAULT_CELL_BUDGET
    try:
        value = int(raw)
    except ValueError as exc:
        raise InputError(f"MF_CELL_BUDGET must be an integer, got {raw!r}") from exc
    if value <= 0:
        raise InputError("MF_CELL_BUDGET must be positive")
    return value


# ---------------------------------------------------------------------------
# square and cube symmetries


def _transpose(corners, sides):
    v00, v10, v01, v11 = corners
    b, l, r, t = sides
    return (v00, v01, v10, v11), (l, b, t, r)


def _flip(corners, sides):
    v00, v10, v01, v11 = corners
    b, l, r, t = sides
    return (v10, v00, v11, v01), (rev(b), r, l, rev(t))


def square_variants(corners, sides):
    """All eight dihedral presentations of one square."""
    seen = {(tuple(corners), tuple(sides))}
    queue = [(tuple(corners), tuple(sides))]
    while queue:
        cur = queue.pop()
        for op in (_transpose, _flip):
            nxt = op(*cur)
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return sorted(seen)


def _cube_symmetries():
    perms = []
    for axes in itertools.permutations(range(3)):
        for flips in itertools.product((0, 1), repeat=3):
            image = []
            for idx in range(8):
                bits = [(idx >> k) & 1 for k in range(3)]
                new_bits = [bits[axes[k]] ^ flips[k] for k in range(3)]
                image.append(new_bits[0] | (new_bits[1] << 1) | (new_bits[2] << 2))
            perms.append(tuple(image))
    return perms


CUBE_SYMMETRIES = _cube_symmetries()
# faces of a 3-cube in bit order, each listed as (v00, v10, v01, v11)
CUBE_FACES = [
    (0, 1, 2, 3), (4, 5, 6, 7),
    (0, 1, 4, 5), (2, 3, 6, 7),
    (0, 2, 4, 6), (1, 3, 5, 7),
]


@dataclass(frozen=True)
class Square:
    corners: tuple
    sides: tuple


@dataclass(frozen=True)
class CornerRecord:
    """A square seen from one corner: darts ``alpha`` and ``beta`` leave the
    corner, ``beta_far`` leaves the end of ``alpha`` towards the opposite
    corner and ``alpha_far`` leaves the end of ``beta`` towards it."""

    alpha: Dart
    beta: Dart
    beta_far: Dart
    alpha_far: Dart
    square: int


@dataclass(frozen=True)
class Hyperplane:
    id: int
    dual_edges: frozenset
    carrier: frozenset
    sided: bool
    halfspaces: Optional[tuple] = None  # (plus, minus) vertex sets

    @property
    def plus(self):
        return self.halfspaces[0] if self.halfspaces else None

    @property
    def minus(self):
        return self.halfspaces[1] if self.halfspaces else None


@dataclass(frozen=True)
class VertexSet:
    members: frozenset
    convexity: str = "unknown"  # unknown | convex | not_convex

    def __contains__(self, v):
        return v in self.members

    def __iter__(self):
        return iter(sorted(self.members))

    def __len__(self):
        return len(self.members)


@dataclass(frozen=True)
class Geodesic:
    vertices: tuple
    hyperplanes: tuple

    def __len__(self):
        return max(0, len(self.vertices) - 1)


@dataclass
class Report:
    ok: bool
    witness: object = None
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return self.ok


class CubeComplex:
    """Finite combinatorial cube complex of dimension at most ``dim_cap``."""

    def __init__(self, name, labels, edges, squares=(), cubes3=(), edge_ids=None,
                 dim_cap=3, validation=RAW):
        self.name = name
        self.labels = tuple(labels)
        self.edges = tuple(tuple(e) for e in edges)
        self.edge_ids = tuple(edge_ids) if edge_ids is not None else tuple(
            str(i) for i in range(len(self.edges)))
        self.squares = tuple(squares)
        self.cubes3 = tuple(tuple(c) for c in cubes3)
        self.dim_cap = dim_cap
        self.validation = validation
        self.index = {lab: i for i, lab in enumerate(self.labels)}
        n = len(self.labels)
        self._step = [dict() for _ in range(n)]
        for i, (u, v) in enumerate(self.edges):
            self._step[u][(i, 1)] = v
            self._step[v][(i, -1)] = u
        self._darts = [tuple(sorted(s)) for s in self._step]
        self._records = None
        self._records_by_beta = None
        self._cube_corners = None
        self._adj = None
        self._csr = None
        self._rows = {}
        self._matrix = None
        self._hyperplanes = None
        self._halfspace_cache = None
        self._signature = None
        self.edge_flips = (False,) * len(self.edges)  # stored orientation reverses the file's

    # -- basic structure ---------------------------------------------------
    @property
    def n(self):
        return len(self.labels)

    def vertex(self, label):
        """Internal index of the vertex with this label."""
        key = tuple(label) if isinstance(label, list) else label
        if key in self.index:
            return self.index[key]
        raise VertexError(f"vertex {label!r} not in complex {self.name!r}")

    def check_vertex(self, v):
        if isinstance(v, (int, np.integer)) and not isinstance(v, bool) and 0 <= v < self.n:
            return int(v)
        raise VertexError(f"vertex index {v!r} not in complex {self.name!r}")

    def darts_at(self, v):
        return self._darts[v]

    def step(self, v, dart):
        return self._step[v].get(dart)

    def head(self, dart):
        u, v = self.edges[dart[0]]
        return v if dart[1] > 0 else u

    def tail(self, dart):
        u, v = self.edges[dart[0]]
        return u if dart[1] > 0 else v

    def neighbors(self, v):
        return self.adjacency()[v]

    def adjacency(self):
        if self._adj is None:
            self._adj = [tuple(sorted(set(s.values()))) for s in self._step]
        return self._adj

    def cell_count(self):
        return self.n + len(self.edges) + len(self.squares) + len(self.cubes3)

    def has_loops(self):
        return any(u == v for u, v in self.edges)

    def parallel_edges(self):
        seen = {}
        for i, e in enumerate(self.edges):
            if e in seen:
                return seen[e], i
            seen[e] = i
        return None

    def edge_between(self, u, v):
        """The unique dart from u to v, or None."""
        found = [d for d, w in self._step[u].items() if w == v]
        if len(found) != 1:
            return None
        return found[0]

    # -- local structure -----------------------------------------------------
    def corner_records(self, v):
        if self._records is None:
            records = [[] for _ in range(self.n)]
            by_beta = [dict() for _ in range(self.n)]
            for idx, sq in enumerate(self.squares):
                seen = set()
                for corners, sides in square_variants(sq.corners, sq.sides):
                    rec = CornerRecord(sides[0], sides[1], sides[2], sides[3], idx)
                    key = (corners[0], rec.alpha, rec.beta)
                    if key in seen:
                        continue
                    seen.add(key)
                    records[corners[0]].append(rec)
                    by_beta[corners[0]].setdefault(rec.beta, []).append(rec)
            self._records = records
            self._records_by_beta = by_beta
        return self._records[v]

    def records_with_beta(self, v, beta):
        self.corner_records(v)
        return self._records_by_beta[v].get(beta, ())

    def cube_corners(self, v):
        """Triples of darts spanning a 3-cube corner at v."""
        if self._cube_corners is None:
            out = [set() for _ in range(self.n)]
            for cube in self.cubes3:
                for bit in range(8):
                    darts = []
                    for k in range(3):
                        other = bit ^ (1 << k)
                        darts.append(self.edge_between(cube[bit], cube[other]))
                    out[cube[bit]].add(frozenset(darts))
            self._cube_corners = [frozenset(s) for s in out]
        return self._cube_corners[v]

    def link(self, v):
        """(link vertices, link edges with multiplicity, link triangles)."""
        vertices = list(self.darts_at(v))
        edges = []
        for rec in self.corner_records(v):
            if rec.alpha < rec.beta or rec.alpha == rec.beta:
                edges.append((rec.alpha, rec.beta, rec.square))
        return vertices, edges, sorted(tuple(sorted(t)) for t in self.cube_corners(v))

    # -- metric --------------------------------------------------------------
    def csr(self):
        if self._csr is None:
            rows, cols = [], []
            for u, nbrs in enumerate(self.adjacency()):
                for w in nbrs:
                    rows.append(u)
                    cols.append(w)
            data = np.ones(len(rows), dtype=np.int8)
            self._csr = csr_matrix((data, (rows, cols)), shape=(self.n, self.n))
        return self._csr

    def distances_from(self, v):
        """Breadth-first distances from v (``-1`` when unreachable)."""
        row = self._rows.get(v)
        if row is None:
            if self._matrix is not None:
                row = self._matrix[v]
            else:
                raw = shortest_path(self.csr(), method="D", unweighted=True, indices=[v])[0]
                row = np.where(np.isinf(raw), -1, raw).astype(np.int64)
            self._rows[v] = row
        return row

    def distance_rows(self, sources):
        sources = [int(s) for s in sources]
        missing = [s for s in sources if s not in self._rows]
        if missing and self._matrix is None:
            raw = shortest_path(self.csr(), method="D", unweighted=True, indices=missing)
            raw = np.where(np.isinf(raw), -1, raw).astype(np.int64)
            for s, row in zip(missing, raw):
                self._rows[s] = row
        return np.array([self.distances_from(s) for s in sources])

    def distance_matrix(self):
        if self._matrix is None:
            raw = shortest_path(self.csr(), method="D", unweighted=True)
            self._matrix = np.where(np.isinf(raw), -1, raw).astype(np.int64)
        return self._matrix

    def __repr__(self):
        return (f"CubeComplex({self.name!r}, V={self.n}, E={len(self.edges)}, "
                f"S={len(self.squares)}, C={len(self.cubes3)}, {self.validation})")


# ---------------------------------------------------------------------------
# construction


def _resolve_side(label_index, edge_index, edges, a, b, entry, where):
    """Turn a side description into a dart from a to b."""
    if entry is None:
        candidates = []
        for i, (u, v) in enumerate(edges):
            if (u, v) == (a, b):
                candidates.append((i, 1))
            elif (u, v) == (b, a):
                candidates.append((i, -1))
        candidates = sorted(set(candidates))
        if not candidates:
            raise DanglingReference(f"{where}: no edge between corners")
        if len(candidates) != 1 or a == b:
            raise InputError(f"{where}: side between corners is ambiguous; give explicit sides")
        return candidates[0]
    if isinstance(entry, (list, tuple)) and len(entry) == 2 and entry[1] in (1, -1):
        key, sign = entry
    else:
        key, sign = entry, None
    key = str(key)
    if key not in edge_index:
        raise DanglingReference(f"{where}: undeclared edge {key!r}")
    i = edge_index[key]
    u, v = edges[i]
    if sign is None:
        if u == v:
            sign = 1
        elif (u, v) == (a, b):
            sign = 1
        elif (u, v) == (b, a):
            sign = -1
        else:
            raise DanglingReference(f"{where}: edge {key!r} does not join the corners")
    dart = (i, sign)
    tail, head = (u, v) if sign > 0 else (v, u)
    if (tail, head) != (a, b):
        raise DanglingReference(f"{where}: edge {key!r} does not join the corners")
    return dart


def normalize_square(corners, sides):
    corners_best, sides_best = min(square_variants(corners, sides))
    return Square(tuple(corners_best), tuple(sides_best))


def build_complex(spec: Mapping, dim_cap: int = 3) -> CubeComplex:
    """Build a raw complex from a parsed complex file."""
    if not isinstance(spec, Mapping):
        raise InputError("complex spec must be a JSON object")
    name = spec.get("name", "complex")
    declared_cap = spec.get("dim_cap", dim_cap)
    if not isinstance(declared_cap, int) or declared_cap > 3:
        raise DimensionError(f"dimension cap {declared_cap!r} exceeds the supported maximum 3")
    dim_cap = declared_cap
    for key, value in spec.items():
        if key.startswith("cubes") and key != "cubes3" and value:
            raise DimensionError(f"cells of type {key!r} exceed dim_cap {dim_cap}")
    raw_vertices = spec.get("vertices")
    if raw_vertices is None:
        raise InputError("missing 'vertices'")
    vertices = [tuple(v) if isinstance(v, list) else v for v in raw_vertices]
    for v in vertices:
        label_key(v)
    if len(set(vertices)) != len(vertices):
        raise DuplicateCell("duplicate vertex id")
    labels = sorted(vertices, key=label_key)
    index = {lab: i for i, lab in enumerate(labels)}

    def vid(x, where):
        x = tuple(x) if isinstance(x, list) else x
        if x not in index:
            raise DanglingReference(f"{where}: undeclared vertex {x!r}")
        return index[x]

    edges, edge_ids, flips = [], [], []
    for pos, entry in enumerate(spec.get("edges", [])):
        if isinstance(entry, Mapping):
            ends, eid = entry.get("ends"), entry.get("id", str(pos))
        elif isinstance(entry, (list, tuple)) and len(entry) == 3:
            ends, eid = entry[:2], entry[2]
        else:
            ends, eid = entry, str(pos)
        if not isinstance(ends, (list, tuple)) or len(ends) != 2:
            raise InputError(f"edge {pos}: expected two endpoints")
        u, v = vid(ends[0], f"edge {eid}"), vid(ends[1], f"edge {eid}")
        flips.append(u > v)
        edges.append((min(u, v), max(u, v)))
        edge_ids.append(str(eid))
    if len(set(edge_ids)) != len(edge_ids):
        raise DuplicateCell("duplicate edge id")
    edge_index = {e: i for i, e in enumerate(edge_ids)}

    squares, seen = [], set()
    for pos, entry in enumerate(spec.get("squares", [])):
        where = f"square {pos}"
        if isinstance(entry, Mapping):
            corners_raw, sides_raw = entry.get("corners"), entry.get("sides")
        else:
            corners_raw, sides_raw = entry, None
        if not isinstance(corners_raw, (list, tuple)) or len(corners_raw) != 4:
            raise InputError(f"{where}: expected four corners")
        corners = tuple(vid(c, where) for c in corners_raw)
        v00, v10, v01, v11 = corners
        pairs = [(v00, v10), (v00, v01), (v10, v11), (v01, v11)]
        if sides_raw is not None and (not isinstance(sides_raw, (list, tuple)) or len(sides_raw) != 4):
            raise InputError(f"{where}: expected four sides")
        sides = []
        for k, (a, b) in enumerate(pairs):
            entry_k = None if sides_raw is None else sides_raw[k]
            if entry_k is not None and flips and isinstance(entry_k, (list, tuple)) and len(entry_k) == 2:
                key = str(entry_k[0])
                if key in edge_index and flips[edge_index[key]]:
                    entry_k = [entry_k[0], -entry_k[1]]
            sides.append(_resolve_side(index, edge_index, edges, a, b, entry_k, where))
        if len({s[0] for s in sides}) < 2:
            raise InputError(f"{where}: degenerate square")
        sq = normalize_square(corners, tuple(sides))
        key = (sq.corners, sq.sides)
        if key in seen:
            raise DuplicateCell(f"{where}: duplicate square")
        seen.add(key)
        squares.append(sq)

    cubes = []
    raw_cubes = spec.get("cubes3") or []
    if raw_cubes and dim_cap < 3:
        raise DimensionError("3-cubes given but dim_cap < 3")
    square_keys = {(s.corners, s.sides) for s in squares}
    cube_seen = set()
    tmp = CubeComplex(name, labels, edges, squares, (), edge_ids)
    for pos, entry in enumerate(raw_cubes):
        where = f"cube {pos}"
        if not isinstance(entry, (list, tuple)) or len(entry) != 8:
            raise InputError(f"{where}: expected eight corners")
        corners = tuple(vid(c, where) for c in entry)
        for face in CUBE_FACES:
            fc = tuple(corners[i] for i in face)
            pairs = [(fc[0], fc[1]), (fc[0], fc[2]), (fc[1], fc[3]), (fc[2], fc[3])]
            darts = [tmp.edge_between(a, b) for a, b in pairs]
            if any(d is None for d in darts):
                raise DanglingReference(f"{where}: face edges missing or ambiguous")
            sq = normalize_square(fc, tuple(darts))
            if (sq.corners, sq.sides) not in square_keys:
                raise DanglingReference(f"{where}: face {fc} is not a square of the complex")
        key = min(tuple(corners[p[i]] for i in range(8)) for p in CUBE_SYMMETRIES)
        if key in cube_seen:
            raise DuplicateCell(f"{where}: duplicate 3-cube")
        cube_seen.add(key)
        cubes.append(key)
    X = CubeComplex(name, labels, edges, squares, cubes, edge_ids, dim_cap=dim_cap)
    X.edge_flips = tuple(flips)
    return X


def complex_to_spec(X: CubeComplex) -> dict:
    """Inverse of ``build_complex`` (always writes explicit sides)."""
    def lab(v):
        x = X.labels[v]
        return list(x) if isinstance(x, tuple) else x

    out = {
        "name": X.name,
        "vertices": [lab(v) for v in range(X.n)],
        "edges": [{"id": X.edge_ids[i], "ends": [lab(v), lab(u)] if X.edge_flips[i] else [lab(u), lab(v)]}
                  for i, (u, v) in enumerate(X.edges)],
        "squares": [
            {"corners": [lab(c) for c in sq.corners],
             "sides": [[X.edge_ids[d[0]], -d[1] if X.edge_flips[d[0]] else d[1]] for d in sq.sides]}
            for sq in X.squares
        ],
    }
    if X.cubes3:
        out["cubes3"] = [[lab(c) for c in cube] for cube in X.cubes3]
    return out


def induced_subcomplex(X: CubeComplex, vertices: Iterable[int], name=None) -> CubeComplex:
    """Full subcomplex on a vertex set; labels are the ambient indices."""
    keep = sorted(set(int(v) for v in vertices))
    pos = {v: i for i, v in enumerate(keep)}
    edge_map = {}
    edges, edge_ids = [], []
    for i, (u, v) in enumerate(X.edges):
        if u in pos and v in pos:
            edge_map[i] = len(edges)
            edges.append((pos[u], pos[v]))
            edge_ids.append(str(i))
    squares = []
    for sq in X.squares:
        if all(c in pos for c in sq.corners):
            squares.append(Square(tuple(pos[c] for c in sq.corners),
                                  tuple((edge_map[d[0]], d[1]) for d in sq.sides)))
    cubes = [tuple(pos[c] for c in cube) for cube in X.cubes3 if all(c in pos for c in cube)]
    sub = CubeComplex(name or f"{X.name}|sub", keep, edges, squares, cubes, edge_ids,
                      dim_cap=X.dim_cap, validation=RAW)
    return sub


# ---------------------------------------------------------------------------
# validation


def validate_npc(X: CubeComplex) -> Report:
    """Flag-link test at every vertex.  Marks the complex npc_checked on success."""
    offenders = []
    for v in range(X.n):
        darts = set(X.darts_at(v))
        pairs = {}
        problems = []
        for rec in X.corner_records(v):
            if rec.alpha == rec.beta:
                problems.append({"kind": "degenerate_corner", "darts": [list(rec.alpha)]})
                continue
            key = frozenset((rec.alpha, rec.beta))
            pairs.setdefault(key, set()).add(rec.square)
        for key, sqs in sorted(pairs.items(), key=lambda kv: sorted(kv[0])):
            if len(sqs) > 1:
                problems.append({"kind": "double_link_edge", "darts": sorted(list(d) for d in key),
                                 "squares": sorted(sqs)})
        adj = {d: set() for d in darts}
        for key in pairs:
            a, b = tuple(key)
            adj[a].add(b)
            adj[b].add(a)
        triangles = X.cube_corners(v)
        ordered = sorted(darts)
        for a, b, c in itertools.combinations(ordered, 3):
            if b in adj[a] and c in adj[a] and c in adj[b]:
                if frozenset((a, b, c)) not in triangles:
                    problems.append({"kind": "empty_triangle", "darts": [list(a), list(b), list(c)]})
                else:
                    for d in ordered:
                        if d > c and d in adj[a] and d in adj[b] and d in adj[c]:
                            problems.append({"kind": "clique_above_dim_cap",
                                             "darts": [list(a), list(b), list(c), list(d)]})
        for tri in triangles:
            a, b, c = sorted(tri)
            if not (b in adj[a] and c in adj[a] and c in adj[b]):
                problems.append({"kind": "cube_without_faces", "darts": [list(a), list(b), list(c)]})
        if problems:
            offenders.append({"vertex": v, "label": X.labels[v], "problems": problems})
    ok = not offenders
    if ok and X.validation == RAW:
        X.validation = NPC_CHECKED
    return Report(ok, offenders[0] if offenders else None, {"offenders": offenders})


def _require_npc(X):
    if X.validation == RAW:
        rep = validate_npc(X)
        if not rep.ok:
            raise PreconditionError(f"complex {X.name!r} is not nonpositively curved")


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))
        self.parity = [0] * n

    def find(self, x):
        path = []
        while self.parent[x] != x:
            path.append(x)
            x = self.parent[x]
        root = x
        acc = 0
        for node in reversed(path):
            acc ^= self.parity[node]
            self.parity[node] = acc
            self.parent[node] = root
        return root

    def parity_of(self, x):
        self.find(x)
        return self.parity[x] if self.parent[x] != x else 0

    def union(self, a, b, rel):
        ra, rb = self.find(a), self.find(b)
        pa, pb = self.parity_of(a), self.parity_of(b)
        if ra == rb:
            return (pa ^ pb) == rel
        if ra > rb:
            ra, rb, pa, pb = rb, ra, pb, pa
        self.parent[rb] = ra
        self.parity[rb] = pa ^ pb ^ rel
        return True


@dataclass
class _HyperplaneData:
    hyperplanes: list
    edge_to_h: list
    orientation: list  # parity of each edge relative to its class
    conflicts: dict  # hyperplane id -> square witnessing one-sidedness


def _hyperplane_data(X: CubeComplex) -> _HyperplaneData:
    if X._hyperplanes is not None:
        return X._hyperplanes
    m = len(X.edges)
    uf = _UnionFind(m)
    conflict_squares = []
    for idx, sq in enumerate(X.squares):
        b, l, r, t = sq.sides
        for d1, d2 in ((b, t), (l, r)):
            if not uf.union(d1[0], d2[0], int(d1[1] != d2[1])):
                conflict_squares.append((d1[0], idx))
    roots = {}
    for e in range(m):
        roots.setdefault(uf.find(e), []).append(e)
    classes = sorted(roots.values(), key=min)
    edge_to_h = [0] * m
    for hid, members in enumerate(classes):
        for e in members:
            edge_to_h[e] = hid
    orientation = [uf.parity_of(e) for e in range(m)]
    conflicts = {}
    for e, sq in conflict_squares:
        conflicts.setdefault(edge_to_h[e], sq)
    hyperplanes = []
    for hid, members in enumerate(classes):
        dual = frozenset(members)
        carrier = set()
        for e in members:
            carrier.update(X.edges[e])
        for sq in X.squares:
            if any(d[0] in dual for d in sq.sides):
                carrier.update(sq.corners)
        for cube in X.cubes3:
            cube_edges = set()
            for bit in range(8):
                for k in range(3):
                    other = bit ^ (1 << k)
                    d = X.edge_between(cube[bit], cube[other])
                    if d is not None:
                        cube_edges.add(d[0])
            if cube_edges & dual:
                carrier.update(cube)
        hyperplanes.append(Hyperplane(hid, dual, frozenset(carrier), hid not in conflicts))
    X._hyperplanes = _HyperplaneData(hyperplanes, edge_to_h, orientation, conflicts)
    return X._hyperplanes


def compute_hyperplanes(X: CubeComplex) -> list:
    """Dual-edge classes.  Halfspaces are attached once the complex is CAT(0)-checked."""
    _require_npc(X)
    data = _hyperplane_data(X)
    if X.validation == CAT0_CHECKED:
        return _with_halfspaces(X)
    return list(data.hyperplanes)


def _with_halfspaces(X):
    if X._halfspace_cache is None:
        data = _hyperplane_data(X)
        out = []
        for H in data.hyperplanes:
            e = min(H.dual_edges)
            u, v = X.edges[e]
            if data.orientation[e]:
                u, v = v, u
            du, dv = X.distance_rows([u, v])
            plus = frozenset(np.nonzero(dv < du)[0].tolist())
            minus = frozenset(np.nonzero(du < dv)[0].tolist())
            out.append(Hyperplane(H.id, H.dual_edges, H.carrier, H.sided, (plus, minus)))
        X._halfspace_cache = out
    return list(X._halfspace_cache)


def hyperplane_of_edge(X: CubeComplex, edge: int) -> int:
    return _hyperplane_data(X).edge_to_h[edge]


def hyperplane_of_pair(X: CubeComplex, u: int, v: int) -> int:
    dart = X.edge_between(u, v)
    if dart is None:
        raise VertexError(f"{u} and {v} are not joined by a unique edge")
    return hyperplane_of_edge(X, dart[0])


def hyperplanes_cross(X: CubeComplex, h1: int, h2: int) -> bool:
    data = _hyperplane_data(X)
    for sq in X.squares:
        b, l, r, t = sq.sides
        if {data.edge_to_h[b[0]], data.edge_to_h[l[0]]} == {h1, h2} and h1 != h2:
            return True
    return False


def crossing_graph(X: CubeComplex) -> dict:
    data = _hyperplane_data(X)
    out = {H.id: set() for H in data.hyperplanes}
    for sq in X.squares:
        a, b = data.edge_to_h[sq.sides[0][0]], data.edge_to_h[sq.sides[1][0]]
        if a != b:
            out[a].add(b)
            out[b].add(a)
    return out


def hyperplane_diameter(X: CubeComplex, H: Hyperplane) -> int:
    """Diameter of the dual-edge graph (dual edges adjacent iff they share a square)."""
    members = sorted(H.dual_edges)
    if len(members) <= 1:
        return 0
    adj = {e: set() for e in members}
    for sq in X.squares:
        b, l, r, t = sq.sides
        for d1, d2 in ((b, t), (l, r)):
            if d1[0] in adj and d2[0] in adj and d1[0] != d2[0]:
                adj[d1[0]].add(d2[0])
                adj[d2[0]].add(d1[0])
    best = 0
    for src in members:
        dist = {src: 0}
        queue = deque([src])
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if y not in dist:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        if len(dist) < len(members):
            return -1
        best = max(best, max(dist.values()))
    return best


# ---------------------------------------------------------------------------
# CAT(0) test


def _is_tree(X):
    return len(X.edges) == X.n - 1 and not X.squares


def is_cat0(X: CubeComplex) -> Report:
    """Median 1-skeleton with every cube boundary filled.

    On success the complex is marked cat0_checked and halfspaces become
    available through ``compute_hyperplanes``.
    """
    _require_npc(X)
    for i, (u, v) in enumerate(X.edges):
        if u == v:
            return Report(False, {"kind": "loop_edge", "edge": X.edge_ids[i]})
    par = X.parallel_edges()
    if par is not None:
        return Report(False, {"kind": "parallel_edges", "edges": [X.edge_ids[par[0]], X.edge_ids[par[1]]]})
    if X.n == 0:
        return Report(False, {"kind": "empty"})
    row0 = X.distances_from(0)
    if (row0 < 0).any():
        return Report(False, {"kind": "disconnected", "vertex": int(np.nonzero(row0 < 0)[0][0])})
    if _is_tree(X):
        X.validation = CAT0_CHECKED
        return Report(True, None, {"hyperplanes": len(X.edges)})
    # filled 4-cycles
    square_cycles = {}
    for idx, sq in enumerate(X.squares):
        key = frozenset(sq.corners)
        if len(key) != 4:
            return Report(False, {"kind": "degenerate_square", "square": idx})
        square_cycles.setdefault(key, []).append(idx)
    for key, sqs in square_cycles.items():
        if len(sqs) > 1:
            return Report(False, {"kind": "duplicated_square", "squares": sqs})
    adj = X.adjacency()
    for u in range(X.n):
        for v, w in itertools.combinations(adj[u], 2):
            common = set(adj[v]) & set(adj[w])
            for x in sorted(common):
                if x != u and x > u:
                    if frozenset((u, v, x, w)) not in square_cycles:
                        return Report(False, {"kind": "unfilled_square", "cycle": [u, v, x, w]})
    # filled 3-cubes
    cube_sets = {frozenset(c) for c in X.cubes3}
    for u in range(X.n):
        nbrs = adj[u]
        for a, b, c in itertools.combinations(nbrs, 3):
            faces = []
            for p, q in ((a, b), (a, c), (b, c)):
                far = [x for x in set(adj[p]) & set(adj[q]) if x != u]
                if len(far) != 1:
                    break
                faces.append(far[0])
            else:
                tops = set(adj[faces[0]]) & set(adj[faces[1]]) & set(adj[faces[2]])
                tops.discard(u)
                tops -= {a, b, c}
                for top in tops:
                    verts = frozenset((u, a, b, c, faces[0], faces[1], faces[2], top))
                    if len(verts) == 8 and verts not in cube_sets:
                        return Report(False, {"kind": "unfilled_cube", "vertices": sorted(verts)})
    # each hyperplane separates into exactly two sides
    data = _hyperplane_data(X)
    for H in data.hyperplanes:
        comp = _components_without(X, H.dual_edges)
        sides = {comp[x] for e in H.dual_edges for x in X.edges[e]}
        labels = set(comp)
        if len(labels) != 2 or len(sides) != 2 or any(comp[X.edges[e][0]] == comp[X.edges[e][1]] for e in H.dual_edges):
            triple = _median_failure(X)
            if triple is not None:
                return Report(False, {"kind": "no_unique_median", "triple": triple, "hyperplane": H.id})
            return Report(False, {"kind": "hyperplane_not_separating", "hyperplane": H.id})
    # median test via halfspace signatures
    bits = _signature_bits(X, data)
    if X.n <= 4000:
        D = X.distance_matrix()
        fb = bits.astype(np.float32)
        ham = (fb @ (1 - fb).T + (1 - fb) @ fb.T).astype(np.int64)
        if not np.array_equal(ham, D):
            bad = np.argwhere(ham != D)[0]
            return Report(False, {"kind": "distance_mismatch", "pair": [int(bad[0]), int(bad[1])]})
    if not _is_tree(X):
        triple = _missing_majority(bits)
        if triple is not None:
            return Report(False, {"kind": "no_median", "triple": triple})
    X.validation = CAT0_CHECKED
    return Report(True, None, {"hyperplanes": len(data.hyperplanes)})


def _median_failure(X, limit=80):
    """Brute-force search for a triple without a unique median (small complexes only)."""
    if X.n > limit:
        return None
    D = X.distance_matrix()
    between = D[:, :, None] + D[None, :, :]  # between[a, m, b] = d(a,m) + d(m,b)
    inside = between == D[:, None, :]  # inside[a, m, b]: m lies on a geodesic from a to b
    for a, b in itertools.combinations(range(X.n), 2):
        common = inside[a, :, b][None, :] & inside[a].T & inside[b].T
        counts = common.sum(axis=1)
        bad = np.nonzero(counts != 1)[0]
        if len(bad):
            return [a, b, int(bad[0])]
    return None


def _components_without(X, removed_edges):
    parent = list(range(X.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, (u, v) in enumerate(X.edges):
        if i in removed_edges:
            continue
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[max(ru, rv)] = min(ru, rv)
    return [find(x) for x in range(X.n)]


def _signature_bits(X, data):
    """Row v, column k is set iff vertex v lies on the plus side of hyperplane k."""
    if X._signature is None:
        bits = np.zeros((X.n, len(data.hyperplanes)), dtype=bool)
        for H in data.hyperplanes:
            e = min(H.dual_edges)
            u, v = X.edges[e]
            if data.orientation[e]:
                u, v = v, u
            du, dv = X.distance_rows([u, v])
            bits[:, H.id] = dv < du
        X._signature = bits
    return X._signature


def _missing_majority(bits):
    """First triple whose coordinatewise majority is not a vertex signature.

    Signatures are packed into 64-bit words.  With at most 64 hyperplanes
    the comparison is exact; wider signatures are compared by a 64-bit
    fingerprint of the words.
    """
    n, k = bits.shape
    if k == 0:
        return None
    words = -(-k // 64)
    padded = np.zeros((n, words * 64), dtype=bool)
    padded[:, :k] = bits
    weights = np.left_shift(np.uint64(1), np.arange(64, dtype=np.uint64))
    packed = (padded.reshape(n, words, 64).astype(np.uint64) * weights).sum(axis=2, dtype=np.uint64)
    mix = np.random.default_rng(0).integers(1, 2**63, size=words, dtype=np.uint64) | np.uint64(1)

    def fingerprint(arr):
        if words == 1:
            return arr[..., 0]
        with np.errstate(over="ignore"):
            return (arr * mix).sum(axis=-1, dtype=np.uint64)

    table = np.sort(fingerprint(packed))
    block = max(1, 2_000_000 // max(1, n * words))
    for a in range(n):
        pa = packed[a]
        for start in range(a + 1, n, block):
            pb = packed[start:start + block][:, None, :]
            maj = (pa & pb) | ((pa | pb) & packed[None, :, :])
            flat = fingerprint(maj).ravel()
            pos = np.searchsorted(table, flat)
            pos[pos == len(table)] = 0
            found = table[pos] == flat
            if not found.all():
                j = int(np.nonzero(~found)[0][0])
                return [a, start + j // n, j % n]
    return None


def _require_cat0(X):
    if X.validation != CAT0_CHECKED:
        if X.validation == RAW:
            _require_npc(X)
        rep = is_cat0(X)
        if not rep.ok:
            raise NotCat0Error(f"complex {X.name!r} is not CAT(0): {rep.witness}")


# ---------------------------------------------------------------------------
# metric operations


def distance(X, p, q) -> int:
    X = as_complex(X)
    _require_cat0(X)
    p, q = X.check_vertex(p), X.check_vertex(q)
    return int(X.distances_from(p)[q])


def separating_hyperplanes(X, p, q) -> list:
    X = as_complex(X)
    _require_cat0(X)
    p, q = X.check_vertex(p), X.check_vertex(q)
    out = []
    for H in compute_hyperplanes(X):
        if (p in H.plus) != (q in H.plus):
            out.append(H.id)
    return out


def geodesic(X, p, q) -> Geodesic:
    """Lexicographically least combinatorial geodesic from p to q."""
    X = as_complex(X)
    _require_cat0(X)
    p, q = X.check_vertex(p), X.check_vertex(q)
    dq = X.distances_from(q)
    path = [p]
    cur = p
    while cur != q:
        cur = min(w for w in X.neighbors(cur) if dq[w] == dq[cur] - 1)
        path.append(cur)
    hs = tuple(hyperplane_of_pair(X, a, b) for a, b in zip(path, path[1:]))
    return Geodesic(tuple(path), hs)


def is_geodesic_path(X, path: Sequence[int]) -> bool:
    """A vertex path is geodesic iff it crosses pairwise distinct hyperplanes."""
    X = as_complex(X)
    crossed = []
    for a, b in zip(path, path[1:]):
        if b not in X.neighbors(a):
            return False
        crossed.append(hyperplane_of_pair(X, a, b))
    return len(set(crossed)) == len(crossed)


def median(X, p, q, r) -> int:
    X = as_complex(X)
    _require_cat0(X)
    p, q, r = X.check_vertex(p), X.check_vertex(q), X.check_vertex(r)
    dp, dq, dr = X.distance_rows([p, q, r])
    ok = (dp + dq == dp[q]) & (dq + dr == dq[r]) & (dp + dr == dp[r])
    hits = np.nonzero(ok)[0]
    if len(hits) != 1:
        raise NotCat0Error(f"median of {p},{q},{r} is not unique")
    return int(hits[0])


def interval(X, a, b) -> frozenset:
    X = as_complex(X)
    da, db = X.distance_rows([a, b])
    return frozenset(np.nonzero(da + db == da[b])[0].tolist())


def hull(X, S) -> VertexSet:
    """Convex hull: least set containing S closed under geodesic intervals.

    Components of S are joined by shortest paths to the nearest missing
    member, then the set is saturated: in a median graph a connected set is
    convex as soon as every vertex with two neighbours inside it is inside.
    """
    X = as_complex(X)
    _require_cat0(X)
    members = [X.check_vertex(s) for s in (S.members if isinstance(S, VertexSet) else S)]
    if not members:
        raise PreconditionError("hull of an empty set")
    adj = X.adjacency()
    wanted = np.zeros(X.n, dtype=bool)
    wanted[members] = True
    inside = np.zeros(X.n, dtype=bool)

    def absorb(start):
        # add the whole component of S containing start
        stack = [start]
        inside[start] = True
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if wanted[w] and not inside[w]:
                    inside[w] = True
                    stack.append(w)

    absorb(members[0])
    while True:
        missing = [s for s in members if not inside[s]]
        if not missing:
            break
        # shortest path from the current set to the nearest missing member
        parent = np.full(X.n, -1, dtype=np.int64)
        queue = deque(int(v) for v in np.nonzero(inside)[0])
        seen = inside.copy()
        hit = None
        while queue and hit is None:
            u = queue.popleft()
            for w in adj[u]:
                if not seen[w]:
                    seen[w] = True
                    parent[w] = u
                    if wanted[w]:
                        hit = w
                        break
                    queue.append(w)
        cur = hit
        while not inside[cur]:
            inside[cur] = True
            cur = int(parent[cur])
        inside[hit] = False
        absorb(hit)
    count = np.zeros(X.n, dtype=np.int64)
    for v in np.nonzero(inside)[0]:
        for w in adj[v]:
            count[w] += 1
    queue = deque(int(w) for w in np.nonzero((count >= 2) & ~inside)[0])
    while queue:
        w = queue.popleft()
        if inside[w]:
            continue
        inside[w] = True
        for y in adj[w]:
            count[y] += 1
            if not inside[y] and count[y] == 2:
                queue.append(y)
    return VertexSet(frozenset(np.nonzero(inside)[0].tolist()), "convex")


def interval_closure(X, S) -> frozenset:
    """Least fixed point of S -> union of intervals I(a, b), a, b in S (slow reference)."""
    X = as_complex(X)
    cur = set(X.check_vertex(s) for s in S)
    while True:
        members = sorted(cur)
        rows = X.distance_rows(members)
        new = set(cur)
        for i, a in enumerate(members):
            for j in range(i + 1, len(members)):
                b = members[j]
                new.update(np.nonzero(rows[i] + rows[j] == rows[i][b])[0].tolist())
        if new == cur:
            return frozenset(cur)
        cur = new


def is_convex(X, S) -> bool:
    X = as_complex(X)
    members = frozenset(X.check_vertex(s) for s in (S.members if isinstance(S, VertexSet) else S))
    if not members:
        return True
    return hull(X, members).members == members


# ---------------------------------------------------------------------------
# specialness


@dataclass
class SpecialnessReport:
    special: bool
    per_hyperplane: list
    inter_osculations: list

    def violations(self):
        out = []
        for entry in self.per_hyperplane:
            for check in ("self_intersection", "one_sided", "self_osculation"):
                if entry[check] is not None:
                    out.append({"hyperplane": entry["hyperplane"], "check": check, "witness": entry[check]})
        for entry in self.inter_osculations:
            out.append({"hyperplanes": entry["hyperplanes"], "check": "inter_osculation", "witness": entry["witness"]})
        return out


def check_special(X: CubeComplex) -> SpecialnessReport:
    _require_npc(X)
    data = _hyperplane_data(X)
    eh = data.edge_to_h
    corner_pairs = [set() for _ in range(X.n)]
    for v in range(X.n):
        for rec in X.corner_records(v):
            corner_pairs[v].add(frozenset((rec.alpha, rec.beta)))
    entries = []
    for H in data.hyperplanes:
        entry = {"hyperplane": H.id, "self_intersection": None, "one_sided": None, "self_osculation": None}
        for idx, sq in enumerate(X.squares):
            b, l = sq.sides[0], sq.sides[1]
            if eh[b[0]] == H.id and eh[l[0]] == H.id:
                entry["self_intersection"] = {"square": idx}
                break
        if H.id in data.conflicts:
            entry["one_sided"] = {"square": data.conflicts[H.id]}
        else:
            for v in range(X.n):
                darts = [d for d in X.darts_at(v) if eh[d[0]] == H.id]
                for d1, d2 in itertools.combinations(darts, 2):
                    if d1[0] == d2[0]:
                        continue
                    # transverse orientation: away from v or towards v
                    o1 = d1[1] * (1 - 2 * data.orientation[d1[0]])
                    o2 = d2[1] * (1 - 2 * data.orientation[d2[0]])
                    if o1 == o2 and frozenset((d1, d2)) not in corner_pairs[v]:
                        entry["self_osculation"] = {"vertex": v, "edges": [X.edge_ids[d1[0]], X.edge_ids[d2[0]]]}
                        break
                if entry["self_osculation"] is not None:
                    break
        entries.append(entry)
    crossing = crossing_graph(X)
    inter = []
    for h1 in sorted(crossing):
        for h2 in sorted(crossing[h1]):
            if h2 <= h1:
                continue
            witness = None
            for v in range(X.n):
                d1s = [d for d in X.darts_at(v) if eh[d[0]] == h1]
                d2s = [d for d in X.darts_at(v) if eh[d[0]] == h2]
                for d1 in d1s:
                    for d2 in d2s:
                        if frozenset((d1, d2)) not in corner_pairs[v]:
                            witness = {"vertex": v, "edges": [X.edge_ids[d1[0]], X.edge_ids[d2[0]]]}
                            break
                    if witness:
                        break
                if witness:
                    break
            if witness:
                inter.append({"hyperplanes": [h1, h2], "witness": witness})
    special = all(e["self_intersection"] is None and e["one_sided"] is None and e["self_osculation"] is None
                  for e in entries) and not inter
    return SpecialnessReport(special, entries, inter)


# ---------------------------------------------------------------------------
# combinatorial maps


@dataclass
class CombinatorialMap:
    source: CubeComplex
    target: CubeComplex
    vertex_map: tuple
    edge_map: tuple  # per source edge: (target edge, sign) or None when collapsed
    square_map: tuple = ()

    def dart(self, d):
        img = self.edge_map[d[0]]
        if img is None:
            return None
        return (img[0], img[1] * d[1])


def make_map(source, target, vertex_map, edge_map) -> CombinatorialMap:
    """Assemble and structurally check a map; derive the square assignment."""
    if len(vertex_map) != source.n:
        raise MalformedMap("vertex map is not total")
    if len(edge_map) != len(source.edges):
        raise MalformedMap("edge map is not total")
    for i, (u, v) in enumerate(source.edges):
        img = edge_map[i]
        if img is None:
            if vertex_map[u] != vertex_map[v]:
                raise MalformedMap(f"collapsed edge {source.edge_ids[i]} joins distinct image vertices")
            continue
        e, s = img
        tu, tv = target.edges[e]
        tail, head = (tu, tv) if s > 0 else (tv, tu)
        if (tail, head) != (vertex_map[u], vertex_map[v]):
            raise MalformedMap(f"edge {source.edge_ids[i]} does not commute with its endpoints")
    f = CombinatorialMap(source, target, tuple(vertex_map), tuple(edge_map))
    squares = []
    for idx, sq in enumerate(source.squares):
        images = [f.dart(d) for d in sq.sides]
        if any(d is None for d in images):
            squares.append(None)
            continue
        v00 = vertex_map[sq.corners[0]]
        found = None
        for rec in target.records_with_beta(v00, images[1]):
            if rec.alpha == images[0] and rec.beta_far == images[2] and rec.alpha_far == images[3]:
                found = rec.square
                break
        if found is None:
            raise MalformedMap(f"square {idx} has no image square")
        squares.append(found)
    f.square_map = tuple(squares)
    return f


def check_local_isometry(f: CombinatorialMap) -> Report:
    """Link maps injective with full image at every source vertex."""
    src, tgt = f.source, f.target
    for x in range(src.n):
        images = {}
        for d in src.darts_at(x):
            img = f.dart(d)
            if img is None:
                return Report(False, {"kind": "collapsed_edge", "vertex": x, "edge": src.edge_ids[d[0]]})
            if img in images:
                return Report(False, {"kind": "link_not_injective", "vertex": x,
                                      "edges": [src.edge_ids[images[img][0]], src.edge_ids[d[0]]]})
            images[img] = d
        src_pairs = {frozenset((r.alpha, r.beta)) for r in src.corner_records(x)}
        img_pairs = {}
        for r in src.corner_records(x):
            key = frozenset((f.dart(r.alpha), f.dart(r.beta)))
            img_pairs.setdefault(key, set()).add(r.square)
        for key, sqs in img_pairs.items():
            if len(sqs) > 1:
                return Report(False, {"kind": "link_edge_not_injective", "vertex": x})
        fx = f.vertex_map[x]
        for r in tgt.corner_records(fx):
            if r.alpha in images and r.beta in images:
                pair = frozenset((images[r.alpha], images[r.beta]))
                if pair not in src_pairs:
                    return Report(False, {"kind": "image_not_full", "vertex": x,
                                          "edges": sorted(src.edge_ids[d[0]] for d in pair)})
        src_tris = src.cube_corners(x)
        for tri in tgt.cube_corners(fx):
            if all(d in images for d in tri):
                pre = frozenset(images[d] for d in tri)
                if pre not in src_tris:
                    return Report(False, {"kind": "image_not_full_cube", "vertex": x})
    return Report(True)


# ---------------------------------------------------------------------------
# development of universal-cover balls


@dataclass
class Ball:
    complex: CubeComplex
    base: CubeComplex
    basepoint: int
    radius: int
    boundary: frozenset
    projection: CombinatorialMap
    layer: tuple
    steps: list  # per ball vertex: base dart -> ball vertex
    parent: tuple  # per ball vertex: (parent vertex, base dart) or None
    complete: tuple  # vertex has every base dart developed

    @property
    def n(self):
        return self.complex.n

    def proj(self, v):
        return self.projection.vertex_map[v]

    def walk(self, start, darts):
        cur = start
        for d in darts:
            cur = self.steps[cur].get(d)
            if cur is None:
                return None
        return cur

    def word(self, v):
        """Base darts along the tree path from the basepoint to v."""
        cache = self.__dict__.setdefault("_words", {})
        found = cache.get(v)
        if found is None:
            link = self.parent[v]
            found = () if link is None else self.word(link[0]) + (link[1],)
            cache[v] = found
        return found

    def path_darts(self, a, b):
        """Darts of a path from a to b through the development tree."""
        wa, wb = self.word(a), self.word(b)
        k = 0
        while k < len(wa) and k < len(wb) and wa[k] == wb[k]:
            k += 1
        return [rev(d) for d in reversed(wa[k:])] + list(wb[k:])

    def interior(self):
        return [v for v in range(self.n) if self.complete[v]]


def as_complex(obj):
    if isinstance(obj, Ball):
        return obj.complex
    return obj


def develop_ball(X: CubeComplex, basepoint, R: int, budget: Optional[int] = None) -> Ball:
    """Breadth-first development of the radius-R ball of the universal cover."""
    _require_npc(X)
    if R < 0:
        raise PreconditionError("radius must be non-negative")
    budget = cell_budget() if budget is None else budget
    b = X.check_vertex(basepoint)
    proj = [b]
    layer = [0]
    steps = [dict()]
    parent = [None]
    frontier = [0]
    cells = 1
    for k in range(R):
        new = []
        for u in frontier:
            pu = proj[u]
            for d in X.darts_at(pu):
                if d in steps[u]:
                    continue
                target = None
                for rec in X.records_with_beta(pu, d):
                    p = steps[u].get(rec.alpha)
                    if p is None or layer[p] != k - 1:
                        continue
                    x = steps[p].get(rec.beta_far)
                    if x is None:
                        continue
                    w = steps[x].get(rev(rec.alpha_far))
                    if w is not None:
                        target = w
                        break
                if target is None:
                    target = len(proj)
                    proj.append(X.step(pu, d))
                    layer.append(k + 1)
                    steps.append(dict())
                    parent.append((u, d))
                    new.append(target)
                    cells += 1
                steps[u][d] = target
                back = rev(d)
                if steps[target].get(back, u) != u:
                    raise DeckError("development produced an inconsistent identification")
                steps[target][back] = u
                cells += 1
                if cells > budget:
                    raise CellBudgetExceeded(
                        f"radius {R} exceeds the cell budget {budget} (set MF_CELL_BUDGET to raise it)")
        frontier = new
    n = len(proj)
    edges, edge_proj, pair_index = [], [], {}
    for u in range(n):
        for d, w in sorted(steps[u].items()):
            if u < w:
                pair_index[(u, w)] = len(edges)
                edges.append((u, w))
                edge_proj.append(d)

    def ball_dart(a, c):
        if a < c:
            return (pair_index[(a, c)], 1)
        return (pair_index[(c, a)], -1)

    squares = {}
    for u in range(n):
        for rec in X.corner_records(proj[u]):
            p = steps[u].get(rec.alpha)
            q = steps[u].get(rec.beta)
            if p is None or q is None:
                continue
            x = steps[p].get(rec.beta_far)
            if x is None or steps[q].get(rec.alpha_far) != x:
                continue
            sq = normalize_square((u, p, q, x), (ball_dart(u, p), ball_dart(u, q), ball_dart(p, x), ball_dart(q, x)))
            squares[(sq.corners, sq.sides)] = sq
            cells += 0
    cubes = set()
    if X.cubes3:
        lifts = []
        for cube in X.cubes3:
            for bit in range(8):
                lifts.append((cube, bit))
        for u in range(n):
            for cube, bit in lifts:
                if cube[bit] != proj[u]:
                    continue
                placed = {bit: u}
                queue = deque([bit])
                ok = True
                while queue and ok:
                    c = queue.popleft()
                    for k in range(3):
                        o = c ^ (1 << k)
                        d = X.edge_between(cube[c], cube[o])
                        w = steps[placed[c]].get(d) if d is not None else None
                        if w is None:
                            ok = False
                            break
                        if o in placed:
                            if placed[o] != w:
                                ok = False
                                break
                        else:
                            placed[o] = w
                            queue.append(o)
                if ok and len(placed) == 8:
                    corners = tuple(placed[i] for i in range(8))
                    cubes.add(min(tuple(corners[p[i]] for i in range(8)) for p in CUBE_SYMMETRIES))
    sq_list = sorted(squares.values(), key=lambda s: (s.corners, s.sides))
    cells += len(sq_list) + len(cubes)
    if cells > budget:
        raise CellBudgetExceeded(f"radius {R} exceeds the cell budget {budget}")
    cx = CubeComplex(f"{X.name}~B{R}", list(range(n)), edges, sq_list, sorted(cubes),
                     dim_cap=X.dim_cap, validation=NPC_CHECKED)
    vertex_map = tuple(proj)
    edge_map = tuple(edge_proj)
    projection = CombinatorialMap(cx, X, vertex_map, edge_map)
    boundary = frozenset(v for v in range(n) if layer[v] == R)
    complete = tuple(len(steps[v]) == len(X.darts_at(proj[v])) for v in range(n))
    return Ball(cx, X, 0, R, boundary, projection, tuple(layer), steps, tuple(parent), complete)


# ---------------------------------------------------------------------------
# deck transformations


@dataclass
class Automorphism:
    """Partial vertex permutation of a ball (or window) commuting with projection."""

    domain: object
    mapping: tuple  # -1 where undefined
    translation_length: Optional[int] = None

    def __call__(self, v):
        if v is None:
            return None
        img = self.mapping[v]
        return None if img < 0 else img

    @property
    def defined(self):
        return [v for v, w in enumerate(self.mapping) if w >= 0]

    @property
    def partial(self):
        return [v for v, w in enumerate(self.mapping) if w < 0]

    def is_identity(self):
        return all(w == v for v, w in enumerate(self.mapping) if w >= 0)

    def inverse(self):
        inv = [-1] * len(self.mapping)
        for v, w in enumerate(self.mapping):
            if w >= 0:
                inv[w] = v
        return Automorphism(self.domain, tuple(inv), self.translation_length)

    def compose(self, other):
        """self after other."""
        out = []
        for v in range(len(self.mapping)):
            w = other(v)
            out.append(-1 if w is None or self(w) is None else self(w))
        return Automorphism(self.domain, tuple(out))

    def power(self, k):
        base = self if k >= 0 else self.inverse()
        out = list(range(len(self.mapping)))
        for _ in range(abs(k)):
            out = [-1 if w < 0 or base.mapping[w] < 0 else base.mapping[w] for w in out]
        return Automorphism(self.domain, tuple(out))

    def restrict(self, vertices):
        keep = set(vertices)
        return Automorphism(self.domain, tuple(w if v in keep and w in keep else -1
                                               for v, w in enumerate(self.mapping)))


def deck_search(B: Ball, seed: Mapping) -> Automorphism:
    """Extend a seed vertex map to a deck transformation by link propagation."""
    if not seed:
        raise DeckError("empty seed")
    mapping = [-1] * B.n
    queue = deque()
    for v, w in seed.items():
        v, w = int(v), int(w)
        if not (0 <= v < B.n and 0 <= w < B.n):
            raise VertexError("seed vertex outside the ball")
        if B.proj(v) != B.proj(w):
            raise DeckError(f"seed {v}->{w} changes the base vertex")
        if mapping[v] >= 0 and mapping[v] != w:
            raise DeckError("contradictory seed")
        mapping[v] = w
        queue.append(v)
    while queue:
        u = queue.popleft()
        fu = mapping[u]
        for d, w in B.steps[u].items():
            fw = B.steps[fu].get(d)
            if fw is None:
                continue
            if mapping[w] < 0:
                mapping[w] = fw
                queue.append(w)
            elif mapping[w] != fw:
                raise DeckError(f"inconsistent extension at vertex {w}")
    images = [w for w in mapping if w >= 0]
    if len(set(images)) != len(images):
        raise DeckError("extension is not injective")
    return Automorphism(B, tuple(mapping))


def translation_length_details(B: Ball, phi: Automorphism):
    """(min displacement over interior vertices, boundary_limited flag)."""
    if phi.is_identity():
        raise PreconditionError("translation length needs a nontrivial automorphism")
    X = as_complex(B)
    if isinstance(B, Ball):
        interior = [v for v in B.interior() if phi(v) is not None]
        layer = B.layer
        R = B.radius
    else:
        interior = [v for v in range(X.n) if phi(v) is not None]
        layer = None
        R = None
    if not interior:
        raise PreconditionError("no interior vertex where the automorphism is defined")
    best, where = None, None
    for chunk in range(0, len(interior), 512):
        part = interior[chunk:chunk + 512]
        rows = X.distance_rows(part)
        for i, v in enumerate(part):
            d = int(rows[i][phi(v)])
            if best is None or d < best:
                best, where = d, v
    limited = False
    if layer is not None:
        limited = layer[where] + best >= R
    return best, limited


def translation_length(B, phi: Automorphism) -> int:
    value, _ = translation_length_details(B, phi)
    return value
