"""Graphs of cube complexes, windowed Bass-Serre trees and path stabilizers.

A tree window is a finite piece of the Bass-Serre tree.  Its nodes are
chambers (developed balls of vertex spaces) and its links are strips: an
elevation of the edge space in the parent chamber, the matching elevation in
the child chamber, and the vertex correspondence ``sigma`` across the strip.

Group elements are handled as deck transformations of the root chamber,
described by an anchor vertex and its image.  An element preserves a strip
when it maps one rung of the strip to a rung of the same strip; it is then
carried into the child chamber through ``sigma``.
"""
from __future__ import annotations

import hashlib
import itertools
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import canon
from .cubecore import (
    CubeComplex,
    VertexSet,
    build_complex,
    check_local_isometry,
    complex_to_spec,
    compute_hyperplanes,
    deck_search,
    develop_ball,
    is_cat0,
    is_convex,
    make_map,
    rev,
    validate_npc,
)
from .errors import (
    AttachmentError,
    DeckError,
    InputError,
    MFError,
    OverflowBudget,
    PreconditionError,
    WindowTooSmall,
)
from .fileio import build_map, label_token, map_to_spec, resolve_gog_spec

log = logging.getLogger(__name__)

SIDES = ("minus", "plus")
VERDICTS = ("trivial", "cyclic", "higher", "undecided")
T_BIT_LIMIT = 4096


def other_side(side):
    return "plus" if side == "minus" else "minus"


# ---------------------------------------------------------------------------
# graphs of complexes


@dataclass(frozen=True)
class GogEdge:
    id: str
    minus: str
    plus: str

    def end(self, side):
        return self.minus if side == "minus" else self.plus


@dataclass
class GraphOfComplexes:
    name: str
    vertices: tuple
    edges: tuple
    vertex_spaces: dict
    edge_spaces: dict
    attachments: dict  # edge id -> {"minus": map, "plus": map}
    subdivided: tuple = ()

    def edge(self, eid) -> GogEdge:
        for e in self.edges:
            if e.id == eid:
                return e
        raise InputError(f"unknown edge {eid!r}")

    def ends_at(self, v):
        """Edge ends incident to v, in edge order, minus before plus."""
        out = []
        for e in self.edges:
            for side in SIDES:
                if e.end(side) == v:
                    out.append((e.id, side))
        return out

    def attachment(self, eid, side):
        return self.attachments[eid][side]


def _identity_map(X: CubeComplex):
    return make_map(X, X, list(range(X.n)), [(i, 1) for i in range(len(X.edges))])


def _parse_graph_edges(raw):
    out = []
    for k, item in enumerate(raw):
        if isinstance(item, dict):
            ends, eid = item.get("ends"), item.get("id", f"e{k}")
        elif isinstance(item, list) and len(item) in (2, 3):
            ends, eid = item[:2], (item[2] if len(item) == 3 else f"e{k}")
        else:
            raise InputError(f"graph edge {k} is malformed")
        if not isinstance(ends, list) or len(ends) != 2:
            raise InputError(f"graph edge {k} needs two ends")
        out.append((str(eid), str(ends[0]), str(ends[1])))
    return out


def build_gog(source) -> GraphOfComplexes:
    """Load, check every attachment and subdivide loops of the underlying graph."""
    spec = resolve_gog_spec(source)
    graph = spec["graph"]
    vertices = [str(v) for v in graph.get("vertices", [])]
    if len(set(vertices)) != len(vertices):
        raise InputError("duplicate graph vertex")
    raw_edges = _parse_graph_edges(graph.get("edges", []))
    if len({e[0] for e in raw_edges}) != len(raw_edges):
        raise InputError("duplicate graph edge id")
    vspaces, espaces = {}, {}
    for v in vertices:
        if v not in spec["vertex_spaces"]:
            raise InputError(f"vertex {v!r} has no vertex space")
        vspaces[v] = _npc_complex(spec["vertex_spaces"][v], f"vertex space {v}")
    atts = {}
    edges = []
    subdivided = []
    for eid, u, w in raw_edges:
        if u not in vspaces or w not in vspaces:
            raise InputError(f"edge {eid!r} references an unknown vertex")
        if eid not in spec["edge_spaces"]:
            raise InputError(f"edge {eid!r} has no edge space")
        if eid not in spec["attachments"]:
            raise InputError(f"edge {eid!r} has no attachments")
        Xe = _npc_complex(spec["edge_spaces"][eid], f"edge space {eid}")
        ends = {}
        for side, target in (("minus", u), ("plus", w)):
            f = build_map(spec["attachments"][eid][side], Xe, vspaces[target])
            rep = check_local_isometry(f)
            if not rep.ok:
                witness = dict(rep.witness)
                witness.update({"edge": eid, "side": side})
                if "vertex" in witness:
                    witness["vertex"] = label_token(Xe.labels[witness["vertex"]])
                raise AttachmentError(f"attachment {eid}/{side} is not a local isometry: {witness}", witness)
            ends[side] = f
        if u != w:
            edges.append(GogEdge(eid, u, w))
            espaces[eid] = Xe
            atts[eid] = ends
            continue
        # a loop becomes two edges through a middle copy of the edge space
        mid = f"{eid}^mid"
        if mid in vspaces:
            raise InputError(f"cannot subdivide loop {eid!r}: name {mid!r} is taken")
        vertices.append(mid)
        vspaces[mid] = Xe
        ident = _identity_map(Xe)
        for k, (a, b, fa, fb) in enumerate(((u, mid, ends["minus"], ident), (mid, w, ident, ends["plus"]))):
            name = f"{eid}^{k}"
            edges.append(GogEdge(name, a, b))
            espaces[name] = Xe
            atts[name] = {"minus": fa, "plus": fb}
        subdivided.append(eid)
    return GraphOfComplexes(spec["name"], tuple(vertices), tuple(edges), vspaces, espaces, atts, tuple(subdivided))


def _npc_complex(spec, where):
    X = build_complex(spec)
    rep = validate_npc(X)
    if not rep.ok:
        raise PreconditionError(f"{where} is not nonpositively curved: {rep.witness}")
    return X


def gog_summary(G: GraphOfComplexes) -> dict:
    return {
        "name": G.name,
        "vertices": list(G.vertices),
        "edges": [[e.minus, e.plus, e.id] for e in G.edges],
        "subdivided_loops": list(G.subdivided),
        "vertex_spaces": {v: _counts(X) for v, X in G.vertex_spaces.items()},
        "edge_spaces": {e: _counts(X) for e, X in G.edge_spaces.items()},
    }


def gog_to_spec(G: GraphOfComplexes) -> dict:
    """Inline file form of a graph of complexes; loops appear already subdivided."""
    return {
        "name": G.name,
        "graph": {"vertices": list(G.vertices), "edges": [[e.minus, e.plus, e.id] for e in G.edges]},
        "vertex_spaces": {v: complex_to_spec(X) for v, X in G.vertex_spaces.items()},
        "edge_spaces": {e: complex_to_spec(X) for e, X in G.edge_spaces.items()},
        "attachments": {e: {side: map_to_spec(f) for side, f in ends.items()} for e, ends in G.attachments.items()},
    }


def _counts(X):
    return {"vertices": X.n, "edges": len(X.edges), "squares": len(X.squares), "cubes3": len(X.cubes3)}


def total_space(G: GraphOfComplexes) -> CubeComplex:
    """Vertex spaces joined by one mapping-cylinder strip per edge space.

    Each edge-space vertex gives a strip edge and each edge-space edge a
    square.  Edge-space squares would give 3-cubes; those are emitted only
    when their eight corners are distinct vertices, since a cube is stored
    by its corner tuple.  The count of skipped cubes is kept on the result
    as ``omitted_cubes``.
    """
    vertices, edges, squares, cubes = [], [], [], []

    def vid(v, X, x):
        return [v, label_token(X.labels[x])]

    for v in G.vertices:
        X = G.vertex_spaces[v]
        vertices.extend(vid(v, X, x) for x in range(X.n))
        for i, (a, b) in enumerate(X.edges):
            edges.append({"id": f"{v}/{X.edge_ids[i]}", "ends": [vid(v, X, a), vid(v, X, b)]})
        for sq in X.squares:
            squares.append({"corners": [vid(v, X, c) for c in sq.corners],
                            "sides": [[f"{v}/{X.edge_ids[d[0]]}", d[1]] for d in sq.sides]})
        cubes.extend([vid(v, X, c) for c in cube] for cube in X.cubes3)
    omitted = 0
    for e in G.edges:
        Xe = G.edge_spaces[e.id]
        fm, fp = G.attachment(e.id, "minus"), G.attachment(e.id, "plus")
        Xm, Xp = G.vertex_spaces[e.minus], G.vertex_spaces[e.plus]

        def rung(y):
            return f"{e.id}/{label_token(Xe.labels[y])}"

        for y in range(Xe.n):
            edges.append({"id": rung(y), "ends": [vid(e.minus, Xm, fm.vertex_map[y]),
                                                  vid(e.plus, Xp, fp.vertex_map[y])]})
        for i, (a, b) in enumerate(Xe.edges):
            dm, dp = fm.edge_map[i], fp.edge_map[i]
            squares.append({
                "corners": [vid(e.minus, Xm, fm.vertex_map[a]), vid(e.minus, Xm, fm.vertex_map[b]),
                            vid(e.plus, Xp, fp.vertex_map[a]), vid(e.plus, Xp, fp.vertex_map[b])],
                "sides": [[f"{e.minus}/{Xm.edge_ids[dm[0]]}", dm[1]], [rung(a), 1], [rung(b), 1],
                          [f"{e.plus}/{Xp.edge_ids[dp[0]]}", dp[1]]],
            })
        for sq in Xe.squares:
            corners = [vid(e.minus, Xm, fm.vertex_map[c]) for c in sq.corners]
            corners += [vid(e.plus, Xp, fp.vertex_map[c]) for c in sq.corners]
            if len({json_key(c) for c in corners}) == 8:
                cubes.append(corners)
            else:
                omitted += 1
    spec = {"name": f"{G.name}~total", "vertices": vertices, "edges": edges, "squares": squares}
    if cubes:
        spec["cubes3"] = cubes
    X = build_complex(spec)
    X.omitted_cubes = omitted
    return X


def json_key(x):
    return tuple(json_key(y) for y in x) if isinstance(x, list) else x


# ---------------------------------------------------------------------------
# tree windows


@dataclass
class Elevation:
    edge: str
    side: str
    seed: tuple  # (chamber vertex, edge-space vertex)
    pairs: dict  # chamber vertex -> edge-space vertex
    convex: Optional[bool] = None

    @property
    def members(self) -> frozenset:
        return frozenset(self.pairs)


@dataclass
class Chamber:
    index: int
    vertex: str
    ball: object
    depth: int
    parent_strip: Optional[int]
    strips: list = field(default_factory=list)
    truncated: bool = False


@dataclass
class Strip:
    index: int
    edge: str
    side: str  # side of the edge attached to the parent chamber
    parent: int
    upper: Elevation  # in the parent chamber
    child: Optional[int] = None
    lower: Optional[Elevation] = None  # in the child chamber
    sigma: dict = field(default_factory=dict)
    sigma_inv: dict = field(default_factory=dict)


class TreeWindow:
    """Truncated Bass-Serre tree around a chamber over ``base_vertex``."""

    def __init__(self, G: GraphOfComplexes, base_vertex, depth: int, radius: int, coset_cap: int,
                 basepoint=0):
        if base_vertex not in G.vertex_spaces:
            raise InputError(f"unknown graph vertex {base_vertex!r}")
        if depth < 0 or radius < 0 or coset_cap < 1:
            raise PreconditionError("depth and radius must be non-negative and the cap positive")
        self.gog = G
        self.depth = depth
        self.radius = radius
        self.coset_cap = coset_cap
        self.chambers: list = []
        self.strips: list = []
        self._balls = {}
        self._gates = {}
        X = G.vertex_spaces[base_vertex]
        root = Chamber(0, base_vertex, self._ball(base_vertex, X.check_vertex(basepoint)), 0, None)
        self.chambers.append(root)
        if depth > 0:
            self._fan_out(root)
        queue = deque([0])
        while queue:
            c = self.chambers[queue.popleft()]
            if c.depth + 1 < depth:
                for s in c.strips:
                    queue.append(self.child(s))

    @property
    def root(self) -> Chamber:
        return self.chambers[0]

    @property
    def truncated(self) -> bool:
        return any(c.truncated for c in self.chambers)

    def _ball(self, v, b):
        key = (v, b)
        if key not in self._balls:
            B = develop_ball(self.gog.vertex_spaces[v], b, self.radius)
            if not is_cat0(B.complex).ok:
                raise DeckError(f"developed ball over {v!r} is not CAT(0)")
            self._balls[key] = B
        return self._balls[key]

    def _grow(self, ball, edge, side, seed):
        f = self.gog.attachment(edge, side)
        Xe = f.source
        pairs = {seed[0]: seed[1]}
        queue = deque([seed])
        while queue:
            w, y = queue.popleft()
            for d in Xe.darts_at(y):
                w2 = ball.steps[w].get(f.dart(d))
                if w2 is None:
                    continue
                y2 = Xe.step(y, d)
                old = pairs.get(w2)
                if old is None:
                    pairs[w2] = y2
                    queue.append((w2, y2))
                elif old != y2:
                    raise DeckError(f"elevation of {edge} is not embedded")
        return Elevation(edge, side, seed, pairs)

    def _check_convex(self, ball, E):
        if E.convex is None:
            E.convex = is_convex(ball.complex, E.members)
            if not E.convex:
                raise DeckError(f"elevation of {E.edge} is not convex in its chamber")

    def _fan_out(self, c: Chamber):
        ball = c.ball
        covered = {}
        lower = None
        if c.parent_strip is not None:
            lower = self.strips[c.parent_strip].lower
        for edge, side in self.gog.ends_at(c.vertex):
            f = self.gog.attachment(edge, side)
            pre = {}
            for y in range(f.source.n):
                pre.setdefault(f.vertex_map[y], []).append(y)
            covered = {}
            if lower is not None and (lower.edge, lower.side) == (edge, side):
                for w, y in lower.pairs.items():
                    covered.setdefault(w, set()).add(y)
            count = 0
            for w in range(ball.n):
                for y in pre.get(ball.proj(w), ()):
                    if y in covered.get(w, ()):
                        continue
                    if count == self.coset_cap:
                        c.truncated = True
                        break
                    E = self._grow(ball, edge, side, (w, y))
                    self._check_convex(ball, E)
                    for w2, y2 in E.pairs.items():
                        covered.setdefault(w2, set()).add(y2)
                    s = Strip(len(self.strips), edge, side, c.index, E)
                    self.strips.append(s)
                    c.strips.append(s.index)
                    count += 1
                else:
                    continue
                break

    def child(self, sidx: int) -> int:
        """Chamber on the far side of a strip, developed on first use."""
        s = self.strips[sidx]
        if s.child is not None:
            return s.child
        parent = self.chambers[s.parent]
        e = self.gog.edge(s.edge)
        far_side = other_side(s.side)
        v = e.end(far_side)
        g = self.gog.attachment(s.edge, far_side)
        f = self.gog.attachment(s.edge, s.side)
        w0, y0 = s.upper.seed
        ball = self._ball(v, g.vertex_map[y0])
        s.lower = self._grow(ball, s.edge, far_side, (0, y0))
        self._check_convex(ball, s.lower)
        Xe = f.source
        sigma = {w0: 0}
        queue = deque([(w0, 0, y0)])
        while queue:
            wp, wc, y = queue.popleft()
            for d in Xe.darts_at(y):
                a = parent.ball.steps[wp].get(f.dart(d))
                b = ball.steps[wc].get(g.dart(d))
                if a is None or b is None or a in sigma:
                    continue
                sigma[a] = b
                queue.append((a, b, Xe.step(y, d)))
        s.sigma = sigma
        s.sigma_inv = {b: a for a, b in sigma.items()}
        ch = Chamber(len(self.chambers), v, ball, parent.depth + 1, sidx)
        self.chambers.append(ch)
        log.debug("chamber %d: vertex %s across strip %d, %d vertices", ch.index, v, sidx, ball.n)
        s.child = ch.index
        if ch.depth < self.depth:
            self._fan_out(ch)
        return ch.index

    def gate_array(self, ball, E: Elevation) -> np.ndarray:
        """Gate of every chamber vertex onto an elevation (multi-source search)."""
        key = id(E)
        if key not in self._gates:
            gate = np.full(ball.n, -1, dtype=np.int64)
            queue = deque()
            for w in sorted(E.pairs):
                gate[w] = w
                queue.append(w)
            adj = ball.complex.adjacency()
            while queue:
                u = queue.popleft()
                for w in adj[u]:
                    if gate[w] < 0:
                        gate[w] = gate[u]
                        queue.append(w)
            self._gates[key] = (E, gate)
        return self._gates[key][1]

    def paths(self, length: int):
        """Every strip path of the given length out of the root, in enumeration order."""
        if length < 1:
            return []
        if length > self.depth:
            raise PreconditionError(f"paths of length {length} need a window of depth >= {length}")
        out = []

        def extend(prefix, chamber):
            if len(prefix) == length:
                out.append(tuple(prefix))
                return
            for s in self.chambers[chamber].strips:
                if len(prefix) + 1 == length:
                    out.append(tuple(prefix) + (s,))
                else:
                    extend(prefix + [s], self.child(s))

        extend([], 0)
        return out

    def check_path(self, path):
        chamber = 0
        for k, s in enumerate(path):
            if not 0 <= s < len(self.strips) or self.strips[s].parent != chamber:
                raise PreconditionError(f"strip {s} does not continue the path at step {k}")
            if k + 1 < len(path):
                chamber = self.child(s)
        return tuple(path)

    def summary(self) -> dict:
        return {
            "depth": self.depth,
            "radius": self.radius,
            "coset_cap": self.coset_cap,
            "chambers": [{"index": c.index, "vertex": c.vertex, "depth": c.depth, "vertices": c.ball.n,
                          "parent_strip": c.parent_strip, "strips": list(c.strips), "truncated": c.truncated}
                         for c in self.chambers],
            "strips": [{"index": s.index, "edge": s.edge, "side": s.side, "parent": s.parent, "child": s.child,
                        "seed": list(s.upper.seed), "size": len(s.upper.pairs)} for s in self.strips],
            "truncated": self.truncated,
        }


def tree_window(G, base_vertex, depth: int, radius: int, coset_cap: int, basepoint=0) -> TreeWindow:
    return TreeWindow(G, base_vertex, depth, radius, coset_cap, basepoint)


# ---------------------------------------------------------------------------
# gates of paths


@dataclass
class PathGate:
    members: VertexSet
    reliable: bool
    folded: tuple  # per chamber on the path: size of the intermediate gate
    touches_boundary: bool = False
    cross_check: Optional[bool] = None


def _strip(W, s):
    return s if isinstance(s, Strip) else W.strips[s]


def path_gate(W: TreeWindow, path, cross_check: bool = True) -> PathGate:
    """Fold the strips of a path back into the root chamber.

    In chamber i the current set is projected onto the elevation of the
    strip leading back, then carried across that strip.  The result is the
    gate of the last strip's elevation onto the first one.
    """
    path = W.check_path([p.index if isinstance(p, Strip) else p for p in path])
    if not path:
        raise PreconditionError("path must have length at least 1")
    strips = [W.strips[s] for s in path]
    reliable = True
    last = strips[-1]
    cur = set(last.upper.pairs)
    sizes = [len(cur)]
    for i in range(len(strips) - 2, -1, -1):
        s = strips[i]
        child = W.chambers[s.child]
        gate = W.gate_array(child.ball, s.lower)
        proj = {int(gate[x]) for x in cur}
        back = {s.sigma_inv.get(x) for x in proj}
        if None in back:
            reliable = False
            back.discard(None)
        if not back:
            raise WindowTooSmall("path gate left the window")
        cur = back
        sizes.append(len(cur))
    result = PathGate(VertexSet(frozenset(cur), "convex"), reliable, tuple(reversed(sizes)),
                      bool(cur & W.root.ball.boundary))
    if cross_check:
        result.cross_check = _glued_check(W, strips, result.members.members)
    return result


def _glued_check(W, strips, folded):
    """Two-term gate computed in a glued window, compared away from chamber boundaries."""
    if len(strips) == 1:
        return folded == frozenset(strips[0].upper.pairs)
    chambers = [strips[0].parent] + [s.child for s in strips[:-1]]
    offset, total = {}, 0
    for c in chambers:
        offset[c] = total
        total += W.chambers[c].ball.n
    adj = [[] for _ in range(total)]
    for c in chambers:
        base = offset[c]
        for u, nb in enumerate(W.chambers[c].ball.complex.adjacency()):
            adj[base + u].extend(base + w for w in nb)
    for s in strips[:-1]:
        a, b = offset[s.parent], offset[s.child]
        for x, y in s.sigma.items():
            adj[a + x].append(b + y)
            adj[b + y].append(a + x)
    label = np.full(total, -1, dtype=np.int64)
    queue = deque()
    for x in sorted(strips[0].upper.pairs):
        label[x] = x
        queue.append(x)
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if label[w] < 0:
                label[w] = label[u]
                queue.append(w)
    last = offset[strips[-1].parent]
    glued = {int(label[last + x]) for x in strips[-1].upper.pairs if label[last + x] >= 0}
    layer = W.root.ball.layer
    inner = W.radius // 2

    def core(S):
        return {x for x in S if layer[x] <= inner}

    return core(glued) == core(folded)


# ---------------------------------------------------------------------------
# deck transformations preserving paths


class DeckMap:
    """Deck transformation of a chamber given by one vertex and its image."""

    __slots__ = ("ball", "anchor", "image")

    def __init__(self, ball, anchor, image):
        self.ball, self.anchor, self.image = ball, anchor, image

    def __call__(self, v):
        if v == self.anchor:
            return self.image
        return self.ball.walk(self.image, self.ball.path_darts(self.anchor, v))


def preserves(W: TreeWindow, path, anchor: int, image: int) -> Optional[bool]:
    """Whether the root deck map ``anchor -> image`` maps every strip of path to itself.

    ``None`` means the window was too small to decide.
    """
    a, b = anchor, image
    for k, s in enumerate(path):
        s = _strip(W, s)
        ball = W.chambers[s.parent].ball
        if ball.proj(a) != ball.proj(b):
            return False
        p = int(W.gate_array(ball, s.upper)[a])
        gp = DeckMap(ball, a, b)(p)
        if gp is None:
            return None
        if s.upper.pairs.get(gp) != s.upper.pairs[p]:
            return False
        if k + 1 == len(path):
            return True
        a, b = s.sigma.get(p), s.sigma.get(gp)
        if a is None or b is None:
            return None
    return True


def _preserves_all(W, constraints, anchor, image):
    verdict = True
    for path in constraints:
        res = preserves(W, path, anchor, image)
        if res is False:
            return False
        if res is None:
            verdict = None
    return verdict


@dataclass
class Quotient:
    classes: int
    representatives: tuple
    edges: tuple  # (tail class, head class, base edge id)
    squares: tuple  # four edge indices per square
    diameter: int
    complete: bool
    identifications: tuple = ()  # (representative, vertex) pairs found equivalent
    key: tuple = ()

    def as_dict(self):
        return {"classes": self.classes, "edges": [list(e) for e in self.edges],
                "squares": [list(s) for s in self.squares], "diameter": self.diameter, "complete": self.complete}


@dataclass
class PathStabilizerApprox:
    paths: tuple
    gate: VertexSet
    basepoint: int
    generators: tuple  # images of the basepoint under discovered elements
    primitive: Optional[int]
    quotient_diam: Optional[int]
    cyclic_verdict: str
    complete: bool
    reliable: bool
    undetermined: int = 0
    witness: Optional[dict] = None
    quotient: Optional[Quotient] = None

    @property
    def path(self):
        return self.paths[0] if len(self.paths) == 1 else self.paths

    def as_dict(self, ball=None):
        out = {
            "paths": [list(p) for p in self.paths],
            "gate_size": len(self.gate),
            "basepoint": self.basepoint,
            "generators": list(self.generators),
            "primitive": self.primitive,
            "quotient_diam": self.quotient_diam,
            "verdict": self.cyclic_verdict,
            "complete": self.complete,
            "reliable": self.reliable,
            "undetermined": self.undetermined,
            "witness": self.witness,
        }
        if self.quotient is not None:
            out["quotient"] = self.quotient.as_dict()
        return out


def _two_ended(ball, g0, p, members):
    """Orbit of the basepoint runs at least two steps each way inside the gate."""
    for step in (DeckMap(ball, g0, p), DeckMap(ball, p, g0)):
        x = g0
        for _ in range(2):
            x = step(x)
            if x is None or x not in members:
                return False
    return True


def _commute(ball, g0, p, e):
    pe, ep = DeckMap(ball, g0, p)(e), DeckMap(ball, g0, e)(p)
    return None if pe is None or ep is None else pe == ep


def _power_check(ball, g0, p, e, limit):
    """Is the deck map g0 -> e a power of g0 -> p?  ``None`` when the window runs out.

    Non-commuting elements are never powers of a common element, which
    settles most cases without leaving the neighbourhood of g0.
    """
    pe, ep = DeckMap(ball, g0, p)(e), DeckMap(ball, g0, e)(p)
    if pe is not None and ep is not None and pe != ep:
        return False
    forward = DeckMap(ball, g0, p)
    backward = DeckMap(ball, p, g0)
    unknown = False
    for step in (forward, backward):
        x = g0
        for _ in range(limit):
            x = step(x)
            if x is None:
                unknown = True
                break
            if x == e:
                return True
    return None if unknown else False


def analyze_stabilizer(W: TreeWindow, constraints, gate: VertexSet, reliable: bool = True,
                       search_radius: Optional[int] = None, max_classes: int = 256) -> PathStabilizerApprox:
    """Deck transformations of the root chamber preserving every constrained path."""
    constraints = tuple(tuple(_strip(W, s).index for s in path) for path in constraints)
    ball = W.root.ball
    members = gate.members
    layer = ball.layer
    g0 = min(members, key=lambda v: (layer[v], v))
    dist = ball.complex.distances_from(g0)
    r = W.radius // 2 if search_radius is None else search_radius
    cands = sorted((v for v in members if v != g0 and ball.proj(v) == ball.proj(g0) and dist[v] <= r),
                   key=lambda v: (dist[v], v))
    elements, undetermined = [], 0
    for z in cands:
        res = _preserves_all(W, constraints, g0, z)
        if res is True:
            elements.append(z)
        elif res is None:
            undetermined += 1
    bounded = not (members & ball.boundary)
    quotient = None
    if elements or not bounded:
        quotient = _quotient(W, constraints, members, g0, max_classes)
        # every identification made while closing the quotient is a group element
        found = set(elements)
        for rep, x in quotient.identifications:
            img = DeckMap(ball, rep, x)(g0)
            if img is not None and img != g0 and img in members:
                found.add(img)
        elements = sorted(found, key=lambda v: (dist[v], v))
    witness = None
    primitive = None
    if not elements:
        verdict = "trivial" if bounded and reliable and undetermined == 0 else "undecided"
    else:
        primitive = elements[0]
        verdict = "cyclic"
        for e in elements[1:]:
            res = _power_check(ball, g0, primitive, e, 2 * int(dist[e]) + 2)
            if res is False:
                verdict = "higher"
                witness = {"basepoint": g0, "primitive": primitive, "independent": e,
                           "commute": _commute(ball, g0, primitive, e)}
                break
            if res is None:
                verdict = "undecided"
    if verdict == "trivial":
        quotient = _trivial_quotient(ball, members)
    if verdict == "cyclic" and not (quotient.complete and _two_ended(ball, g0, primitive, members)):
        verdict = "undecided"
    complete = quotient is not None and quotient.complete and undetermined == 0 and reliable
    gens = (primitive,) if verdict == "cyclic" else tuple(elements)
    return PathStabilizerApprox(constraints, gate, g0, gens, primitive,
                                None if quotient is None else quotient.diameter, verdict, complete, reliable,
                                undetermined, witness, quotient)


def _graph_diameter(n, edges):
    adj = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    best = 0
    for s in range(n):
        dist = {s: 0}
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        best = max(best, max(dist.values()))
    return best


def _trivial_quotient(ball, members):
    order = sorted(members)
    cls = {v: i for i, v in enumerate(order)}
    return _assemble_quotient(ball, cls, order, members, True)


def _quotient(W, constraints, members, g0, max_classes):
    """Gate vertices modulo the full window stabilizer, classified layer by layer.

    A layer that creates no new class closes the quotient: every neighbour
    of a representative has then been classified.
    """
    ball = W.root.ball
    adj = ball.complex.adjacency()
    reps = [g0]
    cls = {g0: 0}
    pairs = []
    frontier = [g0]
    complete = False
    extra = False
    while frontier:
        nxt = sorted({w for u in frontier for w in adj[u] if w in members and w not in cls})
        fresh = False
        for x in nxt:
            found = None
            for ci, rep in enumerate(reps):
                if ball.proj(rep) == ball.proj(x) and _preserves_all(W, constraints, rep, x) is True:
                    found = ci
                    break
            if found is None:
                if extra or len(reps) >= max_classes:
                    return _assemble_quotient(ball, cls, reps, members, False, pairs)
                found = len(reps)
                reps.append(x)
                fresh = True
            else:
                pairs.append((reps[found], x))
            cls[x] = found
        if extra:
            break
        if nxt and not fresh:
            complete = True
            extra = True  # one more layer so every square corner is classified
        if not nxt:
            complete = True
            break
        frontier = nxt
    return _assemble_quotient(ball, cls, reps, members, complete, pairs)


def _assemble_quotient(ball, cls, reps, members, complete, pairs=()):
    base = ball.base
    edge_keys = {}

    def edge_key(i, D, j):
        a, b = (i, D), (j, rev(D))
        return min(a, b)

    for i, rep in enumerate(reps):
        for D, w in sorted(ball.steps[rep].items()):
            if w in members and w in cls:
                k = edge_key(i, D, cls[w])
                if k not in edge_keys:
                    tail, d = k
                    head = cls[w] if (i, D) == k else i
                    edge_keys[k] = (tail, head, d)
    keys = sorted(edge_keys)
    index = {k: n for n, k in enumerate(keys)}
    edges = tuple((edge_keys[k][0], edge_keys[k][1], base.edge_ids[edge_keys[k][2][0]], edge_keys[k][2][1])
                  for k in keys)
    squares = set()
    for i, rep in enumerate(reps):
        for rec in ball.complex.corner_records(rep):
            sq = ball.complex.squares[rec.square]
            if not all(c in members and c in cls for c in sq.corners):
                continue
            sides = []
            for d in sq.sides:
                u, v = ball.complex.edges[d[0]]
                k = edge_key(cls[u], ball.projection.edge_map[d[0]], cls[v])
                sides.append(index.get(k, -1))
            squares.add(tuple(sorted(sides)))
    squares = tuple(sorted(squares))
    diam = _graph_diameter(len(reps), [(a, b) for a, b, _, _ in edges]) if reps else 0
    q = Quotient(len(reps), tuple(reps), tuple((a, b, eid) for a, b, eid, _ in edges), squares, diam, complete,
                 tuple(pairs))
    q.key = _quotient_key(ball, reps, edges, squares)
    return q


def _quotient_key(ball, reps, edges, squares):
    """Canonical certificate of the quotient together with its map to the vertex space."""
    base = ball.base
    colors, arcs = [], []
    for rep in reps:
        colors.append("v:" + label_token(base.labels[ball.proj(rep)]))
    off = len(colors)
    for k, (a, b, eid, sign) in enumerate(edges):
        colors.append("e:" + eid)
        t, h = (a, b) if sign > 0 else (b, a)
        arcs.append((off + k, t, "t"))
        arcs.append((off + k, h, "h"))
    off2 = len(colors)
    for k, sides in enumerate(squares):
        colors.append("s")
        for e in sides:
            if e >= 0:
                arcs.append((off2 + k, off + e, "side"))
    return canon.canonical_form(colors, arcs)


def path_stabilizer(W: TreeWindow, path, search_radius: Optional[int] = None) -> PathStabilizerApprox:
    pg = path_gate(W, path)
    st = analyze_stabilizer(W, [path], pg.members, pg.reliable and pg.cross_check is not False, search_radius)
    log.debug("path %s: gate %d, verdict %s, classes %s", list(st.paths[0]), len(pg.members), st.cyclic_verdict,
              None if st.quotient is None else st.quotient.classes)
    return st


# ---------------------------------------------------------------------------
# cyclonormality


def _parse_mode(mode):
    if mode == "edges":
        return 1
    if isinstance(mode, int):
        n = mode
    elif isinstance(mode, str) and mode.startswith("paths:"):
        try:
            n = int(mode.split(":", 1)[1])
        except ValueError as exc:
            raise InputError(f"bad mode {mode!r}") from exc
    elif isinstance(mode, tuple) and len(mode) == 2 and mode[0] == "paths":
        n = int(mode[1])
    else:
        raise InputError(f"bad mode {mode!r}; use 'edges' or 'paths:N'")
    if n < 1:
        raise InputError("path length must be at least 1")
    return n


@dataclass
class CyclonormalReport:
    mode: str
    length: int
    rows: list  # dicts: vertex, kind, paths, verdict, witness
    verdict: str  # pass | fail | undecided

    @property
    def counts(self):
        out = {v: 0 for v in VERDICTS}
        for row in self.rows:
            out[row["verdict"]] += 1
        return out

    def table(self):
        return [(r["vertex"], r["kind"], tuple(map(tuple, r["paths"])), r["verdict"]) for r in self.rows]

    def as_dict(self):
        return {"mode": self.mode, "length": self.length, "verdict": self.verdict, "counts": self.counts,
                "rows": self.rows}


def _chain_gate(W, gates):
    """A1 pitchfork A2 pitchfork ... computed with gate arrays in the root chamber."""
    ball = W.root.ball
    cur = set(gates[-1])
    for S in reversed(gates[:-1]):
        E = Elevation("", "", (min(S), 0), {v: 0 for v in S})
        arr = W.gate_array(ball, E)
        cur = {int(arr[x]) for x in cur}
        W._gates.pop(id(E), None)
    return VertexSet(frozenset(cur), "convex")


def check_cyclonormal(G: GraphOfComplexes, mode="edges", depth_bound: int = 2, radius: int = 8,
                      coset_cap: int = 6, triples: bool = True) -> CyclonormalReport:
    """Pairwise and triple intersections of path stabilizers, per root vertex."""
    n = _parse_mode(mode)
    if n > depth_bound:
        raise PreconditionError(f"path length {n} exceeds depth bound {depth_bound}")
    rows = []
    for v in G.vertices:
        W = tree_window(G, v, n, radius, coset_cap)
        paths = W.paths(n)
        gates = {}
        for p in paths:
            pg = path_gate(W, p)
            gates[p] = (pg.members.members, pg.reliable and pg.cross_check is not False)
        families = {}
        for p in paths:
            families.setdefault(tuple((W.strips[s].edge, W.strips[s].side) for s in p), []).append(p)
        for fam in families.values():
            for a, b in itertools.combinations(fam, 2):
                rows.append(_row(W, v, "pair", (a, b), gates))
                if not triples:
                    continue
                for s in paths:
                    if s not in (a, b):
                        rows.append(_row(W, v, "triple", (s, a, b), gates))
    counts = {k: 0 for k in VERDICTS}
    for row in rows:
        counts[row["verdict"]] += 1
    if counts["higher"]:
        verdict = "fail"
    elif counts["undecided"] > counts["trivial"] + counts["cyclic"]:
        verdict = "undecided"
    else:
        verdict = "pass"
    label = "edges" if mode == "edges" else f"paths:{n}"
    return CyclonormalReport(label, n, rows, verdict)


def _row(W, v, kind, paths, gates):
    gate = _chain_gate(W, [gates[p][0] for p in paths])
    reliable = all(gates[p][1] for p in paths)
    st = analyze_stabilizer(W, paths, gate, reliable)
    log.debug("%s %s at %s: gate %d, verdict %s", kind, [list(q) for q in paths], v, len(gate), st.cyclic_verdict)
    return {"vertex": v, "kind": kind, "paths": [list(p) for p in paths], "verdict": st.cyclic_verdict,
            "gate_size": len(gate), "generators": list(st.generators[:8]), "witness": st.witness}


# ---------------------------------------------------------------------------
# triple quasilines


@dataclass
class TripleQuasiline:
    verdict: str
    stabilizer: PathStabilizerApprox
    quasiline: object = None  # Quasiline when cyclic and large enough
    note: Optional[str] = None


def translate_strip(W: TreeWindow, sidx: int, anchor: int, image: int) -> Strip:
    """Image of a root strip under the deck map anchor -> image, as a root strip when enumerated."""
    s = W.strips[sidx]
    if s.parent != 0:
        raise PreconditionError("translate_strip works on root strips")
    ball = W.root.ball
    g = DeckMap(ball, anchor, image)
    p = int(W.gate_array(ball, s.upper)[anchor])
    gp = g(p)
    if gp is None:
        raise WindowTooSmall("translate leaves the window")
    y = s.upper.pairs[p]
    for t in W.root.strips:
        u = W.strips[t]
        if (u.edge, u.side) == (s.edge, s.side) and u.upper.pairs.get(gp) == y:
            return u
    E = W._grow(ball, s.edge, s.side, (gp, y))
    W._check_convex(ball, E)
    return Strip(-1, s.edge, s.side, 0, E)


def triple_quasiline(W: TreeWindow, e: int, f: int, anchor: int, image: int, min_periods: int = 8):
    """Gate of e, f and g(f) in the root chamber, packaged as a quasiline when cyclic."""
    from .quasiline import validate_quasiline

    if preserves(W, [f], anchor, image):
        raise PreconditionError("the translate stabilizes the f-strip")
    gf = translate_strip(W, f, anchor, image)
    sets = [W.strips[e].upper.members, W.strips[f].upper.members, gf.upper.members]
    gate = _chain_gate(W, sets)
    st = analyze_stabilizer(W, [[W.strips[e]], [W.strips[f]], [gf]], gate)
    if st.cyclic_verdict != "cyclic":
        return TripleQuasiline(st.cyclic_verdict, st)
    ball = W.root.ball
    try:
        phi = deck_search(ball, {st.basepoint: st.primitive})
        Q = validate_quasiline(ball, gate, phi, min_periods)
    except (WindowTooSmall, MFError) as exc:
        return TripleQuasiline("cyclic", st, None, str(exc))
    return TripleQuasiline("cyclic", st, Q)


# ---------------------------------------------------------------------------
# stature probe


@dataclass
class BudgetValue:
    value: object
    status: str  # computed | empirical | caller-supplied | symbolic | omitted

    def as_dict(self):
        return {"value": self.value, "status": self.status}


@dataclass
class StatureBudget:
    S: BudgetValue
    Q: BudgetValue
    m: BudgetValue
    L: BudgetValue
    M: BudgetValue
    B: BudgetValue
    R: BudgetValue
    T: BudgetValue
    P: BudgetValue
    h: BudgetValue
    notes: list = field(default_factory=list)

    def as_dict(self):
        out = {k: getattr(self, k).as_dict() for k in ("S", "Q", "m", "L", "M", "B", "R", "T", "P", "h")}
        out["notes"] = list(self.notes)
        return out


@dataclass
class StatureReport:
    tallies: dict  # L -> number of classes seen on paths of length <= L
    classes: list  # one dict per class: id, first length, witness path, quotient
    stabilized: bool
    stabilization_length: Optional[int]
    budget: Optional[StatureBudget]
    caveats: list
    verdict_counts: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "tallies": {str(k): v for k, v in self.tallies.items()},
            "classes": self.classes,
            "stabilized": self.stabilized,
            "stabilization_length": self.stabilization_length,
            "budget": None if self.budget is None else self.budget.as_dict(),
            "caveats": list(self.caveats),
            "verdict_counts": {str(k): v for k, v in self.verdict_counts.items()},
        }


def _cert_digest(key):
    return hashlib.sha256(repr(key).encode()).hexdigest()[:16]


def stature_probe(G: GraphOfComplexes, base_vertex, L_max: int, radius: int = 6, coset_cap: int = 5,
                  plateau: int = 2, search_radius: Optional[int] = None, budget_triples: int = 12,
                  supplied: Optional[dict] = None) -> StatureReport:
    """Tally quotient classes of infinite path stabilizers by path length."""
    if L_max < 0:
        raise PreconditionError("L_max must be non-negative")
    if L_max == 0:
        return StatureReport({}, [], False, None, None, ["L_max is 0: no paths probed, no stabilization claim"])
    W = tree_window(G, base_vertex, L_max, radius, coset_cap)
    seen = {}
    classes = []
    tallies = {}
    counts = {}
    caveats = []
    max_diam = 0
    for L in range(1, L_max + 1):
        per = {v: 0 for v in VERDICTS}
        for path in W.paths(L):
            st = path_stabilizer(W, path, search_radius)
            per[st.cyclic_verdict] += 1
            if st.cyclic_verdict in ("cyclic", "higher") and st.quotient is not None:
                if not st.quotient.complete:
                    per.setdefault("incomplete_quotients", 0)
                    per["incomplete_quotients"] += 1
                key = st.quotient.key
                if key not in seen:
                    seen[key] = len(classes)
                    classes.append({"id": len(classes), "certificate": _cert_digest(key), "first_length": L,
                                    "witness_path": list(path), "verdict": st.cyclic_verdict,
                                    "quotient": st.quotient.as_dict()})
                max_diam = max(max_diam, st.quotient.diameter)
        tallies[L] = len(seen)
        counts[L] = per
    stable_from = L_max
    while stable_from > 1 and tallies[stable_from - 1] == tallies[L_max]:
        stable_from -= 1
    stabilized = L_max - stable_from >= plateau
    if W.truncated:
        caveats.append(f"coset fan-out capped at {coset_cap}: counts cover enumerated paths only")
    undecided = sum(c["undecided"] for c in counts.values())
    if undecided:
        caveats.append(f"{undecided} path stabilizers undecided within radius {radius}")
    incomplete = sum(c.get("incomplete_quotients", 0) for c in counts.values())
    if incomplete:
        caveats.append(f"{incomplete} quotients did not close inside the window")
    if not stabilized:
        caveats.append(f"tallies not constant over the last {plateau} lengths up to L={L_max}: "
                       "no stabilization observed inside the window")
    caveats.append("classes are bucketed by quotient complex together with its map to the vertex space")
    budget = stature_budget(W, max_diam, budget_triples, supplied)
    caveats.extend(budget.notes)
    return StatureReport(tallies, classes, stabilized, stable_from if stabilized else None, budget, caveats, counts)


def stature_budget(W: TreeWindow, path_diam: int = 0, max_triples: int = 12,
                   supplied: Optional[dict] = None) -> StatureBudget:
    """Constants for the stature bound, from triple quasilines in the root chamber."""
    from .quasiline import classify_hyperplanes, commensurate, quasiline_constants

    supplied = dict(supplied or {})
    notes = []
    root = W.root
    strips = list(root.strips)
    triples = []
    for f, f2 in itertools.combinations(strips, 2):
        sf, sf2 = W.strips[f], W.strips[f2]
        if (sf.edge, sf.side) != (sf2.edge, sf2.side):
            continue
        for e in strips:
            if e not in (f, f2):
                triples.append((e, f, f2))
    triples = triples[:max_triples]
    S = 0
    quasilines = {}
    for e, f, f2 in triples:
        gate = _chain_gate(W, [W.strips[k].upper.members for k in (e, f, f2)])
        st = analyze_stabilizer(W, [[e], [f], [f2]], gate)
        if st.quotient_diam is not None and st.cyclic_verdict in ("cyclic", "higher"):
            S = max(S, st.quotient_diam)
        if st.cyclic_verdict != "cyclic" or gate.members in quasilines:
            continue
        from .quasiline import validate_quasiline

        try:
            phi = deck_search(root.ball, {st.basepoint: st.primitive})
            quasilines[gate.members] = validate_quasiline(root.ball, gate, phi)
        except MFError as exc:
            notes.append(f"triple {e},{f},{f2}: no quasiline ({exc})")
    if not triples:
        notes.append("no triple gates in the root chamber: S taken from path stabilizer quotients")
        S = path_diam
    B0s, Ms, hs, Ls = [], [], [], []
    for Q in quasilines.values():
        try:
            classes = classify_hyperplanes(Q)
            consts = quasiline_constants(Q, classes)
        except MFError as exc:
            notes.append(f"quasiline constants unavailable ({exc})")
            continue
        B0s.append(consts.B0)
        Ms.append(consts.M)
        hs.append(consts.h)
        dual = {H.id: len(H.dual_edges) for H in compute_hyperplanes(Q.window)}
        Ls.append(max((dual[c.hyperplane] for c in classes if c.kind == "essential"), default=0))
    Qb, m = None, 1
    qs = list(quasilines.values())
    for Q1, Q2 in itertools.combinations(qs, 2):
        res = commensurate(Q1, Q2, S)
        if res.related:
            m = math.lcm(m, abs(res.d1))
        else:
            Qb = max(Qb or 0, res.projection_diam)
    val = {}
    val["S"] = BudgetValue(S, "empirical")
    val["Q"] = BudgetValue(Qb if Qb is not None else S, "empirical")
    val["m"] = BudgetValue(m, "empirical" if qs else "omitted")
    val["L"] = BudgetValue(max(Ls, default=0), "computed" if qs else "omitted")
    val["M"] = BudgetValue(max(Ms, default=0), "computed" if Ms else "omitted")
    val["h"] = BudgetValue(max(hs, default=0), "computed" if hs else "omitted")
    for k, v in supplied.items():
        if k in ("S", "Q", "m", "L", "M", "h", "B"):
            val[k] = BudgetValue(int(v), "caller-supplied")
    if "B" not in val:
        B = max([*B0s, 2 * val["S"].value, 2 * val["Q"].value])
        val["B"] = BudgetValue(B, "computed" if B0s else "empirical")
    B, h = val["B"].value, val["h"].value
    R = 3 * B * (h + 1) + h
    val["R"] = BudgetValue(R, "computed")
    E = max((len(W.gog.edge_spaces[e].edges) for e, _ in W.gog.ends_at(root.vertex)), default=0)
    if E <= 1 or R * math.log2(E) <= T_BIT_LIMIT:
        T = E ** R
        val["T"] = BudgetValue(T, "computed")
        val["P"] = BudgetValue((T + 1) * R, "computed")
    else:
        val["T"] = BudgetValue(f"{E}^{R}", "symbolic")
        val["P"] = BudgetValue(None, "omitted")
        notes.append(f"T = {E}^{R} exceeds {T_BIT_LIMIT} bits: reported symbolically, P omitted")
    if B > 10 ** 6:
        raise OverflowBudget(f"B = {B} overflows the budget (factor B0 or S)")
    return StatureBudget(notes=notes, **val)

