"""Deterministic example complexes and graphs of complexes.

Every generator returns plain JSON-ready dictionaries in the on-disk schema,
so ``fileio.build_*`` turns them into library objects and ``fileio.write_fixture``
writes them out unchanged.  Graphs of complexes embed their pieces inline.
"""
from __future__ import annotations

from .errors import InputError


def grid(m: int = 2, n: int = 2) -> dict:
    """The m-by-n square grid, vertices ``[i, j]`` with 0 <= i <= m, 0 <= j <= n."""
    if m < 0 or n < 0:
        raise InputError("grid dimensions must be non-negative")
    vertices = [[i, j] for i in range(m + 1) for j in range(n + 1)]
    edges = []
    for i in range(m + 1):
        for j in range(n + 1):
            if i < m:
                edges.append([[i, j], [i + 1, j]])
            if j < n:
                edges.append([[i, j], [i, j + 1]])
    squares = [[[i, j], [i + 1, j], [i, j + 1], [i + 1, j + 1]] for i in range(m) for j in range(n)]
    return {"name": f"grid{m}{n}", "vertices": vertices, "edges": edges, "squares": squares}


def line() -> dict:
    """A circle with one vertex and one loop; its universal cover is the line."""
    return {"name": "line", "vertices": ["o"], "edges": [{"id": "a", "ends": ["o", "o"]}], "squares": []}


def ladder() -> dict:
    """Two circles joined by a rung square; the universal cover is a width-1 strip."""
    return {
        "name": "ladder",
        "vertices": ["u", "w"],
        "edges": [
            {"id": "a", "ends": ["u", "u"]},
            {"id": "b", "ends": ["w", "w"]},
            {"id": "r", "ends": ["u", "w"]},
        ],
        "squares": [{"corners": ["u", "u", "w", "w"], "sides": [["a", 1], ["r", 1], ["r", 1], ["b", 1]]}],
    }


def comb(tooth: int = 1) -> dict:
    """A circle with a pendant path of ``tooth`` edges; its cover is a comb."""
    if tooth < 1:
        raise InputError("tooth length must be at least 1")
    vertices = ["u"] + [f"p{k}" for k in range(1, tooth + 1)]
    edges = [{"id": "a", "ends": ["u", "u"]}]
    prev = "u"
    for k in range(1, tooth + 1):
        edges.append({"id": f"t{k}", "ends": [prev, f"p{k}"]})
        prev = f"p{k}"
    return {"name": f"comb{tooth}", "vertices": vertices, "edges": edges, "squares": []}


def torus() -> dict:
    return {
        "name": "torus",
        "vertices": ["o"],
        "edges": [{"id": "a", "ends": ["o", "o"]}, {"id": "b", "ends": ["o", "o"]}],
        "squares": [{"corners": ["o", "o", "o", "o"], "sides": [["a", 1], ["b", 1], ["b", 1], ["a", 1]]}],
    }


def klein() -> dict:
    """One square whose top is glued to its bottom with a flip."""
    return {
        "name": "klein",
        "vertices": ["o"],
        "edges": [{"id": "a", "ends": ["o", "o"]}, {"id": "b", "ends": ["o", "o"]}],
        "squares": [{"corners": ["o", "o", "o", "o"], "sides": [["a", 1], ["b", 1], ["b", 1], ["a", -1]]}],
    }


def torus_grid(k: int = 3) -> dict:
    """The torus subdivided into a k-by-k grid of squares."""
    if k < 2:
        raise InputError("torus_grid needs k >= 2")
    vertices = [[i, j] for i in range(k) for j in range(k)]
    edges, squares = [], []

    def h(i, j):
        return f"h{i}_{j}"

    def v(i, j):
        return f"v{i}_{j}"

    for i in range(k):
        for j in range(k):
            edges.append({"id": h(i, j), "ends": [[i, j], [(i + 1) % k, j]]})
            edges.append({"id": v(i, j), "ends": [[i, j], [i, (j + 1) % k]]})
    for i in range(k):
        for j in range(k):
            i1, j1 = (i + 1) % k, (j + 1) % k
            squares.append({
                "corners": [[i, j], [i1, j], [i, j1], [i1, j1]],
                "sides": [[h(i, j), 1], [v(i, j), 1], [v(i1, j), 1], [h(i, j1), 1]],
            })
    return {"name": f"torus_grid{k}", "vertices": vertices, "edges": edges, "squares": squares}


def cube_corner() -> dict:
    """Three squares around a vertex with the 3-cube left out (link has an empty triangle)."""
    vertices = list(range(7))
    faces = [(0, 1, 2, 3), (0, 1, 4, 5), (0, 2, 4, 6)]
    edges = set()
    for f in faces:
        v00, v10, v01, v11 = f
        edges.update({(v00, v10), (v00, v01), (v10, v11), (v01, v11)})
    return {"name": "cube_corner", "vertices": vertices,
            "edges": [list(e) for e in sorted(edges)], "squares": [list(f) for f in faces]}


def solid_cube() -> dict:
    vertices = list(range(8))
    edges = [[a, a | (1 << k)] for a in range(8) for k in range(3) if not a & (1 << k)]
    faces = [(0, 1, 2, 3), (4, 5, 6, 7), (0, 1, 4, 5), (2, 3, 6, 7), (0, 2, 4, 6), (1, 3, 5, 7)]
    return {"name": "cube", "vertices": vertices, "edges": edges,
            "squares": [list(f) for f in faces], "cubes3": [list(range(8))]}


def double_square() -> dict:
    """Two squares on the same four boundary edges."""
    spec = grid(1, 1)
    spec["name"] = "double_square"
    spec["squares"] = spec["squares"] * 2
    return spec


def circle(name="circle", edge="c") -> dict:
    return {"name": name, "vertices": ["o"], "edges": [{"id": edge, "ends": ["o", "o"]}], "squares": []}


def rose() -> dict:
    """Wedge of two circles a and b."""
    return {"name": "rose", "vertices": ["o"],
            "edges": [{"id": "a", "ends": ["o", "o"]}, {"id": "b", "ends": ["o", "o"]}], "squares": []}


def double_cover_a() -> dict:
    """Connected double cover of the rose unwrapping the a-circle."""
    return {
        "name": "rose_cover_a",
        "vertices": [0, 1],
        "edges": [
            {"id": "a0", "ends": [0, 1]},
            {"id": "a1", "ends": [1, 0]},
            {"id": "b0", "ends": [0, 0]},
            {"id": "b1", "ends": [1, 1]},
        ],
        "squares": [],
    }


def _circle_map(target, edge):
    return {"source": "circle", "target": target, "vertex_map": {"o": "o"}, "edge_map": {"c": edge}}


def tori_gog() -> dict:
    """Two tori glued along a coordinate circle of each."""
    return {
        "name": "tori_gog",
        "graph": {"vertices": ["v1", "v2"], "edges": [["v1", "v2", "e"]]},
        "vertex_spaces": {"v1": torus(), "v2": torus()},
        "edge_spaces": {"e": circle()},
        "attachments": {"e": {"minus": _circle_map("torus", "a"), "plus": _circle_map("torus", "a")}},
    }


def transverse_gog() -> dict:
    """Three tori in a row; the middle one meets its neighbours along different circles."""
    return {
        "name": "transverse_gog",
        "graph": {"vertices": ["v1", "v2", "v3"], "edges": [["v1", "v2", "e1"], ["v2", "v3", "e2"]]},
        "vertex_spaces": {"v1": torus(), "v2": torus(), "v3": torus()},
        "edge_spaces": {"e1": circle(), "e2": circle()},
        "attachments": {
            "e1": {"minus": _circle_map("torus", "a"), "plus": _circle_map("torus", "a")},
            "e2": {"minus": _circle_map("torus", "b"), "plus": _circle_map("torus", "a")},
        },
    }


def circles_gog() -> dict:
    """Two circles joined by a circle: a torus presented as a graph of graphs."""
    return {
        "name": "circles_gog",
        "graph": {"vertices": ["v1", "v2"], "edges": [["v1", "v2", "e"]]},
        "vertex_spaces": {"v1": circle("circle1", "x"), "v2": circle("circle2", "y")},
        "edge_spaces": {"e": circle()},
        "attachments": {"e": {"minus": _circle_map("circle1", "x"), "plus": _circle_map("circle2", "y")}},
    }


def loop_gog() -> dict:
    """A torus with an HNN-style loop edge along the a-circle."""
    return {
        "name": "loop_gog",
        "graph": {"vertices": ["v"], "edges": [["v", "v", "e"]]},
        "vertex_spaces": {"v": torus()},
        "edge_spaces": {"e": circle()},
        "attachments": {"e": {"minus": _circle_map("torus", "a"), "plus": _circle_map("torus", "b")}},
    }


def collapse_gog() -> dict:
    """An attachment that crushes the edge circle to a point."""
    spec = tori_gog()
    spec["name"] = "collapse_gog"
    spec["attachments"]["e"]["minus"] = {"source": "circle", "target": "torus",
                                         "vertex_map": {"o": "o"}, "edge_map": {"c": None}}
    return spec


def cover_map(target="rose", images=None):
    images = images or {"a0": "a", "a1": "a", "b0": "b", "b1": "b"}
    return {"source": "rose_cover_a", "target": target, "vertex_map": {"0": "o", "1": "o"}, "edge_map": images}


def index2_gog() -> dict:
    """A rose and a double cover of it joined along that double cover.

    The edge group is an index-two (hence normal) free subgroup of rank
    three, so it meets each of its conjugates in a rank-three group.
    """
    identity = {"source": "rose_cover_a", "target": "rose_cover_a",
                "vertex_map": {"0": 0, "1": 1}, "edge_map": {"a0": "a0", "a1": "a1", "b0": "b0", "b1": "b1"}}
    return {
        "name": "index2_gog",
        "graph": {"vertices": ["v", "w"], "edges": [["v", "w", "e"]]},
        "vertex_spaces": {"v": rose(), "w": double_cover_a()},
        "edge_spaces": {"e": double_cover_a()},
        "attachments": {"e": {"minus": cover_map(), "plus": identity}},
    }


def identity_gog() -> dict:
    """Edge space equal to the vertex space on both ends."""
    ident = {"source": "torus", "target": "torus", "vertex_map": {"o": "o"}, "edge_map": {"a": "a", "b": "b"}}
    return {
        "name": "identity_gog",
        "graph": {"vertices": ["v1", "v2"], "edges": [["v1", "v2", "e"]]},
        "vertex_spaces": {"v1": torus(), "v2": torus()},
        "edge_spaces": {"e": torus()},
        "attachments": {"e": {"minus": ident, "plus": dict(ident)}},
    }


def wise_gog() -> dict:
    from .wise import wise_gog as build

    return build()


COMPLEXES = {
    "grid": grid, "line": line, "ladder": ladder, "comb": comb, "torus": torus, "klein": klein,
    "torus_grid": torus_grid, "cube_corner": cube_corner, "cube": solid_cube,
    "double_square": double_square, "circle": circle, "rose": rose, "rose_cover_a": double_cover_a,
}
GOGS = {
    "tori_gog": tori_gog, "transverse_gog": transverse_gog, "circles_gog": circles_gog,
    "loop_gog": loop_gog, "collapse_gog": collapse_gog, "index2_gog": index2_gog,
    "identity_gog": identity_gog, "wise_gog": wise_gog,
}


def generate_fixture(name: str, *params):
    if name in COMPLEXES:
        return COMPLEXES[name](*params)
    if name in GOGS:
        return GOGS[name](*params)
    raise InputError(f"unknown fixture {name!r}")
