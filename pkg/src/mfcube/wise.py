"""A graph of graphs whose path stabilizers are free of ever larger rank.

Three roses sit on a triangle.  Every edge space is the connected
degree-three cover of the rose in which ``a`` swaps sheets 0 and 1 and
``b`` cycles the sheets.  The minus end attaches by the covering map.  The
plus end attaches by a relabelled covering map onto a different index-three
subgroup.

Following the triangle once, a path stabilizer is intersected with the
transported image of the next edge group.  The relabelling is chosen so
that these conditions never become redundant: the straight path of length
L has a stabilizer of index 3 * 2**(L-1) in the free group of rank two,
hence free of rank 3 * 2**(L-1) + 1.  Distinct ranks give pairwise
non-isomorphic quotient graphs, so tallies keep growing with L.
"""
from __future__ import annotations

from .fixtures import rose

SHEETS = 3
A_PERM = (1, 0, 2)
B_PERM = (1, 2, 0)
# images of the cover's edges under the plus attachment, in edge order a0 a1 a2 b0 b1 b2
TWIST = (("a", 1), ("b", 1), ("a", 1), ("a", -1), ("b", -1), ("b", -1))


def triple_cover() -> dict:
    edges = [{"id": f"a{s}", "ends": [s, A_PERM[s]]} for s in range(SHEETS)]
    edges += [{"id": f"b{s}", "ends": [s, B_PERM[s]]} for s in range(SHEETS)]
    return {"name": "rose_cover3", "vertices": list(range(SHEETS)), "edges": edges, "squares": []}


def _attachment(images) -> dict:
    return {
        "source": "rose_cover3",
        "target": "rose",
        "vertex_map": {str(s): "o" for s in range(SHEETS)},
        "edge_map": dict(zip([f"{g}{s}" for g in "ab" for s in range(SHEETS)], images)),
    }


def covering() -> dict:
    return _attachment([["a", 1]] * SHEETS + [["b", 1]] * SHEETS)


def twisted() -> dict:
    return _attachment([[g, sign] for g, sign in TWIST])


def wise_gog() -> dict:
    vertices = ["v0", "v1", "v2"]
    edges = [[vertices[i], vertices[(i + 1) % 3], f"e{i}"] for i in range(3)]
    return {
        "name": "wise_gog",
        "graph": {"vertices": vertices, "edges": edges},
        "vertex_spaces": {v: rose() for v in vertices},
        "edge_spaces": {e[2]: triple_cover() for e in edges},
        "attachments": {e[2]: {"minus": covering(), "plus": twisted()} for e in edges},
    }

