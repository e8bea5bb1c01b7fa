"""Canonical labeling of small coloured graphs by refinement and backtracking.

Nodes carry a colour; arcs are directed and coloured.  Two graphs receive
the same certificate exactly when an isomorphism preserves node colours,
arc colours and arc directions.
"""
from __future__ import annotations


def _refine(cells, n, out_arcs, in_arcs):
    """Split ordered cells until every node's neighbourhood profile is constant per cell."""
    while True:
        where = [0] * n
        for ci, cell in enumerate(cells):
            for v in cell:
                where[v] = ci
        new_cells = []
        changed = False
        for cell in cells:
            if len(cell) == 1:
                new_cells.append(cell)
                continue
            groups = {}
            for v in cell:
                sig = (tuple(sorted((c, where[w]) for w, c in out_arcs[v])),
                       tuple(sorted((c, where[w]) for w, c in in_arcs[v])))
                groups.setdefault(sig, []).append(v)
            if len(groups) > 1:
                changed = True
            for sig in sorted(groups):
                new_cells.append(groups[sig])
        cells = new_cells
        if not changed:
            return cells


def canonical_form(colors, arcs):
    """Certificate ``(node colours in canonical order, sorted relabelled arcs)``.

    ``colors`` is a list of strings, ``arcs`` a list of ``(tail, head, colour)``.
    """
    n = len(colors)
    colors = [str(c) for c in colors]
    arcs = [(int(a), int(b), str(c)) for a, b, c in arcs]
    out_arcs = [[] for _ in range(n)]
    in_arcs = [[] for _ in range(n)]
    for a, b, c in arcs:
        out_arcs[a].append((b, c))
        in_arcs[b].append((a, c))
    start = [[v for v in range(n) if colors[v] == col] for col in sorted(set(colors))]
    best = None

    def certificate(order):
        pos = {v: i for i, v in enumerate(order)}
        return (tuple(colors[v] for v in order), tuple(sorted((pos[a], pos[b], c) for a, b, c in arcs)))

    def search(cells):
        nonlocal best
        cells = _refine(cells, n, out_arcs, in_arcs)
        target = next((i for i, cell in enumerate(cells) if len(cell) > 1), None)
        if target is None:
            cert = certificate([cell[0] for cell in cells])
            if best is None or cert < best:
                best = cert
            return
        for v in sorted(cells[target]):
            rest = [w for w in cells[target] if w != v]
            search(cells[:target] + [[v], rest] + cells[target + 1:])

    if n:
        search(start)
    else:
        best = ((), tuple(sorted(arcs)))
    return best
