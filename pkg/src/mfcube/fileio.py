"""Reading and writing complex, map and graph-of-complexes files."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .cubecore import CubeComplex, build_complex, complex_to_spec, make_map
from .errors import InputError, MalformedMap


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def load_json(source):
    """Accept a dict, a path, or a JSON string."""
    if isinstance(source, dict):
        return source
    path = Path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise InputError(f"no such file: {source}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{source}: invalid JSON ({exc})") from exc


def digest(source) -> str:
    if isinstance(source, dict):
        data = canonical_json(source).encode()
    else:
        data = Path(source).read_bytes()
    return hashlib.sha256(data).hexdigest()


def read_complex(source) -> CubeComplex:
    return build_complex(load_json(source))


def write_complex(X: CubeComplex, path) -> None:
    Path(path).write_text(canonical_json(complex_to_spec(X)), encoding="utf-8", newline="\n")


def label_token(label) -> str:
    """String form of a vertex label as used for JSON object keys."""
    if isinstance(label, tuple):
        return json.dumps(list(label))
    return str(label)


def _lookup_vertex(X: CubeComplex, raw, where):
    if isinstance(raw, list):
        raw = tuple(raw)
    if raw in X.index:
        return X.index[raw]
    if isinstance(raw, str):
        for lab, i in X.index.items():
            if label_token(lab) == raw:
                return i
    raise MalformedMap(f"{where}: unknown vertex {raw!r} in {X.name!r}")


def _lookup_edge(X: CubeComplex, raw, where):
    key = str(raw)
    if key not in X.edge_ids:
        raise MalformedMap(f"{where}: unknown edge {raw!r} in {X.name!r}")
    return X.edge_ids.index(key)


def build_map(spec: dict, source: CubeComplex, target: CubeComplex):
    """Resolve a map file against its source and target complexes.

    Edge images are an edge id, ``[id, sign]`` or ``null`` for a collapsed
    edge.  A bare id takes whichever orientation matches the endpoints.
    """
    vmap_raw = spec.get("vertex_map")
    emap_raw = spec.get("edge_map", {})
    if not isinstance(vmap_raw, dict) or not isinstance(emap_raw, dict):
        raise MalformedMap("vertex_map and edge_map must be objects")
    vertex_map = [None] * source.n
    for key, value in vmap_raw.items():
        v = _lookup_vertex(source, key, "vertex_map")
        vertex_map[v] = _lookup_vertex(target, value, "vertex_map")
    if any(x is None for x in vertex_map):
        raise MalformedMap("vertex map is not total")
    edge_map = [None] * len(source.edges)
    given = set()
    for key, value in emap_raw.items():
        i = _lookup_edge(source, key, "edge_map")
        given.add(i)
        if value is None:
            continue
        if isinstance(value, list) and len(value) == 2 and value[1] in (1, -1):
            j, sign = _lookup_edge(target, value[0], "edge_map"), value[1]
        else:
            j, sign = _lookup_edge(target, value, "edge_map"), None
        # signs in files refer to the orientations as written there
        flip = (-1 if source.edge_flips[i] else 1) * (-1 if target.edge_flips[j] else 1)
        if sign is None:
            u, v = source.edges[i]
            tu, tv = target.edges[j]
            sign = 1 if (tu, tv) == (vertex_map[u], vertex_map[v]) else -1
            if tu == tv:
                sign = flip
        else:
            sign *= flip
        edge_map[i] = (j, sign)
    if len(given) != len(source.edges):
        raise MalformedMap("edge map is not total")
    return make_map(source, target, vertex_map, edge_map)


def map_to_spec(f) -> dict:
    src, tgt = f.source, f.target

    def lab(X, v):
        x = X.labels[v]
        return list(x) if isinstance(x, tuple) else x

    return {
        "source": src.name,
        "target": tgt.name,
        "vertex_map": {label_token(src.labels[v]): lab(tgt, w) for v, w in enumerate(f.vertex_map)},
        "edge_map": {src.edge_ids[i]: (None if img is None else [
            tgt.edge_ids[img[0]],
            img[1] * (-1 if src.edge_flips[i] else 1) * (-1 if tgt.edge_flips[img[0]] else 1)])
                     for i, img in enumerate(f.edge_map)},
    }


def resolve_gog_spec(source) -> dict:
    """Load a gog file and inline every referenced complex and map file."""
    base = None if isinstance(source, dict) else Path(source).parent
    spec = dict(load_json(source))

    def inline(value):
        if isinstance(value, dict):
            return value
        if base is None:
            raise InputError(f"cannot resolve file reference {value!r} without a base directory")
        return load_json(base / value)

    out = {"name": spec.get("name", "gog"), "graph": spec.get("graph")}
    if not isinstance(out["graph"], dict):
        raise InputError("gog file needs a 'graph' object")
    out["vertex_spaces"] = {k: inline(v) for k, v in (spec.get("vertex_spaces") or {}).items()}
    out["edge_spaces"] = {k: inline(v) for k, v in (spec.get("edge_spaces") or {}).items()}
    atts = {}
    for k, ends in (spec.get("attachments") or {}).items():
        if not isinstance(ends, dict) or set(ends) != {"minus", "plus"}:
            raise InputError(f"attachment {k!r} needs 'minus' and 'plus'")
        atts[k] = {side: inline(v) for side, v in ends.items()}
    out["attachments"] = atts
    return out


def write_fixture(spec: dict, outdir) -> Path:
    """Write a fixture; graphs of complexes are split into one file per piece."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if "graph" not in spec:
        path = outdir / f"{spec['name']}.json"
        path.write_text(canonical_json(spec), encoding="utf-8", newline="\n")
        return path
    name = spec["name"]
    top = {"name": name, "graph": spec["graph"], "vertex_spaces": {}, "edge_spaces": {}, "attachments": {}}
    for group in ("vertex_spaces", "edge_spaces"):
        for key, sub in spec[group].items():
            fname = f"{name}.{group[:-7]}.{key}.json"
            (outdir / fname).write_text(canonical_json(sub), encoding="utf-8", newline="\n")
            top[group][key] = fname
    for key, ends in spec["attachments"].items():
        top["attachments"][key] = {}
        for side, sub in ends.items():
            fname = f"{name}.map.{key}.{side}.json"
            (outdir / fname).write_text(canonical_json(sub), encoding="utf-8", newline="\n")
            top["attachments"][key][side] = fname
    path = outdir / f"{name}.json"
    path.write_text(canonical_json(top), encoding="utf-8", newline="\n")
    return path
