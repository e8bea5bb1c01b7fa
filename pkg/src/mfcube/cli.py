"""The ``mf`` command line.

Exit codes: 0 pass or complete, 1 input error, 2 verdict fail, 3 undecided outcome.
"""
from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from . import bass_serre as bs
from . import cubecore as cc
from . import fileio, fixtures, gates
from . import quasiline as ql
from .errors import InputError, MFError
from .report import Report, TraceCollector, input_digests

EXIT_PASS, EXIT_INPUT, EXIT_FAIL, EXIT_UNDECIDED = 0, 1, 2, 3
STANDARD_FIXTURES = (
    ("grid", (2, 2)), ("grid", (8, 8)), ("line", ()), ("ladder", ()), ("comb", (1,)), ("torus", ()),
    ("klein", ()), ("tori_gog", ()), ("transverse_gog", ()), ("index2_gog", ()), ("wise_gog", ()),
)


class Outcome:
    """What a command hands back to the report writer."""

    def __init__(self, inputs, config, results, caveats=(), code=EXIT_PASS):
        self.inputs, self.config, self.results = inputs, config, results
        self.caveats, self.code = list(caveats), code


def reporting(fn):
    """Add ``--format`` and ``--trace`` and turn an Outcome into output plus exit code."""

    @click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="json", show_default=True)
    @click.option("--trace", is_flag=True, help="Include proof-search logs in the report.")
    @click.pass_context
    @functools.wraps(fn)
    def wrapper(ctx, fmt, trace, **kwargs):
        with TraceCollector() as collector:
            out = fn(**kwargs)
        command = ctx.command_path.split()[1:]
        rep = Report(command, out.inputs, out.config, out.results, out.caveats,
                     collector.lines if trace else None)
        click.echo(rep.to_json() if fmt == "json" else rep.to_text(), nl=False)
        ctx.exit(out.code)

    return wrapper


# ---------------------------------------------------------------------------
# argument helpers


def _parse_value(raw):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _vertex(X, raw):
    return fileio._lookup_vertex(X, _parse_value(raw) if isinstance(raw, str) else raw, "command line")


def _vertices(X, raws):
    out = []
    for raw in raws:
        value = _parse_value(raw)
        # a JSON list of labels, or one label
        if isinstance(value, list) and value and all(isinstance(v, list) for v in value):
            out.extend(_vertex(X, v) for v in value)
        else:
            out.append(_vertex(X, value))
    return out


def _word(raw):
    return [w for w in raw.replace(" ", "").split(",") if w]


def _label(X, v):
    return X.labels[v]


def _labels(X, vs):
    return sorted((X.labels[v] for v in vs), key=cc.label_key)


def _complex_input(path):
    return fileio.read_complex(path), input_digests([path])


def _gog_path(raw) -> Path:
    p = Path(raw)
    if p.is_dir():
        p = p / f"{p.name}.json"
    elif not p.exists() and p.with_name(p.name + ".json").exists():
        p = p.with_name(p.name + ".json")
    if not p.exists():
        raise InputError(f"no such graph of complexes: {raw}")
    return p


def _gog_input(raw):
    path = _gog_path(raw)
    files = [path]
    top = fileio.load_json(path)
    refs = list((top.get("vertex_spaces") or {}).values()) + list((top.get("edge_spaces") or {}).values())
    for ends in (top.get("attachments") or {}).values():
        if isinstance(ends, dict):
            refs.extend(ends.values())
    files.extend(path.parent / r for r in refs if isinstance(r, str))
    return bs.build_gog(path), input_digests(files)


def _base_vertex(G, raw):
    if raw is None:
        return G.vertices[0]
    if raw not in G.vertices:
        raise InputError(f"unknown graph vertex {raw!r}")
    return raw


def _report_dict(rep):
    return {"ok": rep.ok, "witness": rep.witness, "details": rep.details}


# ---------------------------------------------------------------------------
# complexes


@click.group()
@click.version_option(package_name="artifact")
def cli():
    """Cube complexes, gates, quasilines and Bass-Serre tree windows."""


@cli.command()
@click.argument("file")
@reporting
def validate(file):
    """Check a complex for nonpositive curvature and report whether it is CAT(0)."""
    X, inputs = _complex_input(file)
    npc = cc.validate_npc(X)
    results = {"name": X.name, "vertices": X.n, "edges": len(X.edges), "squares": len(X.squares),
               "cubes": len(X.cubes3), "npc": _report_dict(npc)}
    if npc.ok:
        results["cat0"] = _report_dict(cc.is_cat0(X))
    return Outcome(inputs, {}, results, code=EXIT_PASS if npc.ok else EXIT_FAIL)


@cli.command()
@click.argument("file")
@reporting
def hyperplanes(file):
    """List hyperplanes with their dual edges and carriers."""
    X, inputs = _complex_input(file)
    rows = []
    cat0 = cc.is_cat0(X).ok
    for H in cc.compute_hyperplanes(X):
        row = {"id": H.id, "dual_edges": sorted(X.edge_ids[e] for e in H.dual_edges),
               "carrier": _labels(X, H.carrier), "sided": H.sided, "diameter": cc.hyperplane_diameter(X, H)}
        if cat0 and H.halfspaces:
            row["plus"] = _labels(X, H.plus)
            row["minus"] = _labels(X, H.minus)
        rows.append(row)
    caveats = ["hyperplane diameters are measured in the hyperplane's own dual-edge graph"]
    if not cat0:
        caveats.append("complex is not CAT(0): halfspaces omitted")
    return Outcome(inputs, {}, {"count": len(rows), "hyperplanes": rows}, caveats)


@cli.command()
@click.argument("file")
@click.option("--from", "source", required=True, help="First vertex label.")
@click.option("--to", "target", required=True, help="Second vertex label.")
@reporting
def distance(file, source, target):
    """Combinatorial distance, a geodesic and the separating hyperplanes."""
    X, inputs = _complex_input(file)
    p, q = _vertex(X, source), _vertex(X, target)
    g = cc.geodesic(X, p, q)
    results = {"distance": cc.distance(X, p, q), "geodesic": [_label(X, v) for v in g.vertices],
               "separating_hyperplanes": sorted(cc.separating_hyperplanes(X, p, q))}
    return Outcome(inputs, {}, results)


@cli.command()
@click.argument("file")
@click.option("--set", "-s", "vertices", multiple=True, required=True,
              help="Vertex label, repeatable, or a JSON list of labels.")
@reporting
def hull(file, vertices):
    """Convex hull of a set of vertices."""
    X, inputs = _complex_input(file)
    S = _vertices(X, vertices)
    H = cc.hull(X, S)
    return Outcome(inputs, {}, {"input": _labels(X, S), "size": len(H), "hull": _labels(X, H.members)})


@cli.command()
@click.argument("file")
@reporting
def special(file):
    """Check the hyperplane pathologies; exit 2 with a witness when one occurs."""
    X, inputs = _complex_input(file)
    rep = cc.check_special(X)
    results = {"special": rep.special, "violations": rep.violations(), "hyperplanes": len(rep.per_hyperplane)}
    return Outcome(inputs, {}, results, code=EXIT_PASS if rep.special else EXIT_FAIL)


@cli.command()
@click.argument("file")
@click.option("--radius", "-r", type=int, default=3, show_default=True)
@click.option("--basepoint", default=None, help="Base vertex label (default: first vertex).")
@reporting
def develop(file, radius, basepoint):
    """Develop a ball of the universal cover."""
    X, inputs = _complex_input(file)
    b = 0 if basepoint is None else _vertex(X, basepoint)
    ball = cc.develop_ball(X, b, radius)
    B = ball.complex
    layers = {}
    for v in range(ball.n):
        layers[int(ball.layer[v])] = layers.get(int(ball.layer[v]), 0) + 1
    results = {"vertices": ball.n, "edges": len(B.edges), "squares": len(B.squares), "cubes": len(B.cubes3),
               "boundary": len(ball.boundary), "layers": layers, "cat0": cc.is_cat0(B).ok}
    return Outcome(inputs, {"radius": radius, "basepoint": _label(X, b)}, results)


@cli.command()
@click.argument("file")
@click.option("--vertex", "-x", "vertex", required=True, help="Vertex to project.")
@click.option("--set", "-s", "members", multiple=True, required=True, help="Vertices of the convex target.")
@reporting
def gate(file, vertex, members):
    """Gate (nearest point) of a vertex in a convex set."""
    X, inputs = _complex_input(file)
    Y = gates.convex_set(X, _vertices(X, members))
    res = gates.gate_vertex(X, _vertex(X, vertex), Y)
    results = {"vertex": _label(X, res.source), "gate": _label(X, res.image),
               "distance": cc.distance(X, res.source, res.image)}
    return Outcome(inputs, {"set": _labels(X, Y.members)}, results)


@cli.command()
@click.argument("file")
@click.option("--set-a", "-a", "a_members", multiple=True, required=True, help="Vertices of the first convex set.")
@click.option("--set-b", "-b", "b_members", multiple=True, required=True, help="Vertices of the second convex set.")
@reporting
def bridge(file, a_members, b_members):
    """Pitchforks, connector and product structure between two convex sets."""
    X, inputs = _complex_input(file)
    A = gates.convex_set(X, _vertices(X, a_members))
    B = gates.convex_set(X, _vertices(X, b_members))
    br = gates.bridge(X, A, B)
    laws = gates.bridge_hyperplane_laws(X, A, B)
    results = {
        "a_side": _labels(X, br.a_side.members),
        "b_side": _labels(X, br.b_side.members),
        "connector": _labels(X, br.connector.members),
        "connector_pair": [_label(X, v) for v in br.connector_pair],
        "gap": cc.distance(X, *br.connector_pair),
        "laws": laws,
    }
    return Outcome(inputs, {"a": _labels(X, A.members), "b": _labels(X, B.members)}, results)


# ---------------------------------------------------------------------------
# quasilines


@cli.group("ql")
def ql_group():
    """Quasilines cut out of universal covers by a shift."""


def _quasiline_options(fn):
    fn = click.option("--word", "-w", required=True, help="Shift as comma-separated edges, e.g. 'a' or 'a,b-'.")(fn)
    fn = click.option("--periods", "-p", type=int, default=12, show_default=True)(fn)
    fn = click.option("--slack", type=int, default=0, show_default=True)(fn)
    fn = click.option("--basepoint", default=None)(fn)
    return click.argument("file")(fn)


def _quasiline(file, word, periods, slack, basepoint):
    X, inputs = _complex_input(file)
    b = 0 if basepoint is None else _vertex(X, basepoint)
    Q = ql.build_quasiline(X, _word(word), periods, b, slack)
    config = {"word": _word(word), "periods": periods, "slack": slack, "basepoint": _label(X, b)}
    return Q, inputs, config


def _class_row(c):
    return {"hyperplane": c.hyperplane, "kind": c.kind, "diam": c.diam, "shallow_side": c.shallow_side,
            "representative": c.representative, "signature": list(c.signature)}


@ql_group.command("classify")
@_quasiline_options
@reporting
def ql_classify(file, word, periods, slack, basepoint):
    """Sort hyperplanes of the window into trivial, half-essential and essential."""
    Q, inputs, config = _quasiline(file, word, periods, slack, basepoint)
    classes = ql.classify_hyperplanes(Q, strict=False)
    counts = {kind: sum(c.kind == kind for c in classes)
              for kind in ("trivial", "half_essential", "essential", "undecided")}
    undecided = counts["undecided"]
    results = {"window": Q.window.n, "translation": Q.translation, "period_count": Q.period_count,
               "counts": counts, "orbits": {",".join(k): v for k, v in ql.class_table(classes).items()},
               "classes": [_class_row(c) for c in classes]}
    code = EXIT_UNDECIDED if undecided * 2 > len(classes) else EXIT_PASS
    caveats = [f"{undecided} hyperplanes undecided inside the window"] if undecided else []
    return Outcome(inputs, config, results, caveats, code)


@ql_group.command("constants")
@_quasiline_options
@reporting
def ql_constants(file, word, periods, slack, basepoint):
    """Constants D, K, d, N, M, h, n and B0 of the quasiline."""
    Q, inputs, config = _quasiline(file, word, periods, slack, basepoint)
    k = ql.quasiline_constants(Q)
    results = {name: getattr(k, name) for name in ("D", "K", "d", "N", "M", "h", "n", "B0", "translation")}
    return Outcome(inputs, config, results)


@ql_group.command("fellow")
@click.argument("file")
@click.option("--word", "-w", required=True)
@click.option("--B", "-B", "bound", type=int, default=None, help="Length scale B (default B0).")
@click.option("--basepoint", default=None)
@reporting
def ql_fellow(file, word, bound, basepoint):
    """Fellow-travel check for a geodesic of length 3B through the window."""
    X, inputs = _complex_input(file)
    b = 0 if basepoint is None else _vertex(X, basepoint)
    Q, k, res = ql.fellow_travel_run(X, _word(word), bound, b)
    B = k.B0 if bound is None else bound
    results = {"B": B, "window": Q.window.n, "n": res.n, "l": res.l, "gamma_hat_length": len(res.gamma_hat),
               "block_size": len(res.C), "q": res.q, "p": res.p, "checks": res.checks,
               "l_lower_bound": 2 * B / (k.n * k.M) - 5}
    return Outcome(inputs, {"word": _word(word), "B": B, "basepoint": _label(X, b)}, results)


@ql_group.command("commensurate")
@click.argument("file")
@click.option("--word", "-w", "word1", required=True)
@click.option("--word2", "-v", "word2", required=True)
@click.option("--periods", "-p", type=int, default=12, show_default=True)
@click.option("--bound", "-S", "bound", type=int, default=0, show_default=True,
              help="Projection diameter above which a relation is searched for.")
@click.option("--basepoint", default=None)
@reporting
def ql_commensurate(file, word1, word2, periods, bound, basepoint):
    """Look for powers of two shifts that agree on the shared window."""
    X, inputs = _complex_input(file)
    b = 0 if basepoint is None else _vertex(X, basepoint)
    Q1, Q2 = ql.build_quasilines(X, [_word(word1), _word(word2)], periods, b)
    res = ql.commensurate(Q1, Q2, bound)
    results = {"related": res.related, "d1": res.d1, "d2": res.d2, "projection_diam": res.projection_diam,
               "translations": [Q1.translation, Q2.translation]}
    caveats = ["projection reaches the ball boundary"] if res.window_limited else []
    config = {"word1": _word(word1), "word2": _word(word2), "periods": periods, "bound": bound}
    return Outcome(inputs, config, results, caveats)


# ---------------------------------------------------------------------------
# graphs of complexes


@cli.group("gog")
def gog_group():
    """Graphs of cube complexes."""


@gog_group.command("validate")
@click.argument("gog")
@reporting
def gog_validate(gog):
    """Check vertex and edge spaces and every attaching map."""
    G, inputs = _gog_input(gog)
    return Outcome(inputs, {}, bs.gog_summary(G))


@gog_group.command("total")
@click.argument("gog")
@click.option("--out", "-o", type=click.Path(dir_okay=False), default=None, help="Write the total space here.")
@reporting
def gog_total(gog, out):
    """Assemble the total space and check it is nonpositively curved."""
    G, inputs = _gog_input(gog)
    X = bs.total_space(G)
    npc = cc.validate_npc(X)
    results = {"vertices": X.n, "edges": len(X.edges), "squares": len(X.squares), "cubes": len(X.cubes3),
               "npc": _report_dict(npc)}
    caveats = []
    if getattr(X, "omitted_cubes", 0):
        caveats.append(f"{X.omitted_cubes} cubes with repeated corners omitted")
    if out:
        fileio.write_complex(X, out)
    return Outcome(inputs, {}, results, caveats, EXIT_PASS if npc.ok else EXIT_FAIL)


@gog_group.command("cyclonormal")
@click.argument("gog")
@click.option("--mode", default="edges", show_default=True, help="'edges' or 'paths:N'.")
@click.option("--depth-bound", type=int, default=2, show_default=True)
@click.option("--radius", "-r", type=int, default=8, show_default=True)
@click.option("--coset-cap", "--cap", "coset_cap", type=int, default=6, show_default=True)
@click.option("--pairs-only", is_flag=True, help="Skip triple intersections.")
@reporting
def gog_cyclonormal(gog, mode, depth_bound, radius, coset_cap, pairs_only):
    """Intersections of edge or path stabilizers: trivial or cyclic everywhere?"""
    G, inputs = _gog_input(gog)
    rep = bs.check_cyclonormal(G, mode, depth_bound, radius, coset_cap, triples=not pairs_only)
    code = {"pass": EXIT_PASS, "fail": EXIT_FAIL, "undecided": EXIT_UNDECIDED}[rep.verdict]
    caveats = [f"window radius {radius}, coset cap {coset_cap}: verdicts cover enumerated cosets only"]
    config = {"mode": mode, "depth_bound": depth_bound, "radius": radius, "coset_cap": coset_cap,
              "triples": not pairs_only}
    return Outcome(inputs, config, rep.as_dict(), caveats, code)


@gog_group.command("stature")
@click.argument("gog")
@click.option("--base", default=None, help="Graph vertex at the root (default: first vertex).")
@click.option("--Lmax", "--lmax", "l_max", type=int, default=4, show_default=True)
@click.option("--radius", "-r", type=int, default=6, show_default=True)
@click.option("--coset-cap", "--cap", "coset_cap", type=int, default=5, show_default=True)
@click.option("--plateau", type=int, default=2, show_default=True)
@reporting
def gog_stature(gog, base, l_max, radius, coset_cap, plateau):
    """Tally classes of infinite path stabilizers by path length."""
    G, inputs = _gog_input(gog)
    v = _base_vertex(G, base)
    rep = bs.stature_probe(G, v, l_max, radius, coset_cap, plateau)
    counts = rep.verdict_counts
    undecided = sum(c.get("undecided", 0) for c in counts.values())
    decided = sum(c.get(k, 0) for c in counts.values() for k in ("trivial", "cyclic", "higher"))
    code = EXIT_UNDECIDED if undecided > decided else EXIT_PASS
    config = {"base": v, "L_max": l_max, "radius": radius, "coset_cap": coset_cap, "plateau": plateau}
    return Outcome(inputs, config, rep.as_dict(), rep.caveats, code)


# ---------------------------------------------------------------------------
# Bass-Serre tree windows


@cli.group("bs")
def bs_group():
    """Windows of the Bass-Serre tree."""


@bs_group.command("window")
@click.argument("gog")
@click.option("--base", default=None)
@click.option("--depth", "-d", type=int, default=1, show_default=True)
@click.option("--radius", "-r", type=int, default=6, show_default=True)
@click.option("--coset-cap", "--cap", "coset_cap", type=int, default=5, show_default=True)
@reporting
def bs_window(gog, base, depth, radius, coset_cap):
    """Develop chambers and strips around a root vertex space."""
    G, inputs = _gog_input(gog)
    v = _base_vertex(G, base)
    W = bs.tree_window(G, v, depth, radius, coset_cap)
    for L in range(1, depth + 1):
        W.paths(L)
    caveats = [f"coset fan-out capped at {coset_cap}"] if W.truncated else []
    config = {"base": v, "depth": depth, "radius": radius, "coset_cap": coset_cap}
    return Outcome(inputs, config, W.summary(), caveats)


@bs_group.command("stab")
@click.argument("gog")
@click.option("--path", "path", required=True, help="Strip indices, comma separated, e.g. '0' or '0,5'.")
@click.option("--base", default=None)
@click.option("--radius", "-r", type=int, default=6, show_default=True)
@click.option("--coset-cap", "--cap", "coset_cap", type=int, default=5, show_default=True)
@reporting
def bs_stab(gog, path, base, radius, coset_cap):
    """Pointwise stabilizer of a path of strips, as a gate in the root chamber."""
    G, inputs = _gog_input(gog)
    v = _base_vertex(G, base)
    try:
        strips = [int(s) for s in _word(path)]
    except ValueError as exc:
        raise InputError(f"bad path {path!r}") from exc
    W = bs.tree_window(G, v, max(1, len(strips)), radius, coset_cap)
    p = W.check_path(strips)
    st = bs.path_stabilizer(W, p)
    code = EXIT_UNDECIDED if st.cyclic_verdict == "undecided" else EXIT_PASS
    caveats = [] if st.reliable else ["gate lost vertices in transport: verdict is a lower bound"]
    config = {"base": v, "radius": radius, "coset_cap": coset_cap, "path": strips}
    return Outcome(inputs, config, st.as_dict(), caveats, code)


# ---------------------------------------------------------------------------
# fixtures


@cli.command("fixture")
@click.argument("name", required=False)
@click.argument("params", nargs=-1, type=int)
@click.option("--out", "-o", type=click.Path(file_okay=False), default="fixtures", show_default=True)
@click.option("--all", "all_", is_flag=True, help="Write the standard fixture set.")
def fixture(name, params, out, all_):
    """Write a fixture file (graphs of complexes: one file per piece)."""
    if all_:
        todo = STANDARD_FIXTURES
    elif name:
        todo = ((name, params),)
    else:
        raise click.UsageError("give a fixture name or --all")
    for n, ps in todo:
        path = fileio.write_fixture(fixtures.generate_fixture(n, *ps), out)
        click.echo(str(path))


def main(argv=None):
    try:
        code = cli.main(args=argv, prog_name="mf", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        sys.exit(EXIT_INPUT)
    except click.ClickException as exc:
        exc.show()
        sys.exit(EXIT_INPUT)
    except MFError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    sys.exit(code or 0)


if __name__ == "__main__":
    main()
