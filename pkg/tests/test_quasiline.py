import dataclasses

import numpy as np
import pytest

from conftest import complex_of
from mfcube import cubecore as C
from mfcube import quasiline as Q
from mfcube.errors import InputError, OverflowBudget, PreconditionError, QuasilineError, WindowTooSmall


@pytest.fixture(scope="module")
def line_q():
    return Q.build_quasiline(complex_of("line"), "a", 20)


@pytest.fixture(scope="module")
def ladder_q():
    return Q.build_quasiline(complex_of("ladder"), "a", 12)


@pytest.fixture(scope="module")
def comb_q():
    X = complex_of("comb")
    return Q.build_quasiline(X, "a", 12, basepoint=X.index["u"])


def kinds(classes):
    out = {}
    for c in classes:
        out[c.kind] = out.get(c.kind, 0) + 1
    return out


# ---------------------------------------------------------------------------
# validation


def test_line_window(line_q):
    assert line_q.window.n == 41
    assert line_q.period_count == 40
    assert len(line_q.fundamental_domain) == 1
    assert line_q.translation == 1


def test_ladder_window(ladder_q):
    assert len(ladder_q.fundamental_domain) == 2


def test_identity_shift_rejected(line_q):
    ball = line_q.ambient
    ident = C.deck_search(ball, {0: 0})
    with pytest.raises(QuasilineError):
        Q.validate_quasiline(ball, range(ball.n), ident)


def test_too_few_periods():
    with pytest.raises(WindowTooSmall):
        Q.build_quasiline(complex_of("line"), "a", 3)


def test_window_is_shift_equivariant(ladder_q):
    W, phi = ladder_q.window, ladder_q.phi
    for v in range(W.n):
        w = phi(v)
        if w is None:
            continue
        for u in W.neighbors(v):
            if phi(u) is not None:
                assert phi(u) in W.neighbors(w)


# ---------------------------------------------------------------------------
# classification


def test_line_all_essential(line_q):
    classes = Q.classify_hyperplanes(line_q)
    assert kinds(classes) == {"essential": len(classes)}
    assert Q.quasiline_constants(line_q, classes).h == 0


def test_ladder_one_trivial(ladder_q):
    classes = Q.classify_hyperplanes(ladder_q)
    k = kinds(classes)
    assert k["trivial"] == 1 and set(k) == {"trivial", "essential"}
    assert Q.class_table(classes) == {("a", "b"): ["essential"], ("r",): ["trivial"]}


def test_comb_pendants_half_essential(comb_q):
    classes = Q.classify_hyperplanes(comb_q)
    for c in classes:
        if c.signature == ("t1",):
            assert c.kind == "half_essential" and c.shallow_side is not None
            shallow = Q.shallow_halfspace(comb_q, c)
            assert len(shallow) == 1
        else:
            assert c.kind == "essential"


@pytest.mark.parametrize("name,word", [("line", "a"), ("ladder", "a"), ("comb", "a")])
def test_classification_stable_under_growth(name, word):
    X = complex_of(name)
    b = X.index["u"] if name == "comb" else 0
    small = Q.class_table(Q.classify_hyperplanes(Q.build_quasiline(X, word, 10, b)))
    large = Q.class_table(Q.classify_hyperplanes(Q.build_quasiline(X, word, 20, b)))
    assert small == large


# ---------------------------------------------------------------------------
# constants


def test_line_constants(line_q):
    assert Q.quasiline_constants(line_q).as_tuple() == (0, 0, 3, 1, 5, 0, 6, 120)


def test_ladder_constants(ladder_q):
    k = Q.quasiline_constants(ladder_q)
    assert (k.D, k.h, k.n) == (1, 1, 2 * k.d)
    assert k.d * k.translation > 3 * k.D + 2 >= (k.d - 1) * k.translation


def test_comb_constants(comb_q):
    # the shallow halfspace is one leaf vertex: diameter 0
    k = Q.quasiline_constants(comb_q)
    assert k.K == 0 and k.B0 >= k.K + 1


@pytest.mark.parametrize("q", ["line_q", "ladder_q", "comb_q"])
def test_constant_formulas(q, request):
    Qx = request.getfixturevalue(q)
    k = Q.quasiline_constants(Qx)
    assert k.M == (k.d + 2) * k.N
    assert k.B0 == max(k.K + 1, 2 * k.n * k.M, ((2 * k.n * k.N + k.D) // (k.n * k.translation) + 2) * k.n * k.M)


@pytest.mark.parametrize("q", ["line_q", "ladder_q", "comb_q"])
def test_separation_growth_crossing(q, request):
    Qx = request.getfixturevalue(q)
    classes = Q.classify_hyperplanes(Qx)
    k = Q.quasiline_constants(Qx, classes)
    assert Q.separation_check(Qx, classes, k) == []
    assert Q.growth_check(Qx, classes, k) == []
    rng = np.random.default_rng(1)
    geos = [list(C.geodesic(Qx.window, int(a), int(b)).vertices)
            for a, b in rng.integers(0, Qx.window.n, size=(30, 2))]
    assert Q.crossing_check(Qx, classes, k, geos) == []


def test_unknown_shift_edge():
    with pytest.raises(InputError):
        Q.build_quasiline(complex_of("line"), "zz", 10)


def _wide_ladder(rows):
    """Line times a path with ``rows`` edges: every rung class is trivial."""
    vs = [f"u{i}" for i in range(rows + 1)]
    edges = [{"id": f"a{i}", "ends": [v, v]} for i, v in enumerate(vs)]
    edges += [{"id": f"r{i}", "ends": [vs[i], vs[i + 1]]} for i in range(rows)]
    squares = [{"corners": [vs[i], vs[i], vs[i + 1], vs[i + 1]],
                "sides": [[f"a{i}", 1], [f"r{i}", 1], [f"r{i}", 1], [f"a{i + 1}", 1]]} for i in range(rows)]
    return C.build_complex({"name": "wide", "vertices": vs, "edges": edges, "squares": squares})


def test_factorial_overflow_reported():
    Qx = Q.build_quasiline(_wide_ladder(13), "a0", 8)
    classes = Q.classify_hyperplanes(Qx)
    assert kinds(classes)["trivial"] == 13
    with pytest.raises(OverflowBudget, match="h <= 12"):
        Q.quasiline_constants(Qx, classes)


# ---------------------------------------------------------------------------
# blocks, fellow travelling, commensuration


def test_line_block(line_q):
    classes = Q.classify_hyperplanes(line_q)
    hid = min(classes, key=lambda c: (abs(c.exponent), c.hyperplane)).hyperplane
    res = Q.block_check(line_q, hid, 5)
    assert res.ok and len(res.C) == 3
    assert [m for m, ok in res.unions] == list(range(6)) and all(ok for _, ok in res.unions)


def test_ladder_block_hypothesis_rejected(ladder_q):
    classes = Q.classify_hyperplanes(ladder_q)
    hid = next(c.hyperplane for c in classes if c.kind == "essential")
    with pytest.raises(QuasilineError, match="crosses both"):
        Q.block_check(ladder_q, hid, 3)


def test_line_fellow_travel():
    Qx, k, res = Q.fellow_travel_run(complex_of("line"), "a")
    assert len(res.gamma_hat) > 120
    assert res.l >= 3 and res.l > 2 * 120 / (k.n * k.M) - 5
    assert all(res.checks.values())


def test_fellow_travel_short_geodesic(line_q):
    Qx = Q.build_quasiline(complex_of("line"), "a", 250)
    classes = Q.classify_hyperplanes(Qx)
    k = Q.quasiline_constants(Qx, classes)
    a, b = Qx.power(Qx.basepoint, -180), Qx.power(Qx.basepoint, 179)
    gamma = C.geodesic(Qx.window, a, b)
    assert len(gamma) == 3 * 120 - 1
    with pytest.raises(PreconditionError):
        Q.fellow_travel(Qx, range(Qx.window.n), gamma, 120, classes, k)
    with pytest.raises(PreconditionError):
        Q.fellow_travel(Qx, range(Qx.window.n), gamma, 119, classes, k)


def test_fellow_travel_rejects_trivial_crossing(ladder_q):
    # scale B0 down so the geodesic fits a small window; the check itself does not involve B
    classes = Q.classify_hyperplanes(ladder_q)
    k = dataclasses.replace(Q.quasiline_constants(ladder_q, classes), B0=3)
    s, t = ladder_q.power(ladder_q.basepoint, -4), ladder_q.power(ladder_q.basepoint, 4)
    other = next(w for w in ladder_q.window.neighbors(t) if ladder_q.orbit[w][0] != ladder_q.orbit[t][0])
    gamma = C.geodesic(ladder_q.window, s, other)
    with pytest.raises(PreconditionError, match="trivial") as info:
        Q.fellow_travel(ladder_q, range(ladder_q.window.n), gamma, 3, classes, k)
    assert info.value.witness is not None


@pytest.mark.parametrize("words,expected", [(("a", "a,a"), (2, 1)), (("a", "a-"), (1, -1))])
def test_line_commensuration(words, expected):
    q1, q2 = Q.build_quasilines(complex_of("line"), list(words), 12)
    res = Q.commensurate(q1, q2, 0)
    assert res.related and (res.d1, res.d2) == expected
    assert abs(res.d1) * q1.translation == abs(res.d2) * q2.translation


def test_parallel_lines_commensurate():
    q1, q2 = Q.build_quasilines(complex_of("ladder"), ["a", "r,b,r-"], 12)
    res = Q.commensurate(q1, q2, 0)
    assert res.related and (res.d1, res.d2) == (1, 1)
    assert not Q.commensurate(q1, q2, 10**6).related


def test_commensuration_needs_shared_ball(line_q):
    other = Q.build_quasiline(complex_of("line"), "a", 12)
    with pytest.raises(PreconditionError):
        Q.commensurate(line_q, other, 0)
