"""Quasilines: convex windows with a cocompact shift, hyperplane classes and constants."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cubecore import (
    Automorphism,
    Ball,
    Geodesic,
    VertexSet,
    compute_hyperplanes,
    deck_search,
    develop_ball,
    geodesic,
    hull,
    hyperplane_diameter,
    hyperplane_of_pair,
    hyperplanes_cross,
    induced_subcomplex,
    is_cat0,
    is_convex,
    translation_length,
)
from .errors import (
    InputError,
    OverflowBudget,
    PreconditionError,
    QuasilineError,
    WindowTooSmall,
)
from .gates import pitchfork

log = logging.getLogger(__name__)

MIN_PERIODS = 8
MAX_N = 10**6


@dataclass
class Quasiline:
    window: object  # CubeComplex; labels are ambient ball vertices
    phi: Automorphism  # restricted to window indices
    deck: Automorphism  # the same transformation on the ambient ball
    ambient: Ball
    fundamental_domain: frozenset
    period_count: int
    translation: int
    basepoint: int
    orbit: dict  # window vertex -> (representative, exponent)

    def ambient_index(self, v):
        return self.window.labels[v]

    def window_index(self, ball_vertex):
        return self.window.index.get(ball_vertex)

    def power(self, v, k):
        """phi^k(v) inside the window, or None."""
        rep, j = self.orbit[v]
        return self._by_orbit.get((rep, j + k))

    def __post_init__(self):
        self._by_orbit = {key: v for v, key in self.orbit.items()}


@dataclass(frozen=True)
class HyperplaneClass:
    hyperplane: int
    kind: str  # trivial | half_essential | essential | undecided
    diam: Optional[int]  # None when infinite
    shallow_side: Optional[str] = None  # "plus" | "minus"
    representative: int = -1
    exponent: int = 0
    signature: tuple = ()

    @property
    def infinite(self):
        return self.diam is None


@dataclass(frozen=True)
class QuasilineConstants:
    D: int
    K: int
    d: int
    N: int
    M: int
    h: int
    n: int
    B0: int
    translation: int

    def as_tuple(self):
        return (self.D, self.K, self.d, self.N, self.M, self.h, self.n, self.B0)


@dataclass
class BlockCheck:
    a: int
    C: frozenset
    unions: list  # (m, holds)
    sandwiches: int
    sandwich_failures: list
    ok: bool


@dataclass
class FellowTravelResult:
    C: frozenset
    n: int
    l: int
    gamma_hat: Geodesic
    anchor: int
    hyperplane: int
    q: int
    p: int
    checks: dict = field(default_factory=dict)


@dataclass
class CommensurationResult:
    related: bool
    d1: Optional[int]
    d2: Optional[int]
    projection_diam: int
    window_limited: bool


# ---------------------------------------------------------------------------
# construction


def _parse_word(X, word):
    if isinstance(word, str):
        word = [w for w in word.replace(" ", "").split(",") if w]
    darts = []
    for entry in word:
        if isinstance(entry, str):
            name, sign = (entry[:-1], -1) if entry.endswith("-") else (entry.rstrip("+"), 1)
        else:
            name, sign = entry
        if str(name) not in X.edge_ids:
            raise InputError(f"unknown edge {name!r} in shift word")
        darts.append((X.edge_ids.index(str(name)), int(sign)))
    if not darts:
        raise QuasilineError("empty shift word")
    return darts


def build_quasiline(X, word, periods: int, basepoint: int = 0, slack: int = 0,
                    min_periods: int = MIN_PERIODS) -> Quasiline:
    """Develop a ball of X and cut out the window swept by a shift.

    ``word`` lists base edges (``"a"``, ``"a-"`` or ``(id, sign)``) whose
    lift from the basepoint ends at the image of the basepoint.
    """
    return build_quasilines(X, [word], periods, basepoint, slack, min_periods)[0]


def build_quasilines(X, words, periods: int, basepoint: int = 0, slack: int = 0,
                     min_periods: int = MIN_PERIODS) -> list:
    """Quasilines for several shifts, all cut from one shared ball."""
    darts = [_parse_word(X, w) for w in words]
    # one lift of each base vertex, nearest first
    reach = develop_ball(X, basepoint, max(1, X.n))
    domain, seen = [], set()
    for v in range(reach.n):
        if reach.proj(v) not in seen:
            seen.add(reach.proj(v))
            domain.append(reach.word(v))
    radius = periods * max(map(len, darts)) + max(len(w) for w in domain) + slack
    ball = develop_ball(X, basepoint, radius)
    is_cat0(ball.complex)
    out = []
    for d in darts:
        target = ball.walk(0, d)
        if target is None:
            raise QuasilineError("shift word does not lift")
        deck = deck_search(ball, {0: target})
        if deck.is_identity():
            raise QuasilineError("shift is trivial")
        points = set()
        inv = deck.inverse()
        for s in (ball.walk(0, w) for w in domain):
            for step in (deck, inv):
                cur = s
                for _ in range(periods + 1):
                    if cur is None:
                        break
                    points.add(cur)
                    cur = step(cur)
        window = hull(ball.complex, points)
        out.append(validate_quasiline(ball, window, deck, min_periods=min_periods))
    return out


def validate_quasiline(ball: Ball, window, deck: Automorphism, min_periods: int = MIN_PERIODS) -> Quasiline:
    members = frozenset(window.members if isinstance(window, VertexSet) else window)
    if deck.is_identity():
        raise QuasilineError("shift is trivial")
    if not is_cat0(ball.complex).ok:
        raise QuasilineError("ambient ball is not CAT(0)")
    if not is_convex(ball.complex, members):
        raise QuasilineError("window is not convex in its ball")
    W = induced_subcomplex(ball.complex, members, name=f"{ball.base.name}~window")
    if not is_cat0(W).ok:
        raise QuasilineError("window is not CAT(0)")
    mapping = []
    for v in range(W.n):
        img = deck(W.labels[v])
        mapping.append(W.index[img] if img is not None and img in W.index else -1)
    phi = Automorphism(W, tuple(mapping))
    inv = phi.inverse()
    # orbit chains under phi
    orbit, reps, spans = {}, [], []
    ball_dist = ball.complex.distances_from(0)
    base = W.index[min(members, key=lambda v: (ball_dist[v], v))]
    dist0 = W.distances_from(base)
    for v in range(W.n):
        if v in orbit:
            continue
        chain = [v]
        cur = inv(v)
        while cur is not None and cur not in chain:
            chain.insert(0, cur)
            cur = inv(cur)
        cur = phi(v)
        while cur is not None and cur not in chain:
            chain.append(cur)
            cur = phi(cur)
        rep_pos = min(range(len(chain)), key=lambda i: (dist0[chain[i]], chain[i]))
        rep = chain[rep_pos]
        for i, x in enumerate(chain):
            orbit[x] = (rep, i - rep_pos)
        reps.append(rep)
        spans.append(len(chain) - 1)
    period_count = min(spans)
    if period_count < min_periods:
        raise WindowTooSmall(f"window realizes only {period_count} translates (need {min_periods})")
    translation = translation_length(ball, deck)
    log.debug("window %d vertices, %d orbits, %d periods, translation %d", W.n, len(reps), period_count, translation)
    phi.translation_length = translation
    deck.translation_length = translation
    return Quasiline(W, phi, deck, ball, frozenset(sorted(reps)), period_count, translation, base, orbit)


# ---------------------------------------------------------------------------
# hyperplane action


def _hyperplane_index(Q):
    cache = getattr(Q, "_hcache", None)
    if cache is None:
        hs = compute_hyperplanes(Q.window)
        cache = {"list": hs, "by_id": {H.id: H for H in hs}}
        Q._hcache = cache
    return cache


def translate_hyperplane(Q, hid, k) -> Optional[int]:
    """Id of phi^k(H) in the window, if some dual edge of H has its image there."""
    H = _hyperplane_index(Q)["by_id"][hid]
    W = Q.window
    for e in sorted(H.dual_edges):
        u, v = W.edges[e]
        fu, fv = Q.power(u, k), Q.power(v, k)
        if fu is not None and fv is not None:
            return hyperplane_of_pair(W, fu, fv)
    return None


def translate_side(Q, hid, side, k):
    """The halfspace of phi^k(H) containing the image of ``side`` of H."""
    H = _hyperplane_index(Q)["by_id"][hid]
    target = translate_hyperplane(Q, hid, k)
    if target is None:
        return None, None
    T = _hyperplane_index(Q)["by_id"][target]
    for e in sorted(H.dual_edges):
        u, v = Q.window.edges[e]
        for x in (u, v):
            if x in side:
                fx = Q.power(x, k)
                if fx is not None:
                    return target, (T.plus if fx in T.plus else T.minus)
    return target, None


def vertex_set_diameter(X, S) -> int:
    S = sorted(S)
    if len(S) <= 1:
        return 0
    rows = X.distance_rows(S)
    return int(rows[:, S].max())


def _signature(Q, H):
    proj = Q.ambient.projection.edge_map
    return tuple(sorted({Q.ambient.base.edge_ids[proj[int(Q.window.edge_ids[e])][0]] for e in H.dual_edges}))


def classify_hyperplanes(Q: Quasiline, strict: bool = True) -> list:
    """Trivial, half-essential or essential, decided on orbit representatives."""
    hs = _hyperplane_index(Q)["list"]
    W = Q.window
    dist0 = W.distances_from(Q.basepoint)
    quarter = max(1, Q.period_count // 4)
    rep_base, k_base = Q.orbit[Q.basepoint]
    ks = sorted(k for v, (r, k) in Q.orbit.items() if r == rep_base)
    kmin, kmax = ks[0], ks[-1]
    far_plus = [Q.power(Q.basepoint, j - k_base) for j in range(kmax - quarter + 1, kmax + 1)]
    far_minus = [Q.power(Q.basepoint, j - k_base) for j in range(kmin, kmin + quarter)]
    far_plus = [x for x in far_plus if x is not None]
    far_minus = [x for x in far_minus if x is not None]

    # orbit chains of hyperplanes
    orbit = {}
    for H in hs:
        if H.id in orbit:
            continue
        chain = {0: H.id}
        for direction in (1, -1):
            k, cur = 0, H.id
            while True:
                nxt = translate_hyperplane(Q, cur, direction)
                if nxt is None or nxt in chain.values():
                    break
                k += direction
                chain[k] = nxt
                cur = nxt
        near = min(chain.items(), key=lambda kv: (min(dist0[x] for x in hs[kv[1]].carrier), kv[1]))
        for k, hid in chain.items():
            if hid not in orbit:
                orbit[hid] = (near[1], k - near[0])

    def deep(side):
        return (far_plus and all(x in side for x in far_plus)) or (far_minus and all(x in side for x in far_minus))

    rep_kind = {}
    for rep in sorted({r for r, _ in orbit.values()}):
        H = hs[rep]
        trivial = False
        for j in range(1, quarter + 1):
            if translate_hyperplane(Q, rep, j) == rep or translate_hyperplane(Q, rep, -j) == rep:
                trivial = True
                break
        if trivial:
            rep_kind[rep] = ("trivial", None, None)
            continue
        dp, dm = deep(H.plus), deep(H.minus)
        diam = hyperplane_diameter(W, H)
        if dp and dm:
            rep_kind[rep] = ("essential", diam, None)
        elif dp or dm:
            rep_kind[rep] = ("half_essential", diam, "minus" if dp else "plus")
        else:
            rep_kind[rep] = ("undecided", diam, None)
    out = []
    for H in hs:
        rep, k = orbit[H.id]
        kind, diam, shallow = rep_kind[rep]
        if shallow is not None and k != 0:
            # carry the shallow tag across the translation
            _, img = translate_side(Q, rep, hs[rep].plus if shallow == "plus" else hs[rep].minus, k)
            shallow = "plus" if img is H.plus else "minus"
        out.append(HyperplaneClass(H.id, kind, diam, shallow, rep, k, _signature(Q, hs[rep])))
    if strict and any(c.kind == "undecided" for c in out):
        bad = [c.hyperplane for c in out if c.kind == "undecided"]
        raise QuasilineError(f"window too small to classify hyperplanes {bad}")
    return out


def class_table(classes) -> dict:
    """Classification keyed by base-edge signature of each orbit, for window comparisons."""
    table = {}
    for c in classes:
        if c.exponent == 0 and c.hyperplane == c.representative:
            table.setdefault(c.signature, set()).add(c.kind)
    return {k: sorted(v) for k, v in sorted(table.items())}


def shallow_halfspace(Q, c: HyperplaneClass):
    H = _hyperplane_index(Q)["by_id"][c.hyperplane]
    return H.plus if c.shallow_side == "plus" else H.minus


# ---------------------------------------------------------------------------
# constants


def quasiline_constants(Q: Quasiline, classes=None) -> QuasilineConstants:
    classes = classes if classes is not None else classify_hyperplanes(Q)
    by_id = _hyperplane_index(Q)["by_id"]
    W = Q.window
    reps = [c for c in classes if c.hyperplane == c.representative]
    nontrivial = [c for c in reps if c.kind != "trivial"]
    D = max((c.diam for c in nontrivial), default=0)
    K = max((vertex_set_diameter(W, shallow_halfspace(Q, c)) for c in reps if c.kind == "half_essential"),
            default=0)
    tau = Q.translation
    d = (3 * D + 2) // tau + 1
    N0 = 0
    for c in reps:
        if c.kind != "essential":
            continue
        H = by_id[c.hyperplane]
        _, img_plus = translate_side(Q, H.id, H.plus, 1)
        _, img_minus = translate_side(Q, H.id, H.minus, 1)
        if img_plus is None or img_minus is None:
            raise WindowTooSmall(f"translate of hyperplane {H.id} leaves the window")
        N0 = max(N0, vertex_set_diameter(W, H.minus & img_plus), vertex_set_diameter(W, H.plus & img_minus))
    N = N0 + D + 1
    M = (d + 2) * N
    h = sum(1 for c in classes if c.kind == "trivial")
    if h > 12:
        raise OverflowBudget(f"h = {h} trivial hyperplanes: h! exceeds the budget (threshold h <= 12)")
    n = 2 * d * math.factorial(h)
    if n > MAX_N:
        raise OverflowBudget(f"n = {n} exceeds {MAX_N}")
    B0 = max(K + 1, 2 * n * M, ((2 * n * N + D) // (n * tau) + 2) * n * M)
    return QuasilineConstants(D, K, d, N, M, h, n, B0, tau)


# ---------------------------------------------------------------------------
# invariant checks used by the tests and reports


def separation_check(Q, classes, consts) -> list:
    """Essential H and phi^d(H) are disjoint and only trivial hyperplanes cross both."""
    kinds = {c.hyperplane: c.kind for c in classes}
    failures = []
    for c in classes:
        if c.kind != "essential" or c.hyperplane != c.representative:
            continue
        far = translate_hyperplane(Q, c.hyperplane, consts.d)
        if far is None:
            failures.append({"hyperplane": c.hyperplane, "reason": "translate outside window"})
            continue
        if far == c.hyperplane or hyperplanes_cross(Q.window, c.hyperplane, far):
            failures.append({"hyperplane": c.hyperplane, "reason": "intersects translate"})
        for other in kinds:
            if hyperplanes_cross(Q.window, other, c.hyperplane) and hyperplanes_cross(Q.window, other, far):
                if kinds[other] != "trivial":
                    failures.append({"hyperplane": c.hyperplane, "crossing": other})
    return failures


def growth_check(Q, classes, consts) -> list:
    """diam(H+ meet phi^{+-k}(H-)) <= kN for every realizable k."""
    W = Q.window
    by_id = _hyperplane_index(Q)["by_id"]
    failures = []
    for c in classes:
        if c.kind != "essential" or c.hyperplane != c.representative:
            continue
        H = by_id[c.hyperplane]
        for k in range(1, Q.period_count + 1):
            for sign in (1, -1):
                for side, other in ((H.plus, H.minus), (H.minus, H.plus)):
                    _, img = translate_side(Q, H.id, other, sign * k)
                    if img is None:
                        continue
                    diam = vertex_set_diameter(W, side & img)
                    if diam > k * consts.N:
                        failures.append({"hyperplane": H.id, "k": sign * k, "diam": diam})
    return failures


def crossing_check(Q, classes, consts, geodesics) -> list:
    """Essential crossings far from the ends of a geodesic propagate to phi^{+-k}."""
    W = Q.window
    kinds = {c.hyperplane: c.kind for c in classes}
    failures = []
    for path in geodesics:
        L = len(path) - 1
        crossed = [hyperplane_of_pair(W, a, b) for a, b in zip(path, path[1:])]
        crossed_set = set(crossed)
        for i, hid in enumerate(crossed):
            if kinds[hid] != "essential":
                continue
            room = min(i, L - 1 - i)
            k = 1
            while k * consts.M <= room:
                for sign in (1, -1):
                    img = translate_hyperplane(Q, hid, sign * k)
                    if img is not None and img not in crossed_set:
                        failures.append({"hyperplane": hid, "k": sign * k, "edge": i})
                k += 1
    return failures


# ---------------------------------------------------------------------------
# blocks


def _carrier(Q, hid):
    return VertexSet(_hyperplane_index(Q)["by_id"][hid].carrier, "convex")


def _check_disjoint_translate(Q, hid, shift):
    far = translate_hyperplane(Q, hid, shift)
    if far is None:
        raise WindowTooSmall("translate of the hyperplane leaves the window")
    if far == hid or hyperplanes_cross(Q.window, hid, far):
        raise QuasilineError(f"hyperplane {hid} meets its translate")
    for other in _hyperplane_index(Q)["by_id"]:
        if other in (hid, far):
            continue
        if hyperplanes_cross(Q.window, other, hid) and hyperplanes_cross(Q.window, other, far):
            err = QuasilineError(f"hyperplane {other} crosses both {hid} and its translate")
            err.witness = other
            raise err
    return far


def block_check(Q: Quasiline, hid: int, m: int, samples: int = 16) -> BlockCheck:
    W = Q.window
    far = _check_disjoint_translate(Q, hid, 1)
    gate = pitchfork(W, _carrier(Q, hid), _carrier(Q, far))
    if len(gate) != 1:
        raise QuasilineError("carrier projection is not a single vertex")
    (a,) = gate.members
    a2 = Q.power(a, 2)
    if a2 is None or Q.power(a, m + 2) is None:
        raise WindowTooSmall(f"window does not reach phi^{m + 2}(a)")
    C = hull(W, [a, a2]).members
    unions = []
    for mm in range(m + 1):
        union = set()
        for i in range(mm + 1):
            img = {Q.power(x, i) for x in C}
            if None in img:
                raise WindowTooSmall("block translate leaves the window")
            union |= img
        target = hull(W, [a, Q.power(a, mm + 2)]).members
        unions.append((mm, frozenset(union) == target))
    # sandwich along geodesics crossing H, phi H, phi^2 H, phi^3 H
    hs = [hid] + [translate_hyperplane(Q, hid, i) for i in (1, 2, 3)]
    if None in hs:
        raise WindowTooSmall("translates of the hyperplane leave the window")
    H0, H3 = (_hyperplane_index(Q)["by_id"][h] for h in (hs[0], hs[3]))
    start_side = H0.plus if _side_away(Q, hs[0], hs[1]) == "plus" else H0.minus
    end_side = H3.plus if _side_away(Q, hs[3], hs[2]) == "plus" else H3.minus
    starts, ends = sorted(start_side), sorted(end_side)
    rng = np.random.default_rng(0)
    pairs = [(starts[0], ends[0]), (starts[-1], ends[-1])]
    for _ in range(samples):
        pairs.append((starts[rng.integers(len(starts))], ends[rng.integers(len(ends))]))
    failures, count = [], 0
    for s, t in pairs:
        path = _random_geodesic(W, s, t, rng)
        crossed = [hyperplane_of_pair(W, x, y) for x, y in zip(path, path[1:])]
        idx = [crossed.index(h) for h in hs]
        lo, hi = idx[1], idx[2]
        segment = set(path[min(lo, hi):max(lo, hi) + 2])
        outer = hull(W, [path[idx[0]], path[idx[0] + 1], path[idx[3]], path[idx[3] + 1]]).members
        count += 1
        if not (segment <= C <= outer):
            failures.append({"from": s, "to": t})
    ok = all(h for _, h in unions) and not failures
    return BlockCheck(a, frozenset(C), unions, count, failures, ok)


def _side_away(Q, hid, other):
    """Which side of H does not contain the hyperplane ``other``."""
    H = _hyperplane_index(Q)["by_id"][hid]
    O = _hyperplane_index(Q)["by_id"][other]
    return "minus" if O.carrier <= H.plus else "plus"


def _random_geodesic(W, s, t, rng):
    dt = W.distances_from(t)
    path, cur = [s], s
    while cur != t:
        options = [w for w in W.neighbors(cur) if dt[w] == dt[cur] - 1]
        cur = options[rng.integers(len(options))] if len(options) > 1 else options[0]
        path.append(cur)
    return path


# ---------------------------------------------------------------------------
# fellow travelling


def fellow_travel(Q: Quasiline, W_set, gamma, B: int, classes=None, consts=None) -> FellowTravelResult:
    X = Q.window
    classes = classes if classes is not None else classify_hyperplanes(Q)
    consts = consts if consts is not None else quasiline_constants(Q, classes)
    kinds = {c.hyperplane: c.kind for c in classes}
    path = list(gamma.vertices if isinstance(gamma, Geodesic) else gamma)
    if B < consts.B0:
        raise PreconditionError(f"B = {B} is below B0 = {consts.B0}")
    L = len(path) - 1
    if L < 3 * B:
        raise PreconditionError(f"geodesic length {L} is shorter than 3B = {3 * B}")
    W_members = frozenset(W_set.members if isinstance(W_set, VertexSet) else W_set)
    if not set(path) <= W_members:
        raise PreconditionError("geodesic leaves W")
    if not is_convex(X, W_members):
        raise PreconditionError("W is not convex")
    crossed = [hyperplane_of_pair(X, a, b) for a, b in zip(path, path[1:])]
    if len(set(crossed)) != len(crossed):
        raise PreconditionError("path is not a geodesic")
    trivial_hit = [h for h in crossed if kinds[h] == "trivial"]
    if trivial_hit:
        err = PreconditionError(f"geodesic crosses trivial hyperplane {trivial_hit[0]}")
        err.witness = trivial_hit[0]
        raise err
    n, M = consts.n, consts.M
    margin = Q.period_count * Q.translation
    if margin < 3 * B + 2 * n * M:
        raise WindowTooSmall(f"window reach {margin} is below 3B + 2nM = {3 * B + 2 * n * M}")
    by_id = _hyperplane_index(Q)["by_id"]
    i0 = (L - 1) // 2
    hbar = crossed[i0]
    if kinds[hbar] != "essential":
        raise QuasilineError(f"middle hyperplane {hbar} is not essential")
    H = by_id[hbar]
    for side in (H.plus, H.minus):
        if vertex_set_diameter(X, side & W_members) < consts.K + 1:
            raise QuasilineError("middle hyperplane has a shallow side inside W")
    # the sector cut out by the trivial hyperplanes, on the side of the geodesic
    sector = set(W_members)
    for c in classes:
        if c.kind == "trivial":
            T = by_id[c.hyperplane]
            sector &= T.plus if path[0] in T.plus else T.minus
    far = translate_hyperplane(Q, hbar, n)
    if far is None:
        raise WindowTooSmall("translate of the middle hyperplane leaves the window")
    near_car = VertexSet(frozenset(H.carrier & sector), "convex")
    far_car = VertexSet(frozenset(by_id[far].carrier & sector), "convex")
    gate = pitchfork(X, near_car, far_car)
    if len(gate) != 1:
        raise QuasilineError("carrier projection is not a single vertex")
    (a,) = gate.members
    position = {h: i for i, h in enumerate(crossed)}
    ks = []
    k = 0
    while True:
        img = translate_hyperplane(Q, hbar, k * n)
        if img is None:
            break
        if img in position:
            ks.append(k)
        k += 1
    k = -1
    while True:
        img = translate_hyperplane(Q, hbar, k * n)
        if img is None:
            break
        if img in position:
            ks.append(k)
        k -= 1
    q, p = min(ks), max(ks)
    edge_of = {kk: position[translate_hyperplane(Q, hbar, kk * n)] for kk in (q + 1, p - 1)}
    lo, hi = sorted((edge_of[q + 1], edge_of[p - 1]))
    hat = path[lo:hi + 2]
    gamma_hat = Geodesic(tuple(hat), tuple(crossed[lo:hi + 1]))
    l = p - q - 3
    start, stop = Q.power(a, q * n), Q.power(a, (q + 2) * n)
    end_anchor = Q.power(a, (q + l + 2) * n)
    if None in (start, stop, end_anchor):
        raise WindowTooSmall("anchor translates leave the window")
    C = hull(X, [start, stop]).members
    union = set()
    for kk in range(l + 1):
        img = {Q.power(x, kk * n) for x in C}
        if None in img:
            raise WindowTooSmall("block translates leave the window")
        union |= img
    union = frozenset(union)
    checks = {
        "diam_exceeds_B": len(gamma_hat) > B,
        "gamma_hat_in_union": set(hat) <= union,
        "union_in_W": union <= W_members,
        "union_convex": is_convex(X, union),
        "union_is_hull": union == hull(X, [start, end_anchor]).members,
        "l_bound": l > 2 * B / (n * M) - 5,
    }
    failed = [k for k, v in checks.items() if not v]
    if failed:
        raise QuasilineError(f"fellow-travel invariants failed: {failed}")
    return FellowTravelResult(frozenset(C), n, l, gamma_hat, a, hbar, q, p, checks)


# ---------------------------------------------------------------------------
# commensuration


def commensurate(Q1: Quasiline, Q2: Quasiline, S_bound: int) -> CommensurationResult:
    if Q1.ambient is not Q2.ambient:
        raise PreconditionError("quasilines live in different windows")
    ball = Q1.ambient
    Y1 = VertexSet(frozenset(Q1.window.labels), "convex")
    Y2 = VertexSet(frozenset(Q2.window.labels), "convex")
    proj = pitchfork(ball.complex, Y1, Y2)
    diam = vertex_set_diameter(ball.complex, proj.members)
    limited = bool(proj.members & ball.boundary)
    if diam <= S_bound:
        return CommensurationResult(False, None, None, diam, limited)
    limit = min(Q1.period_count, Q2.period_count)
    powers1 = {0: list(range(ball.n))}
    powers2 = {0: list(range(ball.n))}

    def power(cache, deck, k):
        if k not in cache:
            step = deck if k > 0 else deck.inverse()
            prev = power(cache, deck, k - (1 if k > 0 else -1))
            cache[k] = [-1 if w < 0 else (step.mapping[w]) for w in prev]
        return cache[k]

    for mag1 in range(1, limit + 1):
        for d1 in (mag1, -mag1):
            f = power(powers1, Q1.deck, d1)
            for mag2 in range(1, limit + 1):
                if mag2 * Q2.translation > mag1 * Q1.translation:
                    break
                if mag2 * Q2.translation != mag1 * Q1.translation:
                    continue
                for d2 in (mag2, -mag2):
                    g = power(powers2, Q2.deck, d2)
                    shared = [v for v in range(ball.n) if f[v] >= 0 and g[v] >= 0]
                    if shared and all(f[v] == g[v] for v in shared):
                        return CommensurationResult(True, d1, d2, diam, limited)
    return CommensurationResult(False, None, None, diam, limited)


def fellow_travel_run(X, word, B: Optional[int] = None, basepoint: int = 0):
    """Size a window for the fellow-travel check, then run it on a centred geodesic of length 3B.

    Returns ``(quasiline, constants, result)``; ``B`` defaults to ``B0``.
    """
    probe = build_quasiline(X, word, MIN_PERIODS, basepoint)
    consts = quasiline_constants(probe)
    B = consts.B0 if B is None else B
    periods = math.ceil((3 * B + 2 * consts.n * consts.M) / probe.translation) + 2
    Q = build_quasiline(X, word, periods, basepoint)
    classes = classify_hyperplanes(Q)
    consts = quasiline_constants(Q, classes)
    steps = math.ceil(3 * B / Q.translation)
    start, stop = Q.power(Q.basepoint, -(steps // 2)), Q.power(Q.basepoint, steps - steps // 2)
    if start is None or stop is None:
        raise WindowTooSmall("geodesic endpoints leave the window")
    gamma = geodesic(Q.window, start, stop)
    result = fellow_travel(Q, frozenset(range(Q.window.n)), gamma, B, classes, consts)
    return Q, consts, result
