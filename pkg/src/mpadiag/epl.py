"""Exact path length queries on rational-weighted directed graphs.

``epl_decide`` answers whether a walk of exactly a given weight connects two
vertices; ``epl_decide_thresholded`` adds a second weight coordinate that must
exceed a strict bound while the first hits an exact target.  Both work on
scaled integers inside a bounded weight window; the window required for a
provably exhaustive "no" is derived from the instance (any witness walk
decomposes into a simple path plus simple cycles whose insertions can be
reordered to keep prefix sums inside the window), and answers degrade to
"unknown" when a caller-imposed cap cuts the search short of that bound.
"""

from __future__ import annotations

import enum
import itertools
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from ._graphs import enumerate_edge_cycles


class EplError(Exception):
    pass


@dataclass(frozen=True)
class GraphEdge:
    src: str
    dst: str
    weight: tuple[Fraction, ...]
    tag: object = None

    def sort_key(self):
        return (self.src, self.dst, self.weight)


class WeightedGraph:
    """Directed graph with k-dimensional exact rational edge weights (k in {1, 2})."""

    def __init__(self, edges: Iterable[GraphEdge], vertices: Iterable[str] = ()):
        self.edges: tuple[GraphEdge, ...] = tuple(sorted(edges, key=GraphEdge.sort_key))
        dims = {len(e.weight) for e in self.edges}
        if len(dims) > 1:
            raise EplError("mixed weight dimensions")
        self.dim: int = dims.pop() if dims else 1
        if self.dim not in (1, 2):
            raise EplError(f"unsupported weight dimension {self.dim}")
        vs = set(vertices)
        for e in self.edges:
            vs.add(e.src)
            vs.add(e.dst)
        self.vertices: frozenset[str] = frozenset(vs)

    def require_vertex(self, v: str) -> None:
        if v not in self.vertices:
            raise EplError(f"unknown vertex {v!r}")


def parse_wg(text: str) -> WeightedGraph:
    """Line format: ``edge <src> <dst> <w1> [<w2>]`` plus optional ``vertex <v>``."""
    edges: list[GraphEdge] = []
    vertices: list[str] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if toks[0] == "vertex" and len(toks) == 2:
            vertices.append(toks[1])
        elif toks[0] == "edge" and len(toks) in (4, 5):
            try:
                ws = tuple(Fraction(t) for t in toks[3:])
            except (ValueError, ZeroDivisionError) as exc:
                raise EplError(f"line {line_no}: bad weight") from exc
            edges.append(GraphEdge(toks[1], toks[2], ws))
        else:
            raise EplError(f"line {line_no}: expected 'edge <src> <dst> <w> [<w>]'")
    return WeightedGraph(edges, vertices)


@dataclass(frozen=True)
class EplBudget:
    """Search knobs.  ``max_window`` caps the scaled half-window; below the
    instance-derived requirement the solver reports Unknown instead of No."""

    max_window: int | None = None
    max_relaxations: int = 5_000_000
    max_cycles: int = 10_000


class EplStatus(enum.Enum):
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class EplAnswer:
    status: EplStatus
    witness: tuple[GraphEdge, ...] | None = None
    reason: str = ""

    @property
    def is_yes(self) -> bool:
        return self.status is EplStatus.YES


def _lcm_denoms(values: Iterable[Fraction]) -> int:
    scale = 1
    for v in values:
        scale = scale * v.denominator // math.gcd(scale, v.denominator)
    return scale


def _replay(witness: Sequence[GraphEdge], v1: str, v2: str) -> tuple[Fraction, ...]:
    at = v1
    dim = len(witness[0].weight) if witness else 1
    total = [Fraction(0)] * dim
    for e in witness:
        if e.src != at:
            raise EplError(f"witness breaks at {e.src}->{e.dst}")
        for i, w in enumerate(e.weight):
            total[i] += w
        at = e.dst
    if at != v2:
        raise EplError("witness ends at the wrong vertex")
    return tuple(total)


def _restrict(g: WeightedGraph, v1: str, v2: str):
    """Vertices on some v1 -> v2 walk (unweighted reach and co-reach)."""
    fwd: dict[str, set[str]] = {}
    bwd: dict[str, set[str]] = {}
    for e in g.edges:
        fwd.setdefault(e.src, set()).add(e.dst)
        bwd.setdefault(e.dst, set()).add(e.src)

    def closure(seed: str, adj: dict[str, set[str]]) -> set[str]:
        seen = {seed}
        stack = [seed]
        while stack:
            q = stack.pop()
            for nxt in adj.get(q, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    useful = closure(v1, fwd) & closure(v2, bwd)
    edges = [e for e in g.edges if e.src in useful and e.dst in useful]
    return useful, edges


def epl_decide(
    g: WeightedGraph, v1: str, v2: str, z: Fraction | int, budget: EplBudget | None = None
) -> EplAnswer:
    """Exact one-dimensional query.  The length-0 walk counts when v1 == v2."""
    budget = budget or EplBudget()
    g.require_vertex(v1)
    g.require_vertex(v2)
    if g.dim != 1:
        raise EplError("epl_decide expects 1-dimensional weights")
    z = Fraction(z)
    if v1 == v2 and z == 0:
        return EplAnswer(EplStatus.YES, ())

    useful, edges = _restrict(g, v1, v2)
    if v2 not in useful:
        return EplAnswer(EplStatus.NO, reason="target not reachable")

    scale = _lcm_denoms([e.weight[0] for e in edges] + [z])
    zs = int(z * scale)
    scaled = [(e, int(e.weight[0] * scale)) for e in edges]
    n = len(useful)
    wmax = max((abs(w) for _, w in scaled), default=0)
    required = abs(zs) + (n + 1) * n * wmax
    window = required if budget.max_window is None else min(required, budget.max_window)

    adj: dict[str, list[tuple[GraphEdge, int]]] = {}
    for e, w in scaled:
        adj.setdefault(e.src, []).append((e, w))

    parents: dict[tuple[str, int], tuple[tuple[str, int], GraphEdge] | None] = {
        (v1, 0): None
    }
    queue = deque([(v1, 0)])
    target = (v2, zs)
    found = target in parents
    while queue and not found:
        state = queue.popleft()
        vert, acc = state
        for e, w in adj.get(vert, ()):
            nacc = acc + w
            if abs(nacc) > window:
                continue
            nstate = (e.dst, nacc)
            if nstate in parents:
                continue
            parents[nstate] = (state, e)
            if nstate == target:
                found = True
                break
            queue.append(nstate)

    if found:
        witness: list[GraphEdge] = []
        cur = target
        while parents[cur] is not None:
            prev, e = parents[cur]
            witness.append(e)
            cur = prev
        witness.reverse()
        total = _replay(witness, v1, v2)
        assert total[0] == z
        return EplAnswer(EplStatus.YES, tuple(witness))
    if window >= required:
        return EplAnswer(EplStatus.NO, reason="window exhausted")
    return EplAnswer(EplStatus.UNKNOWN, reason=f"window capped at {window} < {required}")


def brute_force_weights(
    g: WeightedGraph, v1: str, v2: str, max_len: int
) -> set[tuple[Fraction, ...]]:
    """Exact weight vectors of all walks of length <= max_len from v1 to v2.

    Test oracle: pure enumeration, exponential in max_len.  The empty walk
    contributes the zero vector when v1 == v2.
    """
    g.require_vertex(v1)
    g.require_vertex(v2)
    zero = tuple(Fraction(0) for _ in range(g.dim))
    adj: dict[str, list[GraphEdge]] = {}
    for e in g.edges:
        adj.setdefault(e.src, []).append(e)
    out: set[tuple[Fraction, ...]] = set()
    frontier: dict[str, set[tuple[Fraction, ...]]] = {v1: {zero}}
    if v1 == v2:
        out.add(zero)
    for _ in range(max_len):
        nxt: dict[str, set[tuple[Fraction, ...]]] = {}
        for vert, sums in frontier.items():
            for e in adj.get(vert, ()):
                bumped = {
                    tuple(s + w for s, w in zip(acc, e.weight)) for acc in sums
                }
                nxt.setdefault(e.dst, set()).update(bumped)
        out.update(nxt.get(v2, ()))
        frontier = nxt
        if not frontier:
            break
    return out


# ---------------------------------------------------------------------------
# Two-dimensional variant: dim 1 exact, dim 2 strictly above a bound
# ---------------------------------------------------------------------------


def _enumerate_edge_cycles(
    edges: Sequence[tuple[GraphEdge, int, int]], cap: int
) -> list[list[tuple[GraphEdge, int, int]]]:
    """Simple cycles as edge lists (parallel edges distinguished), capped."""
    packed = [(e.src, e.dst, (e, a, b)) for e, a, b in edges]
    cycles, _ = enumerate_edge_cycles(packed, cap)
    return [[payload for _, _, payload in cyc] for cyc in cycles]


def _phase_bfs(
    adj: dict[str, list[tuple[GraphEdge, int]]],
    v1: str,
    v2: str,
    zs: int,
    window: int,
    anchor_sets: Sequence[frozenset[str]],
):
    """Walk from v1 to v2 with dim-1 total exactly zs passing the anchor sets
    in order; returns parent links for witness reconstruction or None."""
    phases = len(anchor_sets)

    def lift(vert: str, phase: int) -> int:
        while phase < phases and vert in anchor_sets[phase]:
            phase += 1
        return phase

    start = (v1, 0, lift(v1, 0))
    parents: dict[tuple, tuple | None] = {start: None}
    queue = deque([start])
    target = (v2, zs, phases)
    if start == target:
        return parents, target
    while queue:
        state = queue.popleft()
        vert, acc, phase = state
        for e, w in adj.get(vert, ()):
            nacc = acc + w
            if abs(nacc) > window:
                continue
            nstate = (e.dst, nacc, lift(e.dst, phase))
            if nstate in parents:
                continue
            parents[nstate] = (state, e)
            if nstate == target:
                return parents, target
            queue.append(nstate)
    return None


def _trace(parents: dict, state) -> list[GraphEdge]:
    path: list[GraphEdge] = []
    while parents[state] is not None:
        prev, e = parents[state]
        path.append(e)
        state = prev
    path.reverse()
    return path


def _insert_loops(
    base: list[GraphEdge], loops: list[tuple[str, list[GraphEdge], int]], v1: str
) -> list[GraphEdge]:
    """Splice `count` turns of each loop (an edge cycle anchored at a vertex)
    into the first visit of its anchor along the base walk."""
    remaining = list(loops)
    out: list[GraphEdge] = []

    def visit(vert: str):
        nonlocal remaining
        keep = []
        for anchor, cycle, count in remaining:
            if anchor == vert:
                rotated = _rotate_cycle(cycle, anchor)
                for _ in range(count):
                    out.extend(rotated)
            else:
                keep.append((anchor, cycle, count))
        remaining = keep

    visit(v1)
    at = v1
    for e in base:
        out.append(e)
        at = e.dst
        visit(at)
    if remaining:
        raise EplError("loop anchor never visited")
    return out


def _rotate_cycle(cycle: list[GraphEdge], anchor: str) -> list[GraphEdge]:
    for i, e in enumerate(cycle):
        if e.src == anchor:
            return cycle[i:] + cycle[:i]
    raise EplError("anchor not on cycle")


def epl_decide_thresholded(
    g: WeightedGraph,
    v1: str,
    v2: str,
    z_exact: Fraction | int,
    strict_lower_bound: Fraction | int,
    budget: EplBudget | None = None,
) -> EplAnswer:
    """Walk with dim-1 weight exactly ``z_exact`` and dim-2 weight strictly
    above ``strict_lower_bound``.

    Unbounded dim-2 growth is detected two ways: a positive-dim-2 cycle of the
    (vertex, dim-1 prefix) search graph, and pairs of opposite-dim-1 simple
    cycles whose canceling combination gains dim-2, each anchored on a walk
    that hits the exact dim-1 target.
    """
    budget = budget or EplBudget()
    g.require_vertex(v1)
    g.require_vertex(v2)
    if g.dim != 2:
        raise EplError("epl_decide_thresholded expects 2-dimensional weights")
    z = Fraction(z_exact)
    bound = Fraction(strict_lower_bound)

    useful, edges = _restrict(g, v1, v2)
    if v2 not in useful:
        return EplAnswer(EplStatus.NO, reason="target not reachable")

    scale1 = _lcm_denoms([e.weight[0] for e in edges] + [z])
    scale2 = _lcm_denoms([e.weight[1] for e in edges] + [bound])
    zs = int(z * scale1)
    bs = int(bound * scale2)
    scaled = [
        (e, int(e.weight[0] * scale1), int(e.weight[1] * scale2)) for e in edges
    ]
    n = max(1, len(useful))
    w1 = max((abs(a) for _, a, _ in scaled), default=0)
    span = n * w1
    cert = abs(zs) + (n + 1) * n * w1
    same_sign = abs(zs) + (abs(zs) + span + 2) * max(span, 1)
    required = max(cert, same_sign)
    window = required if budget.max_window is None else min(required, budget.max_window)
    capped = window < required

    adj: dict[str, list[tuple[GraphEdge, int, int]]] = {}
    adj1: dict[str, list[tuple[GraphEdge, int]]] = {}
    radj: dict[str, list[tuple[GraphEdge, int, int]]] = {}
    for e, a, b in scaled:
        adj.setdefault(e.src, []).append((e, a, b))
        adj1.setdefault(e.src, []).append((e, a))
        radj.setdefault(e.dst, []).append((e, a, b))

    # Forward reach and backward co-reach over (vertex, dim-1 prefix).
    reach: set[tuple[str, int]] = {(v1, 0)}
    queue = deque(reach)
    while queue:
        vert, acc = queue.popleft()
        for e, a, _ in adj.get(vert, ()):
            nacc = acc + a
            if abs(nacc) > window:
                continue
            st = (e.dst, nacc)
            if st not in reach:
                reach.add(st)
                queue.append(st)
    if (v2, zs) not in reach:
        if capped:
            return EplAnswer(EplStatus.UNKNOWN, reason="window capped")
        return EplAnswer(EplStatus.NO, reason="exact dim-1 target unreachable")
    co: set[tuple[str, int]] = {(v2, zs)}
    queue = deque(co)
    while queue:
        vert, acc = queue.popleft()
        for e, a, _ in radj.get(vert, ()):
            pacc = acc - a
            if abs(pacc) > window:
                continue
            st = (e.src, pacc)
            if st not in co:
                co.add(st)
                queue.append(st)
    live = reach & co

    # Longest dim-2 total over the live search graph; overflow marks a
    # positive cycle that can be pumped.
    dist: dict[tuple[str, int], int] = {(v1, 0): 0}
    back: dict[tuple[str, int], tuple[tuple[str, int], GraphEdge] | None] = {
        (v1, 0): None
    }
    bumps: dict[tuple[str, int], int] = {}
    queue = deque([(v1, 0)])
    inq = {(v1, 0)}
    relaxations = 0
    pump_state = None
    limit = len(live)
    while queue:
        state = queue.popleft()
        inq.discard(state)
        vert, acc = state
        d = dist[state]
        for e, a, b in adj.get(vert, ()):
            nstate = (e.dst, acc + a)
            if nstate not in live:
                continue
            relaxations += 1
            if relaxations > budget.max_relaxations:
                return EplAnswer(EplStatus.UNKNOWN, reason="relaxation budget")
            nd = d + b
            if nstate not in dist or nd > dist[nstate]:
                dist[nstate] = nd
                back[nstate] = (state, e)
                bumps[nstate] = bumps.get(nstate, 0) + 1
                if bumps[nstate] > limit:
                    pump_state = nstate
                    queue.clear()
                    break
                if nstate not in inq:
                    inq.add(nstate)
                    queue.append(nstate)

    if pump_state is not None:
        witness = _pump_state_cycle(
            pump_state, back, adj, radj, v1, v2, zs, bs, window, scale1, scale2
        )
        if witness is not None:
            total = _replay(witness, v1, v2)
            assert total[0] == z and total[1] > bound
            return EplAnswer(EplStatus.YES, tuple(witness))
        return EplAnswer(EplStatus.UNKNOWN, reason="pumping reconstruction failed")

    answer = _pair_pumping(
        scaled, adj1, v1, v2, zs, bs, n, w1, window, budget, z, bound, scale2
    )
    if answer is not None:
        return answer

    best = dist.get((v2, zs))
    if best is not None and best > bs:
        witness = _trace(back, (v2, zs))
        total = _replay(witness, v1, v2)
        assert total[0] == z and total[1] > bound
        return EplAnswer(EplStatus.YES, tuple(witness))
    if capped:
        return EplAnswer(EplStatus.UNKNOWN, reason="window capped")
    return EplAnswer(EplStatus.NO, reason="no walk beats the bound")


def _pump_state_cycle(
    state, back, adj, radj, v1, v2, zs, bs, window, scale1, scale2
):
    """Turn a relaxation overflow into an explicit witness: locate the
    positive-dim-2 cycle in the back-pointer graph, then splice enough turns
    of it into a base walk that hits the exact target."""
    pos: dict[tuple[str, int], int] = {}
    cur = state
    while True:
        if cur in pos:
            anchor = cur
            break
        pos[cur] = len(pos)
        if back.get(cur) is None:
            return None
        cur = back[cur][0]
    cycle_edges: list[GraphEdge] = []
    probe = anchor
    while True:
        prev, e = back[probe]
        cycle_edges.append(e)
        probe = prev
        if probe == anchor:
            break
    cycle_edges.reverse()
    a_total = sum(int(e.weight[0] * scale1) for e in cycle_edges)
    cyc_b = sum(int(e.weight[1] * scale2) for e in cycle_edges)
    if a_total != 0 or cyc_b <= 0:
        return None

    # Base walk v1 -> v2 with exact dim-1 total through the cycle's anchor
    # vertex; the loop insertion leaves the dim-1 total untouched.
    adj_pairs = {
        vert: [(e, a) for e, a, _ in items] for vert, items in adj.items()
    }
    res = _phase_bfs(adj_pairs, v1, v2, zs, window, [frozenset({anchor[0]})])
    if res is None:
        return None
    parents, target = res
    base = _trace(parents, target)
    base_b = sum(int(e.weight[1] * scale2) for e in base)
    turns = max(1, (bs - base_b) // cyc_b + 2)
    return _insert_loops(base, [(anchor[0], cycle_edges, turns)], v1)


def _pair_pumping(
    scaled, adj1, v1, v2, zs, bs, n, w1, window, budget, z, bound, scale2
):
    """Opposite-sign dim-1 cycle pairs whose canceling mix gains dim-2."""
    cycles = _enumerate_edge_cycles(scaled, budget.max_cycles)
    vecs = []
    for cyc in cycles:
        a = sum(item[1] for item in cyc)
        b = sum(item[2] for item in cyc)
        vecs.append((a, b, [item[0] for item in cyc]))

    singles = [(b, edges) for a, b, edges in vecs if a == 0 and b > 0]
    pos = [(a, b, e) for a, b, e in vecs if a > 0]
    neg = [(a, b, e) for a, b, e in vecs if a < 0]

    evidence_window = abs(zs) + (3 * n + 1) * 3 * n * w1
    if budget.max_window is not None:
        evidence_window = min(evidence_window, budget.max_window)

    def scaled_dim2(edges: Sequence[GraphEdge]) -> int:
        return sum(int(e.weight[1] * scale2) for e in edges)

    for b, edges in singles:
        anchors = frozenset(e.src for e in edges)
        res = _phase_bfs(adj1, v1, v2, zs, evidence_window, [anchors])
        if res is None:
            continue
        parents, target = res
        base = _trace(parents, target)
        anchor = _first_anchor(base, anchors, v1)
        turns = max(1, (bs - scaled_dim2(base)) // b + 2)
        witness = _insert_loops(base, [(anchor, edges, turns)], v1)
        return _certify(witness, v1, v2, z, bound)

    for (a1, b1, e1), (a2, b2, e2) in itertools.product(pos, neg):
        g = math.gcd(a1, -a2)
        x, y = -a2 // g, a1 // g
        gain = b1 * x + b2 * y
        if gain <= 0:
            continue
        anchors1 = frozenset(e.src for e in e1)
        anchors2 = frozenset(e.src for e in e2)
        for first, second, cyc1, cyc2, c1, c2 in (
            (anchors1, anchors2, e1, e2, x, y),
            (anchors2, anchors1, e2, e1, y, x),
        ):
            res = _phase_bfs(adj1, v1, v2, zs, evidence_window, [first, second])
            if res is None:
                continue
            parents, target = res
            base = _trace(parents, target)
            va = _first_anchor(base, first, v1)
            vb = _first_anchor(base, second, v1)
            k = max(1, (bs - scaled_dim2(base)) // gain + 2)
            witness = _insert_loops(
                base, [(va, cyc1, c1 * k), (vb, cyc2, c2 * k)], v1
            )
            return _certify(witness, v1, v2, z, bound)
    return None


def _first_anchor(base: Sequence[GraphEdge], anchors: frozenset[str], v1: str) -> str:
    seq = [v1] + [e.dst for e in base]
    for vert in seq:
        if vert in anchors:
            return vert
    raise EplError("anchor not on base walk")


def _certify(witness, v1, v2, z, bound) -> EplAnswer:
    total = _replay(witness, v1, v2)
    if total[0] != z or total[1] <= bound:
        raise EplError("constructed witness failed replay")
    return EplAnswer(EplStatus.YES, tuple(witness))
