"""Twin composition of the faulty and normal views of an automaton.

Product states pair a state of the faulty view (left) with one of the normal
view (right).  Unobservable moves advance one side at a time and carry the
move's weight, positive on the left and negated on the right, so a run's
accumulated weight is the signed left-right imbalance.  An observable edge
exists only when the two sides can each take an unobservable run followed by
one equally-labeled observable step at exactly equal total weight; that
equal-weight certificate is an exact path length query.

Certification is batched: for each source state we compute, per side, the
full set of achievable unobservable path weights inside a bounded integer
window (with fault and positive-cycle tracking bits), and answer all queries
against those sets.  The window is sized from the instance so that exhaustive
answers are sound; see `_window_bound`.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from ._graphs import enumerate_edge_cycles
from .automaton import Automaton, Transition
from .dioid import Weight

CcState = tuple[str, str]


class CcError(Exception):
    pass


class CcInconclusive(CcError):
    """Raised when a budget cap prevents a provably exhaustive answer."""

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


@dataclass(frozen=True)
class CcConfig:
    max_window: int | None = None
    max_cycles: int = 20_000
    max_relaxations: int = 20_000_000
    hard_window_limit: int = 5_000_000


@dataclass(frozen=True)
class UoEdge:
    """One-sided unobservable move; weight is signed (left +, right -)."""

    src: CcState
    side: str  # 'L' or 'R'
    event: str
    dst: CcState
    weight: Fraction
    faulty: bool

    def sort_key(self):
        return (self.src, self.side, self.event, self.dst)


@dataclass(frozen=True)
class ObsEdge:
    """Certified observable move with classification flags.

    ``left_sup`` is the exact maximum weight over admissible left paths
    (None when that maximum is unbounded above, in which case
    ``sup_unbounded`` is set); ``positive`` means some admissible left path
    has strictly positive weight.
    """

    src: CcState
    events: tuple[str, str]
    dst: CcState
    faulty: bool
    positive: bool
    left_sup: Fraction | None
    sup_unbounded: bool

    def sort_key(self):
        return (self.src, self.events, self.dst)


CcRun = tuple  # sequence of UoEdge / ObsEdge; shape checked where it matters


@dataclass(frozen=True)
class CompositionGraph:
    states: tuple[CcState, ...]
    initial: tuple[CcState, ...]
    uo_edges: tuple[UoEdge, ...]
    obs_edges: tuple[ObsEdge, ...]
    left: Automaton
    right: Automaton

    def uo_out(self) -> dict[CcState, list[UoEdge]]:
        out: dict[CcState, list[UoEdge]] = {}
        for e in self.uo_edges:
            out.setdefault(e.src, []).append(e)
        return out

    def obs_out(self) -> dict[CcState, list[ObsEdge]]:
        out: dict[CcState, list[ObsEdge]] = {}
        for e in self.obs_edges:
            out.setdefault(e.src, []).append(e)
        return out


# ---------------------------------------------------------------------------
# Per-side achievable-weight sets
# ---------------------------------------------------------------------------


def _shift(mask: int, k: int) -> int:
    return mask << k if k >= 0 else mask >> (-k)


class _SideEngine:
    """Achievable unobservable path weights of one side, per source state.

    Nodes of the search graph are (state, fault bit, positive-cycle bit);
    the positive-cycle bit records passing a vertex that lies on some
    strictly positive unobservable simple cycle, which is exactly what makes
    matched left/right pumping possible.  Weight sets are bitmask windows of
    scaled integers.
    """

    def __init__(self, auto: Automaton, scale: int, config: CcConfig):
        self.config = config
        self.edges = [
            (t.src, t.dst, int(t.weight.frac * scale), t.event.faulty)
            for t in auto.uo_transitions()
        ]
        packed = [(s, d, (w, fl)) for s, d, w, fl in self.edges]
        cycles, truncated = enumerate_edge_cycles(packed, config.max_cycles)
        if truncated:
            raise CcInconclusive("unobservable cycle enumeration cap exceeded")
        self.has_cycles = bool(cycles)
        self.marked: set[str] = set()
        self.pos_weights: set[int] = set()
        for cyc in cycles:
            w = sum(p[2][0] for p in cyc)
            if w > 0:
                self.marked.update(p[0] for p in cyc)
                self.pos_weights.add(w)
        # per vertex: cycle weights usable as in-place loops once the
        # (fault, positive-cycle) bits they would touch are already set
        self.vertex_cycles: dict[str, list[tuple[int, bool, bool]]] = {}
        for cyc in cycles:
            w = sum(p[2][0] for p in cyc)
            if w == 0:
                continue
            has_fault = any(p[2][1] for p in cyc)
            verts = {p[0] for p in cyc}
            hits_marked = bool(verts & self.marked)
            for q in verts:
                self.vertex_cycles.setdefault(q, []).append(
                    (w, has_fault, hits_marked)
                )
        self.window = 0
        self.off = 0
        self.full = 0
        self._memo: dict[str, dict[str, tuple[int, int, int]]] = {}
        self._relaxations = 0

    def set_window(self, window: int) -> None:
        self.window = window
        self.off = window
        self.full = (1 << (2 * window + 1)) - 1
        self._memo.clear()

    def masks(self, src: str) -> dict[str, tuple[int, int, int]]:
        """Per destination state: (all paths, fault-seen, positive-cycle-seen)."""
        cached = self._memo.get(src)
        if cached is None:
            cached = self._compute(src)
            self._memo[src] = cached
        return cached

    def _compute(self, src: str) -> dict[str, tuple[int, int, int]]:
        full, off = self.full, self.off
        out_edges: dict[tuple, list[tuple[tuple, int]]] = {}
        loops: dict[tuple, list[int]] = {}

        def node_out(node: tuple):
            cached = out_edges.get(node)
            if cached is None:
                q, f, p = node
                cached = []
                for s, d, w, fl in self.edges:
                    if s != q:
                        continue
                    nxt = (d, f or fl, p or (d in self.marked))
                    if nxt == node:
                        loops.setdefault(node, []).append(w)
                    else:
                        cached.append((nxt, w))
                for w, has_fault, hits_marked in self.vertex_cycles.get(q, ()):
                    if (has_fault and not f) or (hits_marked and not p):
                        continue
                    loops.setdefault(node, []).append(w)
                out_edges[node] = cached
            return cached

        def saturate(mask: int, ws: list[int]) -> int:
            while True:
                before = mask
                for w in ws:
                    if w == 0:
                        continue
                    self._relaxations += 1
                    if self._relaxations > self.config.max_relaxations:
                        raise CcInconclusive("weight-set relaxation budget exceeded")
                    step = w
                    while True:
                        grown = mask | (_shift(mask, step) & full)
                        if grown == mask:
                            break
                        mask = grown
                        step *= 2
                if mask == before:
                    return mask

        start = (src, False, src in self.marked)
        masks: dict[tuple, int] = {start: 1 << off}
        queue = deque([start])
        queued = {start}
        while queue:
            node = queue.popleft()
            queued.discard(node)
            outs = node_out(node)
            ws = loops.get(node)
            if ws:
                masks[node] = saturate(masks[node], ws)
            m = masks[node]
            for nxt, w in outs:
                self._relaxations += 1
                if self._relaxations > self.config.max_relaxations:
                    raise CcInconclusive("weight-set relaxation budget exceeded")
                add = _shift(m, w) & full & ~masks.get(nxt, 0)
                if add:
                    masks[nxt] = masks.get(nxt, 0) | add
                    if nxt not in queued:
                        queued.add(nxt)
                        queue.append(nxt)

        agg: dict[str, list[int]] = {}
        for (q, f, p), m in masks.items():
            entry = agg.setdefault(q, [0, 0, 0])
            entry[0] |= m
            if f:
                entry[1] |= m
            if p:
                entry[2] |= m
        return {q: (e[0], e[1], e[2]) for q, e in agg.items()}


def _window_bound(
    left: _SideEngine,
    right: _SideEngine,
    n_left: int,
    n_right: int,
    zmax: int,
    config: CcConfig,
) -> int:
    """Half-window guaranteeing exhaustive certification and exact suprema.

    Any certificate walk decomposes into a simple path of the two-sided
    search graph plus simple cycles, so prefix sums can be confined to the
    classic (n+1)*n*W window around the target; matched pumping lands inside
    the window in steps of lcm(positive cycle weights), hence the lcm term.
    Acyclic sides need only the simple-path span.
    """
    nbits = 4 * n_left + 2 * n_right + 1
    wmax = max(
        [abs(w) for _, _, w, _ in left.edges]
        + [abs(w) for _, _, w, _ in right.edges]
        + [0]
    )
    span = nbits * wmax
    if not (left.has_cycles or right.has_cycles):
        bound = zmax + 2 * span + 1
    else:
        lcm_max = 0
        for p in sorted(left.pos_weights):
            for q in sorted(right.pos_weights):
                lcm_max = max(lcm_max, p * q // math.gcd(p, q))
        bound = zmax + (nbits + 1) * nbits * wmax + lcm_max + 4 * span + 1
    if config.max_window is not None and bound > config.max_window:
        raise CcInconclusive(
            f"required window {bound} exceeds cap {config.max_window}"
        )
    if bound > config.hard_window_limit:
        raise CcInconclusive(
            f"required window {bound} exceeds hard limit {config.hard_window_limit}"
        )
    return bound


# ---------------------------------------------------------------------------
# Build
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Cert:
    faulty: bool
    unbounded: bool
    sup: Fraction


def _lcm_denoms(values: Iterable[Fraction]) -> int:
    scale = 1
    for v in values:
        scale = scale * v.denominator // math.gcd(scale, v.denominator)
    return scale


class _Certifier:
    def __init__(self, af: Automaton, an: Automaton, config: CcConfig):
        weights = [t.weight.frac for t in af.transitions] + [
            t.weight.frac for t in an.transitions
        ]
        self.scale = _lcm_denoms(weights)
        self.left = _SideEngine(af, self.scale, config)
        self.right = _SideEngine(an, self.scale, config)

        self.pairs: list[tuple[Transition, Transition, int]] = []
        by_label: dict[str, list[Transition]] = {}
        for t2 in an.obs_transitions():
            if t2.event.faulty:
                continue
            by_label.setdefault(t2.event.label, []).append(t2)
        zmax = 0
        for t1 in af.obs_transitions():
            for t2 in by_label.get(t1.event.label, ()):
                z = int((t2.weight.frac - t1.weight.frac) * self.scale)
                zmax = max(zmax, abs(z))
                self.pairs.append((t1, t2, z))
        window = _window_bound(
            self.left, self.right, len(af.states), len(an.states), zmax, config
        )
        self.left.set_window(window)
        self.right.set_window(window)
        self.off = window
        self.full = (1 << (2 * window + 1)) - 1

    def certify(self, a: str, b: str, t1: Transition, t2: Transition, z: int) -> _Cert | None:
        lmask = self.left.masks(a).get(t1.src)
        rmask = self.right.masks(b).get(t2.src)
        if lmask is None or rmask is None:
            return None
        aligned = _shift(rmask[0], z) & self.full
        hit = lmask[0] & aligned
        if not hit:
            return None
        faulty = t1.event.faulty or bool(lmask[1] & aligned)
        unbounded = bool(lmask[2] & _shift(rmask[2], z) & self.full)
        sup_scaled = hit.bit_length() - 1 - self.off
        sup = Fraction(sup_scaled, self.scale) + t1.weight.frac
        return _Cert(faulty, unbounded, sup)


def build_composition(
    af: Automaton, an: Automaton, config: CcConfig | None = None
) -> CompositionGraph:
    """Explore the product from the initial pairs, alternating one-sided
    unobservable closure with observable-edge certification to a fixpoint."""
    config = config or CcConfig()
    certifier = _Certifier(af, an, config)

    left_uo: dict[str, list[Transition]] = {}
    for t in af.uo_transitions():
        left_uo.setdefault(t.src, []).append(t)
    right_uo: dict[str, list[Transition]] = {}
    for t in an.uo_transitions():
        if t.event.faulty:
            raise CcError("normal view may not contain faulty transitions")
        right_uo.setdefault(t.src, []).append(t)

    initial = sorted(
        (a, b) for a in af.initial_states for b in an.initial_states
    )
    states: set[CcState] = set(initial)
    queue = deque(initial)
    uo_edges: list[UoEdge] = []
    obs_acc: dict[tuple, dict] = {}

    def visit(state: CcState):
        if state not in states:
            states.add(state)
            queue.append(state)

    while queue:
        a, b = queue.popleft()
        for t in left_uo.get(a, ()):
            dst = (t.dst, b)
            uo_edges.append(
                UoEdge((a, b), "L", t.event.name, dst, t.weight.frac, t.event.faulty)
            )
            visit(dst)
        for t in right_uo.get(b, ()):
            dst = (a, t.dst)
            uo_edges.append(
                UoEdge((a, b), "R", t.event.name, dst, -t.weight.frac, False)
            )
            visit(dst)
        for t1, t2, z in certifier.pairs:
            cert = certifier.certify(a, b, t1, t2, z)
            if cert is None:
                continue
            key = ((a, b), (t1.event.name, t2.event.name), (t1.dst, t2.dst))
            entry = obs_acc.get(key)
            if entry is None:
                entry = {"faulty": False, "unbounded": False, "sup": None}
                obs_acc[key] = entry
            entry["faulty"] = entry["faulty"] or cert.faulty
            entry["unbounded"] = entry["unbounded"] or cert.unbounded
            if entry["sup"] is None or cert.sup > entry["sup"]:
                entry["sup"] = cert.sup
            visit(key[2])

    obs_edges = []
    for (src, events, dst), entry in obs_acc.items():
        unbounded = entry["unbounded"]
        sup = None if unbounded else entry["sup"]
        positive = unbounded or (sup is not None and sup > 0)
        obs_edges.append(
            ObsEdge(src, events, dst, entry["faulty"], positive, sup, unbounded)
        )

    return CompositionGraph(
        states=tuple(sorted(states)),
        initial=tuple(initial),
        uo_edges=tuple(sorted(uo_edges, key=UoEdge.sort_key)),
        obs_edges=tuple(sorted(obs_edges, key=ObsEdge.sort_key)),
        left=af,
        right=an,
    )


def unobservable_composition(
    af: Automaton, an: Automaton, config: CcConfig | None = None
) -> tuple[UoEdge, ...]:
    """Unobservable part of the full composition (all discovered states)."""
    return build_composition(af, an, config).uo_edges


def observable_transitions(
    af: Automaton,
    an: Automaton,
    uo_part: tuple[UoEdge, ...] | None = None,
    config: CcConfig | None = None,
) -> tuple[ObsEdge, ...]:
    """Certified observable edges of the composition; ``uo_part`` is accepted
    for interface symmetry but the closure is recomputed."""
    return build_composition(af, an, config).obs_edges


def classify_obs_transition(t: ObsEdge) -> tuple[bool, bool]:
    """(faulty, positive) flags carried by a certified observable edge."""
    return t.faulty, t.positive


def positive_simple_cycle(cc: CompositionGraph, cycle: Sequence[ObsEdge]) -> bool:
    """Can the per-edge admissible left paths around the cycle sum above zero?

    Each edge's admissible left-path weight ranges over an independent set
    (the edge endpoints pin each side's start and end), so the best total is
    the sum of per-edge suprema.
    """
    if not cycle:
        raise CcError("empty cycle")
    edge_set = set(cc.obs_edges)
    at = cycle[0].src
    seen = {at}
    for i, e in enumerate(cycle):
        if e not in edge_set:
            raise CcError(f"edge {e} not in the composition")
        if e.src != at:
            raise CcError("cycle edges do not chain")
        at = e.dst
        if i < len(cycle) - 1:
            if at in seen:
                raise CcError("cycle is not simple")
            seen.add(at)
    if at != cycle[0].src:
        raise CcError("cycle does not close")
    total = Fraction(0)
    for e in cycle:
        if e.sup_unbounded:
            return True
        total += e.left_sup
    return total > 0


def normalize_unobservable_run(run: Sequence[UoEdge]) -> tuple[UoEdge, ...]:
    """Reorder a fully unobservable run to all left moves then all right moves.

    Swapping adjacent moves of opposite sides never changes either side's
    projected path, so the result has identical left and right components.
    Already-normalized runs come back unchanged.
    """
    if not run:
        return ()
    at = run[0].src
    for e in run:
        if e.src != at:
            raise CcError("run edges do not chain")
        at = e.dst
    lefts = [e for e in run if e.side == "L"]
    rights = [e for e in run if e.side == "R"]
    if [e for e in run if e.side not in ("L", "R")]:
        raise CcError("run contains non-unobservable edges")

    out: list[UoEdge] = []
    lx, ry = run[0].src
    for e in lefts:
        nlx = e.dst[0]
        out.append(UoEdge((lx, ry), "L", e.event, (nlx, ry), e.weight, e.faulty))
        lx = nlx
    for e in rights:
        nry = e.dst[1]
        out.append(UoEdge((lx, ry), "R", e.event, (lx, nry), e.weight, e.faulty))
        ry = nry
    result = tuple(out)
    if result == tuple(run):
        return tuple(run)
    return result
