"""States on strictly positive / strictly negative unobservable cycles.

A state is *crucial* when some unobservable cycle through it has weight
strictly above the identity, *anti-crucial* when strictly below, and
*eventually* crucial when a crucial state is unobservably reachable from it.
Within a strongly connected component a positive cycle can be spliced into a
cycle through any member state and pumped, so the per-state question reduces
to a per-component negative-cycle check on negated weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import networkx as nx

from .automaton import Automaton


@dataclass(frozen=True)
class CrucialReport:
    crucial: frozenset[str]
    anti_crucial: frozenset[str]
    eventually_crucial: frozenset[str]
    eventually_anti: frozenset[str]


def _has_negative_cycle(
    nodes: list[str], edges: list[tuple[str, str, Fraction]]
) -> bool:
    """Bellman-Ford from a virtual source attached to every node."""
    dist = {v: Fraction(0) for v in nodes}
    for _ in range(len(nodes)):
        changed = False
        for src, dst, w in edges:
            cand = dist[src] + w
            if cand < dist[dst]:
                dist[dst] = cand
                changed = True
        if not changed:
            return False
    for src, dst, w in edges:
        if dist[src] + w < dist[dst]:
            return True
    return False


def crucial_states(a: Automaton) -> CrucialReport:
    """Classify every state of the unobservable part of ``a``."""
    uo_edges = [
        (t.src, t.dst, t.weight.frac) for t in a.uo_transitions()
    ]
    graph = nx.DiGraph()
    graph.add_nodes_from(sorted(a.states))
    graph.add_edges_from((s, d) for s, d, _ in uo_edges)

    crucial: set[str] = set()
    anti: set[str] = set()
    for comp in nx.strongly_connected_components(graph):
        members = sorted(comp)
        inner = [
            (s, d, w) for s, d, w in uo_edges if s in comp and d in comp
        ]
        if not inner:
            continue
        negated = [(s, d, -w) for s, d, w in inner]
        if _has_negative_cycle(members, negated):
            crucial.update(members)
        if _has_negative_cycle(members, inner):
            anti.update(members)

    preds: dict[str, set[str]] = {}
    for s, d, _ in uo_edges:
        preds.setdefault(d, set()).add(s)

    def backward(seed: set[str]) -> frozenset[str]:
        seen = set(seed)
        stack = sorted(seed)
        while stack:
            q = stack.pop()
            for p in preds.get(q, ()):
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return frozenset(seen)

    return CrucialReport(
        crucial=frozenset(crucial),
        anti_crucial=frozenset(anti),
        eventually_crucial=backward(crucial),
        eventually_anti=backward(anti),
    )
