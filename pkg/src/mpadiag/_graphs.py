"""Small graph helpers shared by the solvers."""

from __future__ import annotations

from typing import Sequence, TypeVar

T = TypeVar("T")

Edge = tuple[str, str, T]


def enumerate_edge_cycles(
    edges: Sequence[Edge], cap: int
) -> tuple[list[list[Edge]], bool]:
    """Simple cycles as edge lists, parallel edges distinguished.

    Returns (cycles, truncated).  Vertex order is fixed so output is
    deterministic; enumeration roots each cycle at its smallest vertex.
    """
    by_src: dict[str, list[Edge]] = {}
    for item in edges:
        by_src.setdefault(item[0], []).append(item)
    for items in by_src.values():
        items.sort(key=lambda it: (it[1],))
    vertices = sorted({e[0] for e in edges} | {e[1] for e in edges})
    order = {v: i for i, v in enumerate(vertices)}
    cycles: list[list[Edge]] = []
    truncated = False

    def dfs(root: str, vert: str, stack: list[Edge], onpath: set[str]) -> bool:
        nonlocal truncated
        for item in by_src.get(vert, ()):
            dst = item[1]
            if order.get(dst, -1) < order[root]:
                continue
            if dst == root:
                cycles.append(stack + [item])
                if len(cycles) >= cap:
                    truncated = True
                    return False
            elif dst not in onpath:
                onpath.add(dst)
                ok = dfs(root, dst, stack + [item], onpath)
                onpath.discard(dst)
                if not ok:
                    return False
        return True

    for root in vertices:
        if not dfs(root, root, [], {root}):
            break
    return cycles, truncated
