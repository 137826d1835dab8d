"""Control-flow graphs, dominators and natural loops."""

from __future__ import annotations

from dataclasses import dataclass

from ecpart.ir.model import Br, Function, Jmp


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    kind: str  # fallthrough | taken | not_taken


@dataclass(frozen=True)
class Cfg:
    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]
    entry: str
    exits: tuple[str, ...]
    loop_headers: tuple[str, ...]
    back_edges: tuple[Edge, ...]
    # cycle-closing edges of a depth-first walk; equal to back_edges when the graph is reducible
    retreating_edges: tuple[Edge, ...]
    idom: dict
    loops: dict  # header -> frozenset of body labels
    unreachable: tuple[str, ...]
    warnings: tuple[str, ...]

    def __hash__(self) -> int:
        return hash((self.nodes, self.edges, self.entry))

    def successors(self, label: str) -> list[Edge]:
        return [e for e in self.edges if e.src == label]

    def dominates(self, a: str, b: str) -> bool:
        """True iff every path from the entry to ``b`` passes through ``a``."""
        if b not in self.idom:
            return False
        cur: str | None = b
        while cur is not None:
            if cur == a:
                return True
            nxt = self.idom[cur]
            cur = None if nxt == cur else nxt
        return False

    @property
    def reducible(self) -> bool:
        return set(self.retreating_edges) == set(self.back_edges)


def _edges(f: Function) -> list[Edge]:
    out: list[Edge] = []
    for b in f.blocks:
        t = b.term
        if isinstance(t, Jmp):
            out.append(Edge(b.label, t.target, "fallthrough"))
        elif isinstance(t, Br):
            out.append(Edge(b.label, t.then, "taken"))
            out.append(Edge(b.label, t.other, "not_taken"))
    return out


def _reverse_postorder(entry: str, succ: dict[str, list[str]]) -> tuple[list[str], list[tuple[str, str]]]:
    """Reverse postorder plus the (src, dst) pairs closing a cycle in the walk."""
    order: list[str] = []
    state: dict[str, int] = {entry: 1}
    retreating: list[tuple[str, str]] = []
    stack = [(entry, iter(succ[entry]))]
    while stack:
        node, it = stack[-1]
        for s in it:
            st = state.get(s, 0)
            if st == 0:
                state[s] = 1
                stack.append((s, iter(succ[s])))
                break
            if st == 1:
                retreating.append((node, s))
        else:
            state[node] = 2
            order.append(node)
            stack.pop()
    order.reverse()
    return order, retreating


def dominators(entry: str, succ: dict[str, list[str]]) -> dict[str, str]:
    """Immediate dominators of reachable nodes (entry maps to itself).

    Iterative data-flow over reverse postorder with two-finger intersection.
    """
    rpo, _ = _reverse_postorder(entry, succ)
    index = {n: i for i, n in enumerate(rpo)}
    preds: dict[str, list[str]] = {n: [] for n in rpo}
    for n in rpo:
        for s in succ[n]:
            if s in preds:
                preds[s].append(n)
    idom: dict[str, str] = {entry: entry}
    changed = True
    while changed:
        changed = False
        for n in rpo[1:]:
            new = None
            for p in preds[n]:
                if p not in idom:
                    continue
                if new is None:
                    new = p
                    continue
                a, b = p, new
                while a != b:
                    while index[a] > index[b]:
                        a = idom[a]
                    while index[b] > index[a]:
                        b = idom[b]
                new = a
            if new is not None and idom.get(n) != new:
                idom[n] = new
                changed = True
    return idom


def build_cfg(f: Function) -> Cfg:
    labels = [b.label for b in f.blocks]
    edges = _edges(f)
    succ: dict[str, list[str]] = {n: [] for n in labels}
    for e in edges:
        succ[e.src].append(e.dst)
    entry = f.entry
    idom = dominators(entry, succ)
    _, retreating_pairs = _reverse_postorder(entry, succ)

    def dom(a: str, b: str) -> bool:
        cur = b
        while True:
            if cur == a:
                return True
            nxt = idom[cur]
            if nxt == cur:
                return False
            cur = nxt

    back = [e for e in edges if e.src in idom and e.dst in idom and dom(e.dst, e.src)]
    retreating = [e for e in edges if (e.src, e.dst) in set(retreating_pairs)]
    preds: dict[str, list[str]] = {n: [] for n in labels}
    for e in edges:
        preds[e.dst].append(e.src)
    loops: dict[str, frozenset[str]] = {}
    for e in back:
        body = {e.dst}
        work = [e.src]
        while work:
            n = work.pop()
            if n in body:
                continue
            body.add(n)
            work.extend(p for p in preds[n] if p in idom)
        loops[e.dst] = frozenset(loops.get(e.dst, frozenset()) | body)
    headers = tuple(n for n in labels if n in loops)
    unreachable = tuple(n for n in labels if n not in idom)
    warnings = [f"block {n} is unreachable from {entry}" for n in unreachable]
    if set(retreating) != set(back):
        warnings.append("control flow is irreducible; cycles without a dominating header are bounded per retreating edge")
    exits = tuple(b.label for b in f.blocks if not b.successors())
    return Cfg(
        nodes=tuple(labels),
        edges=tuple(edges),
        entry=entry,
        exits=exits,
        loop_headers=headers,
        back_edges=tuple(back),
        retreating_edges=tuple(retreating),
        idom=idom,
        loops=loops,
        unreachable=unreachable,
        warnings=tuple(warnings),
    )
