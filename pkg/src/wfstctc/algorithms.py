"""Graph algebra: composition, trimming, epsilon removal, sorting, oracles."""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass

from .fst import EPS, Arc, FstError, Wfst, WfstBuilder, empty_fst
from .semiring import NEG_INF, log_add, weights_close

DEFAULT_PATH_CAP = 10**7


class CycleError(FstError):
    def __init__(self, message: str, cycle: list[int]):
        super().__init__(message)
        self.cycle = cycle


class PathLimitError(FstError):
    pass


def _check_tables(a: Wfst, b: Wfst) -> None:
    if a.osyms is not None and b.isyms is not None and a.osyms != b.isyms:
        raise FstError(
            f"symbol table mismatch: left output table {a.osyms!r} "
            f"!= right input table {b.isyms!r}"
        )


def compose(a: Wfst, b: Wfst) -> Wfst:
    """Compose ``a`` (x -> y) with ``b`` (y -> z) and trim the result.

    Epsilon moves go through a three-state filter so that every
    interleaving of ``a``'s epsilon outputs with ``b``'s epsilon inputs is
    counted exactly once:

    * filter 0: anything allowed
    * filter 1: only ``b`` has moved alone since the last match
    * filter 2: only ``a`` has moved alone since the last match
    """
    _check_tables(a, b)
    if a.start is None or b.start is None:
        return empty_fst(a.isyms, b.osyms)

    # b's arcs grouped by input label, built lazily per state
    b_index: dict[int, dict[int, list[Arc]]] = {}

    def index(qb: int) -> dict[int, list[Arc]]:
        idx = b_index.get(qb)
        if idx is None:
            idx = {}
            for arc in b.arcs[qb]:
                if arc.weight != NEG_INF:
                    idx.setdefault(arc.ilabel, []).append(arc)
            b_index[qb] = idx
        return idx

    a_eps_out = [any(arc.olabel == EPS for arc in arcs) for arcs in a.arcs]
    out = WfstBuilder(a.isyms, b.osyms)
    ids: dict[tuple[int, int, int], int] = {}
    queue: deque[tuple[int, int, int]] = deque()

    def state(key: tuple[int, int, int]) -> int:
        s = ids.get(key)
        if s is None:
            qa, qb, _ = key
            fa, fb = a.final_weights[qa], b.final_weights[qb]
            final = None if fa == NEG_INF or fb == NEG_INF else fa + fb
            s = out.add_state(final)
            ids[key] = s
            queue.append(key)
        return s

    out.set_start(state((a.start, b.start, 0)))
    while queue:
        key = queue.popleft()
        qa, qb, filt = key
        src = ids[key]
        bidx = index(qb)
        b_eps = bidx.get(EPS, ())
        for ea in a.arcs[qa]:
            if ea.weight == NEG_INF:
                continue
            if ea.olabel != EPS:
                for eb in bidx.get(ea.olabel, ()):
                    dst = state((ea.nextstate, eb.nextstate, 0))
                    out.add_arc(src, ea.ilabel, eb.olabel, ea.weight + eb.weight, dst)
                continue
            if filt != 1:
                # the filter only matters while the other side could move on epsilon
                dst = state((ea.nextstate, qb, 2 if b_eps else 0))
                out.add_arc(src, ea.ilabel, EPS, ea.weight, dst)
            if filt == 0:
                for eb in b_eps:
                    dst = state((ea.nextstate, eb.nextstate, 0))
                    out.add_arc(src, ea.ilabel, eb.olabel, ea.weight + eb.weight, dst)
        if filt != 2:
            for eb in b_eps:
                dst = state((qa, eb.nextstate, 1 if a_eps_out[qa] else 0))
                out.add_arc(src, EPS, eb.olabel, eb.weight, dst)
    return connect(out.build())


def connect(a: Wfst) -> Wfst:
    """Remove states that are not on some start-to-final path."""
    if a.start is None:
        return a
    n = a.num_states
    accessible = [False] * n
    accessible[a.start] = True
    stack = [a.start]
    reverse: list[list[int]] = [[] for _ in range(n)]
    while stack:
        s = stack.pop()
        for arc in a.arcs[s]:
            reverse[arc.nextstate].append(s)
            if not accessible[arc.nextstate]:
                accessible[arc.nextstate] = True
                stack.append(arc.nextstate)
    coaccessible = [False] * n
    stack = [s for s in range(n) if accessible[s] and a.final_weights[s] != NEG_INF]
    for s in stack:
        coaccessible[s] = True
    while stack:
        s = stack.pop()
        for p in reverse[s]:
            if not coaccessible[p]:
                coaccessible[p] = True
                stack.append(p)
    keep = [accessible[s] and coaccessible[s] for s in range(n)]
    if all(keep):
        return a
    if not keep[a.start]:
        return empty_fst(a.isyms, a.osyms)
    remap = {}
    for s in range(n):
        if keep[s]:
            remap[s] = len(remap)
    arcs = tuple(
        tuple(arc._replace(nextstate=remap[arc.nextstate]) for arc in a.arcs[s] if keep[arc.nextstate])
        for s in range(n)
        if keep[s]
    )
    finals = tuple(a.final_weights[s] for s in range(n) if keep[s])
    return Wfst(arcs, remap[a.start], finals, a.isyms, a.osyms)


def _find_cycle(n: int, succ) -> list[int] | None:
    """Return one cycle (as a state list) in the graph ``succ``, or None."""
    color = [0] * n
    parent = [-1] * n
    for root in range(n):
        if color[root]:
            continue
        stack = [(root, iter(succ(root)))]
        color[root] = 1
        while stack:
            s, it = stack[-1]
            for t in it:
                if color[t] == 0:
                    color[t] = 1
                    parent[t] = s
                    stack.append((t, iter(succ(t))))
                    break
                if color[t] == 1:
                    cycle = [s]
                    while cycle[-1] != t:
                        cycle.append(parent[cycle[-1]])
                    return cycle[::-1]
            else:
                color[s] = 2
                stack.pop()
    return None


def _kahn(n: int, succ) -> list[int] | None:
    indegree = [0] * n
    for s in range(n):
        for t in succ(s):
            indegree[t] += 1
    heap = [s for s in range(n) if indegree[s] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        s = heapq.heappop(heap)
        order.append(s)
        for t in succ(s):
            indegree[t] -= 1
            if indegree[t] == 0:
                heapq.heappush(heap, t)
    return order if len(order) == n else None


def epsilon_order(a: Wfst) -> list[int]:
    """Topological order of the states under input-epsilon arcs only.

    Raises CycleError if the input-epsilon subgraph has a cycle.
    """
    def succ(s):
        return [arc.nextstate for arc in a.arcs[s] if arc.ilabel == EPS and arc.weight != NEG_INF]

    order = _kahn(a.num_states, succ)
    if order is None:
        cycle = _find_cycle(a.num_states, succ)
        raise CycleError(f"input-epsilon cycle through state {cycle[0]}", cycle)
    return order


def topological_sort(a: Wfst) -> Wfst:
    """Renumber states so every arc goes from a lower to a higher id."""
    n = a.num_states

    def succ(s):
        return [arc.nextstate for arc in a.arcs[s]]

    order = _kahn(n, succ)
    if order is None:
        cycle = _find_cycle(n, succ)
        raise CycleError(f"graph is cyclic: {' -> '.join(map(str, cycle + cycle[:1]))}", cycle)
    if order == list(range(n)):
        return a
    rank = {s: i for i, s in enumerate(order)}
    arcs = tuple(tuple(arc._replace(nextstate=rank[arc.nextstate]) for arc in a.arcs[s]) for s in order)
    finals = tuple(a.final_weights[s] for s in order)
    return Wfst(arcs, rank[a.start], finals, a.isyms, a.osyms)


def remove_epsilon(a: Wfst) -> Wfst:
    """Fold epsilon:epsilon arcs into their successors.

    Closure weights are log-added over parallel epsilon paths, and arcs
    that end up parallel (same labels and destination) are merged.
    """
    def is_eps(arc: Arc) -> bool:
        return arc.ilabel == EPS and arc.olabel == EPS

    if not any(is_eps(arc) for _, arc in a.iter_arcs()):
        return a
    n = a.num_states

    def succ(s):
        return [arc.nextstate for arc in a.arcs[s] if is_eps(arc) and arc.weight != NEG_INF]

    order = _kahn(n, succ)
    if order is None:
        cycle = _find_cycle(n, succ)
        raise CycleError(f"epsilon cycle through state {cycle[0]}", cycle)

    closure: list[dict[int, float]] = [{} for _ in range(n)]
    for q in reversed(order):
        c = {q: 0.0}
        for arc in a.arcs[q]:
            if is_eps(arc) and arc.weight != NEG_INF:
                for r, w in closure[arc.nextstate].items():
                    c[r] = log_add(c.get(r, NEG_INF), arc.weight + w)
        closure[q] = c

    b = WfstBuilder(a.isyms, a.osyms)
    b.add_states(n)
    b.set_start(a.start)
    for q in range(n):
        merged: dict[tuple[int, int, int], float] = {}
        final = NEG_INF
        for r, dr in closure[q].items():
            fr = a.final_weights[r]
            if fr != NEG_INF:
                final = log_add(final, dr + fr)
            for arc in a.arcs[r]:
                if is_eps(arc):
                    continue
                key = (arc.ilabel, arc.olabel, arc.nextstate)
                merged[key] = log_add(merged.get(key, NEG_INF), dr + arc.weight)
        for (il, ol, dst), w in merged.items():
            b.add_arc(q, il, ol, w, dst)
        if final != NEG_INF:
            b.set_final(q, final)
    return connect(b.build())


def enumerate_transductions(a: Wfst, max_len: int, cap: int = DEFAULT_PATH_CAP):
    """Brute-force list of ``(input, output, weight)`` for inputs up to ``max_len``.

    Labels are id tuples with epsilons dropped. Weights are log-added over
    all paths sharing the same (input, output) pair. Every partial path
    counts against ``cap``.
    """
    if a.start is None:
        return []
    totals: dict[tuple[tuple[int, ...], tuple[int, ...]], float] = {}
    stack = [(a.start, (), (), 0.0)]
    explored = 0
    while stack:
        s, inp, out, w = stack.pop()
        explored += 1
        if explored > cap:
            raise PathLimitError(f"more than {cap} partial paths; use a smaller max_len")
        fw = a.final_weights[s]
        if fw != NEG_INF:
            key = (inp, out)
            totals[key] = log_add(totals.get(key, NEG_INF), w + fw)
        for arc in a.arcs[s]:
            if arc.weight == NEG_INF:
                continue
            if arc.ilabel == EPS:
                ninp = inp
            elif len(inp) < max_len:
                ninp = inp + (arc.ilabel,)
            else:
                continue
            nout = out if arc.olabel == EPS else out + (arc.olabel,)
            stack.append((arc.nextstate, ninp, nout, w + arc.weight))
    items = sorted(totals.items(), key=lambda kv: (len(kv[0][0]), kv[0][0], kv[0][1]))
    return [(inp, out, w) for (inp, out), w in items]


@dataclass(frozen=True)
class Counterexample:
    input: tuple[int, ...]
    output: tuple[int, ...]
    weight_a: float
    weight_b: float


@dataclass(frozen=True)
class Equivalence:
    equivalent: bool
    counterexample: Counterexample | None = None

    def __bool__(self) -> bool:
        return self.equivalent


def check_equivalent(a: Wfst, b: Wfst, max_len: int, tol: float = 1e-9,
                     cap: int = DEFAULT_PATH_CAP) -> Equivalence:
    """Compare the weighted transductions of ``a`` and ``b`` up to ``max_len`` inputs."""
    for side in ("isyms", "osyms"):
        ta, tb = getattr(a, side), getattr(b, side)
        if ta is not None and tb is not None and ta != tb:
            raise FstError(f"cannot compare graphs over different {side}: {ta!r} vs {tb!r}")
    da = {(i, o): w for i, o, w in enumerate_transductions(a, max_len, cap)}
    db = {(i, o): w for i, o, w in enumerate_transductions(b, max_len, cap)}
    for key in sorted(da.keys() | db.keys(), key=lambda k: (len(k[0]), k[0], k[1])):
        wa, wb = da.get(key, NEG_INF), db.get(key, NEG_INF)
        if not weights_close(wa, wb, tol):
            return Equivalence(False, Counterexample(key[0], key[1], wa, wb))
    return Equivalence(True)
