"""Greedy CTC decoding and frame-synchronous Viterbi search over decoding graphs."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fst import BLANK, EPS, FstError, SymbolTable, Wfst
from .lattice import as_emissions
from .semiring import NEG_INF


class DecodeError(FstError):
    pass


@dataclass(frozen=True)
class Hypothesis:
    words: tuple[int, ...]
    score: float
    frame_labels: tuple[int, ...]

    def text(self, table: SymbolTable | None) -> str:
        if table is None:
            return " ".join(map(str, self.words))
        return table.render(self.words)


def collapse(labels: Sequence[int]) -> list[int]:
    """Merge adjacent repeats, then drop ``<blank>``."""
    out = []
    prev = None
    for x in labels:
        if x != prev and x != BLANK:
            out.append(x)
        prev = x
    return out


def greedy_decode(em) -> Hypothesis:
    """Per-frame argmax (ties go to the lowest id) followed by ``collapse``."""
    em = as_emissions(em)
    if em.shape[1] < 1:
        raise DecodeError("emissions need at least one unit column")
    best = np.argmax(em, axis=1) + 1
    labels = tuple(int(x) for x in best)
    score = float(em.max(axis=1).sum()) if len(em) else 0.0
    return Hypothesis(tuple(collapse(labels)), score, labels)


def viterbi_decode(graph: Wfst, em, beam: float = math.inf) -> Hypothesis:
    """Best path through the dense intersection of ``graph`` and ``em``.

    Each frame crosses emission arcs from the surviving states (in
    ascending state order, so equal scores keep the smaller predecessor),
    then relaxes input-epsilon arcs breadth-first, then applies the beam.
    """
    if not beam > 0:
        raise DecodeError(f"beam must be positive, got {beam}")
    em = as_emissions(em)
    num_frames, width = em.shape
    if graph.start is None:
        raise DecodeError("empty beam at frame 0: the graph is empty")
    cap = max(1, graph.num_states) ** 2

    # backpointer entries: state -> (prev_frame, prev_state, ilabel, olabel)
    history: list[dict[int, tuple[int, int, int, int] | None]] = []
    cur: dict[int, float] = {graph.start: 0.0}
    bp: dict[int, tuple[int, int, int, int] | None] = {graph.start: None}
    for t in range(num_frames + 1):
        queue = deque(sorted(cur))
        queued = set(queue)
        relaxations = 0
        while queue:
            q = queue.popleft()
            queued.discard(q)
            score = cur[q]
            for arc in graph.arcs[q]:
                if arc.ilabel != EPS:
                    continue
                cand = score + arc.weight
                r = arc.nextstate
                if cand > cur.get(r, NEG_INF):
                    relaxations += 1
                    if relaxations > cap:
                        raise DecodeError(f"epsilon closure did not converge at frame {t}")
                    cur[r] = cand
                    bp[r] = (t, q, EPS, arc.olabel)
                    if r not in queued:
                        queued.add(r)
                        queue.append(r)
        if beam != math.inf and cur:
            floor = max(cur.values()) - beam
            cur = {q: s for q, s in cur.items() if s >= floor}
            bp = {q: bp[q] for q in cur}
        if not cur:
            raise DecodeError(f"empty beam at frame {t}")
        history.append(bp)
        if t == num_frames:
            break
        row = em[t]
        nxt: dict[int, float] = {}
        nbp: dict[int, tuple[int, int, int, int] | None] = {}
        for q in sorted(cur):
            score = cur[q]
            for arc in graph.arcs[q]:
                if arc.ilabel == EPS:
                    continue
                if arc.ilabel > width:
                    raise DecodeError(f"input label {arc.ilabel} exceeds {width} emission columns")
                w = arc.weight + row[arc.ilabel - 1]
                if w == NEG_INF:
                    continue
                cand = score + float(w)
                r = arc.nextstate
                if cand > nxt.get(r, NEG_INF):
                    nxt[r] = cand
                    nbp[r] = (t, q, arc.ilabel, arc.olabel)
        if not nxt:
            raise DecodeError(f"empty beam at frame {t}")
        cur, bp = nxt, nbp

    best, end = NEG_INF, None
    for q in sorted(cur):
        fw = graph.final_weights[q]
        if fw != NEG_INF and cur[q] + fw > best:
            best, end = cur[q] + fw, q
    if end is None:
        raise DecodeError(f"empty beam at frame {num_frames}: no final state survives")

    words, labels = [], []
    t, q = num_frames, end
    while True:
        entry = history[t][q]
        if entry is None:
            break
        pt, pq, il, ol = entry
        if ol != EPS:
            words.append(ol)
        if il != EPS:
            labels.append(il)
        t, q = pt, pq
    return Hypothesis(tuple(reversed(words)), best, tuple(reversed(labels)))
