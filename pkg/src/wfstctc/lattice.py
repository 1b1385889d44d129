"""Dense intersection, forward-backward, CTC and LF-MMI losses.

Emission matrices are ``T x K`` arrays of natural-log probabilities where
column ``k`` scores emission label ``k + 1`` (column 0 is ``<blank>``).
"""

from __future__ import annotations

import heapq
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .algorithms import compose, connect, epsilon_order
from .fst import BLANK, EPS, FstError, Wfst, WfstBuilder
from .graphs import BigramLm, build_linear, build_ngram_fst
from .semiring import NEG_INF, log_add
from .topology import is_train_topology


class LatticeError(FstError):
    pass


def as_emissions(values, normalized: bool = False, tol: float = 1e-6) -> np.ndarray:
    """Validate a ``T x K`` matrix of log-probabilities and return it as float64."""
    em = np.asarray(values, dtype=np.float64)
    if em.ndim != 2:
        raise LatticeError(f"emissions must be 2-D, got shape {em.shape}")
    if np.isnan(em).any() or (em == np.inf).any():
        raise LatticeError("emissions contain NaN or +inf")
    if normalized and len(em):
        sums = np.logaddexp.reduce(em, axis=1)
        bad = np.flatnonzero(np.abs(sums) > tol)
        if bad.size:
            raise LatticeError(f"frame {bad[0]} is not normalized (log-sum-exp {sums[bad[0]]:.3g})")
    return em


def augment_emissions_for_compact(em) -> np.ndarray:
    """Double the frames and add an emulation column for train-mode compact graphs.

    Even rows hold the original frames with the emulation unit at
    probability zero; odd rows give probability one to every unit.
    """
    em = np.asarray(em, dtype=np.float64)
    t, n = em.shape
    out = np.zeros((2 * t, n + 1))
    out[0::2, :n] = em
    out[0::2, n] = -np.inf
    return out


@dataclass(frozen=True)
class Lattice:
    """Acyclic, frame-major result of a dense intersection.

    ``frames[s]`` and ``graph_states[s]`` give the (frame, graph state) pair
    behind lattice state ``s``. Emission arcs keep their input label.
    """

    fst: Wfst
    frames: tuple[int, ...]
    graph_states: tuple[int, ...]
    num_frames: int

    @property
    def num_states(self) -> int:
        return self.fst.num_states

    @property
    def num_arcs(self) -> int:
        return self.fst.num_arcs

    def is_empty(self) -> bool:
        return self.fst.start is None

    def forward(self) -> list[float]:
        fst = self.fst
        alpha = [NEG_INF] * fst.num_states
        if fst.start is None:
            return alpha
        alpha[fst.start] = 0.0
        for s in fst.states():
            a = alpha[s]
            if a == NEG_INF:
                continue
            for arc in fst.arcs[s]:
                alpha[arc.nextstate] = log_add(alpha[arc.nextstate], a + arc.weight)
        return alpha

    def backward(self) -> list[float]:
        fst = self.fst
        beta = list(fst.final_weights)
        for s in reversed(fst.states()):
            b = beta[s]
            for arc in fst.arcs[s]:
                b = log_add(b, arc.weight + beta[arc.nextstate])
            beta[s] = b
        return beta

    def arc_posteriors(self):
        """Yield ``(state, arc, posterior)`` for every arc."""
        alpha, beta = self.forward(), self.backward()
        total = forward_score(self, alpha)
        if total == NEG_INF:
            return
        for s, arc in self.fst.iter_arcs():
            yield s, arc, math.exp(alpha[s] + arc.weight + beta[arc.nextstate] - total)

    def best_path(self) -> tuple[float, list[tuple[int, object]]]:
        """Tropical best path as ``(score, [(state, arc), ...])``."""
        fst = self.fst
        if fst.start is None:
            return NEG_INF, []
        score = [NEG_INF] * fst.num_states
        back: list[tuple[int, object] | None] = [None] * fst.num_states
        score[fst.start] = 0.0
        for s in fst.states():
            if score[s] == NEG_INF:
                continue
            for arc in fst.arcs[s]:
                cand = score[s] + arc.weight
                if cand > score[arc.nextstate]:
                    score[arc.nextstate] = cand
                    back[arc.nextstate] = (s, arc)
        best, end = NEG_INF, None
        for s, fw in fst.finals.items():
            if score[s] + fw > best:
                best, end = score[s] + fw, s
        path = []
        while end is not None and back[end] is not None:
            path.append(back[end])
            end = back[end][0]
        return best, path[::-1]


def forward_score(lat: Lattice, alpha: list[float] | None = None) -> float:
    """Log-add over all complete paths; ``-inf`` for an empty lattice."""
    if alpha is None:
        alpha = lat.forward()
    total = NEG_INF
    for s, fw in lat.fst.finals.items():
        total = log_add(total, alpha[s] + fw)
    return total


def _check_labels(graph: Wfst, width: int) -> None:
    for s, arc in graph.iter_arcs():
        if arc.ilabel > width or arc.ilabel < 0:
            raise LatticeError(
                f"arc from state {s} has input label {arc.ilabel} but emissions have {width} columns"
            )


def dense_intersect(graph: Wfst, em, prune_beam: float | None = None) -> Lattice:
    """Intersect ``graph`` with a dense emission matrix.

    Each frame first follows input-epsilon arcs (no frame consumed) in
    topological order, then optionally prunes states whose best partial
    score is more than ``prune_beam`` below the frame best, then crosses
    emission arcs into the next frame.
    """
    if prune_beam is not None and not prune_beam > 0:
        raise LatticeError(f"prune_beam must be positive, got {prune_beam}")
    em = as_emissions(em)
    num_frames, width = em.shape
    if graph.start is None:
        return _empty_lattice(graph, num_frames)
    _check_labels(graph, width)
    rank = {s: r for r, s in enumerate(epsilon_order(graph))}

    arcs: list[tuple[int, int, int, int, int, int, float]] = []  # t, q, t', q', il, ol, w
    kept: list[list[int]] = []
    cur = {graph.start: 0.0}
    for t in range(num_frames + 1):
        # epsilon closure in topological order, tracking best partial scores
        heap = [(rank[q], q) for q in cur]
        heapq.heapify(heap)
        seen = set(cur)
        order = []
        while heap:
            _, q = heapq.heappop(heap)
            order.append(q)
            score = cur[q]
            for arc in graph.arcs[q]:
                if arc.ilabel != EPS or arc.weight == NEG_INF:
                    continue
                r = arc.nextstate
                cand = score + arc.weight
                if cand > cur.get(r, NEG_INF):
                    cur[r] = cand
                if r not in seen:
                    seen.add(r)
                    heapq.heappush(heap, (rank[r], r))
                arcs.append((t, q, t, r, EPS, arc.olabel, arc.weight))
        if prune_beam is not None and prune_beam != math.inf and cur:
            floor = max(cur.values()) - prune_beam
            order = [q for q in order if cur[q] >= floor]
        kept.append(order)
        if t == num_frames:
            break
        row = em[t]
        nxt: dict[int, float] = {}
        for q in order:
            score = cur[q]
            for arc in graph.arcs[q]:
                if arc.ilabel == EPS:
                    continue
                w = arc.weight + row[arc.ilabel - 1]
                if w == NEG_INF:
                    continue
                r = arc.nextstate
                cand = score + w
                if cand > nxt.get(r, NEG_INF):
                    nxt[r] = cand
                arcs.append((t, q, t + 1, r, arc.ilabel, arc.olabel, float(w)))
        cur = nxt
    return _assemble(graph, num_frames, kept, arcs)


def _empty_lattice(graph: Wfst, num_frames: int) -> Lattice:
    return Lattice(WfstBuilder(graph.isyms, graph.osyms).build(), (), (), num_frames)


def _assemble(graph, num_frames, kept, arcs) -> Lattice:
    alive = {(t, q) for t, qs in enumerate(kept) for q in qs}
    arcs = [a for a in arcs if (a[0], a[1]) in alive and (a[2], a[3]) in alive]
    # keep only states that can still reach a final state at the last frame
    useful = {(num_frames, q) for q in kept[num_frames] if graph.final_weights[q] != NEG_INF}
    for a in reversed(arcs):
        if (a[2], a[3]) in useful:
            useful.add((a[0], a[1]))
    start = (0, graph.start)
    if start not in useful:
        return _empty_lattice(graph, num_frames)
    ids: dict[tuple[int, int], int] = {}
    frames, gstates = [], []
    b = WfstBuilder(graph.isyms, graph.osyms)
    for t, qs in enumerate(kept):
        for q in qs:
            if (t, q) in useful:
                fw = graph.final_weights[q] if t == num_frames else None
                ids[(t, q)] = b.add_state(None if fw == NEG_INF else fw)
                frames.append(t)
                gstates.append(q)
    b.set_start(ids[start])
    for t, q, t2, q2, il, ol, w in arcs:
        if (t, q) in ids and (t2, q2) in ids:
            b.add_arc(ids[(t, q)], il, ol, w, ids[(t2, q2)])
    # forward-unreachable states may remain after pruning; trimming keeps order
    fst = b.build()
    trimmed = connect(fst)
    if trimmed is not fst:
        keep = _kept_states(fst)
        frames = [frames[s] for s in keep]
        gstates = [gstates[s] for s in keep]
        fst = trimmed
    if fst.start is None:
        return _empty_lattice(graph, num_frames)
    return Lattice(fst, tuple(frames), tuple(gstates), num_frames)


def _kept_states(fst: Wfst) -> list[int]:
    """States of ``fst`` that ``connect`` keeps, in order."""
    n = fst.num_states
    fwd = [False] * n
    fwd[fst.start] = True
    for s in fst.states():  # states are topologically ordered
        if fwd[s]:
            for arc in fst.arcs[s]:
                fwd[arc.nextstate] = True
    bwd = [fst.is_final(s) for s in range(n)]
    for s in reversed(range(n)):
        if not bwd[s]:
            bwd[s] = any(bwd[arc.nextstate] for arc in fst.arcs[s])
    return [s for s in range(n) if fwd[s] and bwd[s]]


@dataclass
class LossResult:
    loss: float
    grad: np.ndarray


def build_supervision(topo: Wfst, target: Sequence[int]) -> Wfst:
    """Numerator graph: the topology composed with the linear graph of ``target``."""
    return connect(compose(topo, build_linear(list(target), topo.osyms)))


def build_denominator(topo: Wfst, lm: BigramLm) -> Wfst:
    return connect(compose(topo, build_ngram_fst(lm)))


def _emission_width(graph: Wfst) -> int | None:
    return None if graph.isyms is None else len(graph.isyms) - 1


def _prepare(graph: Wfst, em) -> tuple[np.ndarray, bool]:
    """Augment plain emissions when ``graph`` expects the frame-doubled layout."""
    em = as_emissions(em)
    width = _emission_width(graph)
    if is_train_topology(graph) and em.shape[1] == width - 1:
        return augment_emissions_for_compact(em), True
    return em, False


def _fold(grad: np.ndarray, augmented: bool) -> np.ndarray:
    if not augmented:
        return grad
    return grad[0::2, :-1].copy()


def occupancy(lat: Lattice, shape: tuple[int, int]) -> tuple[float, np.ndarray]:
    """Total log-score and per-(frame, emission column) arc posteriors."""
    occ = np.zeros(shape)
    alpha, beta = lat.forward(), lat.backward()
    total = forward_score(lat, alpha)
    if total == NEG_INF:
        return total, occ
    frames = lat.frames
    for s, arc in lat.fst.iter_arcs():
        if arc.ilabel == EPS:
            continue
        occ[frames[s], arc.ilabel - 1] += math.exp(alpha[s] + arc.weight + beta[arc.nextstate] - total)
    return total, occ


def ctc_loss_and_grad(topo: Wfst, target: Sequence[int], em,
                      prune_beam: float | None = None) -> LossResult:
    """Negative log path mass of ``target`` and its gradient w.r.t. ``em``.

    With a train-mode compact topology and an un-augmented ``em``, the
    frame doubling is applied internally and the gradient is folded back
    onto the original frames. Unalignable targets give ``inf`` loss and a
    zero gradient.
    """
    if any(u in (EPS, BLANK) for u in target):
        raise LatticeError("target must not contain <eps> or <blank>")
    em_raw = as_emissions(em)
    em, augmented = _prepare(topo, em_raw)
    sup = build_supervision(topo, target)
    lat = dense_intersect(sup, em, prune_beam)
    total, occ = occupancy(lat, em.shape)
    if total == NEG_INF:
        return LossResult(math.inf, np.zeros_like(em_raw))
    return LossResult(-total, _fold(-occ, augmented))


def mmi_loss_and_grad(numerator: Wfst, denominator: Wfst, em,
                      prune_beam: float | None = None) -> LossResult:
    """LF-MMI loss ``-(log num - log den)``; ``prune_beam`` applies to the denominator only."""
    em_raw = as_emissions(em)
    em, augmented = _prepare(numerator, em_raw)
    den_total, den_occ = occupancy(dense_intersect(denominator, em, prune_beam), em.shape)
    if den_total == NEG_INF:
        raise LatticeError("denominator lattice is empty; the denominator graph must cover every frame sequence")
    num_total, num_occ = occupancy(dense_intersect(numerator, em), em.shape)
    if num_total == NEG_INF:
        return LossResult(math.inf, np.zeros_like(em_raw))
    return LossResult(den_total - num_total, _fold(den_occ - num_occ, augmented))


def write_emissions(em, path) -> None:
    """TSV with a ``# T N`` header line and one frame per line."""
    em = np.asarray(em, dtype=np.float64)
    lines = [f"# {em.shape[0]} {em.shape[1]}"]
    lines += ["\t".join(repr(float(x)) for x in row) for row in em]
    Path(path).write_text("\n".join(lines) + "\n")


def read_emissions(path) -> np.ndarray:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("#"):
        raise LatticeError(f"{path}: missing '# frames units' header")
    dims = re.findall(r"\d+", text[0])
    if len(dims) != 2:
        raise LatticeError(f"{path}: header must give frame and unit counts")
    frames, units = map(int, dims)
    rows = [line.split() for line in text[1:] if line.strip()]
    if len(rows) != frames or any(len(r) != units for r in rows):
        raise LatticeError(f"{path}: expected {frames} rows of {units} values")
    try:
        values = np.array([[float(x) for x in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise LatticeError(f"{path}: {exc}") from None
    return as_emissions(values.reshape(frames, units))
