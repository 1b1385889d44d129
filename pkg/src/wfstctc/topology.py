"""CTC topology graphs: correct, Eesen, compact and minimal, plus selfless variants.

Emission labels: 1 = ``<blank>``, 2..N = language units, N+1 = the
emulation unit used by train-mode compact graphs. Output labels use the
same ids (``<blank>`` is never emitted). All arcs carry weight one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .fst import BLANK, EMULATION_SYMBOL, EPS, Arc, FstError, Wfst, WfstBuilder, unit_table


class TopologyKind(str, enum.Enum):
    CORRECT = "correct"
    EESEN = "eesen"
    COMPACT = "compact"
    MINIMAL = "minimal"


class Mode(str, enum.Enum):
    DECODE = "decode"
    TRAIN = "train"


@dataclass(frozen=True)
class TopologySpec:
    kind: TopologyKind
    n_units: int
    selfless: bool = False
    mode: Mode = Mode.DECODE

    def __post_init__(self):
        object.__setattr__(self, "kind", TopologyKind(self.kind))
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.n_units < 1:
            raise FstError("a topology needs at least one unit (<blank>)")
        if self.selfless and self.kind is TopologyKind.MINIMAL:
            raise FstError("minimal has no selfless variant")

    @property
    def name(self) -> str:
        name = self.kind.value
        if self.selfless:
            name += "-selfless"
        if self.mode is Mode.TRAIN and self.kind is TopologyKind.COMPACT:
            name += "-train"
        return name


def emulation_label(n_units: int) -> int:
    return n_units + 1


def is_train_topology(fst: Wfst) -> bool:
    return fst.isyms is not None and EMULATION_SYMBOL in fst.isyms


def _correct(n: int, isyms, osyms) -> Wfst:
    # state i carries label i + 1; state 0 is the blank state.
    # Arcs are immutable, so every state shares the "enter d" arcs and only
    # swaps in its own epsilon-output self-loop.
    enter = tuple(Arc(d + 1, EPS if d == 0 else d + 1, 0.0, d) for d in range(n))
    arcs = tuple(enter[:s] + (Arc(s + 1, EPS, 0.0, s),) + enter[s + 1:] for s in range(n))
    return Wfst(arcs, 0, (0.0,) * n, isyms, osyms)


def _eesen(b: WfstBuilder, n: int) -> None:
    # start hub, a leading and a trailing blank state, one state per unit;
    # units return to the hub through epsilon
    hub, lead, trail = b.add_states(3)
    units = b.add_states(n - 1)
    b.set_start(hub)
    b.set_final(trail)
    b.add_arc(hub, EPS, EPS, 0.0, lead)
    b.add_arc(hub, EPS, EPS, 0.0, trail)
    b.add_arc(lead, BLANK, EPS, 0.0, lead)
    b.add_arc(trail, BLANK, EPS, 0.0, trail)
    for k, u in enumerate(units):
        label = k + 2
        b.add_arc(lead, label, label, 0.0, u)
        b.add_arc(u, label, EPS, 0.0, u)
        b.add_arc(u, EPS, EPS, 0.0, hub)


def _compact(b: WfstBuilder, n: int, train: bool) -> None:
    blank = b.add_state(final=0.0)
    b.set_start(blank)
    units = b.add_states(n - 1)
    back = emulation_label(n) if train else EPS
    b.add_arc(blank, BLANK, EPS, 0.0, blank)
    for k, u in enumerate(units):
        b.add_arc(blank, k + 2, k + 2, 0.0, u)
    for k, u in enumerate(units):
        # a free epsilon return makes unit states redundant as finals in
        # decode mode; in train mode the return consumes a frame
        if train:
            b.set_final(u)
        b.add_arc(u, k + 2, EPS, 0.0, u)
        b.add_arc(u, back, EPS, 0.0, blank)


def _minimal(b: WfstBuilder, n: int) -> None:
    s = b.add_state(final=0.0)
    b.set_start(s)
    b.add_arc(s, BLANK, EPS, 0.0, s)
    for label in range(2, n + 1):
        b.add_arc(s, label, label, 0.0, s)


def build_topology(spec: TopologySpec) -> Wfst:
    n = spec.n_units
    units = unit_table(n)
    train = spec.mode is Mode.TRAIN and spec.kind is TopologyKind.COMPACT
    isyms = units.extended(EMULATION_SYMBOL) if train else units
    b = WfstBuilder(isyms, units)
    if spec.kind is TopologyKind.CORRECT:
        fst = _correct(n, isyms, units)
        return make_selfless(fst) if spec.selfless else fst
    if spec.kind is TopologyKind.EESEN:
        _eesen(b, n)
    elif spec.kind is TopologyKind.COMPACT:
        _compact(b, n, train)
    else:
        _minimal(b, n)
    fst = b.build()
    return make_selfless(fst) if spec.selfless else fst


def topology(kind, n_units: int, selfless: bool = False, mode="decode") -> Wfst:
    """Shorthand for ``build_topology(TopologySpec(...))``."""
    return build_topology(TopologySpec(kind, n_units, selfless, mode))


def make_selfless(t: Wfst) -> Wfst:
    """Drop every non-blank ``unit:<eps>`` self-loop."""
    for s, arc in t.iter_arcs():
        if arc.nextstate == s and arc.ilabel not in (EPS, BLANK) and arc.olabel == arc.ilabel:
            raise FstError("minimal has no selfless variant")
    arcs = tuple(
        tuple(
            arc for arc in t.arcs[s]
            if not (arc.nextstate == s and arc.ilabel not in (EPS, BLANK) and arc.olabel == EPS)
        )
        for s in t.states()
    )
    return Wfst(arcs, t.start, t.final_weights, t.isyms, t.osyms)
