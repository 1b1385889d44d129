"""Immutable weighted transducers, symbol tables and AT&T text I/O."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

from .semiring import NEG_INF

EPS = 0
BLANK = 1

EPS_SYMBOL = "<eps>"
BLANK_SYMBOL = "<blank>"
EMULATION_SYMBOL = "<emu>"


class FstError(ValueError):
    """Raised for malformed graphs or invalid graph operations."""


class SymbolTable:
    """Dense bijection between strings and integer ids; id 0 is always ``<eps>``."""

    __slots__ = ("_symbols", "_ids")

    def __init__(self, symbols: Iterable[str]):
        symbols = tuple(symbols)
        if not symbols or symbols[0] != EPS_SYMBOL:
            raise FstError(f"symbol id 0 must be {EPS_SYMBOL!r}")
        ids = {}
        for i, s in enumerate(symbols):
            if s in ids:
                raise FstError(f"duplicate symbol {s!r}")
            ids[s] = i
        self._symbols = symbols
        self._ids = ids

    @property
    def symbols(self) -> tuple[str, ...]:
        return self._symbols

    def __len__(self) -> int:
        return len(self._symbols)

    def __eq__(self, other) -> bool:
        return isinstance(other, SymbolTable) and self._symbols == other._symbols

    def __hash__(self) -> int:
        return hash(self._symbols)

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._ids

    def __repr__(self) -> str:
        head = ", ".join(self._symbols[:4])
        more = ", ..." if len(self) > 4 else ""
        return f"SymbolTable([{head}{more}], size={len(self)})"

    def find(self, symbol: str) -> int:
        try:
            return self._ids[symbol]
        except KeyError:
            raise FstError(f"unknown symbol {symbol!r}") from None

    def symbol(self, idx: int) -> str:
        return self._symbols[idx]

    def render(self, ids: Sequence[int]) -> str:
        return " ".join(self._symbols[i] for i in ids)

    def extended(self, *symbols: str) -> SymbolTable:
        return SymbolTable(self._symbols + tuple(symbols))

    def write(self, path) -> None:
        Path(path).write_text("".join(f"{s}\t{i}\n" for i, s in enumerate(self._symbols)))

    @classmethod
    def read(cls, path) -> SymbolTable:
        pairs = []
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != 2:
                raise FstError(f"{path}:{lineno}: expected 'symbol<TAB>id'")
            pairs.append((int(fields[1]), fields[0]))
        pairs.sort()
        if [i for i, _ in pairs] != list(range(len(pairs))):
            raise FstError(f"{path}: symbol ids must be dense 0..K-1")
        return cls(s for _, s in pairs)


def unit_name(k: int) -> str:
    """Spreadsheet-style name for the k-th language unit: A..Z, AA, AB, ..."""
    name = ""
    k += 1
    while k:
        k, r = divmod(k - 1, 26)
        name = chr(ord("A") + r) + name
    return name


def unit_table(n_units: int) -> SymbolTable:
    """Emission/unit table for ``n_units`` units including ``<blank>``.

    Ids: 0 = ``<eps>``, 1 = ``<blank>``, 2..N = language units.
    """
    if n_units < 1:
        raise FstError("n_units must be >= 1")
    return SymbolTable([EPS_SYMBOL, BLANK_SYMBOL] + [unit_name(k) for k in range(n_units - 1)])


class Arc(NamedTuple):
    ilabel: int
    olabel: int
    weight: float
    nextstate: int


@dataclass(frozen=True, eq=False)
class Wfst:
    """A frozen weighted transducer.

    ``arcs[s]`` holds the outgoing arcs of state ``s``; ``final_weights[s]``
    is ``-inf`` for non-final states. An empty graph has no states and
    ``start is None``.
    """

    arcs: tuple[tuple[Arc, ...], ...]
    start: int | None
    final_weights: tuple[float, ...]
    isyms: SymbolTable | None = None
    osyms: SymbolTable | None = None

    def __post_init__(self):
        n = len(self.arcs)
        if len(self.final_weights) != n:
            raise FstError("final_weights must have one entry per state")
        if n == 0:
            if self.start is not None:
                raise FstError("empty graph cannot have a start state")
            return
        if self.start is None or not 0 <= self.start < n:
            raise FstError(f"start state {self.start} out of range for {n} states")

    def validate(self) -> Wfst:
        """Check every arc target; returns ``self``."""
        n = len(self.arcs)
        for s, arcs in enumerate(self.arcs):
            for a in arcs:
                if not 0 <= a.nextstate < n:
                    raise FstError(f"arc from state {s} targets missing state {a.nextstate}")
        return self

    @property
    def num_states(self) -> int:
        return len(self.arcs)

    @property
    def num_arcs(self) -> int:
        return sum(len(a) for a in self.arcs)

    @property
    def finals(self) -> dict[int, float]:
        return {s: w for s, w in enumerate(self.final_weights) if w != NEG_INF}

    def is_final(self, state: int) -> bool:
        return self.final_weights[state] != NEG_INF

    def states(self) -> range:
        return range(len(self.arcs))

    def iter_arcs(self) -> Iterator[tuple[int, Arc]]:
        for s, arcs in enumerate(self.arcs):
            for a in arcs:
                yield s, a

    def with_symbols(self, isyms=None, osyms=None) -> Wfst:
        return Wfst(self.arcs, self.start, self.final_weights, isyms, osyms)

    def __repr__(self) -> str:
        return f"Wfst(states={self.num_states}, arcs={self.num_arcs})"


def empty_fst(isyms: SymbolTable | None = None, osyms: SymbolTable | None = None) -> Wfst:
    return Wfst((), None, (), isyms, osyms)


class WfstBuilder:
    """Single-writer mutable builder; ``build()`` freezes the result."""

    def __init__(self, isyms: SymbolTable | None = None, osyms: SymbolTable | None = None):
        self._arcs: list[list[Arc]] = []
        self._finals: list[float] = []
        self._max_dst = -1
        self.start: int | None = None
        self.isyms = isyms
        self.osyms = osyms

    @property
    def num_states(self) -> int:
        return len(self._arcs)

    def add_state(self, final: float | None = None) -> int:
        self._arcs.append([])
        self._finals.append(NEG_INF if final is None else final)
        return len(self._arcs) - 1

    def add_states(self, n: int) -> list[int]:
        return [self.add_state() for _ in range(n)]

    def set_start(self, state: int) -> None:
        self.start = state

    def set_final(self, state: int, weight: float = 0.0) -> None:
        self._finals[state] = weight

    def add_arc(self, src: int, ilabel: int, olabel: int, weight: float, dst: int) -> None:
        if dst < 0:
            raise FstError(f"negative target state {dst}")
        self._arcs[src].append(Arc(ilabel, olabel, weight, dst))
        if dst > self._max_dst:
            self._max_dst = dst

    def build(self) -> Wfst:
        if not self._arcs:
            return empty_fst(self.isyms, self.osyms)
        if self._max_dst >= len(self._arcs):
            raise FstError(f"arc targets missing state {self._max_dst}")
        start = 0 if self.start is None else self.start
        return Wfst(
            tuple(tuple(a) for a in self._arcs),
            start,
            tuple(self._finals),
            self.isyms,
            self.osyms,
        )


# --- AT&T text format --------------------------------------------------------
# Arc lines "src dst ilabel olabel cost", final lines "state [cost]".
# Costs are negated natural-log probabilities; the first line names the start.


def _fmt_cost(weight: float) -> str:
    if weight == NEG_INF:
        return "Infinity"
    cost = 0.0 - weight
    if cost == 0.0:
        return "0"
    return repr(cost)


def _parse_cost(token: str) -> float:
    cost = float(token)
    if math.isinf(cost) and cost > 0:
        return NEG_INF
    return 0.0 - cost


def to_text(fst: Wfst) -> str:
    if fst.start is None:
        return ""
    lines = []
    order = [fst.start] + [s for s in fst.states() if s != fst.start]
    if not fst.arcs[fst.start]:
        # The first line must still name the start state.
        lines.append(f"{fst.start}\t{_fmt_cost(fst.final_weights[fst.start])}")
    for s in order:
        for a in fst.arcs[s]:
            lines.append(f"{s}\t{a.nextstate}\t{a.ilabel}\t{a.olabel}\t{_fmt_cost(a.weight)}")
    for s, w in fst.finals.items():
        if s == fst.start and not fst.arcs[fst.start]:
            continue
        lines.append(f"{s}\t{_fmt_cost(w)}")
    return "\n".join(lines) + "\n"


def from_text(text: str, isyms: SymbolTable | None = None, osyms: SymbolTable | None = None) -> Wfst:
    arcs: list[tuple[int, int, int, int, float]] = []
    finals: dict[int, float] = {}
    start = None
    max_state = -1
    for lineno, line in enumerate(text.splitlines(), 1):
        fields = line.split()
        if not fields:
            continue
        try:
            if len(fields) in (4, 5):
                src, dst, il, ol = (int(f) for f in fields[:4])
                w = _parse_cost(fields[4]) if len(fields) == 5 else 0.0
                arcs.append((src, dst, il, ol, w))
                max_state = max(max_state, src, dst)
                first = src
            elif len(fields) in (1, 2):
                s = int(fields[0])
                w = _parse_cost(fields[1]) if len(fields) == 2 else 0.0
                if w != NEG_INF:
                    finals[s] = w
                max_state = max(max_state, s)
                first = s
            else:
                raise ValueError
        except ValueError:
            raise FstError(f"line {lineno}: cannot parse {line!r}") from None
        if start is None:
            start = first
    b = WfstBuilder(isyms, osyms)
    b.add_states(max_state + 1)
    for src, dst, il, ol, w in arcs:
        b.add_arc(src, il, ol, w, dst)
    for s, w in finals.items():
        b.set_final(s, w)
    if start is not None:
        b.set_start(start)
    return b.build()


def write_fst(fst: Wfst, path) -> None:
    Path(path).write_text(to_text(fst))


def read_fst(path, isyms: SymbolTable | None = None, osyms: SymbolTable | None = None) -> Wfst:
    return from_text(Path(path).read_text(), isyms, osyms)
