"""Lexicon, grammar and decoding-graph construction plus size statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .algorithms import compose, connect
from .fst import EPS, EPS_SYMBOL, FstError, SymbolTable, Wfst, WfstBuilder, unit_table

BOS = "<s>"
EOS = "</s>"

BYTES_PER_ARC = 16
BYTES_PER_STATE = 8


@dataclass(frozen=True)
class Lexicon:
    """Word pronunciations as unit-id sequences over ``units``."""

    entries: tuple[tuple[str, tuple[int, ...]], ...]
    units: SymbolTable

    def __post_init__(self):
        seen = set()
        for word, pron in self.entries:
            if not pron:
                raise FstError(f"word {word!r} has an empty unit sequence")
            if (word, pron) in seen:
                raise FstError(f"duplicate pronunciation for {word!r}")
            seen.add((word, pron))

    @property
    def words(self) -> SymbolTable:
        names = dict.fromkeys(w for w, _ in self.entries)
        return SymbolTable([EPS_SYMBOL, *names])


@dataclass
class BigramLm:
    """Backoff-free bigram model.

    ``probs[(history, symbol)]`` is p(symbol | history); ``<s>`` is the
    sentence-start history and ``</s>`` the sentence-end symbol.
    """

    level: str
    symbols: SymbolTable
    probs: dict[tuple[str, str], float] = field(default_factory=dict)

    def histories(self) -> list[str]:
        return list(dict.fromkeys(h for h, _ in self.probs))

    def validate(self, tol: float = 1e-9) -> None:
        rows: dict[str, float] = {}
        for (h, s), p in self.probs.items():
            if p < 0 or p > 1:
                raise FstError(f"probability p({s}|{h}) = {p} outside [0, 1]")
            if s != EOS and s not in self.symbols:
                raise FstError(f"symbol {s!r} missing from the LM vocabulary")
            if h != BOS and h not in self.symbols:
                raise FstError(f"history {h!r} missing from the LM vocabulary")
            rows[h] = rows.get(h, 0.0) + p
        for h, total in rows.items():
            if abs(total - 1.0) > tol:
                raise FstError(f"probabilities for history {h!r} sum to {total!r}, not 1")

    def sentence_prob(self, sentence: Sequence[str]) -> float:
        p, h = 1.0, BOS
        for s in list(sentence) + [EOS]:
            p *= self.probs.get((h, s), 0.0)
            h = s
        return p


@dataclass(frozen=True)
class GraphStats:
    states: int
    arcs: int
    approx_bytes: int


def build_linear(units: Sequence[int], symbols: SymbolTable | None = None) -> Wfst:
    """Straight-line acceptor of ``units``."""
    if len(units) == 0:
        raise FstError("cannot build a linear graph from an empty sequence")
    b = WfstBuilder(symbols, symbols)
    states = b.add_states(len(units) + 1)
    for s, u in zip(states, units):
        b.add_arc(s, u, u, 0.0, s + 1)
    b.set_final(states[-1])
    return b.build()


def build_lexicon_fst(lex: Lexicon) -> Wfst:
    """Union of word paths (units in, word out on the first arc) looping back to the start."""
    if not lex.entries:
        raise FstError("lexicon is empty")
    words = lex.words
    b = WfstBuilder(lex.units, words)
    root = b.add_state(final=0.0)
    b.set_start(root)
    for word, pron in lex.entries:
        w = words.find(word)
        src = root
        for k, u in enumerate(pron):
            dst = root if k == len(pron) - 1 else b.add_state()
            b.add_arc(src, u, w if k == 0 else EPS, 0.0, dst)
            src = dst
    return connect(b.build())


def build_ngram_fst(lm: BigramLm) -> Wfst:
    """One state per history, natural-log probability arc weights, no backoff."""
    lm.validate()
    table = lm.symbols
    b = WfstBuilder(table, table)
    start = b.add_state()
    b.set_start(start)
    state_of = {BOS: start}
    for h in lm.histories():
        if h not in state_of:
            state_of[h] = b.add_state()
    for (h, s), p in lm.probs.items():
        if s != EOS and s not in state_of:
            state_of[s] = b.add_state()
    for (h, s), p in lm.probs.items():
        if p == 0.0:
            continue
        if s == EOS:
            b.set_final(state_of[h], math.log(p))
        else:
            label = table.find(s)
            b.add_arc(state_of[h], label, label, math.log(p), state_of[s])
    return connect(b.build())


def build_decoding_graph(topo: Wfst, l: Wfst | None, g: Wfst) -> Wfst:
    """``topo o (l o g)``, trimmed. With ``l=None`` this is ``topo o g``."""
    lg = g if l is None else compose(l, g)
    return connect(compose(topo, lg))


def graph_stats(f: Wfst) -> GraphStats:
    states, arcs = f.num_states, f.num_arcs
    return GraphStats(states, arcs, BYTES_PER_ARC * arcs + BYTES_PER_STATE * states)


def uniform_unit_bigram(n_units: int, units: SymbolTable | None = None) -> BigramLm:
    """Unit bigram where every history spreads mass evenly over all units and ``</s>``."""
    units = units or unit_table(n_units)
    names = [units.symbol(i) for i in range(2, n_units + 1)]
    p = 1.0 / (len(names) + 1)
    probs = {}
    for h in [BOS] + names:
        for s in names + [EOS]:
            probs[(h, s)] = p
    return BigramLm("unit", units, probs)


def read_lexicon(path, units: SymbolTable) -> Lexicon:
    entries = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) < 2:
            raise FstError(f"{path}:{lineno}: word {fields[0]!r} has an empty unit sequence")
        entries.append((fields[0], tuple(units.find(u) for u in fields[1:])))
    return Lexicon(tuple(entries), units)


def write_lexicon(lex: Lexicon, path) -> None:
    Path(path).write_text(
        "".join(f"{w} {lex.units.render(pron)}\n" for w, pron in lex.entries)
    )


def read_bigram(path, symbols: SymbolTable | None = None, level: str = "word") -> BigramLm:
    probs = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 3:
            raise FstError(f"{path}:{lineno}: expected 'history symbol probability'")
        try:
            probs[(fields[0], fields[1])] = float(fields[2])
        except ValueError:
            raise FstError(f"{path}:{lineno}: bad probability {fields[2]!r}") from None
    if symbols is None:
        names = dict.fromkeys(
            x for key in probs for x in key if x not in (BOS, EOS)
        )
        symbols = SymbolTable([EPS_SYMBOL, *names])
    return BigramLm(level, symbols, probs)


def write_bigram(lm: BigramLm, path) -> None:
    Path(path).write_text(
        "".join(f"{h}\t{s}\t{p!r}\n" for (h, s), p in lm.probs.items())
    )
