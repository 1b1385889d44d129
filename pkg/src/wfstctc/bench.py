"""Seeded synthetic fixtures and graph-size / decoding sweeps."""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .algorithms import compose, connect
from .decoder import viterbi_decode
from .fst import FstError, SymbolTable, unit_table
from .graphs import (
    BOS,
    EOS,
    BigramLm,
    Lexicon,
    build_decoding_graph,
    build_lexicon_fst,
    build_ngram_fst,
    graph_stats,
    read_bigram,
    read_lexicon,
    uniform_unit_bigram,
)
from .lattice import augment_emissions_for_compact, build_denominator, dense_intersect
from .topology import TopologyKind, topology

DEFAULT_TOPOLOGIES = ("correct", "eesen", "compact", "minimal")
SIZE_COLUMNS = [
    "topology", "N", "states", "arcs", "approx_bytes", "build_seconds",
    "arcs_vs_correct", "den_lattice_arcs", "den_lattice_arcs_doubled",
]


@dataclass
class BenchConfig:
    vocab_sizes: list[int]
    lexicon_path: str | None = None
    lm_path: str | None = None
    topologies: list[str] = field(default_factory=lambda: list(DEFAULT_TOPOLOGIES))
    output_csv: str | None = None
    seed: int = 0
    n_words: int = 100
    den_frames: int = 8
    timing: bool = True
    jobs: int = 1

    def __post_init__(self):
        if not self.vocab_sizes:
            raise FstError("vocab_sizes must not be empty")
        for n in self.vocab_sizes:
            if n < 2:
                raise FstError(f"vocabulary size {n} leaves no language units")
        for name in self.topologies:
            parse_variant(name)


def parse_variant(name: str) -> tuple[str, bool]:
    """``"correct-selfless"`` -> ``("correct", True)``."""
    kind, _, rest = name.partition("-")
    if rest not in ("", "selfless"):
        raise FstError(f"unknown topology variant {name!r}")
    TopologyKind(kind)
    return kind, rest == "selfless"


def synthetic_lexicon(n_units: int, n_words: int, rng: np.random.Generator,
                      min_len: int = 1, max_len: int = 5) -> Lexicon:
    units = unit_table(n_units)
    entries = []
    seen = set()
    while len(entries) < n_words:
        length = int(rng.integers(min_len, max_len + 1))
        pron = tuple(int(u) for u in rng.integers(2, n_units + 1, size=length))
        if pron in seen:
            continue
        seen.add(pron)
        entries.append((f"w{len(entries):03d}", pron))
    return Lexicon(tuple(entries), units)


def synthetic_word_bigram(words: SymbolTable, rng: np.random.Generator,
                          successors: int = 8) -> BigramLm:
    """Sparse backoff-free bigram: each history sees a few random successors plus ``</s>``."""
    names = list(words.symbols[1:])
    probs = {}
    for h in [BOS] + names:
        k = min(successors, len(names))
        chosen = [names[i] for i in sorted(rng.choice(len(names), size=k, replace=False))]
        if h != BOS:
            chosen.append(EOS)
        p = rng.dirichlet(np.ones(len(chosen)))
        p = p / p.sum()
        for s, pi in zip(chosen, p):
            probs[(h, s)] = float(pi)
    return BigramLm("word", words, probs)


def bench_fixture(n_units: int, seed: int = 0, n_words: int = 100,
                  lexicon_path=None, lm_path=None):
    """Lexicon and grammar graphs for one vocabulary size."""
    rng = np.random.default_rng([seed, n_units])
    if lexicon_path:
        lex = read_lexicon(lexicon_path, unit_table(n_units))
    else:
        lex = synthetic_lexicon(n_units, n_words, rng)
    if lm_path:
        lm = read_bigram(lm_path, lex.words)
    else:
        lm = synthetic_word_bigram(lex.words, rng)
    return lex, build_lexicon_fst(lex), build_ngram_fst(lm)


def denominator_lattice_arcs(kind: str, n_units: int, selfless: bool = False,
                             frames: int = 8, doubled: bool = False) -> int:
    """Arc count of the LF-MMI denominator lattice on uniform emissions.

    ``doubled`` uses the train-mode compact graph with frame doubling
    instead of in-frame epsilon expansion.
    """
    mode = "train" if doubled else "decode"
    topo = topology(kind, n_units, selfless, mode)
    den = build_denominator(topo, uniform_unit_bigram(n_units))
    em = np.full((frames, n_units), -math.log(n_units))
    if doubled:
        em = augment_emissions_for_compact(em)
    return dense_intersect(den, em).num_arcs


def size_graphs(n_units: int, variants, seed: int = 0, n_words: int = 100,
                lexicon_path=None, lm_path=None):
    """Build LG and ``X o LG`` for every variant; returns ``{name: (graph, seconds)}``."""
    _, l, g = bench_fixture(n_units, seed, n_words, lexicon_path, lm_path)
    lg = connect(compose(l, g))
    out = {"LG": (lg, 0.0)}
    for name in variants:
        kind, selfless = parse_variant(name)
        t0 = time.perf_counter()
        graph = build_decoding_graph(topology(kind, n_units, selfless), None, lg)
        out[name] = (graph, time.perf_counter() - t0)
    return out


def _size_rows(args) -> list[dict]:
    n, cfg = args
    variants = list(dict.fromkeys(list(cfg.topologies) + ["correct"]))
    graphs = size_graphs(n, variants, cfg.seed, cfg.n_words, cfg.lexicon_path, cfg.lm_path)
    base = graphs["correct"][0].num_arcs
    rows = []
    for name in cfg.topologies:
        graph, seconds = graphs[name]
        stats = graph_stats(graph)
        kind, selfless = parse_variant(name)
        doubled = ""
        if kind == "compact":
            doubled = denominator_lattice_arcs(kind, n, selfless, cfg.den_frames, doubled=True)
        rows.append({
            "topology": name,
            "N": n,
            "states": stats.states,
            "arcs": stats.arcs,
            "approx_bytes": stats.approx_bytes,
            "build_seconds": f"{seconds:.4f}" if cfg.timing else "0",
            "arcs_vs_correct": f"{stats.arcs / base:.4f}",
            "den_lattice_arcs": denominator_lattice_arcs(kind, n, selfless, cfg.den_frames),
            "den_lattice_arcs_doubled": doubled,
        })
    return rows


def size_sweep(cfg: BenchConfig) -> list[dict]:
    work = [(n, cfg) for n in cfg.vocab_sizes]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            chunks = list(pool.map(_size_rows, work))
    else:
        chunks = [_size_rows(w) for w in work]
    return [row for chunk in chunks for row in chunk]


def peaked_emissions(frame_labels, n_units: int, rng: np.random.Generator,
                     peak: float = 0.8) -> np.ndarray:
    """Log-probabilities that put ``peak`` mass (plus noise) on the given labels."""
    t = len(frame_labels)
    probs = rng.dirichlet(np.ones(n_units), size=t) * (1 - peak)
    probs[np.arange(t), np.asarray(frame_labels) - 1] += peak
    probs /= probs.sum(axis=1, keepdims=True)
    return np.log(probs)


def synthetic_utterance(lex: Lexicon, n_units: int, rng: np.random.Generator,
                        n_words: int = 2) -> np.ndarray:
    """Emissions spelling random lexicon words with CTC-style blanks and repeats."""
    labels = [1]
    for k in rng.integers(0, len(lex.entries), size=n_words):
        for u in lex.entries[int(k)][1]:
            labels.extend([u] * int(rng.integers(1, 3)))
            labels.append(1)
    return peaked_emissions(labels, n_units, rng)


def decode_bench(n_units: int, n_utts: int = 20, seed: int = 0, n_words: int = 20,
                 beam: float = math.inf, timing: bool = True) -> tuple[list[dict], float]:
    """Decode the same synthetic utterances with TLG and T_compact LG.

    Returns per-variant rows and the hypothesis agreement rate.
    """
    lex, l, g = bench_fixture(n_units, seed, n_words)
    lg = connect(compose(l, g))
    rng = np.random.default_rng([seed, n_units, 1])
    utts = [synthetic_utterance(lex, n_units, rng) for _ in range(n_utts)]
    rows, hyps = [], {}
    for name in ("correct", "compact", "minimal"):
        graph = build_decoding_graph(topology(name, n_units), None, lg)
        t0 = time.perf_counter()
        hyps[name] = [viterbi_decode(graph, em, beam) for em in utts]
        seconds = time.perf_counter() - t0
        stats = graph_stats(graph)
        rows.append({
            "topology": name,
            "N": n_units,
            "states": stats.states,
            "arcs": stats.arcs,
            "mean_score": f"{np.mean([h.score for h in hyps[name]]):.6f}",
            "decode_seconds": f"{seconds:.4f}" if timing else "0",
        })
    agree = np.mean([a.words == b.words for a, b in zip(hyps["correct"], hyps["compact"])])
    return rows, float(agree)


def write_csv(rows: list[dict], columns: list[str], seed: int, path=None) -> str:
    buf = io.StringIO()
    buf.write(f"# seed={seed}\n")
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    text = buf.getvalue()
    if path:
        Path(path).write_text(text)
    return text
