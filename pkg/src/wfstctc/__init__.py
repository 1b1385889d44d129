"""Weighted finite-state transducer toolkit for CTC topology variants."""

from .algorithms import (
    CycleError,
    PathLimitError,
    check_equivalent,
    compose,
    connect,
    enumerate_transductions,
    remove_epsilon,
    topological_sort,
)
from .decoder import Hypothesis, collapse, greedy_decode, viterbi_decode
from .fst import (
    Arc,
    FstError,
    SymbolTable,
    Wfst,
    WfstBuilder,
    empty_fst,
    from_text,
    read_fst,
    to_text,
    unit_table,
    write_fst,
)
from .graphs import (
    BigramLm,
    GraphStats,
    Lexicon,
    build_decoding_graph,
    build_lexicon_fst,
    build_linear,
    build_ngram_fst,
    graph_stats,
)
from .lattice import (
    Lattice,
    LossResult,
    augment_emissions_for_compact,
    build_denominator,
    build_supervision,
    ctc_loss_and_grad,
    dense_intersect,
    forward_score,
    mmi_loss_and_grad,
)
from .semiring import LogSemiring, TropicalSemiring
from .topology import TopologyKind, TopologySpec, build_topology, make_selfless, topology

__version__ = "0.1.0"
