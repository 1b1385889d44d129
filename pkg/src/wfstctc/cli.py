"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import bench
from .algorithms import compose, connect
from .decoder import greedy_decode, viterbi_decode
from .fst import FstError, SymbolTable, read_fst, to_text, unit_table, write_fst
from .graphs import (
    build_decoding_graph,
    build_lexicon_fst,
    build_ngram_fst,
    graph_stats,
    read_bigram,
    read_lexicon,
    uniform_unit_bigram,
)
from .lattice import (
    build_denominator,
    build_supervision,
    ctc_loss_and_grad,
    mmi_loss_and_grad,
    read_emissions,
    write_emissions,
)
from .topology import TopologySpec, build_topology

USAGE_ERROR = 1
DATA_ERROR = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _stats_line(fst) -> str:
    s = graph_stats(fst)
    return f"states={s.states} arcs={s.arcs}"


def cmd_topo(args) -> int:
    mode = "train" if args.train_mode else "decode"
    try:
        spec = TopologySpec(args.kind, args.units, args.selfless, mode)
    except FstError as exc:
        raise UsageError(str(exc)) from None
    fst = build_topology(spec)
    if args.isyms:
        fst.isyms.write(args.isyms)
    if args.osyms:
        fst.osyms.write(args.osyms)
    if args.out:
        write_fst(fst, args.out)
        print(_stats_line(fst))
    else:
        sys.stdout.write(to_text(fst))
        print(_stats_line(fst), file=sys.stderr)
    return 0


def cmd_graph(args) -> int:
    if args.action == "stats":
        if len(args.inputs) != 1:
            raise UsageError("graph stats takes exactly one graph")
        s = graph_stats(read_fst(args.inputs[0]))
        print(f"{s.states},{s.arcs},{s.approx_bytes}")
        return 0
    if args.action == "compose":
        if len(args.inputs) not in (2, 3):
            raise UsageError("graph compose takes T L [G]")
        graphs = [read_fst(p) for p in args.inputs]
        if len(graphs) == 3:
            out = build_decoding_graph(*graphs)
        else:
            out = connect(compose(*graphs))
    elif args.action == "lexicon":
        if len(args.inputs) != 1 or args.units is None:
            raise UsageError("graph lexicon takes one lexicon file and --units")
        lex = read_lexicon(args.inputs[0], unit_table(args.units))
        out = build_lexicon_fst(lex)
        if args.words_out:
            lex.words.write(args.words_out)
    else:  # grammar
        if len(args.inputs) != 1:
            raise UsageError("graph grammar takes one bigram file")
        if args.words:
            symbols, level = SymbolTable.read(args.words), "word"
        elif args.units:
            symbols, level = unit_table(args.units), "unit"
        else:
            symbols, level = None, "word"
        out = build_ngram_fst(read_bigram(args.inputs[0], symbols, level))
    if not args.out:
        raise UsageError("--out is required")
    write_fst(out, args.out)
    print(_stats_line(out))
    return 0


def _read_target(path, units: SymbolTable) -> list[int]:
    tokens = Path(path).read_text().split()
    return [int(t) if t.isdigit() else units.find(t) for t in tokens]


def cmd_loss(args) -> int:
    em = read_emissions(args.emissions)
    n_units = em.shape[1]
    units = unit_table(n_units)
    target = _read_target(args.target, units)
    # compact trains through the frame-doubled graph
    mode = "train" if args.topo == "compact" else "decode"
    try:
        topo = build_topology(TopologySpec(args.topo, n_units, args.selfless, mode))
    except FstError as exc:
        raise UsageError(str(exc)) from None
    if args.prune_beam is not None and not args.prune_beam > 0:
        raise UsageError("--prune-beam must be positive")
    if args.objective == "ctc":
        result = ctc_loss_and_grad(topo, target, em, args.prune_beam)
    else:
        lm = read_bigram(args.lm, units, "unit") if args.lm else uniform_unit_bigram(n_units)
        num = build_supervision(topo, target)
        den = build_denominator(topo, lm)
        result = mmi_loss_and_grad(num, den, em, args.prune_beam)
    print("inf" if math.isinf(result.loss) else f"{result.loss:.6f}")
    if args.grad_out:
        write_emissions(result.grad, args.grad_out)
    return 0


def cmd_decode(args) -> int:
    words = SymbolTable.read(args.words) if args.words else None
    if args.greedy:
        graph = None
    elif args.graph:
        graph = read_fst(args.graph)
    else:
        raise UsageError("decode needs --graph or --greedy")
    for path in args.emissions:
        em = read_emissions(path)
        if args.greedy:
            hyp = greedy_decode(em)
            text = hyp.text(unit_table(em.shape[1]))
        else:
            hyp = viterbi_decode(graph, em, args.beam)
            text = hyp.text(words)
        print(f"{Path(path).stem}\t{hyp.score:.6f}\t{text}")
    return 0


def _sizes(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None


def cmd_bench(args) -> int:
    try:
        cfg = bench.BenchConfig(
            vocab_sizes=args.sizes,
            lexicon_path=args.lexicon,
            lm_path=args.lm,
            topologies=args.topologies.split(",") if args.topologies else list(bench.DEFAULT_TOPOLOGIES),
            output_csv=args.out,
            seed=args.seed,
            n_words=args.words,
            timing=not args.no_timing,
            jobs=args.jobs,
        )
    except (FstError, ValueError) as exc:
        raise UsageError(f"bad bench config: {exc}") from None
    if args.suite == "sizes":
        rows = bench.size_sweep(cfg)
        text = bench.write_csv(rows, bench.SIZE_COLUMNS, cfg.seed, cfg.output_csv)
    else:
        rows = []
        for n in cfg.vocab_sizes:
            part, agree = bench.decode_bench(n, args.utts, cfg.seed, timing=cfg.timing)
            for row in part:
                row["agreement"] = f"{agree:.4f}"
            rows += part
            print(f"N={n} compact/correct hypothesis agreement: {agree:.4f}", file=sys.stderr)
        columns = ["topology", "N", "states", "arcs", "mean_score", "decode_seconds", "agreement"]
        text = bench.write_csv(rows, columns, cfg.seed, cfg.output_csv)
    if not cfg.output_csv:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wfstctc", description="CTC topology WFST toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("topo", help="build a CTC topology graph")
    p.add_argument("kind", choices=["correct", "eesen", "compact", "minimal"])
    p.add_argument("--units", type=int, required=True, help="vocabulary size N including <blank>")
    p.add_argument("--selfless", action="store_true")
    p.add_argument("--train-mode", action="store_true")
    p.add_argument("--out")
    p.add_argument("--isyms", help="write the input symbol table here")
    p.add_argument("--osyms", help="write the output symbol table here")
    p.set_defaults(func=cmd_topo)

    p = sub.add_parser("graph", help="compose graphs, build L/G, or print statistics")
    p.add_argument("action", choices=["compose", "stats", "lexicon", "grammar"])
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out")
    p.add_argument("--units", type=int)
    p.add_argument("--words", help="word symbol table for grammar graphs")
    p.add_argument("--words-out", help="write the lexicon's word table here")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("loss", help="CTC or LF-MMI loss and gradient")
    p.add_argument("objective", choices=["ctc", "mmi"])
    p.add_argument("--topo", required=True, choices=["correct", "eesen", "compact", "minimal"])
    p.add_argument("--selfless", action="store_true")
    p.add_argument("--target", required=True)
    p.add_argument("--emissions", required=True)
    p.add_argument("--prune-beam", type=float)
    p.add_argument("--lm", help="unit bigram for the MMI denominator (default: uniform)")
    p.add_argument("--grad-out")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("decode", help="decode emission files")
    p.add_argument("emissions", nargs="+")
    p.add_argument("--graph")
    p.add_argument("--beam", type=float, default=math.inf)
    p.add_argument("--words", help="output symbol table")
    p.add_argument("--greedy", action="store_true")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("bench", help="graph-size or decoding sweeps")
    p.add_argument("suite", choices=["sizes", "decode"])
    p.add_argument("--sizes", type=_sizes, default=[16, 32, 64])
    p.add_argument("--topologies", help="comma-separated variants, e.g. correct,compact-selfless")
    p.add_argument("--lexicon")
    p.add_argument("--lm")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--words", type=int, default=100)
    p.add_argument("--utts", type=int, default=20)
    p.add_argument("--no-timing", action="store_true", help="write 0 for wall-clock columns")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (FstError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
