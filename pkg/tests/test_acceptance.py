"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines.
"""

import math
import time

import numpy as np
import pytest

from oracles import (
    brute_mmi_loss,
    brute_target_score,
    ctc_alpha,
    finite_difference,
    max_relative_error,
    random_emissions,
)
from wfstctc import (
    augment_emissions_for_compact,
    build_decoding_graph,
    build_denominator,
    build_supervision,
    check_equivalent,
    compose,
    connect,
    ctc_loss_and_grad,
    dense_intersect,
    make_selfless,
    mmi_loss_and_grad,
    remove_epsilon,
    topology,
    viterbi_decode,
)
from wfstctc.bench import (
    SIZE_COLUMNS,
    BenchConfig,
    bench_fixture,
    denominator_lattice_arcs,
    size_sweep,
    synthetic_utterance,
    write_csv,
)
from wfstctc.graphs import uniform_unit_bigram

# (kind, selfless, mode); the five variants plus the decode/train flavours of compact
VARIANTS = [
    ("correct", False, "decode"),
    ("correct", True, "decode"),
    ("eesen", False, "decode"),
    ("eesen", True, "decode"),
    ("compact", False, "decode"),
    ("compact", True, "decode"),
    ("compact", False, "train"),
    ("compact", True, "train"),
    ("minimal", False, "decode"),
]
# smallest relative-error denominator; only guards 0/0 on exactly-zero entries
GRAD_FLOOR = 1e-8


def criterion(number, title, budget):
    """Run the decorated body, time it, print one line and assert."""
    def wrap(body):
        def test():
            t0 = time.perf_counter()
            detail, ok = "", False
            try:
                detail = body() or ""
                ok = True
            finally:
                elapsed = time.perf_counter() - t0
                fast = elapsed < budget
                status = "PASS" if ok and fast else "FAIL"
                note = "" if fast else f" over the {budget:g}s budget"
                print(f"\n[{status}] criterion {number}: {title} ({elapsed:.2f}s{note}) {detail}")
            assert fast, f"criterion {number} took {elapsed:.2f}s, budget {budget}s"
        test.__name__ = body.__name__
        return test
    return wrap


def emissions_for(mode, em):
    return augment_emissions_for_compact(em) if mode == "train" else em


# --- 1 ------------------------------------------------------------------------

@criterion(1, "topology count formulas, N = 1..256", 1.0)
def test_criterion_1():
    formulas = {
        "correct": lambda n: (n, n * n),
        "eesen": lambda n: (n + 2, 3 * n + 1),
        "compact": lambda n: (n, 3 * n - 2),
        "minimal": lambda n: (1, n),
    }
    for n in range(1, 257):
        for kind, f in formulas.items():
            t = topology(kind, n)
            assert (t.num_states, t.num_arcs) == f(n), (kind, n)
    return "1024 graphs exact"


# --- 2 ------------------------------------------------------------------------

@criterion(2, "selfless removes exactly N-1 arcs, N = 2..64", 1.0)
def test_criterion_2():
    for n in range(2, 65):
        for kind in ("correct", "eesen", "compact"):
            t = topology(kind, n)
            assert t.num_arcs - make_selfless(t).num_arcs == n - 1, (kind, n)
    return "189 graphs exact"


# --- 3 ------------------------------------------------------------------------

@criterion(3, "correct-CTC loss equals the alpha-recursion oracle", 10.0)
def test_criterion_3():
    rng = np.random.default_rng(3)
    worst, finite = 0.0, 0
    for _ in range(200):
        n = int(rng.integers(2, 11))
        frames = int(rng.integers(1, 21))
        target = [int(u) for u in rng.integers(2, n + 1, size=int(rng.integers(1, 9)))]
        em = random_emissions(rng, frames, n)
        got = ctc_loss_and_grad(topology("correct", n), target, em).loss
        want = -ctc_alpha(em, target)
        if math.isinf(want):
            assert got == math.inf
            continue
        finite += 1
        worst = max(worst, abs(got - want))
    assert worst <= 1e-6
    return f"max |diff| {worst:.2e} over {finite} alignable of 200"


# --- 4 ------------------------------------------------------------------------

@criterion(4, "forward score equals exhaustive path enumeration", 30.0)
def test_criterion_4():
    rng = np.random.default_rng(4)
    worst, count = 0.0, 0
    for kind, selfless, mode in VARIANTS:
        for _ in range(25):
            n = int(rng.integers(2, 5))
            # the doubled graph sees 2T frames; keep 2T <= 8
            frames = int(rng.integers(1, 5 if mode == "train" else 7))
            target = [int(u) for u in rng.integers(2, n + 1, size=int(rng.integers(1, 4)))]
            em = random_emissions(rng, frames, n)
            topo = topology(kind, n, selfless, mode)
            got = -ctc_loss_and_grad(topo, target, em).loss
            want = brute_target_score(topo, target, emissions_for(mode, em))
            if want == -math.inf:
                assert got == -math.inf
                continue
            worst = max(worst, abs(got - want))
            count += 1
    assert worst <= 1e-9
    return f"max |diff| {worst:.2e} over {count} scored instances"


# --- 5 ------------------------------------------------------------------------

@criterion(5, "gradients match central finite differences", 60.0)
def test_criterion_5():
    rng = np.random.default_rng(5)
    worst = {}
    for kind, selfless, mode in VARIANTS:
        name = f"ctc/{kind}{'-selfless' if selfless else ''}/{mode}"
        done = 0
        while done < 50:
            n = int(rng.integers(2, 5))
            frames = int(rng.integers(2, 6))
            target = [int(u) for u in rng.integers(2, n + 1, size=int(rng.integers(1, 3)))]
            em = random_emissions(rng, frames, n)
            topo = topology(kind, n, selfless, mode)
            res = ctc_loss_and_grad(topo, target, em)
            if math.isinf(res.loss):
                continue
            fd = finite_difference(lambda x: ctc_loss_and_grad(topo, target, x).loss, em)
            worst[name] = max(worst.get(name, 0.0), max_relative_error(res.grad, fd, GRAD_FLOOR))
            done += 1
    for i in range(50):
        kind, selfless, mode = VARIANTS[i % len(VARIANTS)]
        n = int(rng.integers(2, 5))
        frames = int(rng.integers(2, 5))
        target = [int(rng.integers(2, n + 1))]
        em = random_emissions(rng, frames, n)
        topo = topology(kind, n, selfless, mode)
        num, den = build_supervision(topo, target), build_denominator(topo, uniform_unit_bigram(n))
        res = mmi_loss_and_grad(num, den, em)
        fd = finite_difference(lambda x: mmi_loss_and_grad(num, den, x).loss, em)
        worst["mmi"] = max(worst.get("mmi", 0.0), max_relative_error(res.grad, fd, GRAD_FLOOR))
    top = max(worst.values())
    assert top <= 1e-4, worst
    return f"max relative error {top:.2e} across {len(worst)} losses x 50"


# --- 6 ------------------------------------------------------------------------

@criterion(6, "compact = eesen, eps-free selfless compact = minimal, correct != minimal", 30.0)
def test_criterion_6():
    for n in (2, 3, 4):
        assert check_equivalent(topology("compact", n), topology("eesen", n), 4), n
        flat = remove_epsilon(topology("compact", n, selfless=True))
        assert check_equivalent(flat, topology("minimal", n), 5), n
    verdict = check_equivalent(topology("correct", 2), topology("minimal", 2), 2)
    assert not verdict
    cx = verdict.counterexample
    assert cx.input == (2, 2) and {cx.output} <= {(2,), (2, 2)}
    return f"counterexample input 'A A' -> output {cx.output}"


# --- 7 ------------------------------------------------------------------------

@criterion(7, "graph-size ordering on the seeded 100-word lexicon", 60.0)
def test_criterion_7():
    cfg = BenchConfig(
        vocab_sizes=[16, 32, 64],
        topologies=["correct", "correct-selfless", "eesen", "compact", "minimal"],
        n_words=100,
        timing=False,
    )
    rows = size_sweep(cfg)
    ratios = []
    for n in cfg.vocab_sizes:
        _, l, g = bench_fixture(n, cfg.seed, cfg.n_words)
        lg = connect(compose(l, g))
        arcs = {r["topology"]: r["arcs"] for r in rows if r["N"] == n}
        assert arcs["minimal"] < arcs["compact"] < arcs["correct"], (n, arcs)
        assert arcs["correct-selfless"] < arcs["correct"], (n, arcs)
        assert all(lg.num_arcs <= v for v in arcs.values()), (n, lg.num_arcs, arcs)
        den = {k: denominator_lattice_arcs(k, n) for k in ("minimal", "compact", "correct")}
        assert den["minimal"] < den["compact"] < den["correct"], (n, den)
        ratios.append(arcs["compact"] / arcs["correct"])
    csv = write_csv(rows, SIZE_COLUMNS, cfg.seed)
    assert "arcs_vs_correct" in csv.splitlines()[1]
    return "compact/correct arc ratio " + ", ".join(f"{r:.3f}" for r in ratios)


# --- 8 ------------------------------------------------------------------------

@criterion(8, "Viterbi exactness, eesen/compact agreement, compact >= correct", 60.0)
def test_criterion_8():
    n = 6
    lex, l, g = bench_fixture(n, seed=8, n_words=20)
    lg = connect(compose(l, g))
    graphs = {k: build_decoding_graph(topology(k, n), None, lg) for k in ("correct", "eesen", "compact")}
    rng = np.random.default_rng(8)
    worst_exact, worst_pair, same_words = 0.0, 0.0, 0
    for i in range(100):
        if i % 2:
            em = synthetic_utterance(lex, n, rng)
        else:
            em = random_emissions(rng, int(rng.integers(3, 12)), n)
        hyps = {}
        for k, graph in graphs.items():
            hyps[k] = viterbi_decode(graph, em)
            best, _ = dense_intersect(graph, em).best_path()
            worst_exact = max(worst_exact, abs(hyps[k].score - best))
        assert hyps["eesen"].words == hyps["compact"].words, i
        worst_pair = max(worst_pair, abs(hyps["eesen"].score - hyps["compact"].score))
        assert hyps["compact"].score >= hyps["correct"].score, i
        same_words += hyps["compact"].words == hyps["correct"].words
    assert worst_exact <= 1e-9 and worst_pair <= 1e-9
    return f"exact {worst_exact:.1e}, eesen/compact {worst_pair:.1e}, compact/correct words agree {same_words}/100"


# --- 9 ------------------------------------------------------------------------

@criterion(9, "pruning is sound", 30.0)
def test_criterion_9():
    rng = np.random.default_rng(9)
    checked = changed = 0
    for i in range(50):
        kind, selfless, mode = VARIANTS[i % len(VARIANTS)]
        n = int(rng.integers(2, 6))
        frames = int(rng.integers(2, 9))
        target = [int(u) for u in rng.integers(2, n + 1, size=int(rng.integers(1, 3)))]
        em = random_emissions(rng, frames, n)
        topo = topology(kind, n, selfless, mode)
        beam = float(rng.uniform(0.5, 8.0))
        exact = ctc_loss_and_grad(topo, target, em)
        inf = ctc_loss_and_grad(topo, target, em, prune_beam=math.inf)
        assert exact.loss == inf.loss or abs(exact.loss - inf.loss) <= 1e-12
        pruned = ctc_loss_and_grad(topo, target, em, prune_beam=beam).loss
        assert pruned >= exact.loss
        changed += pruned > exact.loss
        num, den = build_supervision(topo, target), build_denominator(topo, uniform_unit_bigram(n))
        m_exact = mmi_loss_and_grad(num, den, em).loss
        m_inf = mmi_loss_and_grad(num, den, em, prune_beam=math.inf).loss
        assert m_exact == m_inf or abs(m_exact - m_inf) <= 1e-12
        # the beam prunes the denominator only, so MMI loss (den - num) can
        # only drop; the denominator-side form of "pruning removes mass"
        assert mmi_loss_and_grad(num, den, em, prune_beam=beam).loss <= m_exact
        checked += 1
    return f"{checked} instances ({changed} CTC losses moved by the beam): CTC pruned >= exact, MMI denominator pruned <= exact"



def test_mmi_oracle_spot_check():
    # the brute-force MMI oracle backs the criterion-5 instances
    topo, lm = topology("correct", 3), uniform_unit_bigram(3)
    em = random_emissions(np.random.default_rng(0), 3, 3)
    res = mmi_loss_and_grad(build_supervision(topo, [2]), build_denominator(topo, lm), em)
    assert res.loss == pytest.approx(brute_mmi_loss(topo, [2], lm, em), abs=1e-9)
