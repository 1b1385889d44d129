import math

import numpy as np
import pytest

from oracles import brute_mmi_loss, brute_target_score, random_emissions
from wfstctc import (
    FstError,
    augment_emissions_for_compact,
    build_denominator,
    build_supervision,
    ctc_loss_and_grad,
    dense_intersect,
    enumerate_transductions,
    forward_score,
    mmi_loss_and_grad,
    topological_sort,
)
from wfstctc.bench import peaked_emissions
from wfstctc.graphs import uniform_unit_bigram
from wfstctc.lattice import LatticeError, as_emissions, read_emissions, write_emissions
from wfstctc.topology import topology

A, B = 2, 3
THIRD = math.log(1 / 3)


def uniform(frames, units=3):
    return np.full((frames, units), math.log(1 / units))


def test_supervision_examples():
    sup = build_supervision(topology("correct", 3), [A])
    strings = {i for i, _, _ in enumerate_transductions(sup, 3)}
    assert all(set(s) <= {1, A} and A in s for s in strings)
    assert (A, 1, A) not in strings
    rep = build_supervision(topology("correct", 3), [A, A])
    assert min((len(i), i) for i, _, _ in enumerate_transductions(rep, 3))[1] == (A, 1, A)
    mini = {i for i, _, _ in enumerate_transductions(build_supervision(topology("minimal", 3), [A, A]), 3)}
    assert {(A, A), (A, 1, A), (1, A, A)} <= mini


def test_three_paths_give_ln_third():
    lat = dense_intersect(build_supervision(topology("correct", 3), [A]), uniform(2))
    assert forward_score(lat) == pytest.approx(THIRD, abs=1e-12)
    topological_sort(lat.fst)


def test_single_and_empty_lattices():
    sup = build_supervision(topology("correct", 3), [A])
    em = np.array([[-np.inf, 0.0, -np.inf]])
    assert forward_score(dense_intersect(sup, em)) == 0.0
    dead = uniform(3)
    dead[1] = -np.inf
    lat = dense_intersect(sup, dead)
    assert lat.is_empty and forward_score(lat) == -math.inf


@pytest.mark.parametrize("beam", [0.0, -1.0])
def test_nonpositive_beam_rejected(beam):
    with pytest.raises(FstError):
        dense_intersect(topology("minimal", 3), uniform(2), prune_beam=beam)


@pytest.mark.parametrize("topo, target, frames, loss", [
    ("correct", [A], 2, math.log(3)),
    ("correct", [A, A], 3, math.log(27)),
    ("minimal", [A], 2, -math.log(2 / 9)),
])
def test_ctc_examples(topo, target, frames, loss):
    assert ctc_loss_and_grad(topology(topo, 3), target, uniform(frames)).loss == pytest.approx(loss, abs=1e-12)


def test_unalignable_target_is_infinite():
    res = ctc_loss_and_grad(topology("correct", 3), [A, B], uniform(1))
    assert res.loss == math.inf and not res.grad.any()


def test_blank_in_target_rejected():
    with pytest.raises(FstError, match="blank"):
        ctc_loss_and_grad(topology("correct", 3), [1], uniform(2))


def test_augment_examples():
    aug = augment_emissions_for_compact(uniform(1))
    assert aug.shape == (2, 4)
    assert list(aug[0]) == [THIRD] * 3 + [-np.inf]
    assert list(aug[1]) == [0.0] * 4
    assert augment_emissions_for_compact(np.zeros((0, 3))).shape == (0, 4)


def test_doubled_compact_single_frame_loss_is_zero():
    topo = topology("compact", 3, mode="train")
    res = ctc_loss_and_grad(topo, [A], uniform(1))
    assert res.loss == pytest.approx(0.0, abs=1e-12)
    assert res.grad.shape == (1, 3)
    # the same number from the explicit doubled matrix and the brute force
    aug = augment_emissions_for_compact(uniform(1))
    assert ctc_loss_and_grad(topo, [A], aug).loss == pytest.approx(0.0, abs=1e-12)
    assert brute_target_score(topo, [A], aug) == pytest.approx(0.0, abs=1e-12)


def test_occupancy_rows_sum_to_minus_one():
    rng = np.random.default_rng(5)
    em = random_emissions(rng, 7, 4)
    for kind in ("correct", "eesen", "compact", "minimal"):
        res = ctc_loss_and_grad(topology(kind, 4), [A, 4], em)
        np.testing.assert_allclose(res.grad.sum(axis=1), -1.0, atol=1e-6)


def test_correct_loss_bounds_compact_loss():
    rng = np.random.default_rng(6)
    for _ in range(20):
        em = random_emissions(rng, 6, 4)
        target = [int(u) for u in rng.integers(2, 5, size=2)]
        c = ctc_loss_and_grad(topology("correct", 4), target, em).loss
        k = ctc_loss_and_grad(topology("compact", 4), target, em).loss
        assert c >= k - 1e-12


def test_mmi_identical_graphs_is_zero():
    sup = build_supervision(topology("correct", 3), [A])
    res = mmi_loss_and_grad(sup, sup, uniform(3))
    assert res.loss == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(res.grad, 0.0, atol=1e-12)


def test_mmi_matches_nine_string_brute_force():
    topo, lm = topology("correct", 3), uniform_unit_bigram(3)
    res = mmi_loss_and_grad(build_supervision(topo, [A]), build_denominator(topo, lm), uniform(2))
    assert res.loss == pytest.approx(brute_mmi_loss(topo, [A], lm, uniform(2)), abs=1e-12)


def test_mmi_train_mode_matches_brute_force():
    topo, lm = topology("compact", 3, mode="train"), uniform_unit_bigram(3)
    em = random_emissions(np.random.default_rng(8), 3, 3)
    res = mmi_loss_and_grad(build_supervision(topo, [A]), build_denominator(topo, lm), em)
    want = brute_mmi_loss(topo, [A], lm, augment_emissions_for_compact(em))
    assert res.loss == pytest.approx(want, abs=1e-9)


def test_mmi_pruned_denominator_on_peaked_input():
    rng = np.random.default_rng(9)
    topo, lm = topology("correct", 4), uniform_unit_bigram(4)
    em = peaked_emissions([1, A, A, 1, B, 1, 4, 4], 4, rng, peak=0.95)
    num, den = build_supervision(topo, [A, B, 4]), build_denominator(topo, lm)
    full = mmi_loss_and_grad(num, den, em).loss
    pruned = mmi_loss_and_grad(num, den, em, prune_beam=20.0).loss
    assert abs(pruned - full) <= 1e-6


def test_mmi_error_cases():
    topo = topology("correct", 3)
    num = build_supervision(topo, [A, B])
    den = build_denominator(topo, uniform_unit_bigram(3))
    assert mmi_loss_and_grad(num, den, uniform(1)).loss == math.inf
    dead = uniform(2)
    dead[0] = -np.inf
    with pytest.raises(FstError, match="denominator"):
        mmi_loss_and_grad(num, den, dead)


def test_emission_validation_and_io(tmp_path):
    with pytest.raises(LatticeError):
        as_emissions([[np.nan, 0.0]])
    with pytest.raises(LatticeError, match="frame 0"):
        as_emissions([[0.0, 0.0]], normalized=True)
    em = random_emissions(np.random.default_rng(0), 4, 3)
    write_emissions(em, tmp_path / "e.tsv")
    assert (read_emissions(tmp_path / "e.tsv") == em).all()
    (tmp_path / "bad.tsv").write_text("# 2 3\n0 0 0\n")
    with pytest.raises(LatticeError, match="expected 2 rows"):
        read_emissions(tmp_path / "bad.tsv")
