import numpy as np
import pytest

from qfcert.determinantal import DeterminantalOperator, build_from_operator, ell1_influences
from qfcert.rngstreams import stream
from qfcert.splitting import SplitError, iterated_split, split_once
from qfcert.spectral import SymmetricOperator

from conftest import random_symmetric


def diagonal_atoms(n: int, masses) -> DeterminantalOperator:
    return DeterminantalOperator(
        1, n, {((i,), (i,)): float(m) for i, m in enumerate(masses)}
    )


def banded_normalized(n: int) -> SymmetricOperator:
    a = np.zeros((n, n))
    idx = np.arange(n - 1)
    a[idx, idx + 1] = a[idx + 1, idx] = 1.0 / np.sqrt(2.0 * (n - 1))
    return SymmetricOperator(a)


def test_single_atom_degenerate_threshold():
    atom = diagonal_atoms(1, [1.0])
    res = split_once(atom, rng_seed=0)
    assert res.admissible
    assert res.threshold <= 0.0
    assert {res.left_mass, res.right_mass} == {1.0, 0.0}


def test_sixteen_equal_atoms():
    b = diagonal_atoms(16, [1.0 / 16] * 16)
    res = split_once(b, rng_seed=5)
    floor = (1.0 - 1.0 / 16) / 16
    assert res.left_mass >= floor - 1e-12
    assert res.right_mass >= floor - 1e-12


def test_split_recomputed_masses():
    op = banded_normalized(10)
    b = build_from_operator(op, 2)
    res = split_once(b, rng_seed=2)
    assert res.left_mass == pytest.approx(b.restricted_mass(res.left))
    assert res.right_mass == pytest.approx(b.restricted_mass(res.right))
    assert set(res.left).isdisjoint(res.right)
    assert set(res.left) | set(res.right) == set(b.support())


def test_split_determinism():
    b = build_from_operator(banded_normalized(8), 2)
    r1 = split_once(b, rng_seed=9)
    r2 = split_once(b, rng_seed=9)
    assert r1 == r2


def test_greedy_mode_always_admissible():
    for seed in range(10):
        op = random_symmetric(7, seed, normalized=True)
        b = build_from_operator(op, 1)
        res = split_once(b, rng_seed=0, mode="greedy")
        assert res.admissible, (seed, res)


def test_zero_mass_rejected():
    with pytest.raises(ValueError, match="zero total mass"):
        split_once(DeterminantalOperator(1, 2, {}), rng_seed=0)


def test_exhaustion_carries_best_attempt():
    # two equal atoms: a single attempt fails whenever both marks agree
    # (probability 1/2), so some small seed exhausts max_attempts = 1
    b = diagonal_atoms(2, [0.5, 0.5])
    for seed in range(100):
        try:
            split_once(b, rng_seed=seed, max_attempts=1)
        except SplitError as exc:
            best = exc.best
            assert best.attempts == 1
            assert not best.admissible
            assert min(best.left_mass, best.right_mass) < best.threshold
            return
    raise AssertionError("no failing seed found in 100 tries")


def test_tree_immediate_threshold_stop():
    b = diagonal_atoms(2, [0.9, 0.1])  # upsilon = 0.9 > sigma/2
    tree = iterated_split(b, rng_seed=0)
    assert tree.kappa == 0
    assert tree.stop_reason == "threshold"
    assert len(tree.levels) == 1


def test_tree_depth_target_and_masses():
    b = diagonal_atoms(8, [1.0 / 8] * 8)
    tree = iterated_split(b, rng_seed=3, target_kappa=2)
    assert tree.stop_reason in ("depth-target", "threshold")
    assert tree.kappa >= 2
    for k, level in enumerate(tree.levels):
        assert len(level) == 2**k
        for blk in level:
            assert blk.mass >= tree.sigma / 32**k * (1.0 - 1e-12)


def test_tree_disjoint_and_monotone():
    b = build_from_operator(banded_normalized(12), 2)
    tree = iterated_split(b, rng_seed=4)
    for k, level in enumerate(tree.levels):
        seen = set()
        for blk in level:
            as_set = set(blk.subsets)
            assert seen.isdisjoint(as_set)
            seen |= as_set
        if k:
            prev_total = sum(blk.mass for blk in tree.levels[k - 1])
            assert sum(blk.mass for blk in level) <= prev_total + 1e-12


def test_tree_determinism():
    b = diagonal_atoms(16, [1.0 / 16] * 16)
    assert iterated_split(b, rng_seed=7) == iterated_split(b, rng_seed=7)
    assert iterated_split(b, rng_seed=7) != iterated_split(b, rng_seed=8)


def test_tree_json_round_trip(tmp_path):
    b = diagonal_atoms(4, [0.25] * 4)
    tree = iterated_split(b, rng_seed=1, target_kappa=1)
    payload = tree.to_json()
    assert payload["kappa"] == tree.kappa
    level0 = payload["levels"][0][0]
    assert level0["mass"] == pytest.approx(1.0)


def test_predicted_depth_from_influence():
    # 2^k independent atoms: upsilon = max mass, procedure continues while
    # upsilon <= sigma(block)/2, i.e. depth grows as atoms shrink
    b = diagonal_atoms(64, [1.0 / 64] * 64)
    tree = iterated_split(b, rng_seed=6)
    assert tree.kappa >= 3


def test_existence_frequency_smoke():
    # random low-influence instances: sampling succeeds fast almost always
    g = stream(123, "dust")
    successes = 0
    trials = 200
    for trial in range(trials):
        n = 40
        masses = g.uniform(0.5, 1.5, size=n)
        b = diagonal_atoms(n, masses / masses.sum())
        _, ups = ell1_influences(b)
        assert ups <= b.total_mass() / 4.0
        try:
            split_once(b, rng_seed=trial, max_attempts=64)
            successes += 1
        except SplitError:
            pass
    assert successes >= 0.99 * trials
