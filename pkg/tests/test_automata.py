from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tempocorr.automata import (ClassicalMachine, DeterministicClock, OptimizerConfig, QuantumMachine, TickDistribution,
                                clock_accuracy, deterministic_complexity, eventually_periodic_form,
                                exists_deterministic_machine, grid_max_sequence_probability, machine_behavior,
                                machine_probability, machine_tick_distribution, max_expression_classical,
                                max_expression_deterministic, max_sequence_probability_classical,
                                one_tick_probability, smallest_certifying_dimension)
from tempocorr.errors import SizeGuardError
from tempocorr.expressions import evaluate, one_tick, single_bit_witness
from tempocorr.models import counter_clock, flip_machine, geometric_clock
from tempocorr.quantum import QuantumState, random_density_matrix, random_instrument

SEEDS = st.integers(0, 2**32 - 1)


def random_quantum_machine(rng, d, inputs=("0", "1")):
    return QuantumMachine(QuantumState(random_density_matrix(d, rng)),
                          {x: random_instrument(d, 2, rng) for x in inputs})


# ---------------------------------------------------------------- probabilities

def test_machine_probability_examples():
    assert machine_probability(flip_machine(), "000000", "010101") == pytest.approx(1.0)
    for x in (0.1, 0.5, 0.8):
        m = ClassicalMachine.iid([x, 1 - x])
        assert machine_probability(m, "00", "01") == pytest.approx(x * (1 - x), abs=1e-15)


def test_machine_probability_label_checks():
    with pytest.raises(ValueError):
        machine_probability(flip_machine(), "00", "0")
    with pytest.raises(ValueError):
        machine_probability(flip_machine(), "01", "00")
    with pytest.raises(ValueError):
        machine_probability(flip_machine(), "00", "02")


def test_classical_machine_validation():
    with pytest.raises(ValueError):
        ClassicalMachine([1.0], np.full((1, 1, 2, 1), 0.6))
    with pytest.raises(ValueError):
        ClassicalMachine([0.5, 0.6], np.full((1, 2, 2, 2), 0.25))


@settings(max_examples=100, deadline=None)
@given(SEEDS, st.integers(1, 4), st.integers(1, 4), st.booleans())
def test_output_marginals_sum_to_one(seed, d, n, quantum):
    rng = np.random.default_rng(seed)
    m = random_quantum_machine(rng, d) if quantum else ClassicalMachine.random(d, rng, inputs=("0", "1"))
    for s in itertools.product(m.inputs, repeat=n):
        total = sum(machine_probability(m, s, q) for q in itertools.product(m.outputs, repeat=n))
        assert abs(total - 1) <= 1e-12
        assert machine_probability(m, s, [None] * n) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(SEEDS, st.integers(1, 4), st.integers(1, 3))
def test_quantum_embedding_preserves_probabilities(seed, d, n):
    rng = np.random.default_rng(seed)
    m = ClassicalMachine.random(d, rng, inputs=("0", "1"), outputs=("a", "b", "c"))
    qm = m.to_quantum()
    for s in itertools.product(m.inputs, repeat=n):
        for q in itertools.product(m.outputs, repeat=n):
            assert abs(machine_probability(m, s, q) - machine_probability(qm, s, q)) <= 1e-12


def test_machine_behavior_with_idle_input(rng):
    m = ClassicalMachine.random(2, rng, inputs=("0", "1"))
    b = machine_behavior(m, 2, idle="0")
    assert b.prob(("0", "1"), ("0", "1")) == pytest.approx(machine_probability(m, "01", [None, "1"]))
    assert len(b.sequences) == 4


# ---------------------------------------------------------------- deterministic complexity

def test_complexity_examples():
    assert deterministic_complexity("010101").value == 2
    assert deterministic_complexity("000").value == 1
    for n in range(2, 9):
        dc = deterministic_complexity("0" * (n - 1) + "1")
        assert dc.value == n
        assert machine_probability(dc.machine, "0" * n, "0" * (n - 1) + "1") == pytest.approx(1.0)
    with pytest.raises(ValueError):
        deterministic_complexity("")


def test_eventually_periodic_form():
    assert eventually_periodic_form("0010101") == (1, 2)
    assert eventually_periodic_form("0000") == (0, 1)
    assert eventually_periodic_form("0001") == (0, 4)
    assert eventually_periodic_form("00011") == (3, 1)


def test_complexity_equals_exhaustive_search_up_to_length_8():
    for n in range(1, 9):
        for bits in itertools.product("01", repeat=n):
            q = "".join(bits)
            dc = deterministic_complexity(q, certify=False)
            assert dc.value == smallest_certifying_dimension(q), q
            assert machine_probability(dc.machine, "0" * n, q) == pytest.approx(1.0)


def test_sequence_probability_reaches_one_exactly_at_complexity():
    for q in ("01", "0110", "001", "010011", "0001"):
        dc = deterministic_complexity(q).value
        at = max_sequence_probability_classical(q, dc, OptimizerConfig(restarts=3))
        assert at.value == 1.0 and at.certified
        below = max_sequence_probability_classical(q, dc - 1, OptimizerConfig(restarts=10))
        assert below.value < 1 - 1e-3
        assert not exists_deterministic_machine(q, dc - 1)


# ---------------------------------------------------------------- optimization

def test_one_state_two_step_optimum():
    res = max_sequence_probability_classical("01", 1, OptimizerConfig(restarts=5))
    assert res.value == pytest.approx(0.25, abs=1e-9)
    assert not res.certified


def test_single_bit_witness_classical_values():
    res = max_expression_classical(single_bit_witness(), 2, OptimizerConfig(restarts=20))
    assert res.value == pytest.approx(2.25, abs=1e-6)
    assert evaluate(single_bit_witness(), machine_behavior(res.machine, 2)) == pytest.approx(res.value, abs=1e-12)
    det = max_expression_deterministic(single_bit_witness(), 2)
    assert det.value == 2 and det.certified
    assert max_expression_deterministic(single_bit_witness(), 1).value == 1


def test_deterministic_guard():
    with pytest.raises(SizeGuardError):
        max_expression_deterministic(single_bit_witness(), 4, limit=1000)


def test_algebraic_maximum_at_sufficient_memory():
    res = max_expression_classical(one_tick(3), 3, OptimizerConfig(restarts=5))
    assert res.value >= 1 - 1e-6


def test_restarts_are_reproducible_and_thread_independent(monkeypatch):
    cfg = OptimizerConfig(restarts=6, seed=11)
    monkeypatch.setenv("TEMPOCORR_THREADS", "1")
    serial = max_expression_classical(single_bit_witness(), 2, cfg)
    again = max_expression_classical(single_bit_witness(), 2, cfg)
    monkeypatch.setenv("TEMPOCORR_THREADS", "3")
    threaded = max_expression_classical(single_bit_witness(), 2, cfg)
    assert serial.restart_values == again.restart_values == threaded.restart_values


def test_one_tick_matrix_powers_match_forward_pass(rng):
    for d in (1, 2, 3):
        m = ClassicalMachine.random(d, rng)
        for n in (1, 4, 9):
            q = "0" * (n - 1) + "1"
            assert one_tick_probability(m, n) == pytest.approx(machine_probability(m, "0" * n, q), abs=1e-14)


def test_grid_oracle_examples():
    assert grid_max_sequence_probability("01", 1).value == pytest.approx(0.25, abs=1e-9)
    res = grid_max_sequence_probability("001", 2)
    assert 0.25 < res.value <= 1 / math.e + 1e-3
    # 8/27 is attained by a two-state machine found by the multistart search
    assert res.value == pytest.approx(8 / 27, abs=1e-4)
    assert machine_probability(res.machine, "000", "001") == pytest.approx(res.value, abs=1e-12)
    heuristic = max_sequence_probability_classical("001", 2, OptimizerConfig(restarts=20))
    assert heuristic.value == pytest.approx(res.value, abs=1e-4)
    with pytest.raises(ValueError):
        grid_max_sequence_probability("001", 3)


# ---------------------------------------------------------------- clocks

def test_geometric_tick_distribution():
    p = machine_tick_distribution(geometric_clock(0.3), 40)
    t = np.arange(1, 41)
    assert np.allclose(p.p, 0.7 ** (t - 1) * 0.3, atol=1e-15)
    assert p.p.sum() + p.tail == pytest.approx(1.0, abs=1e-12)


def test_counter_tick_distribution():
    p = machine_tick_distribution(counter_clock(5), 12)
    assert np.allclose(p.p, np.eye(12)[4])
    assert isinstance(clock_accuracy(p), DeterministicClock)


def test_clock_accuracy_examples():
    acc = clock_accuracy(machine_tick_distribution(geometric_clock(0.5), 80))
    assert (acc.mean, acc.variance, acc.accuracy) == pytest.approx((2.0, 2.0, 2.0), abs=1e-9)
    for lam in (0.2, 0.6, 0.9):
        acc = clock_accuracy(TickDistribution.geometric(lam, 400))
        assert acc.accuracy == pytest.approx(1 / (1 - lam), rel=1e-9)
    with pytest.raises(ValueError):
        clock_accuracy(TickDistribution.geometric(0.1, 5))


@settings(max_examples=100, deadline=None)
@given(SEEDS, st.integers(1, 4), st.booleans())
def test_tick_mass_is_conserved(seed, d, quantum):
    rng = np.random.default_rng(seed)
    m = random_quantum_machine(rng, d, ("0",)) if quantum else ClassicalMachine.random(d, rng)
    p = machine_tick_distribution(m, 30)
    assert abs(p.p.sum() + p.tail - 1) <= 1e-12


def test_quantum_clock_matches_embedding(rng):
    m = ClassicalMachine.random(3, rng)
    a = machine_tick_distribution(m, 25)
    b = machine_tick_distribution(m.to_quantum(), 25)
    assert np.allclose(a.p, b.p, atol=1e-14) and a.tail == pytest.approx(b.tail, abs=1e-14)


def test_no_machine_without_states():
    assert not exists_deterministic_machine("0", 0)
    assert exists_deterministic_machine("0", 1)
