from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_model
from tempocorr.automata import ClassicalMachine, machine_behavior
from tempocorr.behavior import (Behavior, MissingDataError, Scenario, adroit_violation, adroitness_deviation,
                                check_aot, check_nsit, eim_corrected_lgi, eim_delta, eim_reconstruct,
                                invasivity, is_quasiprobability, quantum_witness, robens_witness)
from tempocorr.expressions import (LinearExpression, Term, builtin, evaluate, expectation, lgi3, lgi4, lgi_n,
                                   lgi_stationary, probability, single_bit_witness, stationary_value)
from tempocorr.macrorealism import classical_bound, is_macrorealist
from tempocorr.models import (four_time_qubit, full_schedule, intermediate_probe, misaligned_ambiguous_tests,
                              noisy_repeat, precessing_qubit, rotating_qubit, superposition_then_x)
from tempocorr.quantum import (Channel, QuantumSequenceModel, QuantumState, behavior_from_model, luders_instrument,
                               random_density_matrix, random_unitary, sequence_probability, spectral_povm)

SEEDS = st.integers(0, 2**32 - 1)
LG2 = Scenario.leggett_garg(2)


def lg_machine(rng, d=1, shared=False):
    """Random machine with a skip input "0" and a measure input "1"."""
    m = ClassicalMachine.random(d, rng, inputs=("0", "1"))
    if shared:
        m = ClassicalMachine(m.initial, np.stack([m.transition[1], m.transition[1]]), m.inputs, m.outputs)
    return m


# ---------------------------------------------------------------- tables

def test_behavior_validation():
    with pytest.raises(ValueError):
        Behavior(LG2, {("1", "1"): {("+1", "+1"): 0.7}})
    with pytest.raises(ValueError):
        Behavior(LG2, {("1", "1"): {("+1", "+1"): 1.2, ("-1", "-1"): -0.2}})
    with pytest.raises(ValueError):
        Behavior(LG2, {("1",): {("+1",): 1.0}})
    with pytest.raises(ValueError):
        Behavior(LG2, {("1", "1"): {("0", "+1"): 1.0}})


def test_missing_entries_are_errors_not_zeros():
    b = Behavior(LG2, {("1", "1"): {("+1", "+1"): 1.0}})
    assert b.prob(("1", "1"), ("-1", "+1")) == 0.0
    with pytest.raises(MissingDataError):
        b.distribution(("0", "1"))
    with pytest.raises(MissingDataError):
        evaluate(LinearExpression((probability(1.0, "01", ["0", "+1"]),), scenario=LG2), b)


def test_correlators_derive_from_joint_table():
    b = behavior_from_model(rotating_qubit(), [("1", "1", "1")])
    dist = b.distribution(("1", "1", "1"))
    direct = sum(p * (1 if q[0] == "+1" else -1) * (1 if q[2] == "+1" else -1) for q, p in dist.items())
    assert b.correlator(("1", "1", "1"), 0, 2) == pytest.approx(direct, abs=1e-15)


# ---------------------------------------------------------------- AoT and NSIT

def test_aot_constructed_violation():
    table = {("1", "0"): {("+1", "0"): 0.5, ("-1", "0"): 0.5},
             ("1", "1"): {("+1", "+1"): 0.8, ("-1", "-1"): 0.2}}
    report = check_aot(Behavior(LG2, table))
    assert not report.ok
    assert report.max_deviation == pytest.approx(0.3)


def test_aot_single_sequence_untestable():
    b = behavior_from_model(rotating_qubit(), [("1", "1", "1")])
    report = check_aot(b)
    assert report.deviations == [] and report.ok
    assert report.untestable


@settings(max_examples=100, deadline=None)
@given(SEEDS, st.integers(2, 4), st.integers(2, 3))
def test_quantum_behaviors_respect_aot(seed, dim, n):
    rng = np.random.default_rng(seed)
    b = behavior_from_model(random_model(rng, dim), full_schedule(n, ("0", "1", "2")))
    assert check_aot(b, 1e-9).ok


@settings(max_examples=100, deadline=None)
@given(SEEDS, st.integers(2, 4))
def test_one_state_machines_respect_nsit(seed, n):
    rng = np.random.default_rng(seed)
    b = machine_behavior(lg_machine(rng), n, idle="0")
    report = check_nsit(b, 1e-9)
    assert report.deviations and report.ok


def test_nsit_superposition_then_x():
    b = behavior_from_model(superposition_then_x(), [("z", "x"), ("0", "x")])
    assert check_nsit(b).by_position()[0] == pytest.approx(0.5, abs=1e-9)


def test_nsit_rotating_qubit_detects_middle_measurement():
    b = behavior_from_model(rotating_qubit(), lgi3().sequences() + [("1", "1", "1")])
    devs = check_nsit(b).by_position()
    # removing the middle measurement changes the last marginal by 3/8
    assert devs[1] == pytest.approx(0.375, abs=1e-12)


def test_nsit_untestable_without_counterpart():
    b = behavior_from_model(rotating_qubit(), [("1", "1", "1")])
    report = check_nsit(b)
    assert report.deviations == []
    assert len(report.untestable) == 2


def _family(rng, kind):
    if kind == "quantum":
        u = random_unitary(2, rng)
        instr = luders_instrument(spectral_povm(u @ np.diag([1.0, -1.0]) @ u.conj().T))
        return behavior_from_model(
            QuantumSequenceModel(QuantumState(random_density_matrix(2, rng)), {"1": instr},
                                 Channel.unitary(random_unitary(2, rng))), full_schedule(3))
    return machine_behavior(lg_machine(rng, 2, shared=(kind == "shared")), 3, idle="0")


@settings(max_examples=60, deadline=None)
@given(SEEDS, st.sampled_from(["quantum", "machine", "shared"]))
def test_nsit_equivalent_to_macrorealism_on_full_schedules(seed, kind):
    rng = np.random.default_rng(seed)
    b = _family(rng, kind)
    nsit_ok = check_nsit(b, 1e-6).ok
    assert nsit_ok == is_macrorealist(b).accepted
    if kind == "shared":
        assert nsit_ok


# ---------------------------------------------------------------- witnesses

def test_quantum_witness_examples(rng):
    b = behavior_from_model(superposition_then_x(), [("z", "x"), ("0", "x")])
    assert quantum_witness(b, "+1") == pytest.approx(0.5, abs=1e-12)
    mr = machine_behavior(lg_machine(rng), 2, schedule=[("1", "1"), ("0", "1")], idle="0")
    assert quantum_witness(mr, "1") == pytest.approx(0.0, abs=1e-12)


def test_quantum_witness_missing_pair():
    b = behavior_from_model(superposition_then_x(), [("z", "x")])
    with pytest.raises(MissingDataError):
        quantum_witness(b, "+1")


def test_robens_witness_examples():
    values = {"+1": 0.0, "-1": 1.0}
    b = behavior_from_model(superposition_then_x(), [("z", "x"), ("0", "x")], outcome_values=values)
    w = robens_witness(b)
    assert w.value == pytest.approx(0.5, abs=1e-12) and w.violates
    quiet = behavior_from_model(intermediate_probe("z"), [("a", "z"), ("0", "z")])
    assert robens_witness(quiet).value == pytest.approx(0.0, abs=1e-12)


def test_robens_witness_nonpositive_for_machines(rng):
    for _ in range(20):
        m = lg_machine(rng)
        b = machine_behavior(m, 2, schedule=[("1", "1"), ("0", "1")], idle="0")
        b = Behavior(b.scenario.with_values({"0": 0.0, "1": 1.0}), b.table)
        assert robens_witness(b).value <= 1e-12


def test_invasivity_examples():
    b = behavior_from_model(noisy_repeat(0.0), [("1", "1")])
    assert invasivity(b) == pytest.approx({"+1": 0.0, "-1": 0.0})
    table = {("1", "1"): {("+1", "+1"): 0.45, ("+1", "-1"): 0.05, ("-1", "-1"): 0.45, ("-1", "+1"): 0.05}}
    assert invasivity(Behavior(LG2, table)) == pytest.approx({"+1": 0.1, "-1": 0.1})
    for lam in (0.1, 0.35, 0.8):
        inv = invasivity(behavior_from_model(noisy_repeat(lam), [("1", "1")]))
        assert inv["+1"] == pytest.approx(lam / 2, abs=1e-12)
        assert inv["-1"] == pytest.approx(lam / 2, abs=1e-12)


def test_adroitness_examples():
    target = LinearExpression((expectation(1.0, None, 1),))
    b = behavior_from_model(intermediate_probe("z"), [("0", "z")])
    assert adroitness_deviation(b, b, target) == 0.0
    with_z = behavior_from_model(intermediate_probe("z"), [("a", "z")])
    assert adroitness_deviation(with_z, b, target) == pytest.approx(0.0, abs=1e-12)
    with_x = behavior_from_model(intermediate_probe("x"), [("a", "z")])
    without = behavior_from_model(intermediate_probe("x"), [("0", "z")])
    assert adroitness_deviation(with_x, without, target) == pytest.approx(1.0, abs=1e-12)
    assert adroit_violation(1.5, [0.1, 0.2])
    assert not adroit_violation(1.0, [0.6, 0.6])


# ---------------------------------------------------------------- ambiguous measurements

def test_eim_reconstruction_examples():
    assert np.allclose(eim_reconstruct([2 / 3, 2 / 3, 2 / 3]), [1 / 3, 1 / 3, 1 / 3])
    assert np.allclose(eim_reconstruct([0.0, 1.0, 1.0]), [1.0, 0.0, 0.0])
    assert not is_quasiprobability(eim_reconstruct([0.0, 1.0, 1.0]))
    with pytest.raises(ValueError):
        eim_reconstruct([0.5, 0.5])


def test_eim_misaligned_tests_give_quasiprobability():
    nots, rho = misaligned_ambiguous_tests()
    pa = [float(np.trace(n @ rho).real) for n in nots]
    p = eim_reconstruct(pa)
    assert is_quasiprobability(p)
    assert p.sum() == pytest.approx(0.5 * sum(pa))


def _qutrit_eim(rotation):
    """Qutrit behavior plus the ambiguous 'not q1' table for a final sharp measurement."""
    proj = [np.diag(np.eye(3)[k]).astype(complex) for k in range(3)]
    sharp = luders_instrument(tuple(proj))
    if rotation:
        state = QuantumState.pure(np.sqrt([0.5, 0.3, 0.2]))
        u = random_unitary(3, np.random.default_rng(7))
    else:
        state, u = QuantumState(np.diag([0.5, 0.3, 0.2]).astype(complex)), np.eye(3)
    values = {"0": 1.0, "1": 1.0, "2": -1.0}
    model = QuantumSequenceModel(state, {"m": sharp}, Channel.unitary(u), values)
    b = behavior_from_model(model, [("m", "m"), ("0", "m")])
    table = np.zeros((3, 3))
    for k in range(3):
        notk = luders_instrument((np.eye(3) - proj[k], proj[k]))
        amb = QuantumSequenceModel(state, {"n": notk, "m": sharp}, Channel.unitary(u))
        dist = sequence_probability(amb, ("n", "m"))
        table[k] = [dist[("0", str(j))] for j in range(3)]
    return b, table


def test_eim_delta_vanishes_without_dynamics():
    b, table = _qutrit_eim(False)
    assert all(abs(v) <= 1e-12 for v in eim_delta(b, table).values())
    lhs, bound = eim_corrected_lgi(b, table)
    assert bound == pytest.approx(1.0)
    assert lhs <= bound + 1e-12


def test_eim_delta_matches_direct_definition():
    b, table = _qutrit_eim(True)
    delta = eim_delta(b, table)
    recon = np.array([eim_reconstruct(table[:, j]) for j in range(3)]).T
    p2 = b.marginal(("0", "m"), [1])
    for j in range(3):
        assert delta[str(j)] == pytest.approx(p2[(str(j),)] - recon[:, j].sum(), abs=1e-12)
    assert max(abs(v) for v in delta.values()) > 1e-3


# ---------------------------------------------------------------- expressions

def test_lgi_values_on_qubit_models():
    assert evaluate(lgi3(), behavior_from_model(rotating_qubit(), lgi3().sequences())) == pytest.approx(1.5, abs=1e-9)
    b4 = behavior_from_model(four_time_qubit(), lgi4().sequences())
    assert evaluate(lgi4(), b4) == pytest.approx(2 * math.sqrt(2), abs=1e-9)
    assert evaluate(LinearExpression(), b4) == 0.0


def test_lgi_n_metadata():
    for n in range(3, 9):
        e = lgi_n(n)
        assert e.classical_bound == n - 2
        assert e.quantum_bound == pytest.approx(n * math.cos(math.pi / n))
        assert len(e.sequences()) == n
    with pytest.raises(ValueError):
        lgi_n(2)


@pytest.mark.parametrize("n", range(3, 13))
def test_lgi_n_bound_matches_brute_force(n):
    best = max(sum(q[i] * q[i + 1] for i in range(n - 1)) - q[0] * q[-1]
               for q in itertools.product((1, -1), repeat=n))
    assert lgi_n(n).classical_bound == best
    if n <= 8:
        assert classical_bound(lgi_n(n)).value == pytest.approx(best, abs=1e-12)


def test_stationary_examples():
    assert stationary_value(math.cos(math.pi / 3), math.cos(2 * math.pi / 3)) == pytest.approx(-1.5)
    assert stationary_value(math.cos(math.pi), math.cos(2 * math.pi)) == pytest.approx(3.0)
    for g in np.linspace(0.0, 5.0, 51):
        assert stationary_value(math.exp(-g), math.exp(-2 * g)) >= -1 - 1e-15
    e = lgi_stationary()
    b = behavior_from_model(precessing_qubit(math.pi / 3), e.sequences())
    v = evaluate(e, b)
    assert v == pytest.approx(-1.5, abs=1e-12)
    assert e.is_violated(v)
    with pytest.raises(ValueError):
        lgi_stationary(0)


@settings(max_examples=100, deadline=None)
@given(SEEDS, st.floats(-3, 3), st.floats(-3, 3))
def test_evaluate_is_linear(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    b = behavior_from_model(precessing_qubit(rng.uniform(0, math.pi)), full_schedule(3))
    e1 = lgi3() + LinearExpression((probability(rng.normal(), "111", ["+1", "-1", "+1"]),), rng.normal())
    e2 = lgi_stationary() * rng.normal()
    lhs = evaluate(alpha * e1 + beta * e2, b)
    rhs = alpha * evaluate(e1, b) + beta * evaluate(e2, b)
    assert abs(lhs - rhs) <= 1e-12


def test_compile_agrees_with_evaluate(rng):
    b = behavior_from_model(precessing_qubit(0.7), lgi4().sequences())
    coef, const = lgi4().compile()
    assert const + sum(c * b.prob(s, q) for (s, q), c in coef.items()) == pytest.approx(evaluate(lgi4(), b), abs=1e-12)


def test_term_validation():
    with pytest.raises(ValueError):
        Term(1.0, "moment", ("1",))
    with pytest.raises(ValueError):
        Term(1.0, "correlator", ("1", "1"), positions=(0,))
    with pytest.raises(ValueError):
        LinearExpression((probability(1.0, "11", ["+1", "x"]),), scenario=LG2)
    with pytest.raises(ValueError):
        LinearExpression(sense="up")


def test_builtin_lookup():
    assert builtin("lgi3").name == "lgi3"
    assert builtin("lgi_6").classical_bound == 4
    assert builtin("one_tick_3").sequences() == [("0", "0", "0")]
    assert builtin("single_bit_witness") == single_bit_witness()
    with pytest.raises(ValueError):
        builtin("nope")
