from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tempocorr.behavior import Scenario
from tempocorr.errors import SizeGuardError
from tempocorr.expressions import LinearExpression, correlator, evaluate, lgi3, lgi4, lgi_n, pair_settings
from tempocorr.models import optimal_chain_qubit
from tempocorr.momentmatrix import (all_pairs_indexed, build_moment_matrix, canonical, expand_sequence,
                                    free_variable_count, index_words, max_expression_projective, relabel_settings,
                                    to_sdpa)
from tempocorr.quantum import (Channel, QuantumSequenceModel, QuantumState, behavior_from_model, luders_instrument,
                               random_density_matrix, random_projective_povm, random_unitary)

P = (0, "1", "+1")
M = (0, "1", "-1")
SEEDS = st.integers(0, 2**32 - 1)
MULTI = Scenario(3, ("0", "a", "b"), {"0": ("0",), "a": ("+", "-"), "b": ("+", "-")})


def test_canonical_rules():
    assert canonical([P, P]) == (P,)
    assert canonical([P, M]) is None
    later = (1, "1", "+1")
    assert canonical([later, P]) == (P, later)
    assert canonical([P, later, P]) == (P, later, P)
    assert canonical([]) == ()


symbols = st.tuples(st.integers(0, 2), st.sampled_from(["a", "b"]), st.sampled_from(["+", "-"]))


@settings(max_examples=200, deadline=None)
@given(st.lists(symbols, max_size=8))
def test_canonical_is_idempotent_and_reversal_invariant(word):
    c = canonical(word)
    if c is None:
        assert canonical(word[::-1]) is None
        return
    assert canonical(c) == c
    assert canonical(word[::-1]) == c


def test_pairwise_sequences_indexed_at_level_two():
    assert all_pairs_indexed(Scenario.leggett_garg(3), 2)
    assert all_pairs_indexed(MULTI, 2)
    mm = build_moment_matrix(MULTI, 2)
    for i, j in itertools.combinations(range(3), 2):
        for x, y in itertools.product("ab", repeat=2):
            s = tuple(x if k == i else y if k == j else "0" for k in range(3))
            assert len(MULTI.outcome_words(s)) == 4
            for q in MULTI.outcome_words(s):
                assert mm.probability_form(s, q)


def test_expand_sequence_uses_completeness():
    sc = Scenario.leggett_garg(2)
    assert expand_sequence(sc, ("1", "1"), ("+1", "+1")) == {(P, (1, "1", "+1")): 1.0}
    exp = expand_sequence(sc, ("1", "0"), ("-1", "0"))
    assert exp == {(): 1.0, (P,): -1.0}


def test_index_words_time_ordered():
    words = index_words(Scenario.leggett_garg(3), 3)
    assert words[0] == ()
    assert all(all(a[0] < b[0] for a, b in zip(w, w[1:])) for w in words)
    assert len(words) == 8


def test_size_guard():
    with pytest.raises(SizeGuardError):
        build_moment_matrix(Scenario.leggett_garg(8), 8, max_index=50)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_chain_bounds(n):
    res = max_expression_projective(lgi_n(n))
    assert res.value == pytest.approx(n * math.cos(math.pi / n), abs=1e-6)
    assert res.min_eigenvalue >= -1e-6
    model_value = evaluate(lgi_n(n), behavior_from_model(optimal_chain_qubit(n), lgi_n(n).sequences()))
    assert model_value <= res.value + 1e-6


def test_raising_level_keeps_chain_bound():
    assert max_expression_projective(lgi3(), level=3).value == pytest.approx(1.5, abs=1e-6)
    assert max_expression_projective(lgi4(), level=4).value == pytest.approx(2 * math.sqrt(2), abs=1e-6)
    with pytest.raises(ValueError):
        max_expression_projective(lgi3(), level=1)


def test_minimization_sense():
    expr = LinearExpression((correlator(1.0, pair_settings(3, 0, 2), 0, 2),), 0.0, Scenario.leggett_garg(3), "min")
    assert max_expression_projective(expr).value == pytest.approx(-1.0, abs=1e-6)


def _random_projective_model(rng, dim):
    instr = luders_instrument(random_projective_povm(dim, 2, rng))
    instr = type(instr)(("+1", "-1"), instr.kraus)
    return QuantumSequenceModel(QuantumState(random_density_matrix(dim, rng)), {"1": instr},
                                Channel.unitary(random_unitary(dim, rng)), {"+1": 1.0, "-1": -1.0})


def test_bound_dominates_random_models():
    rng = np.random.default_rng(99)
    bounds = {3: max_expression_projective(lgi3()).value, 4: max_expression_projective(lgi4()).value}
    for trial in range(100):
        n = 3 if trial % 2 else 4
        expr = lgi3() if n == 3 else lgi4()
        model = _random_projective_model(rng, int(rng.integers(2, 5)))
        assert evaluate(expr, behavior_from_model(model, expr.sequences())) <= bounds[n] + 1e-6


def test_random_expressions_dominate_models():
    rng = np.random.default_rng(5)
    sc = Scenario.leggett_garg(3)
    pairs = [(0, 1), (1, 2), (0, 2)]
    for _ in range(8):
        coeffs = rng.normal(size=3)
        expr = LinearExpression(tuple(correlator(c, pair_settings(3, i, j), i, j) for c, (i, j) in zip(coeffs, pairs)),
                                0.0, sc)
        bound = max_expression_projective(expr).value
        for _ in range(10):
            model = _random_projective_model(rng, 2)
            assert evaluate(expr, behavior_from_model(model, expr.sequences())) <= bound + 1e-6


@settings(max_examples=20, deadline=None)
@given(st.permutations(["a", "b", "c"]), st.integers(1, 3))
def test_free_variables_invariant_under_relabeling(perm, level):
    sc = Scenario(3, ("0", "a", "b", "c"), {"0": ("0",), "a": ("+", "-"), "b": ("+", "-"), "c": ("u", "v", "w")})
    mapping = dict(zip(["a", "b", "c"], perm))
    assert free_variable_count(relabel_settings(sc, mapping), level) == free_variable_count(sc, level)


def test_sdpa_export_layout():
    mm = build_moment_matrix(lgi3().scenario, 2)
    text = to_sdpa(lgi3(), mm)
    lines = text.splitlines()
    assert lines[0].startswith('"') and "np." not in lines[0]
    assert int(lines[1]) == mm.n_free
    assert lines[2] == "1" and int(lines[3]) == mm.size
    assert len(lines[4].split()) == mm.n_free
    for row in lines[5:]:
        mat, block, i, j, _ = row.split()
        assert 0 <= int(mat) <= mm.n_free and block == "1"
        assert 1 <= int(i) <= int(j) <= mm.size


def test_sdpa_export_solves_to_the_same_bound():
    import cvxpy as cp

    mm = build_moment_matrix(lgi3().scenario, 2)
    lines = to_sdpa(lgi3(), mm).splitlines()
    const = float(lines[0].split("objective constant ")[1].split(";")[0])
    m, size = int(lines[1]), int(lines[3])
    c = np.array([float(v) for v in lines[4].split()])
    F = np.zeros((m + 1, size, size))
    for row in lines[5:]:
        k, _, i, j, v = row.split()
        F[int(k), int(i) - 1, int(j) - 1] = F[int(k), int(j) - 1, int(i) - 1] = float(v)
    x = cp.Variable(m)
    Z = sum(x[k] * F[k + 1] for k in range(m)) - F[0]
    prob = cp.Problem(cp.Minimize(c @ x), [(Z + Z.T) / 2 >> 0])
    prob.solve(solver=cp.CLARABEL)
    assert -prob.value + const == pytest.approx(1.5, abs=1e-6)
