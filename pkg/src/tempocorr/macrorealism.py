"""Membership in the macrorealist polytope, deterministic strategies and classical bounds."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import sparse

from ._solvers import LP_TOL, solve_lp
from .behavior import Behavior, Scenario, check_aot
from .errors import AotViolationError, SizeGuardError
from .expressions import LinearExpression, probability
from .quantum import labels

MAX_COLUMNS = 10**6
MAX_NODES = 10**6
MAX_STRATEGIES = 10**6

Variable = tuple[int, str]


def hidden_variables(scenario: Scenario, sequences: Sequence[Sequence[str]]) -> tuple[Variable, ...]:
    """One hidden value per (step, measured setting) used by ``sequences``, in canonical order."""
    order = {x: i for i, x in enumerate(scenario.settings)}
    found = {(k, x) for s in sequences for k, x in enumerate(labels(s)) if scenario.is_measured(x)}
    return tuple(sorted(found, key=lambda v: (v[0], order[v[1]])))


def _assignments(scenario: Scenario, variables: Sequence[Variable], limit: int) -> np.ndarray:
    sizes = [len(scenario.outcomes[x]) for _, x in variables]
    count = math.prod(sizes)
    if count > limit:
        raise SizeGuardError(f"{count} joint assignments exceed the limit {limit}")
    grids = np.indices(sizes).reshape(len(sizes), -1).T if sizes else np.zeros((1, 0), int)
    return grids


def _incidence(scenario: Scenario, variables, assignments: np.ndarray, entries) -> sparse.csr_matrix:
    """Rows: (s, q) entries. Columns: joint assignments. 1 where the assignment reproduces q on s."""
    where = {v: i for i, v in enumerate(variables)}
    rows, cols = [], []
    ncol = assignments.shape[0]
    for r, (s, q) in enumerate(entries):
        mask = np.ones(ncol, bool)
        for k, (x, o) in enumerate(zip(s, q)):
            if scenario.is_measured(x):
                mask &= assignments[:, where[(k, x)]] == scenario.outcomes[x].index(o)
        idx = np.flatnonzero(mask)
        rows.append(np.full(idx.size, r))
        cols.append(idx)
    rows = np.concatenate(rows) if rows else np.zeros(0, int)
    cols = np.concatenate(cols) if cols else np.zeros(0, int)
    return sparse.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(len(entries), ncol))


@dataclass(frozen=True)
class JointDistribution:
    """Distribution over joint assignments of every hidden (step, setting) value."""

    scenario: Scenario
    variables: tuple[Variable, ...]
    assignments: tuple[tuple[str, ...], ...]
    probabilities: np.ndarray

    def support(self, cutoff: float = 1e-12) -> dict[tuple[str, ...], float]:
        return {a: float(p) for a, p in zip(self.assignments, self.probabilities) if p > cutoff}

    def prob(self, settings, outcomes) -> float:
        s, q = labels(settings), labels(outcomes)
        where = {v: i for i, v in enumerate(self.variables)}
        total = 0.0
        for a, p in zip(self.assignments, self.probabilities):
            if all(not self.scenario.is_measured(x) or a[where[(k, x)]] == o for k, (x, o) in enumerate(zip(s, q))):
                total += p
        return float(total)

    def behavior(self, schedule: Sequence[Sequence[str]]) -> Behavior:
        table = {}
        for s in schedule:
            s = labels(s)
            table[s] = {q: self.prob(s, q) for q in self.scenario.outcome_words(s)}
        return Behavior(self.scenario, table, tol=LP_TOL)

    @classmethod
    def point(cls, scenario: Scenario, variables, assignment: Sequence[str]) -> "JointDistribution":
        return cls(scenario, tuple(variables), (labels(assignment),), np.ones(1))


@dataclass(frozen=True)
class Certificate:
    """Separating inequality sum coef * p(q|s) <= bound, normalized to max |coef| = 1."""

    coefficients: Mapping[tuple[tuple[str, ...], tuple[str, ...]], float]
    bound: float
    value: float

    @property
    def gap(self) -> float:
        """Amount by which the certified behavior exceeds the bound."""
        return self.value - self.bound

    def evaluate(self, b: Behavior) -> float:
        """Excess over the bound; nonpositive on every macrorealist behavior."""
        return sum(c * b.prob(s, q) for (s, q), c in self.coefficients.items()) - self.bound

    def as_expression(self, scenario: Scenario) -> LinearExpression:
        terms = tuple(probability(c, s, q) for (s, q), c in self.coefficients.items())
        return LinearExpression(terms, 0.0, scenario, "max", self.bound, None, "mr_certificate")


@dataclass(frozen=True)
class MacrorealismResult:
    accepted: bool
    residual: float
    joint: JointDistribution | None = None
    certificate: Certificate | None = None


def is_macrorealist(b: Behavior, tol: float = LP_TOL, max_columns: int = MAX_COLUMNS) -> MacrorealismResult:
    """Decide whether a joint distribution over hidden values reproduces every stored entry.

    The behavior is rounded to the LP tolerance first. Accepted results carry the joint;
    rejected ones carry a dual certificate with gap equal to the L1 distance to the polytope
    (before normalization).
    """
    report = check_aot(b, max(tol, 1e-9))
    if not report.ok:
        worst = max(report.violations, key=lambda d: d.deviation)
        raise AotViolationError(f"behavior violates arrow-of-time by {worst.deviation:.3e} between {worst.first} and {worst.second}")
    decimals = max(0, int(round(-math.log10(tol))))
    rb = b.rounded(decimals)
    sc = rb.scenario
    variables = hidden_variables(sc, rb.sequences)
    assignments = _assignments(sc, variables, max_columns)
    entries = rb.entries()
    A = _incidence(sc, variables, assignments, entries)
    target = rb.vector(entries)
    m, ncol = A.shape

    # primal: minimize t with |A p - target| <= t, sum p = 1
    ones_t = sparse.csr_matrix(-np.ones((m, 1)))
    A_ub = sparse.vstack([sparse.hstack([A, ones_t]), sparse.hstack([-A, ones_t])]).tocsr()
    b_ub = np.concatenate([target, -target])
    A_eq = sparse.csr_matrix(np.concatenate([np.ones(ncol), [0.0]])[None, :])
    c = np.zeros(ncol + 1)
    c[-1] = 1.0
    res = solve_lp(c, A_ub, b_ub, A_eq, [1.0])
    residual = float(res.x[-1])
    if residual <= tol:
        p = np.clip(res.x[:-1], 0.0, None)
        p /= p.sum()
        names = tuple(tuple(sc.outcomes[x][i] for (_, x), i in zip(variables, row)) for row in assignments)
        return MacrorealismResult(True, residual, JointDistribution(sc, variables, names, p))

    # dual: maximize y.target - c0 with A^T y <= c0 and |y| <= 1
    obj = np.concatenate([-target, [1.0]])
    A_d = sparse.hstack([A.T, sparse.csr_matrix(-np.ones((ncol, 1)))]).tocsr()
    bounds = [(-1.0, 1.0)] * m + [(None, None)]
    dres = solve_lp(obj, A_d, np.zeros(ncol), bounds=bounds)
    y, c0 = dres.x[:-1], dres.x[-1]
    scale = float(np.max(np.abs(y)))
    coeffs = {e: float(v / scale) for e, v in zip(entries, y) if abs(v) > 1e-12}
    value = float(y @ rb.vector(entries)) / scale
    return MacrorealismResult(False, residual, None, Certificate(coeffs, float(c0 / scale), value))


# ----------------------------------------------------------- deterministic strategies


@dataclass(frozen=True)
class DeterministicStrategy:
    """Outputs as a function of the settings so far; earlier outputs are implied by the same map."""

    scenario: Scenario
    responses: Mapping[tuple[str, ...], str]

    def outputs(self, settings) -> tuple[str, ...]:
        s = labels(settings)
        return tuple(self.responses[s[: k + 1]] for k in range(len(s)))

    def behavior(self, schedule: Sequence[Sequence[str]] | None = None) -> Behavior:
        seqs = self.scenario.sequences() if schedule is None else [labels(s) for s in schedule]
        return Behavior(self.scenario, {s: {self.outputs(s): 1.0} for s in seqs})

    def is_past_independent(self) -> bool:
        """Whether every measured output depends only on the step and its current setting."""
        seen: dict[tuple[int, str], str] = {}
        for prefix, out in self.responses.items():
            key = (len(prefix), prefix[-1])
            if seen.setdefault(key, out) != out:
                return False
        return True


def _nodes(scenario: Scenario, max_nodes: int) -> list[tuple[str, ...]]:
    total = sum(len(scenario.settings) ** k for k in range(1, scenario.length + 1))
    if total > max_nodes:
        raise SizeGuardError(f"transcript tree has {total} nodes, above the limit {max_nodes}")
    return [p for k in range(1, scenario.length + 1) for p in itertools.product(scenario.settings, repeat=k)]


def count_deterministic_strategies(scenario: Scenario, max_nodes: int = MAX_NODES) -> int:
    return math.prod(len(scenario.outcomes[p[-1]]) for p in _nodes(scenario, max_nodes))


def enumerate_deterministic_strategies(scenario: Scenario, max_nodes: int = MAX_NODES,
                                       max_strategies: int = MAX_STRATEGIES) -> list[DeterministicStrategy]:
    """Every deterministic strategy, ordered by node then declared outcome order."""
    nodes = _nodes(scenario, max_nodes)
    count = count_deterministic_strategies(scenario, max_nodes)
    if count > max_strategies:
        raise SizeGuardError(f"{count} deterministic strategies exceed the limit {max_strategies}")
    choices = [scenario.outcomes[p[-1]] for p in nodes]
    return [DeterministicStrategy(scenario, dict(zip(nodes, pick))) for pick in itertools.product(*choices)]


# ------------------------------------------------------------------ classical bounds


@dataclass(frozen=True)
class ClassicalBound:
    value: float
    model_class: str
    argmax: JointDistribution | DeterministicStrategy


def _pick(values, sense):
    return int(np.argmax(values)) if sense == "max" else int(np.argmin(values))


def classical_bound(expr: LinearExpression, model_class: str = "macrorealist", scenario: Scenario | None = None,
                    max_columns: int = MAX_COLUMNS, max_nodes: int = MAX_NODES) -> ClassicalBound:
    """Optimum of ``expr`` (in its ``sense``) over deterministic joints or deterministic strategies."""
    sc = scenario or expr.scenario
    if sc is None:
        raise ValueError("classical_bound needs a scenario")
    coef, const = expr.compile(sc)
    if model_class in ("macrorealist", "mr"):
        variables = hidden_variables(sc, expr.sequences())
        assignments = _assignments(sc, variables, max_columns)
        entries = list(coef)
        A = _incidence(sc, variables, assignments, entries)
        values = A.T @ np.array([coef[e] for e in entries]) + const
        i = _pick(values, expr.sense)
        names = tuple(sc.outcomes[x][j] for (_, x), j in zip(variables, assignments[i]))
        return ClassicalBound(float(values[i]), "macrorealist", JointDistribution.point(sc, variables, names))
    if model_class == "aot":
        _nodes(sc, max_nodes)
        value, responses = _tree_optimum(sc, coef, expr.sense)
        for p in _nodes(sc, max_nodes):
            responses.setdefault(p, sc.outcomes[p[-1]][0])
        return ClassicalBound(value + const, "aot", DeterministicStrategy(sc, responses))
    raise ValueError(f"unknown model class {model_class!r}")


def _tree_optimum(sc: Scenario, coef: Mapping, sense: str) -> tuple[float, dict]:
    """Optimize over response functions node by node; sibling subtrees are independent."""
    prefixes = {s[:k] for s, _ in coef for k in range(len(s) + 1)}
    better = max if sense == "max" else min

    def solve(p: tuple, q: tuple) -> tuple[float, dict]:
        if len(p) == sc.length:
            return coef.get((p, q), 0.0), {}
        total, chosen = 0.0, {}
        for x in sc.settings:
            child = p + (x,)
            if child not in prefixes:
                continue
            options = [(solve(child, q + (o,)), o) for o in sc.outcomes[x]]
            (val, sub), o = better(options, key=lambda t: t[0][0])
            total += val
            chosen[child] = o
            chosen.update(sub)
        return total, chosen

    return solve((), ())
