"""Moment-matrix relaxation for sequential projective measurements.

Symbols are projectors ``(step, setting, outcome)``. Index words are time-ordered
products of at most ``L`` symbols drawn from a reduced alphabet in which the last
outcome of every setting is eliminated through completeness. Entry ``(u, v)`` is the
expectation of ``u`` followed by ``v`` reversed, so diagonal entries are sequence
probabilities. A real symmetric matrix suffices because all constraints and the
objective are invariant under complex conjugation.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import sparse

from ._solvers import solve_sdp
from .behavior import Scenario
from .errors import NumericalError, SizeGuardError
from .expressions import LinearExpression
from .quantum import labels

Symbol = tuple[int, str, str]
Word = tuple[Symbol, ...]
ZERO = None
MAX_INDEX = 2000


def canonical(word: Sequence[Symbol]) -> Word | None:
    """Collapse repeated projectors, annihilate orthogonal neighbours, pick the smaller of word and reverse.

    Returns None for the zero word.
    """
    out: list[Symbol] = []
    for a in word:
        if out and out[-1][:2] == a[:2]:
            if out[-1][2] == a[2]:
                continue
            return ZERO
        out.append(tuple(a))
    w = tuple(out)
    return min(w, w[::-1])


def reduced_alphabet(scenario: Scenario) -> list[Symbol]:
    """Every (step, measured setting, outcome) except the last outcome of each setting."""
    out = []
    for k in range(scenario.length):
        for x in scenario.settings:
            if scenario.is_measured(x):
                out.extend((k, x, q) for q in scenario.outcomes[x][:-1])
    return out


def index_words(scenario: Scenario, level: int) -> list[Word]:
    """Empty word plus strictly time-ordered words of length <= ``level``."""
    alpha = reduced_alphabet(scenario)
    words: list[Word] = [()]
    frontier: list[Word] = [()]
    for _ in range(level):
        nxt = []
        for w in frontier:
            last = w[-1][0] if w else -1
            nxt.extend(w + (a,) for a in alpha if a[0] > last)
        words.extend(nxt)
        frontier = nxt
    return words


def expand_sequence(scenario: Scenario, settings, outcomes) -> dict[Word, float]:
    """Write the projector product for (s, q) as a combination of reduced time-ordered words."""
    terms: dict[Word, float] = {(): 1.0}
    for k, (x, q) in enumerate(zip(labels(settings), labels(outcomes))):
        if not scenario.is_measured(x):
            continue
        alts = scenario.outcomes[x]
        if q != alts[-1]:
            factor = [((k, x, q), 1.0)]
        else:
            factor = [(None, 1.0)] + [((k, x, o), -1.0) for o in alts[:-1]]
        new: dict[Word, float] = {}
        for w, c in terms.items():
            for sym, f in factor:
                key = w if sym is None else w + (sym,)
                new[key] = new.get(key, 0.0) + c * f
        terms = {w: c for w, c in new.items() if c != 0.0}
    return terms


@dataclass
class MomentMatrix:
    """Index words, the canonical class of every entry and the class of each free variable."""

    scenario: Scenario
    level: int
    words: list[Word]
    classes: np.ndarray  # entry -> variable index, -1 for zero, 0 for the identity
    variables: list[Word]

    @property
    def size(self) -> int:
        return len(self.words)

    @property
    def n_free(self) -> int:
        return len(self.variables) - 1

    def entry_word(self, u: Word, v: Word) -> Word | None:
        return canonical(u + v[::-1])

    def position(self, word: Sequence[Symbol]) -> int:
        return self.words.index(tuple(word))

    def probability_form(self, settings, outcomes) -> dict[int, float]:
        """Probability of (s, q) as coefficients on variables (index 0 is the constant 1)."""
        lookup = {w: i for i, w in enumerate(self.words)}
        exp = expand_sequence(self.scenario, settings, outcomes)
        out: dict[int, float] = {}
        for u, cu in exp.items():
            for v, cv in exp.items():
                if u not in lookup or v not in lookup:
                    raise ValueError(f"level {self.level} too small for sequence {labels(settings)}")
                var = self.classes[lookup[u], lookup[v]]
                if var >= 0:
                    out[var] = out.get(var, 0.0) + cu * cv
        return out

    def basis(self) -> sparse.csr_matrix:
        """Sparse (size^2 x n_variables) map from the variable vector to the flattened matrix."""
        d = self.size
        flat = self.classes.ravel()
        keep = np.flatnonzero(flat >= 0)
        return sparse.csr_matrix((np.ones(keep.size), (keep, flat[keep])), shape=(d * d, len(self.variables)))


def build_moment_matrix(scenario: Scenario, level: int, max_index: int = MAX_INDEX) -> MomentMatrix:
    """Index set and equality classes for the level-``level`` relaxation."""
    if level < 1:
        raise ValueError("moment-matrix level must be at least 1")
    words = index_words(scenario, level)
    if len(words) > max_index:
        raise SizeGuardError(f"moment matrix of size {len(words)} exceeds the limit {max_index}")
    var_of: dict[Word, int] = {(): 0}
    variables: list[Word] = [()]
    d = len(words)
    classes = np.empty((d, d), dtype=int)
    for i, u in enumerate(words):
        for j in range(i, d):
            w = canonical(u + words[j][::-1])
            if w is ZERO:
                idx = -1
            else:
                idx = var_of.get(w)
                if idx is None:
                    idx = var_of[w] = len(variables)
                    variables.append(w)
            classes[i, j] = classes[j, i] = idx
    return MomentMatrix(scenario, level, words, classes, variables)


@dataclass(frozen=True)
class ProjectiveBound:
    value: float
    matrix: np.ndarray
    moments: MomentMatrix
    min_eigenvalue: float
    runtime: float


def objective_vector(expr: LinearExpression, mm: MomentMatrix) -> tuple[np.ndarray, float]:
    """Linear objective on the variable vector plus the constant term."""
    coef, const = expr.compile(mm.scenario)
    c = np.zeros(len(mm.variables))
    for (s, q), w in coef.items():
        for var, f in mm.probability_form(s, q).items():
            c[var] += w * f
    return c, const + c[0]


def max_expression_projective(expr: LinearExpression, scenario: Scenario | None = None, level: int | None = None) -> ProjectiveBound:
    """Upper bound (lower bound for ``sense='min'``) over projective sequential models of any dimension."""
    import cvxpy as cp

    sc = scenario or expr.scenario
    if sc is None:
        raise ValueError("max_expression_projective needs a scenario")
    level = expr.max_length() if level is None else level
    if level < expr.max_length():
        raise ValueError(f"level {level} is below the longest referenced sequence ({expr.max_length()})")
    start = time.perf_counter()
    mm = build_moment_matrix(sc, level)
    c, const = objective_vector(expr, mm)
    d = mm.size
    x = cp.Variable(len(mm.variables) - 1)
    B = mm.basis()
    vec = B[:, 1:] @ x + np.asarray(B[:, 0].todense()).ravel()
    X = cp.reshape(vec, (d, d), order="C")
    cons = [(X + X.T) / 2 >> 0]
    obj = c[1:] @ x
    prob = cp.Problem(cp.Maximize(obj) if expr.sense == "max" else cp.Minimize(obj), cons)
    value = solve_sdp(prob) + const
    xv = np.concatenate([[1.0], x.value])
    mat = (B @ xv).reshape(d, d)
    eig = float(np.linalg.eigvalsh(mat).min())
    if eig < -1e-6:
        raise NumericalError(f"returned moment matrix has eigenvalue {eig:.2e}")
    return ProjectiveBound(float(value), mat, mm, eig, time.perf_counter() - start)


def to_sdpa(expr: LinearExpression, mm: MomentMatrix) -> str:
    """SDPA sparse text: minimize c.x subject to sum_i x_i F_i - F_0 >= 0.

    Lines: comment, variable count, block count, block sizes, c, then
    ``matrix block row col value`` entries of the upper triangles (1-based).
    Matrix 0 is F_0. The sign of c is flipped for maximization problems.
    """
    c, const = objective_vector(expr, mm)
    sign = -1.0 if expr.sense == "max" else 1.0
    n = len(mm.variables) - 1
    lines = [f'"moment matrix level {mm.level}, size {mm.size}; objective constant {float(const)!r}; '
             f'{"maximize" if sign < 0 else "minimize"} original"', str(n), "1", str(mm.size),
             " ".join(repr(float(sign * v)) for v in c[1:])]
    d = mm.size
    rows = []
    for i in range(d):
        for j in range(i, d):
            var = mm.classes[i, j]
            if var == 0:
                rows.append((0, i, j, -1.0))
            elif var > 0:
                rows.append((int(var), i, j, 1.0))
    rows.sort()
    lines.extend(f"{m} 1 {i + 1} {j + 1} {v!r}" for m, i, j, v in rows)
    return "\n".join(lines) + "\n"


def free_variable_count(scenario: Scenario, level: int) -> int:
    return build_moment_matrix(scenario, level).n_free


def relabel_settings(scenario: Scenario, mapping: Mapping[str, str]) -> Scenario:
    """Scenario with settings renamed; used to check label symmetry."""
    settings = tuple(mapping.get(x, x) for x in scenario.settings)
    outcomes = {mapping.get(x, x): v for x, v in scenario.outcomes.items()}
    idle = mapping.get(scenario.idle, scenario.idle) if scenario.idle is not None else None
    return Scenario(scenario.length, settings, outcomes, scenario.outcome_values, idle)


def all_pairs_indexed(scenario: Scenario, level: int = 2) -> bool:
    """Whether every two-step reduced word appears in the index set."""
    words = set(index_words(scenario, level))
    alpha = reduced_alphabet(scenario)
    return all((a, b) in words for a, b in itertools.combinations(alpha, 2) if a[0] < b[0])
