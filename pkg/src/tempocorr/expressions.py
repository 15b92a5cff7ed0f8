"""Linear functionals of behaviors and the built-in Leggett-Garg family."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from .behavior import Behavior, MissingDataError, Scenario
from .quantum import IDLE, labels

KINDS = ("probability", "correlator", "expectation")


@dataclass(frozen=True)
class Term:
    """One coefficient times a probability, a two-point correlator or a one-point mean.

    ``settings=None`` refers to the single sequence stored in the evaluated behavior.
    """

    coefficient: float
    kind: str
    settings: tuple[str, ...] | None
    outcomes: tuple[str, ...] | None = None
    positions: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"term kind must be one of {KINDS}, got {self.kind!r}")
        object.__setattr__(self, "coefficient", float(self.coefficient))
        if self.settings is not None:
            object.__setattr__(self, "settings", labels(self.settings))
        if self.outcomes is not None:
            object.__setattr__(self, "outcomes", labels(self.outcomes))
        object.__setattr__(self, "positions", tuple(int(p) for p in self.positions))
        need = {"probability": 0, "correlator": 2, "expectation": 1}[self.kind]
        if len(self.positions) != need:
            raise ValueError(f"{self.kind} term needs {need} positions")
        if self.kind == "probability" and self.outcomes is None:
            raise ValueError("probability term needs an outcome word")

    def scaled(self, factor: float) -> "Term":
        return replace(self, coefficient=self.coefficient * factor)


@dataclass(frozen=True)
class LinearExpression:
    """constant + sum of terms, with optional bounds in the direction of ``sense``.

    For ``sense="max"`` the bounds are upper limits; for ``"min"`` lower limits.
    """

    terms: tuple[Term, ...] = ()
    constant: float = 0.0
    scenario: Scenario | None = None
    sense: str = "max"
    classical_bound: float | None = None
    quantum_bound: float | None = None
    name: str = ""
    metadata: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.sense not in ("max", "min"):
            raise ValueError("sense must be 'max' or 'min'")
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.scenario is not None:
            for t in self.terms:
                _check_term(t, self.scenario)

    def _combine(self, other: "LinearExpression", sign: float) -> "LinearExpression":
        terms = self.terms + tuple(t.scaled(sign) for t in other.terms)
        return LinearExpression(terms, self.constant + sign * other.constant, self.scenario or other.scenario, self.sense)

    def __add__(self, other: "LinearExpression") -> "LinearExpression":
        return self._combine(other, 1.0)

    def __sub__(self, other: "LinearExpression") -> "LinearExpression":
        return self._combine(other, -1.0)

    def __mul__(self, factor: float) -> "LinearExpression":
        return LinearExpression(tuple(t.scaled(factor) for t in self.terms), self.constant * factor, self.scenario, self.sense)

    __rmul__ = __mul__

    def __neg__(self) -> "LinearExpression":
        return self * -1.0

    def sequences(self) -> list[tuple[str, ...]]:
        seen = []
        for t in self.terms:
            if t.settings is not None and t.settings not in seen:
                seen.append(t.settings)
        return seen

    def max_length(self) -> int:
        """Number of measured steps in the longest referenced sequence."""
        idle = self.scenario.idle if self.scenario is not None else IDLE
        return max((sum(x != idle for x in s) for s in self.sequences()), default=0)

    def compile(self, scenario: Scenario | None = None) -> tuple[dict[tuple, float], float]:
        """Coefficients on individual (settings, outcomes) entries plus the constant."""
        sc = scenario or self.scenario
        if sc is None:
            raise ValueError("compiling needs a scenario")
        coef: dict[tuple, float] = {}
        for t in self.terms:
            if t.settings is None:
                raise ValueError("terms without explicit settings cannot be compiled")
            _check_term(t, sc)
            if t.kind == "probability":
                words = [(t.outcomes, 1.0)]
            else:
                words = []
                for q in sc.outcome_words(t.settings):
                    w = 1.0
                    for p in t.positions:
                        w *= sc.value(q[p])
                    words.append((q, w))
            for q, w in words:
                key = (t.settings, q)
                coef[key] = coef.get(key, 0.0) + t.coefficient * w
        return {k: v for k, v in coef.items() if v != 0.0}, self.constant

    def is_violated(self, value: float, tol: float = 1e-9) -> bool:
        if self.classical_bound is None:
            raise ValueError("expression has no classical bound")
        if self.sense == "max":
            return value > self.classical_bound + tol
        return value < self.classical_bound - tol


def _check_term(t: Term, sc: Scenario) -> None:
    if t.settings is None:
        return
    if len(t.settings) != sc.length:
        raise ValueError(f"term settings {t.settings} do not match scenario length {sc.length}")
    for x in t.settings:
        if x not in sc.outcomes:
            raise ValueError(f"term uses unknown setting {x!r}")
    for p in t.positions:
        if not 0 <= p < sc.length:
            raise ValueError(f"term position {p} out of range")
    if t.outcomes is not None:
        if len(t.outcomes) != sc.length:
            raise ValueError(f"outcome word {t.outcomes} has the wrong length")
        for x, q in zip(t.settings, t.outcomes):
            if q not in sc.outcomes[x]:
                raise ValueError(f"outcome {q!r} is not available for setting {x!r}")


def _settings_for(t: Term, b: Behavior) -> tuple[str, ...]:
    if t.settings is not None:
        return t.settings
    if len(b) != 1:
        raise ValueError("term without settings needs a single-sequence behavior")
    return b.sequences[0]


def evaluate(expr: LinearExpression, b: Behavior) -> float:
    """Value of ``expr`` on ``b``; missing entries raise :class:`MissingDataError`."""
    total = expr.constant
    for t in expr.terms:
        s = _settings_for(t, b)
        if s not in b:
            what = f"outcomes {t.outcomes}" if t.outcomes is not None else f"{t.kind} at {t.positions}"
            raise MissingDataError(f"expression needs settings {s}, {what}")
        if t.kind == "probability":
            total += t.coefficient * b.prob(s, t.outcomes)
        elif t.kind == "correlator":
            total += t.coefficient * b.correlator(s, *t.positions)
        else:
            total += t.coefficient * b.expectation(s, t.positions[0])
    return total


# ------------------------------------------------------------------- constructors


def word(x) -> tuple[str, ...]:
    """A string is read as one label per character; other sequences label by label."""
    return tuple(x) if isinstance(x, str) else labels(x)


def probability(coefficient: float, settings, outcomes) -> Term:
    return Term(coefficient, "probability", word(settings), word(outcomes))


def correlator(coefficient: float, settings, i: int, j: int) -> Term:
    return Term(coefficient, "correlator", word(settings), positions=(i, j))


def expectation(coefficient: float, settings, i: int) -> Term:
    return Term(coefficient, "expectation", None if settings is None else word(settings), positions=(i,))


def pair_settings(n: int, i: int, j: int, measure: str = "1", idle: str = IDLE) -> tuple[str, ...]:
    """Length-``n`` sequence measuring only at steps ``i`` and ``j``."""
    return tuple(measure if k in (i, j) else idle for k in range(n))


def lgi_n(n: int) -> LinearExpression:
    """Adjacent correlators minus the end-to-end one over ``n`` times, each pair measured alone.

    Classical bound ``n - 2``, quantum bound ``n cos(pi/n)``.
    """
    if n < 3:
        raise ValueError("lgi_n needs at least three times")
    sc = Scenario.leggett_garg(n)
    terms = [correlator(1.0, pair_settings(n, i, i + 1), i, i + 1) for i in range(n - 1)]
    terms.append(correlator(-1.0, pair_settings(n, 0, n - 1), 0, n - 1))
    return LinearExpression(tuple(terms), 0.0, sc, "max", float(n - 2), n * math.cos(math.pi / n), f"lgi_{n}")


def lgi3() -> LinearExpression:
    """C01 + C12 - C02 <= 1."""
    return replace(lgi_n(3), name="lgi3")


def lgi4() -> LinearExpression:
    """C01 + C12 + C23 - C03 <= 2."""
    return replace(lgi_n(4), name="lgi4")


def lgi_stationary(sign: int = -1) -> LinearExpression:
    """C(2t) + 2 sign C(t) >= -1 for a stationary process sampled at 0, t and 2t."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    sc = Scenario.leggett_garg(3)
    terms = (correlator(1.0, pair_settings(3, 0, 2), 0, 2), correlator(2.0 * sign, pair_settings(3, 0, 1), 0, 1))
    return LinearExpression(terms, 0.0, sc, "min", -1.0, None, "lgi_stationary" + ("+" if sign > 0 else "-"))


def stationary_value(c_t: float, c_2t: float, sign: int = -1) -> float:
    """C(2t) + 2 sign C(t) from two correlator values."""
    return c_2t + 2 * sign * c_t


def single_bit_witness() -> LinearExpression:
    """p(01|00) + p(10|10) + p(10|11) for two inputs and two outputs per step.

    Two-state classical machines reach 9/4; qubits go higher.
    """
    sc = Scenario(2, ("0", "1"), {"0": ("0", "1"), "1": ("0", "1")}, idle=None)
    terms = (probability(1.0, "00", "01"), probability(1.0, "10", "10"), probability(1.0, "11", "10"))
    return LinearExpression(terms, 0.0, sc, "max", 2.25, None, "single_bit_witness")


def one_tick(n: int) -> LinearExpression:
    """Probability that a single-input source emits ``n - 1`` zeros followed by a one."""
    if n < 1:
        raise ValueError("n must be positive")
    sc = Scenario(n, ("0",), {"0": ("0", "1")}, idle=None)
    word = "0" * (n - 1) + "1"
    return LinearExpression((probability(1.0, "0" * n, word),), 0.0, sc, "max", None, None, f"one_tick_{n}")


def deterministic_lgi_max(n: int) -> float:
    """Brute-force maximum of the ``n``-time chain over all +-1 assignments."""
    best = -math.inf
    for q in itertools.product((1, -1), repeat=n):
        v = sum(q[i] * q[i + 1] for i in range(n - 1)) - q[0] * q[-1]
        best = max(best, v)
    return float(best)


BUILTINS = {
    "lgi3": lgi3,
    "lgi4": lgi4,
    "lgi_stationary": lgi_stationary,
    "single_bit_witness": single_bit_witness,
}


def builtin(name: str) -> LinearExpression:
    """Look up a built-in by name; ``lgi_<N>`` and ``one_tick_<n>`` are parameterized."""
    if name in BUILTINS:
        return BUILTINS[name]()
    for prefix, fn in (("lgi_", lgi_n), ("one_tick_", one_tick)):
        if name.startswith(prefix) and name[len(prefix):].isdigit():
            return fn(int(name[len(prefix):]))
    raise ValueError(f"unknown expression {name!r}")


def from_terms(scenario: Scenario, raw: Sequence[Mapping], constant: float = 0.0, **kw) -> LinearExpression:
    """Build an expression from dictionaries with keys coefficient, kind, settings, outcomes, positions."""
    terms = tuple(
        Term(float(r["coefficient"]), r.get("kind", "probability"), r.get("settings"), r.get("outcomes"), tuple(r.get("positions", ())))
        for r in raw
    )
    return LinearExpression(terms, constant, scenario, **kw)
