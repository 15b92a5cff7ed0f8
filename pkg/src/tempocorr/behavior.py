"""Probability tables p(q|s) over sequential scenarios, with causality and disturbance diagnostics."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .quantum import ATOL, IDLE, labels

Settings = tuple[str, ...]
Outcomes = tuple[str, ...]


class MissingDataError(LookupError):
    """A required (settings, outcomes) entry is absent from a behavior."""


@dataclass(frozen=True)
class Scenario:
    """Sequence length, setting alphabet and the outcome alphabet of every setting.

    ``idle`` names the no-measurement setting (single outcome ``"0"``); use
    ``idle=None`` for scenarios where every setting is an input to a box.
    """

    length: int
    settings: tuple[str, ...]
    outcomes: Mapping[str, tuple[str, ...]]
    outcome_values: Mapping[str, float] | None = None
    idle: str | None = IDLE

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("scenario length must be nonnegative")
        settings = labels(self.settings)
        outcomes = {str(s): labels(qs) for s, qs in self.outcomes.items()}
        missing = [s for s in settings if s not in outcomes]
        if missing:
            raise ValueError(f"no outcome alphabet for settings {missing}")
        outcomes = {s: outcomes[s] for s in settings}
        if self.idle is not None and self.idle in outcomes and len(outcomes[self.idle]) != 1:
            raise ValueError(f"idle setting {self.idle!r} must have exactly one outcome")
        object.__setattr__(self, "settings", settings)
        object.__setattr__(self, "outcomes", MappingProxyType(outcomes))
        if self.outcome_values is not None:
            vals = {str(k): float(v) for k, v in self.outcome_values.items()}
            object.__setattr__(self, "outcome_values", MappingProxyType(vals))

    @classmethod
    def leggett_garg(cls, n: int, outcomes: Sequence[str] = ("+1", "-1"), values: Sequence[float] = (1.0, -1.0)) -> "Scenario":
        """Measure-or-skip scenario: setting ``"1"`` measures, ``"0"`` skips."""
        return cls(n, (IDLE, "1"), {IDLE: (IDLE,), "1": labels(outcomes)}, dict(zip(labels(outcomes), values)))

    def is_measured(self, setting: str) -> bool:
        return setting != self.idle

    def sequences(self) -> list[Settings]:
        return list(itertools.product(self.settings, repeat=self.length))

    def outcome_words(self, settings: Sequence) -> list[Outcomes]:
        return list(itertools.product(*(self.outcomes[s] for s in labels(settings))))

    def value(self, outcome: str) -> float:
        if self.outcome_values is None:
            raise ValueError("scenario declares no outcome values; correlators are undefined")
        try:
            return self.outcome_values[outcome]
        except KeyError:
            raise ValueError(f"no numeric value declared for outcome {outcome!r}") from None

    def with_values(self, values: Mapping[str, float] | None) -> "Scenario":
        return Scenario(self.length, self.settings, dict(self.outcomes), values, self.idle)


class Behavior:
    """Table of conditional distributions p(q|s), keyed by setting sequence."""

    def __init__(self, scenario: Scenario, table: Mapping[Sequence, Mapping[Sequence, float]], tol: float = ATOL):
        self.scenario = scenario
        clean: dict[Settings, Mapping[Outcomes, float]] = {}
        for s, dist in table.items():
            s = labels(s)
            if len(s) != scenario.length:
                raise ValueError(f"sequence {s} does not have length {scenario.length}")
            for x in s:
                if x not in scenario.outcomes:
                    raise ValueError(f"unknown setting {x!r} in {s}")
            allowed = set(scenario.outcome_words(s))
            row = dict.fromkeys(scenario.outcome_words(s), 0.0)
            for q, p in dist.items():
                q = labels(q)
                if q not in allowed:
                    raise ValueError(f"outcome word {q} is not valid for settings {s}")
                row[q] = float(p)
            vals = np.fromiter(row.values(), float)
            if vals.min(initial=0.0) < -tol:
                raise ValueError(f"negative probability {vals.min():.3e} for settings {s}")
            if abs(vals.sum() - 1) > tol:
                raise ValueError(f"distribution for settings {s} sums to {vals.sum()!r}")
            clean[s] = MappingProxyType(row)
        self._table = MappingProxyType(clean)

    @property
    def table(self) -> Mapping[Settings, Mapping[Outcomes, float]]:
        return self._table

    @property
    def sequences(self) -> tuple[Settings, ...]:
        return tuple(self._table)

    def __contains__(self, settings) -> bool:
        return labels(settings) in self._table

    def __len__(self) -> int:
        return len(self._table)

    def __repr__(self) -> str:
        return f"Behavior(length={self.scenario.length}, sequences={len(self)})"

    def distribution(self, settings: Sequence) -> Mapping[Outcomes, float]:
        s = labels(settings)
        try:
            return self._table[s]
        except KeyError:
            raise MissingDataError(f"no data for settings {s}") from None

    def prob(self, settings: Sequence, outcomes: Sequence) -> float:
        s, q = labels(settings), labels(outcomes)
        dist = self.distribution(s)
        if q not in dist:
            raise MissingDataError(f"no entry for settings {s}, outcomes {q}")
        return dist[q]

    def marginal(self, settings: Sequence, positions: Sequence[int]) -> dict[Outcomes, float]:
        out: dict[Outcomes, float] = {}
        for q, p in self.distribution(settings).items():
            key = tuple(q[i] for i in positions)
            out[key] = out.get(key, 0.0) + p
        return out

    def expectation(self, settings: Sequence, position: int) -> float:
        v = self.scenario.value
        return sum(v(q[position]) * p for q, p in self.distribution(settings).items())

    def correlator(self, settings: Sequence, i: int, j: int) -> float:
        v = self.scenario.value
        return sum(v(q[i]) * v(q[j]) * p for q, p in self.distribution(settings).items())

    def vector(self, keys: Sequence[tuple[Settings, Outcomes]]) -> np.ndarray:
        return np.array([self.prob(s, q) for s, q in keys])

    def entries(self) -> list[tuple[Settings, Outcomes]]:
        return [(s, q) for s, dist in self._table.items() for q in dist]

    def mix(self, other: "Behavior", weight: float) -> "Behavior":
        """Convex combination ``weight * self + (1 - weight) * other`` on the shared sequences."""
        if set(self.sequences) != set(other.sequences):
            raise ValueError("behaviors must share their setting sequences to be mixed")
        table = {s: {q: weight * p + (1 - weight) * other.prob(s, q) for q, p in dist.items()}
                 for s, dist in self._table.items()}
        return Behavior(self.scenario, table)

    def restrict(self, sequences: Iterable[Sequence]) -> "Behavior":
        return Behavior(self.scenario, {labels(s): self.distribution(s) for s in sequences})

    def rounded(self, decimals: int) -> "Behavior":
        table = {s: {q: round(p, decimals) for q, p in dist.items()} for s, dist in self._table.items()}
        return Behavior(self.scenario, table, tol=max(ATOL, len(self.entries()) * 10.0 ** -decimals))


# --------------------------------------------------------------------------- AoT


@dataclass(frozen=True)
class AotDeviation:
    first: Settings
    second: Settings
    prefix: int
    deviation: float


@dataclass(frozen=True)
class AotReport:
    deviations: list[AotDeviation]
    untestable: list[tuple[Settings, str]]
    tol: float

    @property
    def violations(self) -> list[AotDeviation]:
        return [d for d in self.deviations if d.deviation > self.tol]

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def max_deviation(self) -> float:
        return max((d.deviation for d in self.deviations), default=0.0)


def check_aot(b: Behavior, tol: float = ATOL) -> AotReport:
    """Compare prefix marginals of every pair of sequences that share a nonempty prefix.

    Later settings must not change the statistics of earlier outcomes. Agreement on
    the full common prefix implies agreement on every shorter one, so each pair is
    tested once. ``untestable`` lists (prefix, next setting) extensions with no data.
    """
    seqs = b.sequences
    devs = []
    for a, c in itertools.combinations(seqs, 2):
        k = 0
        while k < len(a) and a[k] == c[k]:
            k += 1
        if k == 0:
            continue
        pos = list(range(k))
        ma, mc = b.marginal(a, pos), b.marginal(c, pos)
        dev = max(abs(ma.get(q, 0.0) - mc.get(q, 0.0)) for q in set(ma) | set(mc))
        devs.append(AotDeviation(a, c, k, dev))
    present = set(seqs)
    prefixes = {s[:k] for s in present for k in range(len(s) + 1)}
    untestable = []
    for s in seqs:
        for k in range(1, len(s)):
            for alt in b.scenario.settings:
                if alt != s[k] and s[:k] + (alt,) not in prefixes:
                    item = (s[:k], alt)
                    if item not in untestable:
                        untestable.append(item)
    return AotReport(devs, untestable, tol)


# -------------------------------------------------------------------------- NSIT


@dataclass(frozen=True)
class NsitDeviation:
    sequence: Settings
    position: int
    deviation: float
    per_outcome: Mapping[Outcomes, float] = field(default_factory=dict)


@dataclass(frozen=True)
class NsitReport:
    deviations: list[NsitDeviation]
    untestable: list[tuple[Settings, int]]
    tol: float

    @property
    def violations(self) -> list[NsitDeviation]:
        return [d for d in self.deviations if d.deviation > self.tol]

    @property
    def ok(self) -> bool:
        return not self.violations

    def by_position(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for d in self.deviations:
            out[d.position] = max(out.get(d.position, 0.0), d.deviation)
        return out


def _counterpart(s: Settings, i: int, idle: str) -> Settings:
    return s[:i] + (idle,) + s[i + 1:]


def nsit_deviation(b: Behavior, settings: Sequence, position: int) -> NsitDeviation:
    """Signed deviations p(q'|s with s_i idle) - sum_{q_i} p(q|s) for every remaining outcome word."""
    s = labels(settings)
    idle = b.scenario.idle
    if idle is None:
        raise ValueError("scenario has no idle setting; NSIT is undefined")
    rest = [k for k in range(len(s)) if k != position]
    unmeasured = b.marginal(_counterpart(s, position, idle), rest)
    measured = b.marginal(s, rest)
    per = {q: unmeasured.get(q, 0.0) - measured.get(q, 0.0) for q in set(unmeasured) | set(measured)}
    return NsitDeviation(s, position, max((abs(v) for v in per.values()), default=0.0), per)


def check_nsit(b: Behavior, tol: float = ATOL) -> NsitReport:
    """No-signalling-in-time: discarding a measurement must leave later statistics unchanged.

    Tested at every measured position that is followed by at least one measurement
    and whose idle counterpart sequence is present.
    """
    idle = b.scenario.idle
    if idle is None:
        return NsitReport([], [], tol)
    devs, untestable = [], []
    present = set(b.sequences)
    for s in b.sequences:
        for i, x in enumerate(s):
            if x == idle or all(y == idle for y in s[i + 1:]):
                continue
            if _counterpart(s, i, idle) in present:
                devs.append(nsit_deviation(b, s, i))
            else:
                untestable.append((s, i))
    return NsitReport(devs, untestable, tol)


# ----------------------------------------------------------------------- witnesses


def _resolve_pair(b: Behavior, sequence, position, target) -> tuple[Settings, int, int]:
    idle = b.scenario.idle
    if idle is None:
        raise ValueError("scenario has no idle setting")
    present = set(b.sequences)
    n = b.scenario.length
    tgt = n - 1 if target is None else target % n
    cands = []
    for s in ([labels(sequence)] if sequence is not None else b.sequences):
        if s[tgt] == idle:
            continue
        for i in ([position] if position is not None else range(tgt)):
            if s[i] != idle and _counterpart(s, i, idle) in present:
                cands.append((s, i))
    if sequence is not None and not cands:
        raise MissingDataError(f"no idle counterpart of {labels(sequence)} at position {position}")
    if len(cands) != 1:
        if not cands:
            raise MissingDataError("no measured/unmeasured sequence pair present")
        raise ValueError(f"ambiguous witness data {cands}; pass sequence= and position=")
    return cands[0][0], cands[0][1], tgt


def quantum_witness(b: Behavior, outcome, position: int | None = None, sequence=None, target: int | None = None) -> float:
    """W = |p(q*) - sum_{q_i} p(q_i, q*)| for outcome ``q*`` at ``target`` (default: last step)."""
    s, i, t = _resolve_pair(b, sequence, position, target)
    q = str(outcome)
    unmeasured = b.marginal(_counterpart(s, i, b.scenario.idle), [t])
    measured = b.marginal(s, [t])
    if (q,) not in unmeasured and (q,) not in measured:
        raise MissingDataError(f"outcome {q!r} never occurs at position {t}")
    return abs(unmeasured.get((q,), 0.0) - measured.get((q,), 0.0))


@dataclass(frozen=True)
class RobensWitness:
    value: float
    mr_bound: float = 0.0

    @property
    def violates(self) -> bool:
        return self.value > self.mr_bound + ATOL


def robens_witness(b: Behavior, position: int | None = None, sequence=None, target: int | None = None) -> RobensWitness:
    """W = sum q_t p(q_t, q_i) - sum q_t p(q_t): mean of the final outcome with minus without
    the intermediate measurement. Macrorealist models satisfy W <= 0."""
    s, i, t = _resolve_pair(b, sequence, position, target)
    with_ = b.expectation(s, t)
    without = b.expectation(_counterpart(s, i, b.scenario.idle), t)
    return RobensWitness(with_ - without)


def invasivity(b_control: Behavior, sequence=None, first: int = 0, second: int = 1) -> dict[str, float]:
    """I(q) = |1 - p(q|q)|, with p(q|q) the probability a repeated measurement returns ``q`` again."""
    if sequence is None:
        if len(b_control) != 1:
            raise ValueError("control behavior holds several sequences; pass sequence=")
        sequence = b_control.sequences[0]
    s = labels(sequence)
    joint = b_control.marginal(s, [first, second])
    out = {}
    for q in b_control.scenario.outcomes[s[first]]:
        p1 = sum(p for (a, _), p in joint.items() if a == q)
        if p1 <= ATOL:
            raise MissingDataError(f"outcome {q!r} never occurs at position {first}; p({q}|{q}) undefined")
        out[q] = abs(1 - joint.get((q, q), 0.0) / p1)
    return out


def adroitness_deviation(b_with: Behavior, b_without: Behavior, target) -> float:
    """epsilon = |target(with intermediate op) - target(without)|."""
    from .expressions import evaluate

    return abs(evaluate(target, b_with) - evaluate(target, b_without))


def adroit_violation(lg_value: float, epsilons: Iterable[float]) -> bool:
    """Whether |L| exceeds the summed adroitness deviations, so the violation is not clumsiness."""
    return abs(lg_value) >= sum(epsilons)


# ---------------------------------------------------------------- ambiguous measurements


def eim_reconstruct(p_ambiguous: Sequence[float]) -> np.ndarray:
    """p(q) = (pA(not q') + pA(not q'') - pA(not q)) / 2 for three outcomes.

    The result is a signed quasiprobability and is never clipped.
    """
    pa = np.asarray(p_ambiguous, dtype=float)
    if pa.shape[0] != 3:
        raise ValueError("the ambiguous-measurement identity needs exactly three outcomes")
    return (pa.sum(axis=0) - 2 * pa) / 2


def is_quasiprobability(p: Sequence[float], tol: float = ATOL) -> bool:
    """True when a reconstructed distribution has negative entries."""
    return bool(np.min(p) < -tol)


def eim_joint(p_ambiguous_joint) -> np.ndarray:
    """Reconstruct p_A(q1, q2) from the table pA(not q1, q2) (rows: not q1)."""
    return eim_reconstruct(np.asarray(p_ambiguous_joint, dtype=float))


def eim_delta(b: Behavior, p_ambiguous_joint, sequence=None, position: int = 1) -> dict[str, float]:
    """delta_A(q2) = p(q2) - sum_{q1} p_A(q1, q2).

    ``b`` supplies p(q2) from the sequence without the first measurement
    (default: idle then measure); columns of ``p_ambiguous_joint`` follow the
    outcome order of that step.
    """
    idle = b.scenario.idle
    if sequence is None:
        sequence = next((s for s in b.sequences if s[0] == idle and s[position] != idle), None)
        if sequence is None:
            raise MissingDataError("behavior lacks the unmeasured-first sequence")
    s = labels(sequence)
    p2 = b.marginal(s, [position])
    names = b.scenario.outcomes[s[position]]
    recon = eim_joint(p_ambiguous_joint)
    if recon.shape[1] != len(names):
        raise ValueError("ambiguous table columns must match the second-step outcomes")
    return {q: p2.get((q,), 0.0) - float(recon[:, k].sum()) for k, q in enumerate(names)}


def eim_corrected_lgi(b: Behavior, p_ambiguous_joint, measured=None, unmeasured=None) -> tuple[float, float]:
    """(<Q1> + <Q1Q2> - <Q2>, 1 + sum_q2 |delta_A(q2)|) from the unambiguous two-step behavior."""
    idle = b.scenario.idle
    measured = labels(measured) if measured is not None else next(s for s in b.sequences if idle not in s)
    unmeasured = labels(unmeasured) if unmeasured is not None else _counterpart(measured, 0, idle)
    lhs = b.expectation(measured, 0) + b.correlator(measured, 0, 1) - b.expectation(unmeasured, 1)
    delta = eim_delta(b, p_ambiguous_joint, unmeasured)
    return lhs, 1 + sum(abs(v) for v in delta.values())
