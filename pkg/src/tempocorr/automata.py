"""Finite-state machines as sources of temporal correlations.

Covers classical and quantum machines, deterministic complexity, classical
optimization of sequence probabilities and linear expressions, and tick-time
statistics of machines used as clocks.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from ._solvers import threads
from .behavior import Behavior, Scenario
from .errors import SizeGuardError
from .expressions import LinearExpression, one_tick, word
from .quantum import Instrument, QuantumState, labels

MACHINE_TOL = 1e-12
MAX_DETERMINISTIC = 10**7
ONE_OVER_E = 1 / math.e


# ---------------------------------------------------------------------- machines


@dataclass(frozen=True)
class ClassicalMachine:
    """``transition[s, r, q, r2]`` = p(output q, next state r2 | state r, input s)."""

    initial: np.ndarray
    transition: np.ndarray
    inputs: tuple[str, ...] = ("0",)
    outputs: tuple[str, ...] = ("0", "1")

    def __post_init__(self):
        p0 = np.array(self.initial, dtype=float)
        T = np.array(self.transition, dtype=float)
        object.__setattr__(self, "inputs", labels(self.inputs))
        object.__setattr__(self, "outputs", labels(self.outputs))
        if T.ndim == 3:
            T = T[None]
        if T.ndim != 4 or T.shape[1] != T.shape[3] or T.shape[1] != p0.shape[0]:
            raise ValueError(f"transition shape {T.shape} does not match {p0.shape[0]} states")
        if T.shape[0] != len(self.inputs) or T.shape[2] != len(self.outputs):
            raise ValueError("transition tensor does not match the input/output alphabets")
        if p0.min() < -MACHINE_TOL or abs(p0.sum() - 1) > MACHINE_TOL:
            raise ValueError("initial distribution must be nonnegative and sum to 1")
        if T.min() < -MACHINE_TOL:
            raise ValueError("transition probabilities must be nonnegative")
        sums = T.sum(axis=(2, 3))
        if np.max(np.abs(sums - 1)) > MACHINE_TOL:
            raise ValueError("each (state, input) row of the transition tensor must sum to 1")
        p0.setflags(write=False)
        T.setflags(write=False)
        object.__setattr__(self, "initial", p0)
        object.__setattr__(self, "transition", T)

    @property
    def d(self) -> int:
        return self.initial.shape[0]

    def step_matrix(self, s: str, q: str | None) -> np.ndarray:
        """State-to-state weights for input ``s`` and output ``q`` (None sums over outputs)."""
        T = self.transition[self.inputs.index(s)]
        return T.sum(axis=1) if q is None else T[:, self.outputs.index(q), :]

    @classmethod
    def deterministic(cls, initial: int, update: Mapping, d: int, inputs=("0",), outputs=("0", "1")) -> "ClassicalMachine":
        """From a map (state, input) -> (output, next state)."""
        inputs, outputs = labels(inputs), labels(outputs)
        T = np.zeros((len(inputs), d, len(outputs), d))
        for (r, s), (q, r2) in update.items():
            T[inputs.index(str(s)), r, outputs.index(str(q)), r2] = 1.0
        return cls(np.eye(d)[initial], T, inputs, outputs)

    @classmethod
    def iid(cls, probs: Mapping[str, Sequence[float]] | Sequence[float], inputs=("0",), outputs=("0", "1")) -> "ClassicalMachine":
        """One-state machine emitting outputs with input-dependent probabilities."""
        inputs = labels(inputs)
        if not isinstance(probs, Mapping):
            probs = {inputs[0]: probs}
        T = np.array([[np.asarray(probs[s], float)[:, None]] for s in inputs])
        return cls(np.ones(1), T, inputs, outputs)

    @classmethod
    def random(cls, d: int, rng: np.random.Generator, inputs=("0",), outputs=("0", "1")) -> "ClassicalMachine":
        inputs, outputs = labels(inputs), labels(outputs)
        p0 = rng.dirichlet(np.ones(d))
        T = rng.dirichlet(np.ones(len(outputs) * d), size=(len(inputs), d)).reshape(len(inputs), d, len(outputs), d)
        return cls(p0, T, inputs, outputs)

    def to_quantum(self) -> "QuantumMachine":
        """Diagonal embedding: Kraus sqrt(T) |r2><r| for every transition."""
        d = self.d
        instruments = {}
        for i, s in enumerate(self.inputs):
            kraus = {}
            for j, q in enumerate(self.outputs):
                ops = []
                for r, r2 in itertools.product(range(d), repeat=2):
                    w = self.transition[i, r, j, r2]
                    if w > 0:
                        k = np.zeros((d, d), complex)
                        k[r2, r] = math.sqrt(w)
                        ops.append(k)
                kraus[q] = ops or [np.zeros((d, d), complex)]
            instruments[s] = Instrument(tuple(self.outputs), tuple(tuple(kraus[q]) for q in self.outputs))
        return QuantumMachine(QuantumState(np.diag(self.initial).astype(complex)), instruments)


@dataclass(frozen=True)
class QuantumMachine:
    """Initial state and one instrument per input, applied at every step."""

    initial: QuantumState
    instruments: Mapping[str, Instrument]

    def __post_init__(self):
        if not self.instruments:
            raise ValueError("quantum machine needs at least one input")
        outs = {ins.outcomes for ins in self.instruments.values()}
        if len(outs) != 1:
            raise ValueError("every input must share the same output alphabet")
        for s, ins in self.instruments.items():
            if ins.dim != self.initial.dim:
                raise ValueError(f"instrument for input {s!r} acts on the wrong dimension")
        object.__setattr__(self, "instruments", {str(k): v for k, v in self.instruments.items()})

    @property
    def d(self) -> int:
        return self.initial.dim

    @property
    def inputs(self) -> tuple[str, ...]:
        return tuple(self.instruments)

    @property
    def outputs(self) -> tuple[str, ...]:
        return next(iter(self.instruments.values())).outcomes


Machine = ClassicalMachine | QuantumMachine


def _check_labels(m: Machine, s, q) -> None:
    if len(s) != len(q):
        raise ValueError(f"{len(s)} inputs but {len(q)} outputs")
    for x in s:
        if x not in m.inputs:
            raise ValueError(f"unknown input {x!r}")
    for y in q:
        if y is not None and y not in m.outputs:
            raise ValueError(f"unknown output {y!r}")


def machine_probability(m: Machine, inputs, outputs) -> float:
    """p(outputs | inputs) by a forward pass; a None output is summed over."""
    s = word(inputs)
    q = tuple(None if y is None else str(y) for y in (tuple(outputs) if isinstance(outputs, str) else outputs))
    _check_labels(m, s, q)
    if isinstance(m, ClassicalMachine):
        v = m.initial
        for x, y in zip(s, q):
            v = v @ m.step_matrix(x, y)
        return float(v.sum())
    rho = m.initial.matrix
    for x, y in zip(s, q):
        ins = m.instruments[x]
        if y is None:
            rho = sum(ins.apply(o, rho) for o in ins.outcomes)
        else:
            rho = ins.apply(y, rho)
    return float(np.trace(rho).real)


def machine_scenario(m: Machine, length: int, idle: str | None = None) -> Scenario:
    outcomes = {x: m.outputs for x in m.inputs}
    if idle is not None:
        outcomes[idle] = ("0",)
    return Scenario(length, m.inputs, outcomes, idle=idle)


def machine_behavior(m: Machine, length: int, schedule=None, idle: str | None = None) -> Behavior:
    """Behavior of the machine over ``schedule`` (default: every input word).

    With ``idle`` set, outputs at steps receiving that input are discarded and
    reported as the single outcome ``"0"``.
    """
    sc = machine_scenario(m, length, idle)
    seqs = sc.sequences() if schedule is None else [word(s) for s in schedule]
    table = {}
    for s in seqs:
        dist = {}
        for q in sc.outcome_words(s):
            qq = tuple(None if x == idle else y for x, y in zip(s, q))
            dist[q] = machine_probability(m, s, qq)
        table[s] = dist
    return Behavior(sc, table)


# ------------------------------------------------------- deterministic complexity


@dataclass(frozen=True)
class DeterministicComplexity:
    value: int
    machine: ClassicalMachine
    transient: int
    period: int
    certified: bool


def eventually_periodic_form(q: Sequence[str]) -> tuple[int, int]:
    """Smallest m + p such that q[t] == q[t + p] for every t >= m (ties: smaller m)."""
    n = len(q)
    best = (n, 0, n)
    for total in range(1, n + 1):
        for m in range(total):
            p = total - m
            if all(q[t] == q[t + p] for t in range(m, n - p)):
                return m, p
    return best[1], best[2]


def deterministic_complexity(q, certify: bool = True, certify_limit: int = 6) -> DeterministicComplexity:
    """Fewest states of a deterministic machine emitting ``q`` with certainty.

    Such a machine runs through a transient chain into a cycle, so the count is the
    shortest transient-plus-period description. The returned machine is that chain.
    For values up to ``certify_limit`` minimality is also checked exhaustively.
    """
    q = word(q)
    if not q:
        raise ValueError("sequence must be nonempty")
    m, p = eventually_periodic_form(q)
    d = m + p
    outputs = tuple(sorted(set(q)))
    if len(outputs) == 1:
        outputs = outputs + (("1",) if outputs[0] != "1" else ("0",))
        outputs = tuple(sorted(outputs))
    update = {}
    for r in range(d):
        nxt = r + 1 if r + 1 < d else m
        update[(r, "0")] = (q[r], nxt)
    machine = ClassicalMachine.deterministic(0, update, d, ("0",), outputs)
    certified = False
    if certify and d <= certify_limit:
        if d > 1 and exists_deterministic_machine(q, d - 1):
            raise AssertionError(f"chain machine for {q} is not minimal")
        certified = True
    return DeterministicComplexity(d, machine, m, p, certified)


def exists_deterministic_machine(q, d: int) -> bool:
    """Exhaustive search: does some deterministic d-state machine emit ``q`` with certainty?

    States are named in order of first visit, so each trajectory is explored once.
    """
    q = word(q)
    n = len(q)
    if d < 1:
        return False

    def search(t: int, r: int, used: int, succ: dict, emit: dict) -> bool:
        if emit.setdefault(r, q[t]) != q[t]:
            return False
        if t == n - 1:
            return True
        if r in succ:
            return search(t + 1, succ[r], used, succ, emit)
        for r2 in range(min(used + 1, d)):
            s2, e2 = dict(succ), dict(emit)
            s2[r] = r2
            if search(t + 1, r2, max(used, r2 + 1), s2, e2):
                return True
        return False

    return search(0, 0, 1, {}, {})


def smallest_certifying_dimension(q) -> int:
    """Least d for which a d-state machine reaches probability 1, by exhaustive search."""
    d = 1
    while not exists_deterministic_machine(q, d):
        d += 1
    return d


# ----------------------------------------------------------- classical optimization


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 50
    max_iter: int = 10_000
    tol: float = 1e-9
    seed: int = 0
    init_scale: float = 2.0


@dataclass(frozen=True)
class OptimizationResult:
    value: float
    machine: Machine | None
    method: str
    certified: bool
    restart_values: tuple[float, ...] = ()
    seed: int | None = None
    extra: Mapping = field(default_factory=dict)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class _ClassicalObjective:
    """Value and gradient of a compiled expression over softmax-parameterized machines."""

    def __init__(self, coef: Mapping, const: float, d: int, inputs, outputs, log: bool):
        self.d, self.inputs, self.outputs = d, tuple(inputs), tuple(outputs)
        self.terms = [(np.array([self.inputs.index(x) for x in s]), np.array([self.outputs.index(y) for y in q]), c)
                      for (s, q), c in coef.items()]
        self.const = const
        self.log = log
        S, Q = len(self.inputs), len(self.outputs)
        self.shape = (S, d, Q * d)
        self.size = d + S * d * Q * d

    def unpack(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d = self.d
        S, _, QD = self.shape
        p0 = _softmax(x[:d])
        T = _softmax(x[d:].reshape(S, d, QD)).reshape(S, d, len(self.outputs), d)
        return p0, T

    def machine(self, x: np.ndarray) -> ClassicalMachine:
        p0, T = self.unpack(x)
        return ClassicalMachine(p0, T, self.inputs, self.outputs)

    def value_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        p0, T = self.unpack(x)
        gp0 = np.zeros_like(p0)
        gT = np.zeros_like(T)
        total = self.const
        for si, qi, c in self.terms:
            mats = T[si, :, qi, :]
            alphas = [p0]
            for M in mats:
                alphas.append(alphas[-1] @ M)
            total += c * alphas[-1].sum()
            beta = np.ones(self.d)
            for t in range(len(mats) - 1, -1, -1):
                gT[si[t], :, qi[t], :] += c * np.outer(alphas[t], beta)
                beta = mats[t] @ beta
            gp0 += c * beta
        if self.log:
            scale = 1.0 / max(total, 1e-300)
            value = math.log(max(total, 1e-300))
            gp0 *= scale
            gT *= scale
        else:
            value = total
        S, d, QD = self.shape
        gz0 = p0 * (gp0 - p0 @ gp0)
        P = T.reshape(S, d, QD)
        G = gT.reshape(S, d, QD)
        gz = P * (G - (P * G).sum(axis=-1, keepdims=True))
        return value, np.concatenate([gz0, gz.ravel()])

    def value(self, x: np.ndarray) -> float:
        p0, T = self.unpack(x)
        total = self.const
        for si, qi, c in self.terms:
            v = p0
            for M in T[si, :, qi, :]:
                v = v @ M
            total += c * v.sum()
        return total


def _spawn(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _run_restarts(job, rngs) -> list:
    workers = min(threads(), len(rngs))
    if workers <= 1:
        return [job(r) for r in rngs]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(job, rngs))


def _machine_scenario_of(expr: LinearExpression) -> tuple[tuple[str, ...], tuple[str, ...]]:
    sc = expr.scenario
    if sc is None:
        raise ValueError("expression needs a scenario")
    outs = {sc.outcomes[x] for x in sc.settings}
    if len(outs) != 1:
        raise ValueError("machine optimization needs one output alphabet shared by every input")
    return sc.settings, outs.pop()


def max_expression_classical(expr: LinearExpression, d: int, config: OptimizerConfig = OptimizerConfig(),
                             log: bool | None = None) -> OptimizationResult:
    """Multistart L-BFGS over d-state machines; the result is a lower bound on the optimum."""
    if d < 1:
        raise ValueError("d must be at least 1")
    inputs, outputs = _machine_scenario_of(expr)
    coef, const = expr.compile()
    sign = 1.0 if expr.sense == "max" else -1.0
    if log is None:
        log = len(coef) == 1 and const == 0 and next(iter(coef.values())) > 0 and sign > 0
    obj = _ClassicalObjective({k: sign * v for k, v in coef.items()}, sign * const, d, inputs, outputs, log)

    def negated(x):
        v, g = obj.value_grad(x)
        return -v, -g

    def job(rng):
        x0 = rng.normal(scale=config.init_scale, size=obj.size)
        res = minimize(negated, x0, jac=True, method="L-BFGS-B",
                       options={"maxiter": config.max_iter, "ftol": config.tol * 1e-6, "gtol": 1e-12})
        return obj.value(res.x), res.x

    results = _run_restarts(job, _spawn(config.seed, config.restarts))
    values = [v for v, _ in results]
    best = int(np.argmax(values))
    value = sign * values[best]
    return OptimizationResult(value, obj.machine(results[best][1]), "multistart-lbfgs", False,
                              tuple(sign * v for v in values), config.seed)


def max_sequence_probability_classical(q, d: int, config: OptimizerConfig = OptimizerConfig()) -> OptimizationResult:
    """Largest probability a d-state input-free machine assigns to ``q`` (heuristic lower bound)."""
    q = word(q)
    sc = Scenario(len(q), ("0",), {"0": ("0", "1")}, idle=None)
    from .expressions import probability

    expr = LinearExpression((probability(1.0, "0" * len(q), q),), 0.0, sc, "max", name="sequence")
    if exists_deterministic_machine(q, d):
        dc = deterministic_complexity(q, certify=False)
        return OptimizationResult(1.0, dc.machine, "deterministic", True, (), config.seed)
    return max_expression_classical(expr, d, config, log=True)


def deterministic_machines(d: int, inputs, outputs, limit: int = MAX_DETERMINISTIC):
    """Yield every deterministic d-state machine as (initial, update map)."""
    inputs, outputs = labels(inputs), labels(outputs)
    rows = [(r, s) for r in range(d) for s in inputs]
    choices = list(itertools.product(outputs, range(d)))
    count = d * len(choices) ** len(rows)
    if count > limit:
        raise SizeGuardError(f"{count} deterministic machines exceed the limit {limit}")
    for r0 in range(d):
        for pick in itertools.product(choices, repeat=len(rows)):
            yield r0, dict(zip(rows, pick))


def max_expression_deterministic(expr: LinearExpression, d: int, limit: int = MAX_DETERMINISTIC) -> OptimizationResult:
    """Exhaustive optimum over deterministic d-state machines (certified)."""
    inputs, outputs = _machine_scenario_of(expr)
    coef, const = expr.compile()
    sign = 1.0 if expr.sense == "max" else -1.0
    best, arg = -math.inf, None
    for r0, update in deterministic_machines(d, inputs, outputs, limit):
        total = const
        for (s, q), c in coef.items():
            r, ok = r0, True
            for x, y in zip(s, q):
                out, r = update[(r, x)]
                if out != y:
                    ok = False
                    break
            if ok:
                total += c
        if sign * total > best:
            best, arg = sign * total, (r0, update)
    machine = ClassicalMachine.deterministic(arg[0], arg[1], d, inputs, outputs)
    return OptimizationResult(sign * best, machine, "exhaustive-deterministic", True)


# ------------------------------------------------------------------ grid oracle


def _simplex_grid(k: int, parts: int) -> np.ndarray:
    """All points of the (k-1)-simplex with coordinates in multiples of 1/parts."""
    pts = [c for c in itertools.product(range(parts + 1), repeat=k - 1) if sum(c) <= parts]
    arr = np.array(pts, float)
    return np.column_stack([arr, parts - arr.sum(axis=1)]) / parts


def grid_max_sequence_probability(q, d: int, parts: int = 12, refinements: int = 25, shrink: float = 0.6) -> OptimizationResult:
    """Grid search with local refinement over d-state machines for d in {1, 2}.

    The probability is linear in the initial distribution, so only vertices are tried.
    Each refinement samples a local grid around the incumbent with shrinking radius.
    """
    q = word(q)
    if d not in (1, 2):
        raise ValueError("grid oracle supports d = 1 or 2")
    idx = np.array([int(y) for y in q])
    k = 2 * d
    rows = _simplex_grid(k, parts if d == 2 else parts**2)

    def evaluate(R: np.ndarray) -> np.ndarray:
        # R: (batch, d, k) rows of the transition per state, output-major
        T = R.reshape(R.shape[0], d, 2, d)
        best = np.zeros(R.shape[0])
        for r0 in range(d):
            v = np.zeros((R.shape[0], d))
            v[:, r0] = 1.0
            for y in idx:
                v = np.einsum("br,brs->bs", v, T[:, :, y, :])
            best = np.maximum(best, v.sum(axis=1))
        return best

    if d == 1:
        cand = rows[:, None, :]
    else:
        i, j = np.meshgrid(np.arange(len(rows)), np.arange(len(rows)), indexing="ij")
        cand = np.stack([rows[i.ravel()], rows[j.ravel()]], axis=1)
    vals = evaluate(cand)
    b = int(np.argmax(vals))
    incumbent, value = cand[b], float(vals[b])
    radius = 1.0 / (parts if d == 2 else parts**2)
    rng = np.random.default_rng(0)
    for _ in range(refinements):
        steps = rng.uniform(-radius, radius, size=(4096, d, k))
        trial = np.clip(incumbent[None] + steps, 0.0, None)
        trial /= trial.sum(axis=2, keepdims=True)
        tv = evaluate(trial)
        tb = int(np.argmax(tv))
        if tv[tb] > value:
            incumbent, value = trial[tb], float(tv[tb])
        else:
            radius *= shrink
    T = incumbent.reshape(d, 2, d)
    starts = []
    for s0 in range(d):
        v = np.eye(d)[s0]
        for y in idx:
            v = v @ T[:, y, :]
        starts.append(v.sum())
    machine = ClassicalMachine(np.eye(d)[int(np.argmax(starts))], T[None], ("0",), ("0", "1"))
    return OptimizationResult(value, machine, "grid-refinement", True, extra={"parts": parts, "refinements": refinements})


def one_tick_probability(m: ClassicalMachine, n: int) -> float:
    """p(0...01) = p0 T0^(n-1) T1 1 via matrix powers."""
    T0 = m.step_matrix(m.inputs[0], "0")
    T1 = m.step_matrix(m.inputs[0], "1")
    return float(m.initial @ np.linalg.matrix_power(T0, n - 1) @ T1 @ np.ones(m.d))


def one_tick_expression(n: int) -> LinearExpression:
    return one_tick(n)


# ------------------------------------------------------------------------ clocks


@dataclass(frozen=True)
class TickDistribution:
    """p[t-1] = probability that the first tick happens at step t; ``tail`` is the mass beyond."""

    p: np.ndarray
    tail: float

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.min(initial=0.0) < -MACHINE_TOL:
            raise ValueError("tick probabilities must be nonnegative")
        if p.sum() + self.tail > 1 + 1e-9 or self.tail < -MACHINE_TOL:
            raise ValueError("tick distribution mass exceeds 1")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "tail", float(max(self.tail, 0.0)))

    @property
    def times(self) -> np.ndarray:
        return np.arange(1, self.p.size + 1)

    @property
    def mean(self) -> float:
        return float(self.times @ self.p)

    @property
    def variance(self) -> float:
        mu = self.mean
        return float(((self.times - mu) ** 2) @ self.p)

    @classmethod
    def geometric(cls, rate: float, t_max: int) -> "TickDistribution":
        t = np.arange(1, t_max + 1)
        p = (1 - rate) ** (t - 1) * rate
        return cls(p, (1 - rate) ** t_max)


def machine_tick_distribution(m: Machine, t_max: int) -> TickDistribution:
    """First-tick distribution of an input-free machine with outputs (no-tick, tick)."""
    if len(m.inputs) != 1 or len(m.outputs) != 2:
        raise ValueError("clock machines need one input and two outputs (no-tick, tick)")
    x = m.inputs[0]
    quiet, tick = m.outputs
    p = np.zeros(t_max)
    if isinstance(m, ClassicalMachine):
        T0, T1 = m.step_matrix(x, quiet), m.step_matrix(x, tick)
        v = m.initial
        for t in range(t_max):
            p[t] = (v @ T1).sum()
            v = v @ T0
        tail = float(v.sum())
    else:
        ins = m.instruments[x]
        rho = m.initial.matrix
        for t in range(t_max):
            p[t] = np.trace(ins.apply(tick, rho)).real
            rho = ins.apply(quiet, rho)
        tail = float(np.trace(rho).real)
    return TickDistribution(np.clip(p, 0.0, None), tail)


@dataclass(frozen=True)
class ClockAccuracy:
    accuracy: float
    mean: float
    variance: float
    tail: float


@dataclass(frozen=True)
class DeterministicClock:
    """Zero-variance tick time; the accuracy ratio is undefined."""

    period: float
    tail: float


def clock_accuracy(p: TickDistribution, max_tail: float = 1e-9) -> ClockAccuracy | DeterministicClock:
    """R = mean^2 / variance of the first-tick time."""
    if p.tail > max_tail:
        raise ValueError(f"tail mass {p.tail:.3e} exceeds {max_tail:.1e}; increase t_max")
    mu, var = p.mean, p.variance
    if var <= 1e-12 * max(mu * mu, 1.0):
        return DeterministicClock(mu, p.tail)
    return ClockAccuracy(mu * mu / var, mu, var, p.tail)
