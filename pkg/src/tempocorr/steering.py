"""Temporal steering: hidden-state models for assemblages and dual witnesses when none exists."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ._solvers import SDP_TOL, solve_sdp
from .quantum import ATOL, Instrument, QuantumState, _frozen, dagger, labels


@dataclass(frozen=True)
class Assemblage:
    """Subnormalized states sigma[x][a] produced by input x and outcome a."""

    sigma: Mapping[str, Mapping[str, np.ndarray]]

    def __post_init__(self):
        clean = {}
        dims = set()
        for x, row in self.sigma.items():
            clean[str(x)] = {str(a): _frozen(m) for a, m in row.items()}
            dims.update(m.shape for m in clean[str(x)].values())
        if not clean or any(not r for r in clean.values()):
            raise ValueError("assemblage needs at least one input and one outcome per input")
        if len(dims) != 1:
            raise ValueError(f"assemblage members have mixed shapes {sorted(dims)}")
        (shape,) = dims
        if len(shape) != 2 or shape[0] != shape[1]:
            raise ValueError("assemblage members must be square matrices")
        reduced = None
        for x, row in clean.items():
            total = np.zeros(shape, complex)
            for a, m in row.items():
                if np.max(np.abs(m - dagger(m))) > ATOL:
                    raise ValueError(f"sigma[{x}][{a}] is not Hermitian")
                if np.linalg.eigvalsh((m + dagger(m)) / 2).min() < -ATOL:
                    raise ValueError(f"sigma[{x}][{a}] is not positive semidefinite")
                total = total + m
            if abs(np.trace(total).real - 1) > ATOL:
                raise ValueError(f"outcomes of input {x} have total trace {np.trace(total).real!r}")
            if reduced is not None and np.max(np.abs(total - reduced)) > ATOL:
                raise ValueError("reduced state differs between inputs; assemblage is inconsistent")
            reduced = total
        object.__setattr__(self, "sigma", clean)

    @property
    def dim(self) -> int:
        return next(iter(next(iter(self.sigma.values())).values())).shape[0]

    @property
    def inputs(self) -> tuple[str, ...]:
        return tuple(self.sigma)

    def outcomes(self, x: str) -> tuple[str, ...]:
        return tuple(self.sigma[x])

    def strategies(self) -> list[tuple[str, ...]]:
        """Deterministic responses: one outcome per input, in input order."""
        return list(itertools.product(*(self.outcomes(x) for x in self.inputs)))

    @classmethod
    def from_instruments(cls, state: QuantumState, instruments: Mapping[str, Instrument]) -> "Assemblage":
        return cls({x: {a: ins.apply(a, state.matrix) for a in ins.outcomes} for x, ins in instruments.items()})

    @classmethod
    def from_hidden_states(cls, inputs: Mapping[str, Sequence[str]], responses: Sequence[Sequence[str]],
                           states: Sequence[np.ndarray]) -> "Assemblage":
        """sigma[x][a] = sum over hidden values whose response to x is a."""
        keys = list(inputs)
        d = np.asarray(states[0]).shape[0]
        sigma = {x: {a: np.zeros((d, d), complex) for a in inputs[x]} for x in keys}
        for resp, st in zip(responses, states):
            for x, a in zip(keys, resp):
                sigma[x][a] = sigma[x][a] + np.asarray(st)
        return cls(sigma)


def random_lhs_assemblage(inputs: Mapping[str, Sequence[str]], dim: int, rng: np.random.Generator) -> Assemblage:
    """Assemblage built from random weights on deterministic responses and random hidden states."""
    from .quantum import random_density_matrix

    keys = list(inputs)
    responses = list(itertools.product(*(labels(inputs[x]) for x in keys)))
    weights = rng.dirichlet(np.ones(len(responses)))
    states = [w * random_density_matrix(dim, rng) for w in weights]
    return Assemblage.from_hidden_states({x: labels(inputs[x]) for x in keys}, responses, states)


@dataclass(frozen=True)
class SteeringWitness:
    """Operators F[x][a] with sum_{x} F[x][lambda(x)] PSD for every deterministic response lambda."""

    operators: Mapping[str, Mapping[str, np.ndarray]]

    def evaluate(self, a: Assemblage) -> float:
        """-sum Tr[F sigma]; nonpositive for every hidden-state assemblage."""
        return -float(sum(np.trace(self.operators[x][o] @ a.sigma[x][o]).real for x in a.inputs for o in a.outcomes(x)))


@dataclass(frozen=True)
class SteeringResult:
    steerable: bool
    margin: float
    hidden_states: Mapping[tuple[str, ...], np.ndarray] | None = None
    residual: float | None = None
    witness: SteeringWitness | None = None
    witness_value: float | None = None


def _lhs_program(a: Assemblage):
    import cvxpy as cp

    d = a.dim
    lams = a.strategies()
    mu = cp.Variable()
    tilde = [cp.Variable((d, d), hermitian=True) for _ in lams]
    cons = [t - mu * np.eye(d) >> 0 for t in tilde]
    for i, x in enumerate(a.inputs):
        for o in a.outcomes(x):
            members = [t for t, lam in zip(tilde, lams) if lam[i] == o]
            cons.append(sum(members) == a.sigma[x][o])
    return cp.Problem(cp.Maximize(mu), cons), tilde, lams


def _witness_program(a: Assemblage):
    import cvxpy as cp

    d = a.dim
    F = {x: {o: cp.Variable((d, d), hermitian=True) for o in a.outcomes(x)} for x in a.inputs}
    cons = []
    norm = 0
    for lam in a.strategies():
        z = sum(F[x][o] for x, o in zip(a.inputs, lam))
        cons.append(z >> 0)
        norm = norm + cp.real(cp.trace(z))
    cons.append(norm == 1)
    obj = sum(cp.real(cp.trace(F[x][o] @ a.sigma[x][o])) for x in a.inputs for o in a.outcomes(x))
    return cp.Problem(cp.Minimize(obj), cons), F


def steering_check(a: Assemblage, tol: float = SDP_TOL) -> SteeringResult:
    """Largest margin mu with hidden states sigma~ - mu I >= 0 reproducing ``a``.

    mu >= -tol yields the hidden-state model (eigenvalues clipped at zero, residual reported).
    Otherwise the dual program is solved for a witness F with -sum Tr[F sigma] = -mu > 0.
    """
    prob, tilde, lams = _lhs_program(a)
    mu = solve_sdp(prob)
    if mu >= -tol:
        states = {}
        for lam, t in zip(lams, tilde):
            m = (t.value + dagger(t.value)) / 2
            w, v = np.linalg.eigh(m)
            states[lam] = (v * np.clip(w, 0, None)) @ dagger(v)
        residual = 0.0
        for i, x in enumerate(a.inputs):
            for o in a.outcomes(x):
                rebuilt = sum(s for lam, s in states.items() if lam[i] == o)
                residual = max(residual, float(np.max(np.abs(rebuilt - a.sigma[x][o]))))
        return SteeringResult(False, float(mu), states, residual)
    wprob, F = _witness_program(a)
    solve_sdp(wprob)
    ops = {x: {o: (F[x][o].value + dagger(F[x][o].value)) / 2 for o in a.outcomes(x)} for x in a.inputs}
    witness = SteeringWitness(ops)
    return SteeringResult(True, float(mu), witness=witness, witness_value=witness.evaluate(a))
