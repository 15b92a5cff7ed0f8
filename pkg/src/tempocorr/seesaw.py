"""Quantum lower bounds by alternating optimization, plus witness and spin-chain maximizers.

Instruments are stored as isometries V mapping C^d into C^(outcomes x rank) (x) C^d;
block (q, j) of V is the j-th Kraus operator of outcome q. The see-saw alternates a
top-eigenvector update of the initial state with gradient ascent on each input's
isometry, parameterized by an unconstrained matrix A through V = A (A^dag A)^(-1/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize

from .automata import OptimizationResult, QuantumMachine, _machine_scenario_of, _run_restarts, _spawn
from .expressions import LinearExpression
from .quantum import (Instrument, QuantumSequenceModel, QuantumState, dagger, luders_instrument, Povm,
                      von_neumann_instrument)


# -------------------------------------------------------------- isometry calculus


def polar_isometry(A: np.ndarray) -> np.ndarray:
    """Isometric factor A (A^dag A)^(-1/2)."""
    m, U = np.linalg.eigh(dagger(A) @ A)
    return A @ (U * m ** -0.5) @ dagger(U)


def polar_gradient(A: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Pull a gradient G with respect to V = polar_isometry(A) back to A.

    Convention: df = Re Tr[G^dag dV]. Uses the divided differences of m^(-1/2)
    in the eigenbasis of A^dag A.
    """
    m, U = np.linalg.eigh(dagger(A) @ A)
    f = m ** -0.5
    diff = m[:, None] - m[None, :]
    close = np.abs(diff) < 1e-12 * np.maximum(1.0, np.abs(m[:, None]))
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma = np.where(close, -0.5 * m[:, None] ** -1.5 + 0 * m[None, :], (f[:, None] - f[None, :]) / diff)
    N = (U * f) @ dagger(U)
    Y = dagger(U) @ dagger(G) @ A @ U
    H = U @ (gamma * Y) @ dagger(U)
    return G @ N + A @ (H + dagger(H))


# --------------------------------------------------------------- machine algebra


@dataclass
class _Model:
    """Isometries per input, Kraus rank per outcome, and the terms to maximize."""

    d: int
    n_out: int
    rank: int
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    terms: list
    const: float

    def kraus(self, V: np.ndarray, q: int) -> list[np.ndarray]:
        d = self.d
        return [V[(q * self.rank + j) * d:(q * self.rank + j + 1) * d] for j in range(self.rank)]

    def effect(self, Vs: Mapping[str, np.ndarray]) -> np.ndarray:
        """Operator E with objective Tr[E rho] (constant excluded)."""
        E = np.zeros((self.d, self.d), complex)
        for s, q, c in self.terms:
            Y = np.eye(self.d, dtype=complex)
            for x, y in zip(reversed(s), reversed(q)):
                Y = sum(dagger(K) @ Y @ K for K in self.kraus(Vs[x], y))
            E += c * Y
        return (E + dagger(E)) / 2

    def value(self, Vs, rho) -> float:
        return float(np.trace(self.effect(Vs) @ rho).real) + self.const

    def gradient(self, Vs, rho, target: str) -> tuple[float, np.ndarray]:
        """Objective and df/dconj(V_target) times two, stacked by Kraus block."""
        d = self.d
        G = np.zeros_like(Vs[target])
        total = self.const
        for s, q, c in self.terms:
            n = len(s)
            states = [rho]
            for x, y in zip(s, q):
                states.append(sum(K @ states[-1] @ dagger(K) for K in self.kraus(Vs[x], y)))
            total += c * float(np.trace(states[-1]).real)
            if target not in s:
                continue
            L = np.eye(d, dtype=complex)
            for t in range(n - 1, -1, -1):
                if s[t] == target:
                    y = q[t]
                    for j, K in enumerate(self.kraus(Vs[target], y)):
                        row = (y * self.rank + j) * d
                        G[row:row + d] += 2 * c * L @ K @ states[t]
                L = sum(dagger(K) @ L @ K for K in self.kraus(Vs[s[t]], q[t]))
        return total, G


def _random_isometry(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _top_state(E: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(E)
    psi = v[:, -1]
    return np.outer(psi, psi.conj())


def _to_machine(model: _Model, Vs, rho) -> QuantumMachine:
    instruments = {}
    for x in model.inputs:
        kraus = tuple(tuple(model.kraus(Vs[x], y)) for y in range(model.n_out))
        instruments[x] = Instrument(model.outputs, kraus)
    return QuantumMachine(QuantumState(rho), instruments)


def machine_isometries(qm: QuantumMachine, rank: int) -> dict[str, np.ndarray]:
    """Stack a machine's Kraus operators into isometries, padding with zeros to ``rank``."""
    out = {}
    for x, ins in qm.instruments.items():
        blocks = []
        for q in ins.outcomes:
            ks = list(ins.operation(q))
            if len(ks) > rank:
                raise ValueError(f"instrument for input {x!r} has more than {rank} Kraus operators per outcome")
            ks += [np.zeros((qm.d, qm.d), complex)] * (rank - len(ks))
            blocks.extend(ks)
        out[x] = np.vstack(blocks)
    return out


def embed_isometries(Vs: Mapping[str, np.ndarray], d: int, n_out: int, rank: int, d_new: int) -> dict[str, np.ndarray]:
    """Extend each Kraus operator by the identity on new levels for the first outcome only."""
    out = {}
    for x, V in Vs.items():
        W = np.zeros((n_out * rank * d_new, d_new), complex)
        for b in range(n_out * rank):
            W[b * d_new:b * d_new + d, :d] = V[b * d:(b + 1) * d]
        for k in range(d, d_new):
            W[k, k] = 1.0
        out[x] = W
    return out


def _optimize_isometry(model: _Model, Vs, rho, target, max_iter: int) -> np.ndarray:
    shape = Vs[target].shape

    def fun(x):
        A = (x[: x.size // 2] + 1j * x[x.size // 2:]).reshape(shape)
        trial = dict(Vs)
        trial[target] = polar_isometry(A)
        f, G = model.gradient(trial, rho, target)
        g = polar_gradient(A, G).ravel()
        return -f, -np.concatenate([g.real, g.imag])

    A0 = Vs[target].ravel()
    res = minimize(fun, np.concatenate([A0.real, A0.imag]), jac=True, method="L-BFGS-B",
                   options={"maxiter": max_iter, "ftol": 1e-15, "gtol": 1e-11})
    A = (res.x[: res.x.size // 2] + 1j * res.x[res.x.size // 2:]).reshape(shape)
    return polar_isometry(A)


@dataclass(frozen=True)
class SeesawConfig:
    restarts: int = 20
    rounds: int = 200
    inner_iter: int = 100
    tol: float = 1e-10
    seed: int = 0
    rank: int = 1


def _seesaw_run(model: _Model, Vs, cfg: SeesawConfig):
    prev = -math.inf
    rho = _top_state(model.effect(Vs))
    for _ in range(cfg.rounds):
        rho = _top_state(model.effect(Vs))
        for x in model.inputs:
            Vs[x] = _optimize_isometry(model, Vs, rho, x, cfg.inner_iter)
        rho = _top_state(model.effect(Vs))
        value = model.value(Vs, rho)
        if value - prev < cfg.tol:
            break
        prev = value
    return model.value(Vs, rho), Vs, rho


def max_expression_quantum_seesaw(expr: LinearExpression, d: int, config: SeesawConfig = SeesawConfig(),
                                  warm_start: QuantumMachine | None = None) -> OptimizationResult:
    """Best value found over d-dimensional quantum machines (a lower bound on the optimum).

    ``warm_start`` (a machine of dimension at most d) is embedded and added as an
    extra start, so results never fall below the warm start's value.
    """
    if d < 1:
        raise ValueError("d must be at least 1")
    inputs, outputs = _machine_scenario_of(expr)
    coef, const = expr.compile()
    sign = 1.0 if expr.sense == "max" else -1.0
    terms = [(s, [outputs.index(y) for y in q], sign * c) for (s, q), c in coef.items()]
    model = _Model(d, len(outputs), config.rank, inputs, outputs, terms, sign * const)
    rows = len(outputs) * config.rank * d

    def job(rng):
        Vs = {x: _random_isometry(rows, d, rng) for x in inputs}
        return _seesaw_run(model, Vs, config)

    results = _run_restarts(job, _spawn(config.seed, config.restarts))
    if warm_start is not None:
        base = machine_isometries(warm_start, config.rank)
        Vs = embed_isometries(base, warm_start.d, len(outputs), config.rank, d)
        results.append(_seesaw_run(model, Vs, config))
    values = [r[0] for r in results]
    best = int(np.argmax(values))
    value, Vs, rho = results[best]
    return OptimizationResult(sign * value, _to_machine(model, Vs, rho), "seesaw", False,
                              tuple(sign * v for v in values), config.seed)


# ---------------------------------------------------------- witness maximization


def _dephase(m: np.ndarray) -> np.ndarray:
    return np.diag(np.diag(m))


@dataclass(frozen=True)
class WitnessOptimum:
    value: float
    state: np.ndarray
    projector: np.ndarray
    restart_values: tuple[float, ...] = ()

    def model(self) -> QuantumSequenceModel:
        """Intermediate von Neumann measurement ``"1"`` in the fixed basis, final test ``"m"``."""
        n = self.state.shape[0]
        basis = np.eye(n)
        vn = von_neumann_instrument(basis, [str(k) for k in range(n)])
        final = luders_instrument(Povm(("+", "-"), (self.projector, np.eye(n) - self.projector)))
        return QuantumSequenceModel(QuantumState(self.state), {"1": vn, "m": final})


def max_quantum_witness(n: int, restarts: int = 20, seed: int = 0, rounds: int = 500, tol: float = 1e-13) -> WitnessOptimum:
    """Maximize Tr[M (rho - Delta(rho))] over states and projectors in dimension n.

    Delta dephases in the intermediate measurement basis, fixed without loss of generality.
    Alternates the top eigenvector of M - Delta(M) with the positive-part projector of
    rho - Delta(rho).
    """
    best, values = None, []
    for rng in _spawn(seed, restarts):
        z = rng.normal(size=n) + 1j * rng.normal(size=n)
        rho = np.outer(z, z.conj()) / np.vdot(z, z).real
        prev = -math.inf
        for _ in range(rounds):
            D = rho - _dephase(rho)
            w, v = np.linalg.eigh(D)
            pos = v[:, w > 0]
            M = pos @ dagger(pos)
            rho = _top_state(M - _dephase(M))
            value = float(np.trace(M @ (rho - _dephase(rho))).real)
            if value - prev < tol:
                break
            prev = value
        values.append(value)
        if best is None or value > best[0]:
            best = (value, rho, M)
    return WitnessOptimum(best[0], best[1], best[2], tuple(values))


# ------------------------------------------------------------ spin precession


def spin_operators(j: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """J_x, J_y, J_z for spin j in the basis m = j, j-1, ..., -j."""
    dim = int(round(2 * j + 1))
    m = j - np.arange(dim)
    jp = np.zeros((dim, dim))
    for k in range(1, dim):
        jp[k - 1, k] = math.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    jx = (jp + jp.T) / 2
    jy = (jp - jp.T) / 2j
    return jx.astype(complex), jy, np.diag(m).astype(complex)


def spin_coarse_values(j: float) -> np.ndarray:
    """-1 for the lowest magnetic level, +1 for the rest."""
    dim = int(round(2 * j + 1))
    v = np.ones(dim)
    v[-1] = -1.0
    return v


def _lgi_operator(j: float, th1: float, th2: float, rule: str) -> np.ndarray:
    jx, _, _ = spin_operators(j)
    vals = spin_coarse_values(j)
    Q = np.diag(vals).astype(complex)
    dim = vals.size

    def U(t):
        return expm(-1j * t * jx)

    def heis(t):
        u = U(t)
        return dagger(u) @ Q @ u

    if rule == "von_neumann":
        projs = [np.diag(np.eye(dim)[k]).astype(complex) for k in range(dim)]
        pairs = [(vals[k], projs[k]) for k in range(dim)]
    elif rule == "luders":
        pplus = np.diag((vals > 0).astype(float)).astype(complex)
        pairs = [(1.0, pplus), (-1.0, np.eye(dim) - pplus)]
    else:
        raise ValueError("rule must be 'von_neumann' or 'luders'")

    def corr(t):
        Qt = heis(t)
        return sum(v * P @ Qt @ P for v, P in pairs)

    u1 = U(th1)
    X01 = corr(th1)
    X12 = dagger(u1) @ corr(th2) @ u1
    X02 = corr(th1 + th2)
    X = X01 + X12 - X02
    return (X + dagger(X)) / 2


def spin_lgi_value(j: float, th1: float, th2: float, rule: str = "von_neumann") -> tuple[float, np.ndarray]:
    """Best three-term value over initial states for given rotation angles, and the maximizing state."""
    w, v = np.linalg.eigh(_lgi_operator(j, th1, th2, rule))
    return float(w[-1]), np.outer(v[:, -1], v[:, -1].conj())


@dataclass(frozen=True)
class SpinLgiOptimum:
    value: float
    angles: tuple[float, float]
    state: np.ndarray
    asymptotic: float


def max_spin_lgi(j: float = 1.0, rule: str = "von_neumann", grid: int = 60) -> SpinLgiOptimum:
    """Maximize over two rotation angles (grid then Nelder-Mead) and the initial state."""
    ts = np.linspace(0, 2 * math.pi, grid, endpoint=False)
    vals = np.array([[spin_lgi_value(j, a, b, rule)[0] for b in ts] for a in ts])
    i, k = np.unravel_index(int(np.argmax(vals)), vals.shape)
    res = minimize(lambda x: -spin_lgi_value(j, x[0], x[1], rule)[0], [ts[i], ts[k]], method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000})
    value, state = spin_lgi_value(j, res.x[0], res.x[1], rule)
    return SpinLgiOptimum(value, (float(res.x[0]), float(res.x[1])), state, 3 - math.sqrt(2 / (math.pi * j)))


def spin_model(j: float, theta: float, state: np.ndarray, rule: str = "von_neumann") -> QuantumSequenceModel:
    """Uniform-step precession model with the coarse-grained J_z measurement as setting ``"1"``."""
    from .quantum import Channel

    jx, _, _ = spin_operators(j)
    vals = spin_coarse_values(j)
    dim = vals.size
    labels_ = ["+1" if v > 0 else "-1" for v in vals]
    if rule == "von_neumann":
        ins = von_neumann_instrument(np.eye(dim), labels_)
    else:
        pplus = np.diag((vals > 0).astype(float)).astype(complex)
        ins = luders_instrument(Povm(("+1", "-1"), (pplus, np.eye(dim) - pplus)))
    return QuantumSequenceModel(QuantumState(state), {"1": ins}, Channel.unitary(expm(-1j * theta * jx)),
                                {"+1": 1.0, "-1": -1.0})
