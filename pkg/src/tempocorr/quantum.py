"""Finite-dimensional states, POVMs, instruments and sequential measurement simulation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

ATOL = 1e-9
IDLE = "0"


class InvariantError(ValueError):
    """A numerical invariant (Hermiticity, trace, positivity, completeness) failed."""


def _frozen(m) -> np.ndarray:
    a = np.array(m, dtype=complex)
    a.setflags(write=False)
    return a


def _square(m, name: str = "matrix") -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    return a


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Principal square root of a Hermitian PSD matrix via its spectral decomposition."""
    h = (m + dagger(m)) / 2
    w, v = np.linalg.eigh(h)
    if w.min(initial=0.0) < -ATOL:
        raise InvariantError(f"matrix is not PSD (min eigenvalue {w.min():.3e})")
    w = np.where(w < 0, 0.0, w)
    return (v * np.sqrt(w)) @ dagger(v)


def _label(x) -> str:
    return str(x)


def labels(seq: Iterable) -> tuple[str, ...]:
    """Normalise a sequence of setting/outcome labels to a tuple of strings."""
    if isinstance(seq, str):
        return (seq,)
    return tuple(_label(x) for x in seq)


@dataclass(frozen=True)
class QuantumState:
    matrix: np.ndarray

    def __post_init__(self):
        rho = _square(self.matrix, "density matrix")
        herm = np.max(np.abs(rho - dagger(rho)), initial=0.0)
        if herm > ATOL:
            raise InvariantError(f"density matrix not Hermitian (deviation {herm:.3e})")
        tr = abs(np.trace(rho) - 1)
        if tr > ATOL:
            raise InvariantError(f"density matrix trace differs from 1 by {tr:.3e}")
        lam = np.linalg.eigvalsh((rho + dagger(rho)) / 2).min()
        if lam < -ATOL:
            raise InvariantError(f"density matrix not PSD (min eigenvalue {lam:.3e})")
        object.__setattr__(self, "matrix", _frozen(rho))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def pure(cls, vector) -> "QuantumState":
        v = np.asarray(vector, dtype=complex).ravel()
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "QuantumState":
        return cls(np.eye(dim) / dim)


@dataclass(frozen=True)
class Violation:
    """One failed POVM/instrument invariant: ``kind`` names it, ``magnitude`` measures it."""

    kind: str
    magnitude: float
    index: int | None = None


def validate_povm(effects: Sequence, tol: float = ATOL) -> list[Violation]:
    """Return every violated POVM invariant; an empty list means the effects form a POVM.

    Raises ``ValueError`` for structural problems (non-square or mismatched shapes),
    which are not invariant violations.
    """
    mats = [_square(e, "effect") for e in effects]
    if not mats:
        raise ValueError("a POVM needs at least one effect")
    dim = mats[0].shape[0]
    if any(m.shape != (dim, dim) for m in mats):
        raise ValueError("effects have mismatched dimensions")
    report = []
    for i, m in enumerate(mats):
        herm = float(np.max(np.abs(m - dagger(m))))
        if herm > tol:
            report.append(Violation("hermiticity", herm, i))
        lam = float(np.linalg.eigvalsh((m + dagger(m)) / 2).min())
        if lam < -tol:
            report.append(Violation("positivity", -lam, i))
    comp = float(np.max(np.abs(sum(mats) - np.eye(dim))))
    if comp > tol:
        report.append(Violation("completeness", comp))
    return report


@dataclass(frozen=True)
class Povm:
    outcomes: tuple[str, ...]
    effects: tuple[np.ndarray, ...]

    def __post_init__(self):
        outcomes = labels(self.outcomes)
        if len(set(outcomes)) != len(outcomes):
            raise ValueError("duplicate outcome labels")
        if len(outcomes) != len(self.effects):
            raise ValueError("one effect per outcome is required")
        report = validate_povm(self.effects)
        if report:
            raise InvariantError(f"invalid POVM: {report}")
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "effects", tuple(_frozen(e) for e in self.effects))

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    def effect(self, outcome) -> np.ndarray:
        return self.effects[self.outcomes.index(_label(outcome))]

    def probabilities(self, state: QuantumState) -> dict[str, float]:
        return {q: float(np.real(np.trace(e @ state.matrix))) for q, e in zip(self.outcomes, self.effects)}


@dataclass(frozen=True)
class Channel:
    """A CPTP map in Kraus form."""

    kraus: tuple[np.ndarray, ...]

    def __post_init__(self):
        ks = tuple(_frozen(_square(k, "Kraus operator")) for k in self.kraus)
        if not ks:
            raise ValueError("a channel needs at least one Kraus operator")
        dim = ks[0].shape[0]
        if any(k.shape != (dim, dim) for k in ks):
            raise ValueError("Kraus operators have mismatched dimensions")
        dev = float(np.max(np.abs(sum(dagger(k) @ k for k in ks) - np.eye(dim))))
        if dev > ATOL:
            raise InvariantError(f"channel is not trace preserving (deviation {dev:.3e})")
        object.__setattr__(self, "kraus", ks)

    @property
    def dim(self) -> int:
        return self.kraus[0].shape[0]

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ dagger(k) for k in self.kraus)

    def adjoint(self, op: np.ndarray) -> np.ndarray:
        return sum(dagger(k) @ op @ k for k in self.kraus)

    @classmethod
    def unitary(cls, u) -> "Channel":
        return cls((np.asarray(u, dtype=complex),))

    @classmethod
    def identity(cls, dim: int) -> "Channel":
        return cls((np.eye(dim, dtype=complex),))

    @classmethod
    def depolarizing(cls, dim: int, strength: float) -> "Channel":
        """rho -> (1 - strength) rho + strength * I/dim, using the Weyl operator basis."""
        if not 0 <= strength <= 1:
            raise ValueError("depolarizing strength must lie in [0, 1]")
        omega = np.exp(2j * np.pi / dim)
        shift = np.roll(np.eye(dim), 1, axis=0)
        clock = np.diag(omega ** np.arange(dim))
        weyl = [np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b)
                for a in range(dim) for b in range(dim)]
        coeffs = [1 - strength + strength / dim**2] + [strength / dim**2] * (dim**2 - 1)
        return cls(tuple(np.sqrt(c) * w for c, w in zip(coeffs, weyl)))


@dataclass(frozen=True)
class Instrument:
    """Per-outcome lists of Kraus operators whose total map is trace preserving."""

    outcomes: tuple[str, ...]
    kraus: tuple[tuple[np.ndarray, ...], ...]

    def __post_init__(self):
        outcomes = labels(self.outcomes)
        if len(set(outcomes)) != len(outcomes):
            raise ValueError("duplicate outcome labels")
        if len(outcomes) != len(self.kraus):
            raise ValueError("one Kraus list per outcome is required")
        kraus = []
        for q, ks in zip(outcomes, self.kraus):
            ks = tuple(_frozen(_square(k, "Kraus operator")) for k in ks)
            if not ks:
                raise ValueError(f"outcome {q!r} has an empty Kraus list")
            kraus.append(ks)
        dim = kraus[0][0].shape[0]
        if any(k.shape != (dim, dim) for ks in kraus for k in ks):
            raise ValueError("Kraus operators have mismatched dimensions")
        total = sum(dagger(k) @ k for ks in kraus for k in ks)
        dev = float(np.max(np.abs(total - np.eye(dim))))
        if dev > ATOL:
            raise InvariantError(f"instrument is not trace preserving (deviation {dev:.3e})")
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "kraus", tuple(kraus))

    @property
    def dim(self) -> int:
        return self.kraus[0][0].shape[0]

    def operation(self, outcome) -> tuple[np.ndarray, ...]:
        return self.kraus[self.outcomes.index(_label(outcome))]

    def apply(self, outcome, rho: np.ndarray) -> np.ndarray:
        """Subnormalised post-measurement state for ``outcome``."""
        return sum(k @ rho @ dagger(k) for k in self.operation(outcome))

    @classmethod
    def identity(cls, dim: int, outcome: str = IDLE) -> "Instrument":
        return cls((outcome,), ((np.eye(dim, dtype=complex),),))

    @classmethod
    def from_mapping(cls, kraus: Mapping[str, Sequence]) -> "Instrument":
        return cls(tuple(kraus), tuple(tuple(ks) for ks in kraus.values()))


def instrument_povm(instr: Instrument) -> Povm:
    """Induced POVM, M_q = sum_i K_i^q† K_i^q."""
    return Povm(instr.outcomes, tuple(sum(dagger(k) @ k for k in ks) for ks in instr.kraus))


def nonselective_channel(instr: Instrument) -> Channel:
    return Channel(tuple(k for ks in instr.kraus for k in ks))


def luders_instrument(povm: Povm) -> Instrument:
    """One Kraus operator per outcome, the principal square root of its effect."""
    if not isinstance(povm, Povm):
        povm = Povm(tuple(str(i) for i in range(len(povm))), tuple(povm))
    return Instrument(povm.outcomes, tuple((psd_sqrt(e),) for e in povm.effects))


def von_neumann_instrument(eigenbasis: Sequence, coarse_graining: Sequence | Mapping) -> Instrument:
    """Rank-one projective update in ``eigenbasis`` with outcomes relabelled by ``coarse_graining``.

    ``eigenbasis`` is a list of vectors (or a matrix whose columns are the vectors);
    ``coarse_graining`` gives the outcome label of each vector, by position or as a
    mapping from vector index. Outcomes are ordered by first appearance.
    """
    if isinstance(eigenbasis, np.ndarray) and eigenbasis.ndim == 2:
        vecs = [eigenbasis[:, i] for i in range(eigenbasis.shape[1])]
    else:
        vecs = [np.asarray(v, dtype=complex).ravel() for v in eigenbasis]
    basis = np.column_stack(vecs).astype(complex)
    dim = basis.shape[0]
    if basis.shape != (dim, dim):
        raise ValueError(f"need {dim} basis vectors of length {dim}, got shape {basis.shape}")
    gram_dev = float(np.max(np.abs(dagger(basis) @ basis - np.eye(dim))))
    if gram_dev > ATOL:
        raise InvariantError(f"basis is not orthonormal (deviation {gram_dev:.3e})")
    if isinstance(coarse_graining, Mapping):
        relabel = [coarse_graining[i] for i in range(dim)]
    else:
        relabel = list(coarse_graining)
    if len(relabel) != dim:
        raise ValueError("coarse graining must assign an outcome to every basis vector")
    outcomes: list[str] = []
    kraus: dict[str, list[np.ndarray]] = {}
    for i, q in enumerate(labels(relabel)):
        if q not in kraus:
            outcomes.append(q)
            kraus[q] = []
        v = basis[:, i]
        kraus[q].append(np.outer(v, v.conj()))
    return Instrument(tuple(outcomes), tuple(tuple(kraus[q]) for q in outcomes))


def gaussian_pointer_povm(observable, s: float, grid: Sequence[float], weights: Sequence[float] | None = None) -> Povm:
    """Discretised Gaussian-pointer (weak) measurement of a Hermitian observable.

    Effect for pointer reading ``x`` is a function of the observable,
    W_x = sum_a w_x g_s(x - a) / Z(a) |a><a|, where g_s is the Gaussian density
    |K_x|^2 of width ``s`` and Z(a) normalises over the grid for each eigenvalue ``a``.
    The per-eigenvalue normalisation makes the effects sum to the identity exactly.
    """
    if s <= 0:
        raise ValueError("pointer width s must be positive")
    obs = _square(observable, "observable")
    if np.max(np.abs(obs - dagger(obs))) > ATOL:
        raise ValueError("observable must be Hermitian")
    xs = np.asarray(grid, dtype=float)
    w = np.ones_like(xs) if weights is None else np.asarray(weights, dtype=float)
    if xs.ndim != 1 or xs.shape != w.shape or len(xs) == 0:
        raise ValueError("grid and weights must be 1-d and of equal length")
    if np.any(w <= 0):
        raise ValueError("grid weights must be positive")
    evals, evecs = np.linalg.eigh((obs + dagger(obs)) / 2)
    # log-domain softmax over the grid, one column per eigenvalue
    logits = np.log(w)[:, None] - (xs[:, None] - evals[None, :]) ** 2 / (2 * s**2)
    logits -= logits.max(axis=0, keepdims=True)
    probs = np.exp(logits)
    probs /= probs.sum(axis=0, keepdims=True)
    effects = tuple((evecs * probs[k]) @ dagger(evecs) for k in range(len(xs)))
    return Povm(tuple(repr(float(x)) for x in xs), effects)


class Nondisturbance(NamedTuple):
    nondisturbing: bool
    deviation: float


def is_nondisturbing(first: Instrument, later: Povm, tol: float = ATOL) -> Nondisturbance:
    """State-independent nondisturbance: Λ†(M_b) = M_b for every later effect.

    The deviation is the largest trace norm of Λ†(M_b) - M_b.
    """
    if first.dim != later.dim:
        raise ValueError("instrument and POVM dimensions differ")
    channel = nonselective_channel(first)
    dev = 0.0
    for m in later.effects:
        diff = channel.adjoint(m) - m
        dev = max(dev, float(np.abs(np.linalg.eigvalsh((diff + dagger(diff)) / 2)).sum()))
    return Nondisturbance(dev <= tol, dev)


@dataclass(frozen=True)
class QuantumSequenceModel:
    """Initial state, one instrument per setting and an optional channel between steps.

    The idle setting ``"0"`` is always available and maps to the identity instrument
    with the single outcome ``"0"``.
    """

    initial: QuantumState
    instruments: Mapping[str, Instrument]
    channel: Channel | None = None
    outcome_values: Mapping[str, float] | None = None

    def __post_init__(self):
        dim = self.initial.dim
        instruments = {_label(k): v for k, v in self.instruments.items()}
        for s, instr in instruments.items():
            if instr.dim != dim:
                raise ValueError(f"instrument for setting {s!r} has dimension {instr.dim}, state has {dim}")
        if IDLE in instruments:
            idle = instruments[IDLE]
            if (idle.outcomes != (IDLE,) or len(idle.kraus[0]) != 1
                    or np.max(np.abs(idle.kraus[0][0] - np.eye(dim))) > ATOL):
                raise ValueError("setting '0' is reserved for the identity (no-measurement) instrument")
        else:
            instruments = {IDLE: Instrument.identity(dim), **instruments}
        if self.channel is not None and self.channel.dim != dim:
            raise ValueError("channel dimension differs from the state dimension")
        object.__setattr__(self, "instruments", instruments)
        if self.outcome_values is not None:
            object.__setattr__(self, "outcome_values", {str(k): float(v) for k, v in self.outcome_values.items()})

    @property
    def dim(self) -> int:
        return self.initial.dim

    @property
    def settings(self) -> tuple[str, ...]:
        return tuple(self.instruments)


def sequence_probability(model: QuantumSequenceModel, settings: Sequence) -> dict[tuple[str, ...], float]:
    """Outcome distribution p(q|s) for a setting sequence.

    Each step applies the instrument of its setting to the running subnormalised
    state, followed by the inter-step channel (not after the last step).
    """
    seq = labels(settings)
    for s in seq:
        if s not in model.instruments:
            raise KeyError(f"unknown setting {s!r}")
    branches: list[tuple[tuple[str, ...], np.ndarray]] = [((), model.initial.matrix)]
    for t, s in enumerate(seq):
        instr = model.instruments[s]
        nxt = []
        for qs, rho in branches:
            for q in instr.outcomes:
                sigma = instr.apply(q, rho)
                if model.channel is not None and t < len(seq) - 1:
                    sigma = model.channel.apply(sigma)
                nxt.append((qs + (q,), sigma))
        branches = nxt
    dist = {qs: float(np.real(np.trace(rho))) for qs, rho in branches}
    total = sum(dist.values())
    if abs(total - 1) > ATOL or min(dist.values(), default=0.0) < -ATOL:
        raise InvariantError(f"sequence distribution invalid (total {total!r})")
    return dist


def sandwich_probability(state: QuantumState, projectors: Sequence[np.ndarray]) -> float:
    """p = Tr[P_n ... P_1 rho P_1 ... P_n] for Heisenberg-picture projectors P_1..P_n."""
    w = np.eye(state.dim, dtype=complex)
    for p in projectors:
        w = w @ p
    return float(np.real(np.trace(dagger(w) @ state.matrix @ w)))


def behavior_from_model(model: QuantumSequenceModel, schedule: Iterable[Sequence], outcome_values=None):
    """Tabulate ``sequence_probability`` over a schedule of equal-length setting sequences."""
    from .behavior import Behavior, Scenario

    schedule = [labels(s) for s in schedule]
    values = outcome_values if outcome_values is not None else model.outcome_values
    if not schedule:
        return Behavior(Scenario(0, model.settings, {s: model.instruments[s].outcomes for s in model.settings}, values), {})
    n = len(schedule[0])
    if any(len(s) != n for s in schedule):
        raise ValueError("all setting sequences in a schedule must have the same length")
    scenario = Scenario(n, model.settings, {s: model.instruments[s].outcomes for s in model.settings}, values)
    return Behavior(scenario, {s: sequence_probability(model, s) for s in dict.fromkeys(schedule)})


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    g = rng.normal(size=(dim, rank or dim)) + 1j * rng.normal(size=(dim, rank or dim))
    rho = g @ dagger(g)
    return rho / np.trace(rho)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_instrument(dim: int, n_outcomes: int, rng: np.random.Generator, n_kraus: int = 2) -> Instrument:
    """Random instrument from a Haar-ish isometry cut into Kraus blocks."""
    rows = dim * n_outcomes * n_kraus
    z = rng.normal(size=(rows, dim)) + 1j * rng.normal(size=(rows, dim))
    v, _ = np.linalg.qr(z)
    blocks = v.reshape(n_outcomes, n_kraus, dim, dim)
    return Instrument(tuple(str(q) for q in range(n_outcomes)),
                      tuple(tuple(blocks[q, i] for i in range(n_kraus)) for q in range(n_outcomes)))


def random_projective_povm(dim: int, n_outcomes: int, rng: np.random.Generator) -> Povm:
    """Random PVM: a Haar basis split into ``n_outcomes`` nonempty groups."""
    u = random_unitary(dim, rng)
    cut = np.sort(rng.choice(np.arange(1, dim), size=n_outcomes - 1, replace=False)) if n_outcomes > 1 else []
    groups = np.split(np.arange(dim), cut)
    return Povm(tuple(str(q) for q in range(n_outcomes)),
                tuple(u[:, g] @ dagger(u[:, g]) for g in groups))


def pauli() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return (np.array([[0, 1], [1, 0]], dtype=complex),
            np.array([[0, -1j], [1j, 0]], dtype=complex),
            np.array([[1, 0], [0, -1]], dtype=complex))


def spectral_povm(observable, values_as_labels: bool = True) -> Povm:
    """Projective POVM onto the eigenspaces of a Hermitian observable, labelled by eigenvalue."""
    obs = _square(observable, "observable")
    w, v = np.linalg.eigh((obs + dagger(obs)) / 2)
    groups: list[list[int]] = []
    for i, lam in enumerate(w):
        if groups and abs(w[groups[-1][0]] - lam) < 1e-8:
            groups[-1].append(i)
        else:
            groups.append([i])
    groups.reverse()
    names = tuple(_fmt_value(w[g[0]]) if values_as_labels else str(k) for k, g in enumerate(groups))
    return Povm(names, tuple(v[:, g] @ dagger(v[:, g]) for g in groups))


def _fmt_value(x: float) -> str:
    r = round(float(x), 8)
    if r == int(r):
        return f"{int(r):+d}"
    return f"{r:+g}"


__all__ = [
    "ATOL", "IDLE", "Channel", "Instrument", "InvariantError", "Nondisturbance", "Povm",
    "QuantumSequenceModel", "QuantumState", "Violation", "behavior_from_model", "dagger",
    "gaussian_pointer_povm", "instrument_povm", "is_nondisturbing", "labels", "luders_instrument",
    "nonselective_channel", "pauli", "psd_sqrt", "random_density_matrix", "random_instrument",
    "random_projective_povm", "random_unitary", "sandwich_probability", "sequence_probability",
    "spectral_povm", "validate_povm", "von_neumann_instrument",
]
