"""Ready-made models used by the bundled data files, examples and reproduction runs."""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import expm

from .automata import ClassicalMachine
from .expressions import lgi_n
from .quantum import Channel, Povm, QuantumSequenceModel, QuantumState, luders_instrument, pauli, spectral_povm
from .seesaw import spin_model

PM_VALUES = {"+1": 1.0, "-1": -1.0}


def precessing_qubit(step_angle: float, state=(1, 0)) -> QuantumSequenceModel:
    """Qubit rotating by ``step_angle`` about x between sharp sigma_z measurements (setting ``"1"``)."""
    x, _, z = pauli()
    u = expm(-0.5j * step_angle * x)
    return QuantumSequenceModel(QuantumState.pure(state), {"1": luders_instrument(spectral_povm(z))}, Channel.unitary(u), PM_VALUES)


def rotating_qubit() -> QuantumSequenceModel:
    """Rotation by pi/3 per step; the three-time chain evaluates to 3/2."""
    return precessing_qubit(math.pi / 3)


def four_time_qubit() -> QuantumSequenceModel:
    """Rotation by pi/4 per step; the four-time chain evaluates to 2 sqrt 2."""
    return precessing_qubit(math.pi / 4)


def optimal_chain_qubit(n: int) -> QuantumSequenceModel:
    """Rotation by pi/n per step, saturating n cos(pi/n) on the n-time chain."""
    return precessing_qubit(math.pi / n)


def superposition_then_x() -> QuantumSequenceModel:
    """|+x> probed by sigma_z (``"z"``) or nothing, then by sigma_x (``"x"``)."""
    x, _, z = pauli()
    return QuantumSequenceModel(QuantumState.pure(np.array([1, 1]) / math.sqrt(2)),
                                {"z": luders_instrument(spectral_povm(z)), "x": luders_instrument(spectral_povm(x))},
                                None, PM_VALUES)


def noisy_repeat(strength: float) -> QuantumSequenceModel:
    """Maximally mixed qubit, sigma_z measurement, depolarizing noise of the given strength between steps."""
    _, _, z = pauli()
    return QuantumSequenceModel(QuantumState.maximally_mixed(2), {"1": luders_instrument(spectral_povm(z))},
                                Channel.depolarizing(2, strength), PM_VALUES)


def intermediate_probe(probe: str) -> QuantumSequenceModel:
    """|0> with an optional intermediate probe (``"a"``) before a sigma_z readout (``"z"``)."""
    x, _, z = pauli()
    first = {"x": x, "z": z}[probe]
    return QuantumSequenceModel(QuantumState.pure([1, 0]),
                                {"a": luders_instrument(spectral_povm(first)), "z": luders_instrument(spectral_povm(z))},
                                None, PM_VALUES)


def spin1_precession(theta: float = 2 * math.pi / 5, state=None) -> QuantumSequenceModel:
    """Spin 1 precessing about x with the coarse-grained (lowest level vs rest) von Neumann J_z test."""
    if state is None:
        state = np.diag([1.0, 0.0, 0.0]).astype(complex)
    return spin_model(1.0, theta, state, "von_neumann")


def misaligned_ambiguous_tests(angle: float = 0.6) -> tuple[np.ndarray, np.ndarray]:
    """Three 'not q' tests whose third reference vector is tilted towards |0>, and the state |0>.

    The tests are not complements of one orthonormal basis, so the reconstruction
    identity returns a negative entry. Returns (effects, state).
    """
    eye = np.eye(3)
    refs = [eye[0], eye[1], math.cos(angle) * eye[2] + math.sin(angle) * eye[0]]
    nots = np.array([eye - np.outer(v, v) for v in refs])
    return nots, np.outer(eye[0], eye[0])


def geometric_clock(rate: float = 0.5) -> ClassicalMachine:
    """One state, ticks with probability ``rate`` every step."""
    return ClassicalMachine.iid([1 - rate, rate])


def counter_clock(d: int) -> ClassicalMachine:
    """Deterministic d-state counter ticking exactly at step d."""
    update = {(r, "0"): ("0", r + 1) for r in range(d - 1)}
    update[(d - 1, "0")] = ("1", 0)
    return ClassicalMachine.deterministic(0, update, d)


def flip_machine() -> ClassicalMachine:
    """Two states alternating outputs 0, 1, 0, 1, ..."""
    return ClassicalMachine.deterministic(0, {(0, "0"): ("0", 1), (1, "0"): ("1", 0)}, 2)


def lgi_schedule(n: int) -> list[tuple[str, ...]]:
    """Pairwise measurement sequences of the n-time chain."""
    return lgi_n(n).sequences()


def full_schedule(n: int, settings=("0", "1")) -> list[tuple[str, ...]]:
    import itertools

    return list(itertools.product(settings, repeat=n))


def mub_qubit_assemblage():
    """sigma_z and sigma_x Lueders measurements on the maximally mixed qubit."""
    from .steering import Assemblage

    x, _, z = pauli()
    rho = QuantumState.maximally_mixed(2)
    return Assemblage.from_instruments(rho, {"z": luders_instrument(spectral_povm(z)), "x": luders_instrument(spectral_povm(x))})


def effects_povm(effects, names) -> Povm:
    return Povm(tuple(names), tuple(effects))
