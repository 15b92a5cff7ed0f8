from __future__ import annotations

import numpy as np
import pytest

from tempocorr.quantum import (Channel, QuantumSequenceModel, QuantumState, luders_instrument, random_density_matrix,
                               random_instrument, random_projective_povm, random_unitary)


def random_model(rng: np.random.Generator, dim: int, projective: bool = False) -> QuantumSequenceModel:
    """Random state, two measured settings and a random unitary between steps."""
    if projective:
        instruments = {"1": luders_instrument(random_projective_povm(dim, 2, rng)),
                       "2": luders_instrument(random_projective_povm(dim, 2, rng))}
    else:
        instruments = {"1": random_instrument(dim, 2, rng), "2": random_instrument(dim, 3, rng)}
    return QuantumSequenceModel(QuantumState(random_density_matrix(dim, rng)), instruments,
                                Channel.unitary(random_unitary(dim, rng)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
