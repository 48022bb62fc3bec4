import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from codistill.nn import Architecture, Batch, init_params


@pytest.fixture
def small_arch():
    return Architecture(6, (8, 5), 4)


@pytest.fixture
def small_params(small_arch):
    return init_params(small_arch, 42)


@pytest.fixture
def small_batch(small_arch):
    rng = np.random.default_rng(3)
    return Batch(rng.standard_normal((7, small_arch.input_dim)),
                 rng.integers(0, small_arch.output_dim, size=7))


@pytest.fixture
def lm_arch():
    return Architecture(3 * 4, (10,), 9, task="lm_fixed_context",
                        context_window=3, vocab_size=9, embedding_dim=4)


@pytest.fixture
def lm_batch(lm_arch):
    rng = np.random.default_rng(5)
    return Batch(rng.integers(0, lm_arch.vocab_size, size=(6, lm_arch.context_window)),
                 rng.integers(0, lm_arch.vocab_size, size=6))
