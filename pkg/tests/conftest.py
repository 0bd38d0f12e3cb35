import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pqr import kron


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def tight_budget():
    """Temporarily shrink the memory guard; always restored."""
    old = kron.entry_budget()

    def setter(n):
        kron.set_entry_budget(n)

    yield setter
    kron.set_entry_budget(old)
