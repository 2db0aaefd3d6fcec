import numpy as np
import pytest

from spdcast import SpdMatrix


def random_orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def spd_from_spectrum(rng: np.random.Generator, values) -> SpdMatrix:
    """SPD matrix with a prescribed spectrum in a random eigenbasis."""
    values = np.asarray(values, dtype=float)
    q = random_orthogonal(rng, len(values))
    return SpdMatrix(q @ np.diag(values) @ q.T)


def random_spd(rng: np.random.Generator, n: int, lo: float = 0.5, hi: float = 3.0) -> SpdMatrix:
    return spd_from_spectrum(rng, rng.uniform(lo, hi, size=n))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
