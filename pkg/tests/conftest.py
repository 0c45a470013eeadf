import numpy as np
import pytest

from normint.domain import DomainMask
from normint.operators import build_operator_set


@pytest.fixture
def corner_mask():
    """3x3 grid with the bottom-right pixel excluded: the eight-pixel
    reference domain whose operators are known entry-for-entry."""
    inside = np.ones((3, 3), dtype=bool)
    inside[2, 2] = False
    return DomainMask(inside)


@pytest.fixture
def corner_ops(corner_mask):
    return build_operator_set(corner_mask)


def random_mask(rng, h, w, fill=0.7):
    """Random mask guaranteed non-empty and without fully isolated pixels
    being the only content (callers add priors when isolation matters)."""
    while True:
        inside = rng.random((h, w)) < fill
        if inside.any():
            return DomainMask(inside)
