import numpy as np
import pytest

from paged_cuckoo import TableParams, Variant


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def params(n=16, t=8, k=2, d=2, variant=Variant.CHOOSE, relaxed=False):
    return TableParams(n, t, k, d, variant, relaxed)
