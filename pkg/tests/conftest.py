from pathlib import Path

import numpy as np
import pytest

from vulnscan import numcore as nc

FIXTURES = Path(__file__).parent / "fixtures"
SARD_FIXTURE = FIXTURES / "sard"
LISTING_BAD = (
    SARD_FIXTURE
    / "CWE121_Stack_Based_Buffer_Overflow"
    / "s01"
    / "CWE121_Stack_Based_Buffer_Overflow__listing_bad.c"
)
LISTING_CLEAN = (FIXTURES / "listing_clean.c").read_text(encoding="utf-8").rstrip("\n")


def param_grad_errors(loss_fn, params, names=None, eps=1e-5):
    """grad_check every named parameter of a loss that reads ``params`` by name."""
    errors = {}
    for name in names or sorted(params):
        original = params[name]

        def f(x, name=name):
            params[name] = x
            return loss_fn()

        errors[name] = nc.grad_check(f, original, eps)
        params[name] = original
    return errors


def weighted_sum(shape, seed=0):
    """A scalar probe sum(w * y) with fixed random weights, so no gradient is structurally zero."""
    w = nc.Tensor(np.random.default_rng(seed).normal(size=shape))
    return lambda y: nc.sum(nc.mul(y, w))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
