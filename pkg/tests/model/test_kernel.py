import math

import numpy as np
import pytest
from pytest import approx

from kregcore.model.errors import ContractError
from kregcore.model.kernel import (GaussianKernel, KernelForm, evaluate,
                                   lipschitz_bound,
                                   max_finite_difference_slope)


def test_kernel_is_one_at_zero_distance():
    for form in KernelForm:
        kernel = GaussianKernel(2.0, form)
        assert evaluate(kernel, (1.0, 2.0), (1.0, 2.0)) == 1.0


def test_kernel_forms():
    half = GaussianKernel(1.0)
    plain = GaussianKernel(1.0, 'plain')
    assert half.form is KernelForm.HALF
    assert plain.form is KernelForm.PLAIN
    assert half.evaluate(0.0, 2.0) == approx(math.exp(-2.0))
    assert plain.evaluate(0.0, 2.0) == approx(math.exp(-4.0))


def test_plain_form_example():
    kernel = GaussianKernel(2.0, KernelForm.PLAIN)
    value = evaluate(kernel, (0.0, 0.0), (1.0, 1.0))
    assert value == approx(math.exp(-0.5), rel=1e-15)
    assert value == approx(0.60653, abs=1e-5)


def test_kernel_does_not_increase_with_distance():
    r = np.linspace(0.0, 20.0, 20001)
    for form in KernelForm:
        values = GaussianKernel(1.5, form).profile(r)
        assert np.all(np.diff(values) <= 0.0)
        assert values[0] == 1.0
        assert values[-1] >= 0.0


def test_kernel_is_symmetric_and_bounded():
    kernel = GaussianKernel(0.7)
    rng = np.random.default_rng(3)
    for p, q in zip(rng.normal(size=(20, 3)), rng.normal(size=(20, 3))):
        value = kernel.evaluate(p, q)
        assert 0.0 <= value <= 1.0
        assert value == kernel.evaluate(q, p)


def test_kernel_rejects_bad_arguments():
    with pytest.raises(ContractError):
        GaussianKernel(0.0)
    with pytest.raises(ContractError):
        GaussianKernel(float('nan'))
    with pytest.raises(ContractError):
        GaussianKernel(1.0).evaluate((0.0, 0.0), (0.0,))


def test_lipschitz_bound_covers_both_forms():
    """The steepest finite-difference slope over [-6 sigma, 6 sigma] stays
    below 1/sigma for both exponent forms."""
    for sigma in (0.5, 1.0, 3.0):
        for form in KernelForm:
            kernel = GaussianKernel(sigma, form)
            slope = max_finite_difference_slope(kernel)
            assert slope <= lipschitz_bound(kernel) == approx(1.0 / sigma)


def test_half_form_slope_maximum():
    """exp(-x^2/(2 sigma^2)) is steepest at x = sigma, with slope
    exp(-1/2)/sigma."""
    for sigma in (0.5, 1.0, 3.0):
        slope = max_finite_difference_slope(GaussianKernel(sigma))
        assert slope == approx(math.exp(-0.5) / sigma, rel=1e-3)


def test_tail():
    kernel = GaussianKernel(2.0)
    assert kernel.tail(20.0) == approx(math.exp(-50.0))
    assert kernel.tail(0.0) == 1.0
