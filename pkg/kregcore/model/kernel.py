"""
Provide the Gaussian kernel used for density and regression estimates.

Two exponent forms are supported:
    * PLAIN: K(p, q) = exp(-|p - q|^2 / sigma^2)
    * HALF:  K(p, q) = exp(-|p - q|^2 / (2 sigma^2))

HALF is the default. Both forms are 1/sigma-Lipschitz as a function of
distance, which is the constant the grid sizing rule relies on.
"""
import enum
import math
from dataclasses import dataclass

import numpy as np

from kregcore.model.errors import ContractError


class KernelForm(enum.Enum):
    """Exponent denominator selector: sigma^2 (PLAIN) or 2 sigma^2 (HALF)."""
    PLAIN = 'plain'
    HALF = 'half'


@dataclass(frozen=True)
class GaussianKernel:
    """A Gaussian kernel with bandwidth sigma.

    :param sigma: (float) bandwidth, in the units of the x-coordinates.
    :param form: (KernelForm) exponent form; HALF by default.
    """
    sigma: float
    form: KernelForm = KernelForm.HALF

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ContractError('sigma must be positive and finite, got %r'
                                % (self.sigma,))
        if not isinstance(self.form, KernelForm):
            object.__setattr__(self, 'form', KernelForm(self.form))

    @property
    def denominator(self):
        """The exponent denominator, sigma^2 or 2 sigma^2."""
        if self.form is KernelForm.PLAIN:
            return self.sigma ** 2
        return 2.0 * self.sigma ** 2

    def from_squared(self, sq):
        """Kernel values for an array of squared distances."""
        return np.exp(-np.asarray(sq, dtype=float) / self.denominator)

    def profile(self, r):
        """Kernel values as a function of (signed) distance r."""
        r = np.asarray(r, dtype=float)
        return self.from_squared(r * r)

    def evaluate(self, p, q):
        """Return K(p, q).

        :param p: a location (sequence of d floats).
        :param q: a location of the same dimension.
        :return: (float) in [0, 1]; exactly 1 when p == q.
        """
        p = np.atleast_1d(np.asarray(p, dtype=float))
        q = np.atleast_1d(np.asarray(q, dtype=float))
        if p.shape != q.shape:
            raise ContractError('dimension mismatch: %d vs %d'
                                % (p.size, q.size))
        diff = p - q
        return float(np.exp(-np.dot(diff, diff) / self.denominator))

    def lipschitz_bound(self):
        """Return 1/sigma, an upper bound on |dK/dr| for both forms."""
        return 1.0 / self.sigma

    def tail(self, radius):
        """Kernel value at distance radius: the largest contribution a point
        beyond a truncation radius could make."""
        return float(self.profile(radius))


def evaluate(kernel, p, q):
    """Module-level form of GaussianKernel.evaluate."""
    return kernel.evaluate(p, q)


def lipschitz_bound(kernel):
    """Module-level form of GaussianKernel.lipschitz_bound."""
    return kernel.lipschitz_bound()


def max_finite_difference_slope(kernel, lo=None, hi=None, step=None):
    """Scan the kernel profile K(x) over [lo, hi] and return the largest
    finite-difference slope |K(x + step) - K(x)| / step.

    Defaults scan [-6 sigma, 6 sigma] with step 1e-4 sigma.

    :param kernel: a GaussianKernel
    :param lo: (float) lower end of the scan
    :param hi: (float) upper end of the scan
    :param step: (float) grid spacing
    :return: (float) the maximum slope found
    """
    sigma = kernel.sigma
    lo = -6.0 * sigma if lo is None else lo
    hi = 6.0 * sigma if hi is None else hi
    step = 1e-4 * sigma if step is None else step
    if not (hi > lo and step > 0):
        raise ContractError('scan needs hi > lo and step > 0')
    n = int(math.floor((hi - lo) / step)) + 1
    x = lo + step * np.arange(n)
    k = kernel.profile(x)
    return float(np.max(np.abs(np.diff(k))) / step)
