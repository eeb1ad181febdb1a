"""Gaussian RBF triggering basis: densities, analytic masses, horizon.

The basis is a vector of L Gaussian bumps (mean, standard deviation in
hours). Densities are hard-truncated to zero past the horizon
``max_l(mean_l + 3 sigma_l)``; the cumulative mass saturates to the full
unit mass at the horizon so that elapsed triggers eventually account for
their complete expected offspring. The per-component mass lost to negative
lags (noticeable only when a mean sits within ~3 sigma of zero) is not
reflected or renormalized.
"""

import numpy as np

from . import kernels


class KernelBasis:
    """Immutable L-component Gaussian lag basis.

    Means must be non-negative and strictly increasing, widths strictly
    positive. Units are hours throughout.
    """

    __slots__ = ("means", "sigmas", "L", "horizon")

    def __init__(self, means, sigmas):
        means = np.asarray(means, dtype=np.float64)
        sigmas = np.asarray(sigmas, dtype=np.float64)
        if means.ndim != 1 or sigmas.ndim != 1 or means.shape != sigmas.shape:
            raise ValueError("means and sigmas must be equal-length 1-D arrays")
        if means.size < 1:
            raise ValueError("basis needs at least one component")
        if np.any(sigmas <= 0.0):
            raise ValueError("all widths must be strictly positive")
        if np.any(means < 0.0):
            raise ValueError("means must be non-negative")
        if means.size > 1 and np.any(np.diff(means) <= 0.0):
            raise ValueError("means must be strictly increasing")
        means.setflags(write=False)
        sigmas.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "sigmas", sigmas)
        object.__setattr__(self, "L", int(means.size))
        object.__setattr__(self, "horizon", float(np.max(means + 3.0 * sigmas)))

    def __setattr__(self, name, value):
        raise AttributeError("KernelBasis is immutable")

    def __repr__(self):
        pairs = ", ".join(
            f"G({m:g};{s:g})" for m, s in zip(self.means, self.sigmas)
        )
        return f"KernelBasis([{pairs}])"

    def __eq__(self, other):
        return (
            isinstance(other, KernelBasis)
            and np.array_equal(self.means, other.means)
            and np.array_equal(self.sigmas, other.sigmas)
        )

    def to_config(self):
        return {
            "kernel_means": [float(m) for m in self.means],
            "kernel_sigmas": [float(s) for s in self.sigmas],
        }

    @classmethod
    def from_config(cls, cfg):
        return cls(cfg["kernel_means"], cfg["kernel_sigmas"])


def kernel_value(basis, dt):
    """Basis densities at lag ``dt`` (hours); zero past the horizon.

    Raises ValueError for negative lags: events must be strictly ordered in
    time, so a negative lag always indicates caller error.
    """
    dt = float(dt)
    if dt < 0.0:
        raise ValueError(f"negative lag {dt}; events must be time-ordered")
    return kernels.kernel_values(
        np.array([dt]), basis.means, basis.sigmas, basis.horizon
    )[0]


def kernel_values(basis, dts):
    """Vectorized `kernel_value`: shape (n, L) for n lags."""
    dts = np.ascontiguousarray(dts, dtype=np.float64)
    if dts.size and float(np.min(dts)) < 0.0:
        raise ValueError("negative lag; events must be time-ordered")
    return kernels.kernel_values(dts, basis.means, basis.sigmas, basis.horizon)


def kernel_integral(basis, from_, to):
    """Per-component mass of the basis over the lag window [from_, to].

    Bounds at or beyond the horizon saturate to the component's full mass,
    so the integral from 0 to any point >= horizon is ~1 per component (up
    to the mass the Gaussian places left of zero).
    """
    from_ = float(from_)
    to = float(to)
    if from_ < 0.0:
        raise ValueError("lower bound must be non-negative")
    if from_ > to:
        raise ValueError(f"empty integration window: {from_} > {to}")
    cdfs = kernels.kernel_cdf(
        np.array([from_, to]), basis.means, basis.sigmas, basis.horizon
    )
    return cdfs[1] - cdfs[0]


def horizon(basis):
    """Lag beyond which triggers are discardable: max_l(mean_l + 3 sigma_l)."""
    return basis.horizon
