"""Uniform symmetric mid-riser quantizer and its Gaussian distortion factor.

The step ``delta`` is designed for a zero-mean, unit-variance Gaussian input
and is scaled by the input standard deviation at the point of use.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.stats import norm

from .scenario import FR_BITS, MAX_QUANTIZED_BITS


#: Per-real-dimension scale of the ADC grid in the receive chain.  The grid is
#: sized for a complex input of unit power, i.e. variance 1/2 per dimension.
ADC_SCALE = 1 / np.sqrt(2)


def _check_bits(b):
    if not (isinstance(b, (int, np.integer)) and 1 <= b <= MAX_QUANTIZED_BITS):
        raise ValueError(f"bit depth must be an integer in [1, {MAX_QUANTIZED_BITS}], got {b!r}")


def gaussian_mse(delta: float, b: int) -> float:
    """Mean squared error of the ``b``-bit mid-riser quantizer with step
    ``delta`` on a unit-variance Gaussian input (granular + overload)."""
    n = 2 ** (b - 1)
    k = np.arange(1, n + 1)
    label = (k - 0.5) * delta
    lo = (k - 1) * delta
    hi = np.append(k[:-1] * delta, np.inf)
    p_lo, p_hi = norm.cdf(lo), norm.cdf(hi)
    f_lo, f_hi = norm.pdf(lo), norm.pdf(hi)
    xf_hi = np.zeros_like(hi)
    xf_hi[:-1] = hi[:-1] * f_hi[:-1]
    mass = p_hi - p_lo
    # int_lo^hi (y - c)^2 phi(y) dy, using int y^2 phi = [Phi - y phi], int y phi = [-phi]
    cell = mass - (xf_hi - lo * f_lo) - 2 * label * (f_lo - f_hi) + label**2 * mass
    return float(2 * cell.sum())


def gaussian_moments(delta, b: int):
    """Bussgang gain ``E[z Q(z)]`` and output power ``E[Q(z)^2]`` of the
    ``b``-bit quantizer with step ``delta`` (array allowed) on a standard
    normal ``z``.

    At the optimal step both equal ``1 - rho_q``.
    """
    delta = np.asarray(delta, dtype=float)
    n = 2 ** (b - 1)
    k = np.arange(1, n + 1)
    d = delta[..., None]
    label = (k - 0.5) * d
    lo = (k - 1) * d
    hi = np.concatenate([k[:-1] * d, np.full(delta.shape + (1,), np.inf)], axis=-1)
    mass = norm.cdf(hi) - norm.cdf(lo)
    dens = norm.pdf(lo) - norm.pdf(hi)
    return 2 * (label * dens).sum(-1), 2 * (label**2 * mass).sum(-1)


#: Odd Hermite orders kept in :func:`hermite_coefficients`.
HERMITE_ORDERS = 2 * np.arange(128) + 1


def hermite_coefficients(delta, b: int, n_max: int = int(HERMITE_ORDERS[-1])):
    """Odd-order coefficients ``c_n = E[Q(z) h_n(z)]`` of the quantizer with
    step ``delta`` (array allowed) on a standard normal ``z``.

    ``h_n = He_n / sqrt(n!)`` are the orthonormal probabilists' Hermite
    polynomials.  Since ``Q`` is a staircase with jumps of ``delta`` at the
    thresholds ``t_k``, ``c_n = delta * sum_k phi(t_k) h_(n-1)(t_k) / sqrt(n)``.
    For jointly Gaussian unit inputs with correlation ``c``,
    ``E[Q(u) Q(v)] = sum_n c_n(u) c_n(v) c^n``.  Returns shape
    ``delta.shape + (n_max // 2 + 1,)``; even orders vanish by symmetry.
    """
    delta = np.asarray(delta, dtype=float)
    half = 2 ** (b - 1)
    k = np.arange(-(half - 1), half)
    t = delta[..., None] * k
    out = np.empty(delta.shape + (n_max // 2 + 1,))
    # run the three-term recurrence on phi-weighted values, which stay bounded
    u_prev, u = np.zeros_like(t), delta[..., None] * norm.pdf(t)      # m = -1, 0
    for m in range(n_max):
        if m % 2 == 0:
            out[..., m // 2] = u.sum(-1) / np.sqrt(m + 1)
        u_prev, u = u, (t * u - np.sqrt(m) * u_prev) / np.sqrt(m + 1)
    return out


@functools.lru_cache(maxsize=None)
def optimal_step(b: int) -> float:
    """Step size minimizing the Gaussian MSE of the ``b``-bit quantizer.

    The MSE is smooth in the step and its derivative is ``-2 E[r q] / delta``,
    so the minimizer is the root of ``E[y Q(y)] - E[Q(y)^2]``.  Root finding
    on this condition is accurate to machine precision, unlike a search on
    the flat MSE itself.
    """
    _check_bits(b)
    # the optimum sits near 2.7 * sqrt(b) * 2**-b; bracket generously around it
    guess = 2.7 * np.sqrt(b) * 2.0**-b

    def stationarity(delta):
        gain, power = gaussian_moments(delta, b)
        return float(gain - power)

    return float(optimize.brentq(stationarity, 0.3 * guess, 1.8 * guess, xtol=1e-15 * guess,
                                 rtol=4 * np.finfo(float).eps))


@functools.lru_cache(maxsize=None)
def distortion_factor(b: int) -> float:
    """rho_q = E[q^2] / E[y^2] for a unit-variance Gaussian at the optimal step.

    ``b = 16`` denotes the full-resolution bypass and returns 0.
    """
    if b == FR_BITS:
        return 0.0
    _check_bits(b)
    return gaussian_mse(optimal_step(b), b)


@dataclass(frozen=True)
class QuantizerModel:
    bits: int
    delta: float
    rho_q: float
    bypass: bool = False

    @classmethod
    def for_bits(cls, b: int) -> "QuantizerModel":
        """Optimal-step quantizer for ``b`` bits; ``b = 16`` gives the bypass."""
        if b == FR_BITS:
            return cls(bits=FR_BITS, delta=0.0, rho_q=0.0, bypass=True)
        return cls(bits=int(b), delta=optimal_step(b), rho_q=distortion_factor(b))

    @property
    def label_count(self) -> int:
        return 2**self.bits

    @property
    def saturation(self) -> float:
        """Modulus of the outermost label for a unit-scale input."""
        return (2 ** (self.bits - 1) - 0.5) * self.delta

    def labels(self) -> np.ndarray:
        k = np.arange(1, 2 ** (self.bits - 1) + 1)
        pos = (k - 0.5) * self.delta
        return np.concatenate([-pos[::-1], pos])


def quantize(y, q: QuantizerModel, input_scale=1.0):
    """Quantize real samples ``y`` elementwise.

    ``input_scale`` (scalar or broadcastable array) is the standard deviation
    the unit-variance design is stretched to.  Values on a riser go to the
    label above.
    """
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("quantizer input must be finite")
    if q.bypass:
        return y.copy()
    step = q.delta * np.asarray(input_scale, dtype=float)
    if np.any(step <= 0):
        raise ValueError("input_scale must be positive")
    top = 2 ** (q.bits - 1) - 1
    idx = np.clip(np.floor(y / step), -top - 1, top)
    return (idx + 0.5) * step


def quantize_scalar(y: float, q: QuantizerModel, input_scale: float = 1.0) -> float:
    return float(quantize(y, q, input_scale))


def quantize_vector(y, q: QuantizerModel, per_dim_scales=1.0):
    """Quantize real and imaginary parts of complex ``y`` independently.

    ``per_dim_scales`` holds one scale per row (antenna) of ``y``; a scalar
    applies to all rows.
    """
    y = np.asarray(y)
    scales = np.asarray(per_dim_scales, dtype=float)
    if scales.ndim:
        if scales.shape[0] != y.shape[0]:
            raise ValueError(f"got {scales.shape[0]} scales for {y.shape[0]} rows")
        scales = scales.reshape((-1,) + (1,) * (y.ndim - 1))
    if q.bypass:
        return y.astype(complex)
    return quantize(y.real, q, scales) + 1j * quantize(y.imag, q, scales)


def step_table(bits=range(1, MAX_QUANTIZED_BITS + 1)):
    """Rows of ``(b, delta, rho_q)`` for the given bit depths."""
    return [(b, optimal_step(b), distortion_factor(b)) for b in bits]
