"""Second-order statistics of the Bussgang-linearized quantized receiver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .quantizer import ADC_SCALE, QuantizerModel, gaussian_moments, hermite_coefficients


def nondiag(A: np.ndarray) -> np.ndarray:
    return A - np.diag(np.diag(A))


def _check_rho(rho_q):
    if not 0 <= rho_q < 1:
        raise ValueError(f"rho_q must lie in [0, 1), got {rho_q}")


def hermitian_right_solve(B: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Return ``B @ inv(A)`` for Hermitian positive definite ``A``.

    Falls back to a ridge of ``1e-12 * tr(A) / N`` if the Cholesky
    factorization fails.
    """
    A = np.asarray(A)
    n = A.shape[0]
    try:
        c = linalg.cho_factor(A, lower=True, check_finite=False)
    except linalg.LinAlgError:
        ridge = 1e-12 * abs(np.trace(A).real) / n
        if ridge == 0:
            ridge = 1e-12
        try:
            c = linalg.cho_factor(A + ridge * np.eye(n), lower=True, check_finite=False)
        except linalg.LinAlgError as exc:
            raise linalg.LinAlgError("matrix not positive definite even after ridge") from exc
    return linalg.cho_solve(c, np.asarray(B).conj().T, check_finite=False).conj().T


@dataclass(frozen=True)
class CovarianceSet:
    R_yy: np.ndarray
    R_xy: np.ndarray
    R_xq: np.ndarray
    R_yq: np.ndarray
    R_qq: np.ndarray
    R_xr: np.ndarray
    R_rr: np.ndarray
    sigma_n2: float
    rho_q: float
    sigma_x2: float = 1.0


def build_signal_covariances(H: np.ndarray, sigma_n2: float, own=slice(None)):
    """Unquantized (R_yy, R_xy) at one receiver.

    ``H`` is the channel from every user the receiver hears; ``own`` selects
    the columns whose symbols are estimated (all of them by default).
    Symbols are unit-variance and independent.
    """
    if sigma_n2 <= 0:
        raise ValueError("noise variance must be positive")
    H = np.asarray(H)
    if H.ndim != 2:
        raise ValueError("channel must be a matrix")
    R_yy = H @ H.conj().T + sigma_n2 * np.eye(H.shape[0])
    R_xy = H[:, own].conj().T
    return R_yy, R_xy


def build_distortion_covariances(R_yy, R_xy, rho_q):
    """(R_xq, R_yq, R_qq) of the Bussgang model."""
    _check_rho(rho_q)
    if R_yy.shape[0] != R_yy.shape[1] or R_xy.shape[1] != R_yy.shape[0]:
        raise ValueError("inconsistent covariance shapes")
    R_xq = -rho_q * R_xy
    R_yq = -rho_q * R_yy
    R_qq = rho_q * (R_yy - (1 - rho_q) * nondiag(R_yy))
    return R_xq, R_yq, R_qq


def build_quantized_covariances(R_yy, R_xy, rho_q):
    """(R_xr, R_rr) of the quantizer output without AGC."""
    _check_rho(rho_q)
    R_xr = (1 - rho_q) * R_xy
    R_rr = (1 - rho_q) * (R_yy - rho_q * nondiag(R_yy))
    return R_xr, R_rr


def covariance_set(R_yy, R_xy, rho_q, sigma_n2) -> CovarianceSet:
    R_xq, R_yq, R_qq = build_distortion_covariances(R_yy, R_xy, rho_q)
    R_xr, R_rr = build_quantized_covariances(R_yy, R_xy, rho_q)
    return CovarianceSet(R_yy=R_yy, R_xy=R_xy, R_xq=R_xq, R_yq=R_yq, R_qq=R_qq,
                         R_xr=R_xr, R_rr=R_rr, sigma_n2=sigma_n2, rho_q=rho_q)


def as_gain_vector(G) -> np.ndarray:
    """Diagonal of an AGC matrix, given either as a vector or a diagonal matrix."""
    G = np.asarray(G)
    if G.ndim == 1:
        g = G
    elif G.ndim == 2 and G.shape[0] == G.shape[1]:
        if np.any(nondiag(G) != 0):
            raise ValueError("AGC matrix must be diagonal")
        g = np.diag(G)
    else:
        raise ValueError(f"AGC gains must be a vector or a square matrix, got shape {G.shape}")
    if np.iscomplexobj(g):
        if np.any(g.imag != 0):
            raise ValueError("AGC gains must be real")
        g = g.real
    return g.astype(float)


def build_agc_covariances(R_yy, R_xy, G, rho_q, full=False):
    """(R_xr, R_rr) for ``r = Q(G y)``.

    The distortion terms are taken on the quantizer input covariance
    ``S = G R_yy G``.  With ``full=True`` the intermediate
    ``(R_xq, R_yq, R_qq)`` are returned as well.
    """
    _check_rho(rho_q)
    g = as_gain_vector(G)
    if g.shape[0] != R_yy.shape[0]:
        raise ValueError(f"{g.shape[0]} gains for a {R_yy.shape[0]}-antenna covariance")
    S = g[:, None] * R_yy * g[None, :]
    R_xy_g = R_xy * g[None, :]
    R_xq = -rho_q * R_xy_g
    R_yq = -rho_q * S
    R_qq = rho_q * (S - (1 - rho_q) * nondiag(S))
    R_xr = R_xy_g + R_xq
    R_rr = S + R_yq + R_yq.conj().T + R_qq
    if full:
        return R_xr, R_rr, (R_xq, R_yq, R_qq)
    return R_xr, R_rr


def coupled_output_correlation(coef_i, coef_j, corr):
    """E[Q_i(y_i) Q_j(y_j)^*] / (sigma_i sigma_j) for unit-scaled complex
    Gaussian inputs with complex correlation ``corr``.

    In-phase and quadrature rails are quantized separately; each pair of
    rails is a bivariate Gaussian whose output correlation is the Hermite
    series ``sum_n c_n(i) c_n(j) x^n`` in the rail correlation ``x``.
    """
    prod = coef_i * coef_j

    def series(x):
        # odd powers only: x * poly(x**2), by Horner
        x2 = x * x
        acc = prod[..., -1] * np.ones_like(x)
        for k in range(prod.shape[-1] - 2, -1, -1):
            acc = acc * x2 + prod[..., k]
        return acc * x

    return 2 * (series(corr.real) + 1j * series(corr.imag))


def build_level_aware_covariances(R_yy, R_xy, G, quantizer: QuantizerModel,
                                  adc_scale=ADC_SCALE):
    """(R_xr, R_rr) for ``r = Q(G y)`` with a Gaussian input model per antenna.

    The ADC grid has step ``delta * adc_scale`` and sees antenna ``i`` at
    standard deviation ``sqrt(S_ii / 2)`` per real dimension,
    ``S = G R_yy G``.  ``R_xr`` follows from the per-antenna Bussgang gain at
    the relative step ``delta * adc_scale / sqrt(S_ii / 2)``, the diagonal of
    ``R_rr`` from the output power at that step, and its off-diagonal from
    the Hermite expansion of the quantizer, which keeps the correlation of
    the distortion across antennas.
    """
    g = as_gain_vector(G)
    if g.shape[0] != R_yy.shape[0]:
        raise ValueError(f"{g.shape[0]} gains for a {R_yy.shape[0]}-antenna covariance")
    S = g[:, None] * R_yy * g[None, :]
    R_xy_g = R_xy * g[None, :]
    if quantizer.bypass:
        return R_xy_g, S
    p = np.real(np.diag(S))
    if np.any(p <= 0):
        raise ValueError("quantizer input power must be positive")
    rel = quantizer.delta * adc_scale / np.sqrt(p / 2)
    gain, power = gaussian_moments(rel, quantizer.bits)
    R_xr = R_xy_g * gain[None, :]
    coef = hermite_coefficients(rel, quantizer.bits)
    amp = np.sqrt(p / 2)
    corr = S / np.sqrt(np.outer(p, p))
    R_rr = (amp[:, None] * amp[None, :]
            * coupled_output_correlation(coef[:, None, :], coef[None, :, :], corr))
    R_rr[np.diag_indices_from(R_rr)] = p * power
    return R_xr, R_rr
