"""Per-cell LRA-MMSE filters and the closed-form AGC design.

Each RRH ``l`` designs a filter ``W_l`` for its own users from the signals of
its ``N_R`` antennas, then the AGC gains ``g_l`` that minimize the
Bussgang-model MSE with ``W_l`` held fixed.  The gains of all RRHs form the
cluster AGC matrix ``G`` used by the central unit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg, optimize

from .covariance import (build_distortion_covariances, build_signal_covariances,
                         hermitian_right_solve, nondiag)
from .quantizer import ADC_SCALE, QuantizerModel

log = logging.getLogger(__name__)

#: Non-positive AGC gains are clamped to this fraction of the largest gain.
GAIN_FLOOR = 1e-6


def calibration_factor(b: int) -> float:
    """sqrt(b) / 2, the clipping calibration of the AGC."""
    return np.sqrt(b) / 2


def lra_mmse_filter(R_xy, R_yy, rho_q):
    """W = R_xy (R_yy - rho_q nondiag(R_yy))^-1."""
    return hermitian_right_solve(R_xy, R_yy - rho_q * nondiag(R_yy))


def clipping_factor(R_yy, R_yq, R_qq, b, N_R):
    """alpha = sqrt(b)/2 * sqrt(tr(R_yy + R_yq + R_yq^H + R_qq) / N_R)."""
    tr = np.trace(R_yy + R_yq + R_yq.conj().T + R_qq).real
    if tr < 0:
        raise ValueError(f"negative received power trace {tr}")
    return calibration_factor(b) * np.sqrt(tr / N_R)


def agc_gains(W, R_xy, R_yy, R_yq, alpha, floor=GAIN_FLOOR):
    """Closed-form AGC gains for a fixed filter ``W`` and clipping ``alpha``.

    Solves the stationarity condition ``M g = rhs`` of
    E||x - W(alpha diag(g) y + q)||^2 in ``g``.  If some entries come out
    below ``floor / alpha``, the cost is instead minimized exactly over
    ``g >= floor / alpha``, so the result stays a true minimizer.
    """
    if alpha <= 0:
        raise ValueError("clipping factor must be positive")
    ones = np.ones(W.shape[0])
    M = (W.T @ W.conj()) * R_yy + (W.conj().T @ W) * R_yy.T
    rhs = (2 / alpha) * (np.real((R_xy.T * W.conj().T) @ ones)
                         - np.real((W.T * (R_yq @ W.conj().T)) @ ones))
    # M is Hermitian PSD; its real part carries the stationarity equations
    M = M.real
    g = _solve_psd(M, rhs)
    lower = floor / alpha
    if np.all(np.isfinite(g)) and g.min() >= lower:
        return g
    log.info("AGC gains below %g; solving the bounded problem", lower)
    return bounded_gains(M, rhs, lower)


def bounded_gains(M, rhs, lower):
    """argmin of g^T M g / 2 - rhs^T g over g >= lower, for PSD ``M``.

    Written as the least-squares problem ||A g - c|| with ``A^T A = M`` and
    ``A^T c = rhs`` and solved by bounded-variable least squares.
    """
    lam, V = linalg.eigh(M)
    keep = lam > lam.max() * 1e-13
    A = np.sqrt(lam[keep])[:, None] * V[:, keep].T
    c = (V[:, keep].T @ rhs) / np.sqrt(lam[keep])
    res = optimize.lsq_linear(A, c, bounds=(lower, np.inf), method="bvls", tol=1e-14)
    return res.x


def _solve_psd(M, rhs):
    try:
        return linalg.solve(M, rhs, assume_a="sym")
    except (linalg.LinAlgError, ValueError):
        n = M.shape[0]
        ridge = 1e-12 * abs(np.trace(M)) / n or 1e-12
        try:
            return linalg.solve(M + ridge * np.eye(n), rhs, assume_a="sym")
        except linalg.LinAlgError as exc:
            raise linalg.LinAlgError("AGC bracket matrix is singular") from exc


def clamp_gains(g, floor=GAIN_FLOOR, fallback=1.0):
    g = np.asarray(g, dtype=float)
    top = g.max(initial=0.0)
    if not np.isfinite(top) or top <= 0:
        log.warning("AGC gains all non-positive; using uniform gain %g", fallback)
        return np.full_like(g, fallback)
    bad = g < floor * top
    if bad.any():
        log.info("clamped %d of %d AGC gains", bad.sum(), g.size)
        g = np.where(bad, floor * top, g)
    return g


def standard_agc_gains(R_yy):
    """Per-antenna gains bringing every ADC input to the grid's design power."""
    p = np.real(np.diag(R_yy))
    return np.sqrt(2.0 * ADC_SCALE**2 / p)


def gain_covariances(R_xy, R_yy, rho_q, gain):
    """(R_xr, R_rr) of ``r = diag(gain) y + q`` with ``q`` following the
    Bussgang statistics of the unscaled ``y``."""
    e = np.asarray(gain, dtype=float)
    R_xq, R_yq, R_qq = build_distortion_covariances(R_yy, R_xy, rho_q)
    R_xr = R_xy * e[None, :] + R_xq
    DR = e[:, None] * R_yq
    R_rr = e[:, None] * R_yy * e[None, :] + DR + DR.conj().T + R_qq
    return R_xr, R_rr


def bussgang_mse(W, R_xy, R_yy, rho_q, gain, sigma_x2=1.0):
    """Model MSE E||x - W(diag(gain) y + q)||^2 (``gain`` = alpha * g)."""
    R_xr, R_rr = gain_covariances(R_xy, R_yy, rho_q, gain)
    n = W.shape[0]
    val = sigma_x2 * n - 2 * np.real(np.trace(W @ R_xr.conj().T)) \
        + np.real(np.trace(W @ R_rr @ W.conj().T))
    return float(val)


def filter_for_gain(R_xy, R_yy, rho_q, gain):
    """Wiener filter minimizing :func:`bussgang_mse` for fixed ``gain``."""
    R_xr, R_rr = gain_covariances(R_xy, R_yy, rho_q, gain)
    return hermitian_right_solve(R_xr, R_rr)


@dataclass
class CellDesign:
    W: np.ndarray          # (K*N_T, N_R)
    g: np.ndarray          # (N_R,)
    alpha: float
    mse_history: list = field(default_factory=list)


@dataclass
class ReceiverDesign:
    cells: list
    G: np.ndarray          # diagonal of the cluster AGC matrix, (L*N_R,)
    beta_cal: float
    rho_q: float

    @property
    def W(self):
        return [c.W for c in self.cells]

    @property
    def g(self):
        return [c.g for c in self.cells]

    @property
    def alpha(self):
        return [c.alpha for c in self.cells]

    @property
    def G_matrix(self):
        return np.diag(self.G)

    def save(self, path):
        arrays = {"G": self.G, "alpha": np.array(self.alpha),
                  "meta": np.array([self.beta_cal, self.rho_q])}
        for l, c in enumerate(self.cells):
            arrays[f"W_{l}"] = c.W
            arrays[f"g_{l}"] = c.g
        np.savez(Path(path), **arrays)


def design_cell(H_l, own, sigma_n2, quantizer: QuantizerModel, alt_iterations=1):
    """AGC + LRA-MMSE design for one RRH.

    ``H_l`` is the channel from all cluster users to this RRH, ``own`` selects
    the columns of the RRH's own streams.  With ``alt_iterations = 0`` the
    AGC is disabled (unit gains).
    """
    rho = quantizer.rho_q
    bits = quantizer.bits
    N_R = H_l.shape[0]
    R_yy, R_xy = build_signal_covariances(H_l, sigma_n2, own)
    _, R_yq, R_qq = build_distortion_covariances(R_yy, R_xy, rho)
    W = lra_mmse_filter(R_xy, R_yy, rho)
    alpha = clipping_factor(R_yy, R_yq, R_qq, bits, N_R)
    ones = np.ones(N_R)
    history = [bussgang_mse(W, R_xy, R_yy, rho, ones)]
    if alt_iterations == 0:
        return CellDesign(W=W, g=ones, alpha=alpha, mse_history=history)
    for it in range(alt_iterations):
        if it:
            # the model cost depends on alpha and g only through alpha * g
            W = filter_for_gain(R_xy, R_yy, rho, alpha * g)
            history.append(bussgang_mse(W, R_xy, R_yy, rho, alpha * g))
        g = agc_gains(W, R_xy, R_yy, R_yq, alpha)
        history.append(bussgang_mse(W, R_xy, R_yy, rho, alpha * g))
    return CellDesign(W=W, g=g, alpha=alpha, mse_history=history)


def joint_design(channel, quantizer: QuantizerModel, sigma_n2: float,
                 alt_iterations: int = 1) -> ReceiverDesign:
    """Design every RRH of the cluster and assemble ``G``."""
    cells = [design_cell(channel.cell_view(l), channel.cols(l), sigma_n2, quantizer,
                         alt_iterations)
             for l in range(channel.L)]
    G = np.concatenate([c.g for c in cells])
    return ReceiverDesign(cells=cells, G=G, beta_cal=calibration_factor(quantizer.bits),
                          rho_q=quantizer.rho_q)
