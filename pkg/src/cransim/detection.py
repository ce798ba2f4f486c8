"""Modulation, stream ordering and the central-unit detectors.

Detection works on the analog cluster signal ``y`` because successive
cancellation removes each detected stream before the residual is passed
through the AGC and the ADCs again: ``r^(a) = Q(G y^(a))``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .covariance import (build_agc_covariances, build_level_aware_covariances,
                         build_signal_covariances, hermitian_right_solve)
from .quantizer import ADC_SCALE, QuantizerModel, quantize_vector
from .receiver import ReceiverDesign, joint_design, standard_agc_gains
from .scenario import FR_BITS, Modulation, Receiver

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Modulation
# ---------------------------------------------------------------------------

def _gray_pam(bits):
    # 3GPP-style recursive Gray PAM: first bit is the sign
    if bits.shape[-1] == 1:
        return 1 - 2 * bits[..., 0]
    rest = bits[..., 1:]
    return (1 - 2 * bits[..., 0]) * (2 ** rest.shape[-1] - _gray_pam(rest))


@dataclass(frozen=True)
class ModulationScheme:
    """Gray-mapped square constellation with unit average energy.

    ``points[n]`` is the point whose bit label, read most significant bit
    first, is the integer ``n``.
    """
    name: str
    bits_per_symbol: int
    points: np.ndarray = field(repr=False)

    @classmethod
    def from_name(cls, name) -> "ModulationScheme":
        name = Modulation(name)
        if name is Modulation.QPSK:
            m = 2
        elif name is Modulation.QAM16:
            m = 4
        else:
            raise ValueError(f"{name.value} has no finite constellation")
        labels = np.arange(2**m)
        bits = (labels[:, None] >> np.arange(m - 1, -1, -1)) & 1
        # even positions drive the real axis, odd positions the imaginary axis
        pts = _gray_pam(bits[:, 0::2]) + 1j * _gray_pam(bits[:, 1::2])
        pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
        return cls(name=name.value, bits_per_symbol=m, points=pts)

    def label_bits(self, labels):
        m = self.bits_per_symbol
        return (np.asarray(labels)[..., None] >> np.arange(m - 1, -1, -1)) & 1

    def modulate(self, bits):
        """Map a bit array (last axis a multiple of bits-per-symbol) to symbols."""
        bits = np.asarray(bits, dtype=np.int64)
        m = self.bits_per_symbol
        if bits.shape[-1] % m:
            raise ValueError(f"bit length {bits.shape[-1]} is not a multiple of {m}")
        groups = bits.reshape(bits.shape[:-1] + (-1, m))
        labels = groups @ (1 << np.arange(m - 1, -1, -1))
        return self.points[labels]

    def slice_labels(self, z):
        """Label of the nearest point; ties go to the smallest label."""
        z = np.asarray(z)
        d = np.abs(z[..., None] - self.points) ** 2
        return np.argmin(d, axis=-1)

    def slice(self, z):
        return self.points[self.slice_labels(z)]

    def demodulate(self, z):
        bits = self.label_bits(self.slice_labels(z))
        return bits.reshape(bits.shape[:-2] + (-1,))


# ---------------------------------------------------------------------------
# Ordering and filters
# ---------------------------------------------------------------------------

def rank_streams(H_eff) -> np.ndarray:
    """Stream indices by descending column norm; ties keep ascending index."""
    norms = np.linalg.norm(H_eff, axis=0)
    return np.argsort(-norms, kind="stable")


def stage_filter(H_active, G, rho_q, sigma_n2, quantizer=None):
    """LRA-MMSE rows for the active streams of a stage, plus the model
    covariances they were computed from.

    With ``quantizer`` given, the distortion is modeled per antenna from the
    level each ADC actually sees; otherwise the common factor ``rho_q`` is
    applied to ``G R_yy G``.
    """
    R_yy, R_xy = build_signal_covariances(H_active, sigma_n2)
    if quantizer is None:
        R_xr, R_rr = build_agc_covariances(R_yy, R_xy, G, rho_q)
    else:
        R_xr, R_rr = build_level_aware_covariances(R_yy, R_xy, G, quantizer)
    return hermitian_right_solve(R_xr, R_rr), R_xr, R_rr, R_yy


@dataclass
class StageFilter:
    stage: int
    stream: int
    w: np.ndarray        # (L*N_R,) filter row applied to r^(a)
    sinr: float          # model post-filter SINR
    R_xr: np.ndarray | None = field(default=None, repr=False)   # stage model covariances
    R_rr: np.ndarray | None = field(default=None, repr=False)


def sic_filter_bank(H, G, rho_q, sigma_n2, order, quantizer=None) -> list:
    """Per-stage filter rows for static ordering ``order``."""
    bank = []
    for a, s in enumerate(order):
        W, R_xr, R_rr, _ = stage_filter(H[:, order[a:]], G, rho_q, sigma_n2, quantizer)
        w = W[0]
        gain = abs(w @ R_xr[0].conj()) ** 2
        total = np.real(w @ R_rr @ w.conj())
        sinr = gain / max(total - gain, np.finfo(float).tiny)
        bank.append(StageFilter(stage=a + 1, stream=int(s), w=w, sinr=float(sinr),
                                R_xr=R_xr, R_rr=R_rr))
        log.debug("stage %d stream %d model sinr %.4g", a + 1, s, sinr)
    return bank


# ---------------------------------------------------------------------------
# Detectors
# ---------------------------------------------------------------------------

def adc(y, G, quantizer):
    """AGC + ADC front end ``Q(G y)`` on the fixed grid of step
    ``delta * ADC_SCALE``."""
    return quantize_vector(np.asarray(G)[:, None] * y, quantizer, ADC_SCALE)


def sic_detect(y, H, G, quantizer: QuantizerModel, bank, scheme: ModulationScheme,
               cancel=True):
    """Successive detection of every stream.

    ``y`` holds analog cluster receive vectors as columns.  Returns the
    detected symbols with rows in original stream order.  With
    ``cancel=False`` nothing is subtracted, which reduces to per-stage linear
    filtering of ``Q(G y)``.
    """
    if len(bank) != H.shape[1]:
        raise ValueError(f"{len(bank)} stages for {H.shape[1]} streams")
    y_res = np.array(y, dtype=complex)
    x_hat = np.zeros((H.shape[1], y_res.shape[1]), dtype=complex)
    r = adc(y_res, G, quantizer)
    for st in bank:
        x_hat[st.stream] = scheme.slice(st.w @ r)
        if cancel:
            y_res -= np.outer(H[:, st.stream], x_hat[st.stream])
            r = adc(y_res, G, quantizer)
    return x_hat


def linear_detect(r, W, scheme: ModulationScheme):
    r = np.asarray(r)
    if W.shape[1] != r.shape[0]:
        raise ValueError(f"filter has {W.shape[1]} taps for {r.shape[0]} antennas")
    return scheme.slice(W @ r)


# ---------------------------------------------------------------------------
# Receiver chains
# ---------------------------------------------------------------------------

@dataclass
class ReceiverChain:
    """Everything one receiver variant needs to detect a trial's packets."""
    receiver: Receiver
    quantizer: QuantizerModel
    G: np.ndarray
    filter_rho: float
    H: np.ndarray
    sigma_n2: float
    order: np.ndarray | None = None
    bank: list | None = None
    W: np.ndarray | None = None
    design: ReceiverDesign | None = None
    level_aware: bool = False

    def detect(self, y, scheme):
        if self.receiver.sic:
            return sic_detect(y, self.H, self.G, self.quantizer, self.bank, scheme)
        return linear_detect(adc(y, self.G, self.quantizer), self.W, scheme)


def prepare_receiver(receiver, channel, sigma_n2, bits, alt_iterations=1) -> ReceiverChain:
    """Build the AGC, quantizer and filters of ``receiver`` for one trial."""
    receiver = Receiver(receiver)
    H = channel.H_tilde
    n_ant = H.shape[0]
    design = None
    if receiver.full_resolution:
        quantizer = QuantizerModel.for_bits(FR_BITS)
    else:
        quantizer = QuantizerModel.for_bits(bits)
    rho = quantizer.rho_q
    level_aware = False
    if receiver in (Receiver.AGC_LRA_MMSE, Receiver.AGC_LRA_MMSE_SIC):
        design = joint_design(channel, quantizer, sigma_n2, max(alt_iterations, 1))
        G = design.G
        # the gains move each antenna away from the grid's design level
        level_aware = not quantizer.bypass
    elif receiver is Receiver.STD_AGC_MMSE:
        R_yy, _ = build_signal_covariances(H, sigma_n2)
        G = standard_agc_gains(R_yy)
        rho = 0.0   # standard MMSE ignores the quantizer
    else:
        G = np.ones(n_ant)
    chain = ReceiverChain(receiver=receiver, quantizer=quantizer, G=G, filter_rho=rho,
                          H=H, sigma_n2=sigma_n2, design=design, level_aware=level_aware)
    model = quantizer if level_aware else None
    if receiver.sic:
        chain.order = rank_streams(G[:, None] * H)
        chain.bank = sic_filter_bank(H, G, rho, sigma_n2, chain.order, model)
    else:
        chain.W = stage_filter(H, G, rho, sigma_n2, model)[0]
    return chain
