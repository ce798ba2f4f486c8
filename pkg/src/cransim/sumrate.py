"""Closed-form per-stage SINR and achievable sum rate of the SIC receiver.

At stage ``a`` the filter row ``w`` recovers stream ``Phi(a)`` from
``r = Q(G y^(a))``.  The desired power is ``sigma_x^2 |w G h|^2`` and the
interference-plus-noise power collects the residual streams, the AWGN and the
quantization distortion.  Three versions of the denominator are provided:

``"paper"``
    Term-by-term closed form in which the distortion statistics refer to the
    analog signal ``y`` (the cross terms pair ``w G H`` with ``w H`` and the
    distortion quadratic form uses ``R_yy``).
``"consistent"``
    The same decomposition with the distortion statistics taken on the
    quantizer input ``G y``, which is what ``Q(G y)`` actually sees.
``"level_aware"``
    ``E|w r - w G h x|^2`` evaluated from the per-antenna distortion model
    of :func:`~cransim.covariance.build_level_aware_covariances`; needs the
    quantizer and the stage's analog channel.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .covariance import build_level_aware_covariances, build_signal_covariances, nondiag
from .quantizer import ADC_SCALE, quantize_vector

FORMS = ("paper", "consistent", "level_aware")


def _row(w):
    w = np.asarray(w)
    if w.ndim != 1:
        raise ValueError("filter must be a single row")
    return w


def desired_power(w, G, h, sigma_x2=1.0) -> float:
    """sigma_x^2 |w G h|^2."""
    w, g, h = _row(w), np.asarray(G), np.asarray(h)
    if not (w.shape[0] == g.shape[0] == h.shape[0]):
        raise ValueError(f"shapes {w.shape}, {g.shape}, {h.shape} do not agree")
    return float(sigma_x2 * abs(np.sum(w * g * h)) ** 2)


def interference_noise_power(w, G, cell_channels, R_yy, rho_q, sigma_n2, sigma_x2=1.0,
                             form="paper") -> float:
    """Interference-plus-noise power seen by filter row ``w``.

    Parameters
    ----------
    w : (N,) complex
        Filter row of the current stage.
    G : (N,) real
        AGC gains.
    cell_channels : sequence of (N, m_j) arrays
        Columns of the streams still undetected after the current one, grouped
        by home cell.  The current stream's column is already removed.
    R_yy : (N, N)
        Covariance of the stage's analog signal, current stream included.
    rho_q : float
    sigma_n2 : float
    form : {"paper", "consistent"}

    Raises
    ------
    ValueError
        If the result is not positive, which only happens for inconsistent
        inputs.
    """
    if form not in FORMS[:2]:
        raise ValueError(f"unknown form {form!r}; expected one of {FORMS[:2]}")
    w, g = _row(w), np.asarray(G, dtype=float)
    n = w.shape[0]
    if g.shape != (n,) or R_yy.shape != (n, n):
        raise ValueError("filter, gains and covariance disagree in size")
    wg = w * g
    total = 0.0
    if form == "paper":
        for Hj in cell_channels:
            Hj = np.asarray(Hj).reshape(n, -1)
            a, c = wg @ Hj, w @ Hj
            total += sigma_x2 * np.vdot(a, a).real
            total -= rho_q * sigma_x2 * 2 * np.vdot(a, c).real
        total += sigma_n2 * np.vdot(wg, wg).real
        total -= rho_q * sigma_n2 * 2 * np.vdot(wg, w).real
        R = R_yy
    else:
        for Hj in cell_channels:
            a = wg @ np.asarray(Hj).reshape(n, -1)
            total += (1 - 2 * rho_q) * sigma_x2 * np.vdot(a, a).real
        total += (1 - 2 * rho_q) * sigma_n2 * np.vdot(wg, wg).real
        R = g[:, None] * R_yy * g[None, :]
    R_qq = rho_q * (R - (1 - rho_q) * nondiag(R))
    total += np.real(w @ R_qq @ w.conj())
    if not total > 0:
        raise ValueError(f"interference-plus-noise power {total} is not positive")
    return float(total)


@dataclass
class RateBreakdown:
    """Per-stage desired power, interference-plus-noise power and rate."""
    streams: list = field(default_factory=list)
    upsilon: list = field(default_factory=list)
    gamma: list = field(default_factory=list)
    rates: list = field(default_factory=list)

    @property
    def total(self) -> float:
        return float(sum(self.rates))

    def append(self, stream, upsilon, gamma):
        rate = 0.0 if upsilon == 0 else float(np.log2(1 + upsilon / gamma))
        self.streams.append(int(stream))
        self.upsilon.append(float(upsilon))
        self.gamma.append(float(gamma))
        self.rates.append(rate)

    def to_csv(self, path):
        path = Path(path)
        try:
            with path.open("w", newline="") as f:
                out = csv.writer(f, lineterminator="\n")
                out.writerow(["stage", "stream", "upsilon", "gamma", "rate"])
                for a, row in enumerate(zip(self.streams, self.upsilon, self.gamma,
                                            self.rates), start=1):
                    out.writerow([a, row[0]] + [repr(v) for v in row[1:]])
        except OSError as exc:
            raise OSError(f"cannot write rate breakdown to {path}: {exc}") from exc


def level_aware_gamma(w, G, H_active, desired, quantizer, sigma_n2, sigma_x2=1.0,
                      model=None) -> float:
    """``E|w r - w G h x|^2`` under the per-antenna distortion model.

    ``H_active`` holds every column still present at this stage and
    ``desired`` indexes the current stream within it.  ``model`` may pass
    precomputed ``(R_xr, R_rr)`` of the stage.
    """
    w, g = _row(w), np.asarray(G, dtype=float)
    H_active = np.asarray(H_active)
    if model is None:
        R_yy = sigma_x2 * H_active @ H_active.conj().T + sigma_n2 * np.eye(len(w))
        model = build_level_aware_covariances(R_yy, sigma_x2 * H_active.conj().T, g,
                                              quantizer)
    R_xr, R_rr = model
    c = np.sum(w * g * H_active[:, desired])
    val = (np.real(w @ R_rr @ w.conj()) - 2 * np.real(np.vdot(R_xr[desired], w) * np.conj(c))
           + sigma_x2 * abs(c) ** 2)
    if not val > 0:
        raise ValueError(f"interference-plus-noise power {val} is not positive")
    return float(val)


def sum_rate(chain, stream_cells, form="paper", sigma_x2=1.0) -> RateBreakdown:
    """Per-stage rates of a SIC receiver chain for one channel realization.

    ``chain`` is a prepared SIC :class:`~cransim.detection.ReceiverChain`;
    ``stream_cells`` gives the home cell of every column of its channel.
    ``form`` selects the denominator (see the module docstring).
    """
    if form not in FORMS:
        raise ValueError(f"unknown form {form!r}; expected one of {FORMS}")
    if chain.bank is None:
        raise ValueError("sum rate needs a successive-cancellation receiver")
    H, G = chain.H, np.asarray(chain.G, dtype=float)
    cells = np.asarray(stream_cells)
    order = list(chain.order)
    out = RateBreakdown()
    for a, st in enumerate(chain.bank):
        active = order[a:]
        R_yy, _ = build_signal_covariances(H[:, active], chain.sigma_n2)
        rest = np.array(order[a + 1:], dtype=int)
        groups = [H[:, rest[cells[rest] == c]] for c in np.unique(cells[rest])]
        ups = desired_power(st.w, G, H[:, st.stream], sigma_x2)
        if not np.any(st.w):
            # a null filter (e.g. a zero channel) carries no rate
            out.append(st.stream, 0.0, 0.0)
            continue
        if form == "level_aware":
            # the filter bank's stage covariances are reusable for unit-power symbols
            reuse = chain.level_aware and sigma_x2 == 1.0 and st.R_rr is not None
            gam = level_aware_gamma(st.w, G, H[:, active], 0, chain.quantizer,
                                    chain.sigma_n2, sigma_x2,
                                    model=(st.R_xr, st.R_rr) if reuse else None)
        else:
            gam = interference_noise_power(st.w, G, groups, R_yy, chain.filter_rho,
                                           chain.sigma_n2, sigma_x2, form)
        out.append(st.stream, ups, gam)
    return out


def monte_carlo_gamma(w, G, H_active, desired, quantizer, sigma_n2, rng, draws=10**6,
                      batch=10**5) -> float:
    """Sampled E|w Q(G y) - w G h x|^2 with Gaussian symbols.

    ``H_active`` holds the stage's columns, ``desired`` indexes the current
    stream within them.
    """
    w, g = _row(w), np.asarray(G, dtype=float)
    n, m = H_active.shape
    h = H_active[:, desired]
    coef = np.sum(w * g * h)
    acc, done = 0.0, 0
    while done < draws:
        k = min(batch, draws - done)
        x = (rng.standard_normal((m, k)) + 1j * rng.standard_normal((m, k))) / np.sqrt(2)
        noise = np.sqrt(sigma_n2 / 2) * (rng.standard_normal((n, k))
                                         + 1j * rng.standard_normal((n, k)))
        r = quantize_vector(g[:, None] * (H_active @ x + noise), quantizer, ADC_SCALE)
        err = w @ r - coef * x[desired]
        acc += np.sum(np.abs(err) ** 2)
        done += k
    return float(acc / draws)
