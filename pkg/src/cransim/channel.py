"""User drops, large-scale fading and composite cluster channels.

Stream ordering used throughout the package: the cluster symbol vector stacks
cells, each cell stacks its users, each user stacks its transmit antennas.
Rows stack RRHs, each RRH its receive antennas.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate, optimize
from scipy.stats import norm

from .scenario import SystemConfig


def rrh_positions(L: int, r_cell: float) -> np.ndarray:
    """RRH sites on a square grid with inter-site distance ``2 * r_cell``.

    Cells fill the grid row by row, ``ceil(sqrt(L))`` per row, so ``L = 4``
    gives the 2x2 layout.
    """
    cols = int(np.ceil(np.sqrt(L)))
    idx = np.arange(L)
    return 2.0 * r_cell * np.column_stack([idx % cols, idx // cols]).astype(float)


@dataclass(frozen=True)
class UserPlacement:
    positions: np.ndarray   # (L, K, 2) user coordinates in m, indexed (cell, user)
    distances: np.ndarray   # (L_rrh, L, K) distance from RRH l to user (i, u)
    shadowing: np.ndarray   # (L_rrh, L, K) linear shadow factor z

    @property
    def serving_distances(self) -> np.ndarray:
        L = self.distances.shape[0]
        return self.distances[np.arange(L), np.arange(L)]


def sample_annulus(rng, n: int, r_inner: float, r_outer: float) -> np.ndarray:
    """``n`` points uniform over the annulus area, by rejection from the square."""
    out = np.empty((0, 2))
    while len(out) < n:
        m = max(2 * (n - len(out)), 16)
        pts = rng.uniform(-r_outer, r_outer, size=(m, 2))
        rad = np.hypot(pts[:, 0], pts[:, 1])
        out = np.vstack([out, pts[(rad >= r_inner) & (rad <= r_outer)]])
    return out[:n]


def place_users(cfg: SystemConfig, rng) -> UserPlacement:
    sites = rrh_positions(cfg.L, cfg.r_cell)
    offsets = sample_annulus(rng, cfg.L * cfg.K, cfg.r_hole, cfg.r_cell)
    pos = sites[:, None, :] + offsets.reshape(cfg.L, cfg.K, 2)
    dist = np.linalg.norm(pos[None, :, :, :] - sites[:, None, None, :], axis=-1)
    shadow_db = cfg.sigma_shadow_db * rng.standard_normal(dist.shape)
    return UserPlacement(positions=pos, distances=dist, shadowing=10.0 ** (shadow_db / 10))


def large_scale_gain(d, r, gamma, z):
    """beta = z * (d / r) ** -gamma."""
    d, z = np.asarray(d, dtype=float), np.asarray(z, dtype=float)
    if np.any(d <= 0) or r <= 0 or np.any(z <= 0):
        raise ValueError("distance, radius and shadow factor must be positive")
    return z * (d / r) ** (-gamma)


@functools.lru_cache(maxsize=None)
def median_serving_gain(r_cell, r_hole, gamma, sigma_shadow_db) -> float:
    """Median of the serving-link beta for a uniform annulus drop.

    Used to put the median serving link at 0 dB for the SNR axis.
    """
    if sigma_shadow_db == 0:
        # beta is monotone in d; the median distance has d**2 halfway
        d_med = np.sqrt((r_hole**2 + r_cell**2) / 2)
        return float(large_scale_gain(d_med, r_cell, gamma, 1.0))
    def cdf(t):
        # P(beta <= t) with d**2 uniform on [r_h**2, r_c**2]
        def integrand(d):
            thr = 10 * np.log10(t) + 10 * gamma * np.log10(d / r_cell)
            p = norm.cdf(thr / sigma_shadow_db)
            return p * 2 * d / (r_cell**2 - r_hole**2)
        return integrate.quad(integrand, r_hole, r_cell, epsabs=1e-13, epsrel=1e-12)[0]

    lo, hi = r_hole, r_cell
    bracket = (float(large_scale_gain(hi, r_cell, gamma, 1.0)) * 1e-6,
               float(large_scale_gain(lo, r_cell, gamma, 1.0)) * 1e6)
    log_t = optimize.brentq(lambda s: cdf(np.exp(s)) - 0.5,
                            np.log(bracket[0]), np.log(bracket[1]), xtol=1e-13)
    return float(np.exp(log_t))


def draw_small_scale(rng, rows: int, cols: int) -> np.ndarray:
    """i.i.d. CN(0, 1) entries."""
    if rows < 1 or cols < 1:
        raise ValueError("dimensions must be positive")
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


@dataclass(frozen=True)
class ChannelRealization:
    H_tilde: np.ndarray   # (L*N_R, L*K*N_T) composite channel
    beta: np.ndarray      # (L, L, K) gain from user (i, u) to RRH l
    H_small: np.ndarray   # (L*N_R, L*K*N_T) small-scale factors
    L: int
    K: int
    N_T: int
    N_R: int

    def rows(self, l: int) -> slice:
        return slice(l * self.N_R, (l + 1) * self.N_R)

    def cols(self, i: int, u: int | None = None) -> slice:
        """Columns of user ``u`` of cell ``i`` (all users of cell ``i`` if ``u`` is None)."""
        if u is None:
            return slice(i * self.K * self.N_T, (i + 1) * self.K * self.N_T)
        start = (i * self.K + u) * self.N_T
        return slice(start, start + self.N_T)

    def block(self, l: int, i: int, u: int) -> np.ndarray:
        return self.H_tilde[self.rows(l), self.cols(i, u)]

    def cell_view(self, l: int) -> np.ndarray:
        """Channel from every cluster user to the antennas of RRH ``l``."""
        return self.H_tilde[self.rows(l)]

    @property
    def stream_cells(self) -> np.ndarray:
        """Home cell of every stream (column)."""
        return np.repeat(np.arange(self.L), self.K * self.N_T)

    def save(self, path):
        np.savez(path, H_tilde=self.H_tilde, beta=self.beta, H_small=self.H_small,
                 dims=np.array([self.L, self.K, self.N_T, self.N_R]))

    @classmethod
    def load(cls, path) -> "ChannelRealization":
        with np.load(Path(path)) as f:
            L, K, N_T, N_R = (int(v) for v in f["dims"])
            return cls(H_tilde=f["H_tilde"], beta=f["beta"], H_small=f["H_small"],
                       L=L, K=K, N_T=N_T, N_R=N_R)


def assemble_channel(beta: np.ndarray, small_scale: np.ndarray, cfg) -> ChannelRealization:
    """Scale each (RRH l; cell i, user u) block of ``small_scale`` by sqrt(beta[l, i, u])."""
    L, K, N_T, N_R = cfg.L, cfg.K, cfg.N_T, cfg.N_R
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (L, L, K):
        raise ValueError(f"beta has shape {beta.shape}, expected {(L, L, K)}")
    if small_scale.shape != (L * N_R, L * K * N_T):
        raise ValueError(f"small-scale matrix has shape {small_scale.shape}, "
                         f"expected {(L * N_R, L * K * N_T)}")
    # (l, i, u) -> row block l, column block (i, u); expand to entries
    amp = np.sqrt(beta).reshape(L, L * K)
    amp = np.repeat(np.repeat(amp, N_R, axis=0), N_T, axis=1)
    return ChannelRealization(H_tilde=small_scale * amp, beta=beta, H_small=small_scale,
                              L=L, K=K, N_T=N_T, N_R=N_R)


def draw_channel(cfg: SystemConfig, rng) -> ChannelRealization:
    """One trial's composite channel, with median serving gain normalized to 1."""
    placement = place_users(cfg, rng)
    beta = large_scale_gain(placement.distances, cfg.r_cell, cfg.gamma, placement.shadowing)
    beta = beta / median_serving_gain(cfg.r_cell, cfg.r_hole, cfg.gamma, cfg.sigma_shadow_db)
    H = draw_small_scale(rng, cfg.n_antennas, cfg.n_streams)
    return assemble_channel(beta, H, cfg)
