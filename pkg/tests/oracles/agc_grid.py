"""Brute-force AGC reference for a two-antenna receiver.

Evaluates the Bussgang-model MSE E||x - W(alpha diag(g) y + q)||^2 on a
square grid of gains, written out term by term rather than through the
package's covariance builders.
"""

import numpy as np


def model_mse_grid(W, R_xy, R_yy, rho, alpha, g1, g2):
    """MSE at every (g1[i], g2[j]); returns an array of shape (len(g1), len(g2))."""
    n = W.shape[0]
    R_yq = -rho * R_yy
    R_xq = -rho * R_xy
    R_qq = rho * R_yy.copy()
    R_qq[0, 1] *= rho
    R_qq[1, 0] *= rho
    # linear part: -2 Re tr(W R_xr^H), with R_xr = alpha R_xy diag(g) + R_xq
    lin = [-2 * alpha * np.real(np.sum(W[:, i] * R_xy[:, i].conj())) for i in range(2)]
    const = n - 2 * np.real(np.sum(W * R_xq.conj()))
    # quadratic part tr(W R_rr W^H) = sum_ij (W^H W)_ji R_rr_ij
    P = W.conj().T @ W
    const += np.real(np.sum(P.T * R_qq))
    # alpha (G R_yq + R_yq^H G) contributes linearly in g
    for i in range(2):
        lin[i] += 2 * alpha * np.real(np.sum(P[:, i] * R_yq[i, :]))
    a, b = np.meshgrid(g1, g2, indexing="ij")
    quad = alpha**2 * (np.real(P[0, 0] * R_yy[0, 0]) * a * a
                       + np.real(P[1, 1] * R_yy[1, 1]) * b * b
                       + 2 * np.real(P[1, 0] * R_yy[0, 1]) * a * b)
    return const + lin[0] * a + lin[1] * b + quad


def grid_minimizer(W, R_xy, R_yy, rho, alpha, hi=4.0, step=1e-3):
    g = np.arange(step, hi + step / 2, step)
    best, arg = np.inf, None
    for start in range(0, g.size, 500):
        block = model_mse_grid(W, R_xy, R_yy, rho, alpha, g[start:start + 500], g)
        k = np.unravel_index(np.argmin(block), block.shape)
        if block[k] < best:
            best, arg = block[k], np.array([g[start + k[0]], g[k[1]]])
    return arg, best
