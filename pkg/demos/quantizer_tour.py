# %% [markdown]
# Quantizer tour: the optimal mid-riser step for each bit depth, how much
# distortion it leaves, and a sampling check of the Bussgang moments.

# %%
import numpy as np

from cransim.quantizer import QuantizerModel, quantize, step_table

# %%
# Step and distortion factor for a unit-variance Gaussian input.  Past about
# 8 bits the distortion approaches the granular-noise value delta^2 / 12.
print(" b    delta       rho_q       delta^2/12")
for row in step_table(range(1, 11)):
    b, delta, rho = row
    print(f"{b:2d}  {delta:.6f}  {rho:.4e}  {delta**2 / 12:.4e}")

# %%
# Sampled moments at 4 bits.  The error q = Q(y) - y is uncorrelated with the
# output and its correlation with the input is -rho_q.
q = QuantizerModel.for_bits(4)
rng = np.random.default_rng(0)
y = rng.standard_normal(10**6)
r = quantize(y, q)
e = r - y
print(f"E[q]   = {e.mean():+.2e}")
print(f"E[r q] = {(r * e).mean():+.2e}")
print(f"E[y q] = {(y * e).mean():+.5f}  vs -rho_q = {-q.rho_q:+.5f}")

# %%
# Loading: the same grid on a weaker or stronger input.  Under-driven inputs
# use few labels, over-driven ones saturate.
for level in (0.25, 1.0, 4.0):
    r = quantize(level * y, q)
    mse = np.mean((r - level * y) ** 2) / level**2
    print(f"input std {level:4.2f}: relative error {mse:.4f}, labels used {np.unique(r).size}")
