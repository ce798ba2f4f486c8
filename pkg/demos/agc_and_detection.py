# %% [markdown]
# One channel drop of the desk cluster: design the AGC and LRA-MMSE filters,
# then compare the receivers on the same packets.

# %%
import numpy as np

from cransim.channel import draw_channel
from cransim.detection import ModulationScheme, prepare_receiver
from cransim.harness import noise_variance
from cransim.scenario import Receiver, profile_config

cfg = profile_config("desk")
rng = np.random.default_rng(7)
channel = draw_channel(cfg, rng)
print("serving-link beta (dB):", np.round(10 * np.log10(channel.beta.max(axis=0)), 1))

# %%
# AGC gains of RRH 0 at 4 bits and 10 dB.  Antennas that see strong users get
# smaller gains so that the ADC does not saturate.
s2 = noise_variance(10.0)
chain = prepare_receiver(Receiver.AGC_LRA_MMSE_SIC, channel, s2, bits=4)
print("alpha * g, RRH 0:", np.round(chain.design.alpha[0] * chain.design.g[0], 3))
print("detection order:", chain.order)
print("model SINR per stage (dB):",
      np.round([10 * np.log10(st.sinr) for st in chain.bank], 1))

# %%
# Same bits and noise for every receiver.
qpsk = ModulationScheme.from_name("QPSK")
bits = rng.integers(0, 2, (cfg.n_streams, 2 * 2000))
x = qpsk.modulate(bits)
noise = (rng.standard_normal((cfg.n_antennas, 2000))
         + 1j * rng.standard_normal((cfg.n_antennas, 2000))) / np.sqrt(2)
y = channel.H_tilde @ x + np.sqrt(s2) * noise
for rec in Receiver:
    c = prepare_receiver(rec, channel, s2, bits=4)
    ber = np.mean(qpsk.demodulate(c.detect(y, qpsk)) != bits)
    print(f"{rec.value:18s} BER {ber:.4f}")
