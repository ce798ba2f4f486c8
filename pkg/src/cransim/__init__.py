"""Uplink C-RAN MU-MIMO simulation with coarse ADCs, joint AGC and LRA-MMSE(-SIC) receivers."""

__version__ = "0.1.0"
