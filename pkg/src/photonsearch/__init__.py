"""Computer-aided design of photonic quantum experiments.

Exact symbolic simulation of SPDC-based multi-photon setups, staged random
search for entangled target states, and block-wise growth of lossy
polarization circuits.
"""

__version__ = "0.1.0"
