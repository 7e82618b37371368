"""Multi-photon-coherence Kerr nonlinearity: level schemes, susceptibilities,
Lindblad steady states, Rb magneto-optical rotation and the Kerr phase gate."""

__version__ = "0.1.0"
