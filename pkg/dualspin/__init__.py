"""
Dual-spin attitude stability toolkit.

Linear stability-axes model of a prolate dual-spin satellite, classical
feedback loop design by eigenvalue root locus, orbit-driven time-varying
simulation and response metrics.
"""

__version__ = "2.0.0"
