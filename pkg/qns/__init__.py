"""
qns-lab: periodic pseudo-spectral simulator and verification lab for compressible quantum Navier-Stokes
with damping.
"""
__version__ = "0.1.0"
