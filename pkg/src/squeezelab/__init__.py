"""Simulation and analysis workbench for chip-integrated squeezed-light sources.

Submodules
----------
gaussian
    Gaussian states in shot-noise units and symplectic operations.
devices
    OPO squeezing, ring transmission and SHG phase-matching models.
estimation
    Resonance and threshold fits, Duan-Simon uncertainty propagation.
synth
    Seeded homodyne trace synthesis and the on-disk trace format.
analysis
    PSD estimation, shot normalization and band-passed block variances.
cli
    ``squeezelab`` command line front-end.
"""

__version__ = "0.1.0"
