"""bubblelab: numerics for boundary-bubble energy expansions.

Model optimizer profiles, weighted moments and closed-form coefficients,
Fermi metric jets, energy quotients with eps-sweeps, energy-only curvature
estimators, the reduced multi-bubble potential, and fast-diffusion decay
bounds; see the README for the module map and the CLI.
"""
__version__ = "0.1.0"
