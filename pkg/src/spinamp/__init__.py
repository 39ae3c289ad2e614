"""Spin-state amplification on driven Ising lattices.

Submodules
----------
young
    Young's lattice levels, path weights, coupled states and chain couplings.
chain
    Coherent dynamics on the effective 1D/2D/3D chains and scaling fits.
open_dynamics
    Collective-dephasing Lindblad evolution and its classical Markov limit.
lattice
    Brute-force rule engine on explicit 2D configurations.
fullspin
    Full rotating-frame spin simulations used to validate the flip rules.
thermal
    Gillespie Monte Carlo of the flip rules at imperfect polarisation.
"""

__version__ = "0.1.0"
