# Core Package
"""
Grids and seeded paths, priors, couplings, filters, densities, the identities
and the Monte Carlo harness
"""
