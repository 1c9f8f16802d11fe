# CLI Package
"""
Experiment runner: identity catalogue, verify/sweep/cdf commands
"""
