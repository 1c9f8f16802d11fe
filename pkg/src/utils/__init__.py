# Utils Package
"""
Experiment configuration and logging
"""
