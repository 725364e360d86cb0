"""
Utilities for swarmrec core
"""
