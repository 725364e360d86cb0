"""
Core algorithms for swarmrec
"""
