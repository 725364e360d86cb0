"""
Results persistence for swarmrec
"""
