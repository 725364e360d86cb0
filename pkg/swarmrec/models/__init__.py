"""
Pydantic models for swarmrec
"""
