"""
Dataset ingestion and download for swarmrec
"""
