"""
Core package for fracplace: cost model, DAG analysis, search and reports.
"""
