"""
CLI package for fracplace.
"""

__version__ = "1.0.0"
