"""
Utils package for fracplace.
"""
