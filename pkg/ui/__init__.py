# ui/__init__.py
"""
Command-line surface for the resource-management simulator: command runners and console output.
"""
