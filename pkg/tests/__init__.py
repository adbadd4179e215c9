"""
Test package for the QNC toolkit.
"""
