"""
QNC Toolkit

This package simulates quantized network coding for sensor-network data
gathering and decodes the gateway packets with belief propagation, l1
minimization and an exact MMSE oracle, benchmarked against packet forwarding.
"""

__version__ = '0.2.0'
