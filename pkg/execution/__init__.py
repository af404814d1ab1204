"""
Execution Layer - Coded TCP
Field codec, wire format, sender/receiver state machines, simulator and analysis
"""

__version__ = "2.0.0"
