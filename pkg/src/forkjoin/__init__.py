"""Fork-join network with a marked-pair synchronizer."""
__version__ = "0.1.0"
