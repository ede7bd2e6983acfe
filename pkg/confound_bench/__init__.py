"""confound-bench – clustered-data bias laboratory."""
__version__ = "1.0.0"
