"""Review enrichment and covariance-structure modelling toolkit."""

__version__ = "0.1.0"
