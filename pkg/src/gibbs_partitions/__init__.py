"""Grand canonical Gibbs ensembles of integer partitions."""

__version__ = "0.1.0"
