"""Learning-aware user scheduling and resource allocation for wireless federated learning."""

__version__ = "0.1.0"
