"""Sea-ice aware route optimisation on an equal-area hexagonal grid."""

__version__ = "0.1.0"
