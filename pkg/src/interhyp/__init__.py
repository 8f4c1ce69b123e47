"""Interaction features and hyperbolic hierarchical clustering for
classifying regular, suspended and deleted accounts from retweet data."""

__version__ = "0.1.0"

CLASSES = ("deleted", "regular", "suspended")
