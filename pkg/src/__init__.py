"""Review polarity-wise recommender"""

__version__ = "0.1.0"
