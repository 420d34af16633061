"""Model-free soft-max LSVI-UCB learners for leader-follower linear Markov games."""

__version__ = "0.1.0"
