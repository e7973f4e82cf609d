"""Competitive-programming evaluation harness: sample, cluster, rerank, submit, rate."""

__version__ = "0.1.0"
