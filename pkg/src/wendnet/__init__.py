"""Compactly supported Wendland activation functions in a small deterministic
neural-network engine, with a benchmark CLI."""

__version__ = "0.1.0"
