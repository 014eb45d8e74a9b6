"""Chaos classification for weighted composition C0-semigroups on intervals."""

__version__ = "0.1.0"
