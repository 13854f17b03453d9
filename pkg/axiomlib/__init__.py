"""Ledger-backed containment simulator for multi-agent AGI scenarios."""

__version__ = "0.1"
