"""Simulator for arranger fraud-proof games: Merkle membership, data availability and legality
disputes over a simulated L1 ledger, plus economics and scenario runners."""

__version__ = "0.1.0"
