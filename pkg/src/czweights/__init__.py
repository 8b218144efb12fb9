"""Exact Muckenhoupt-weight counterexamples to weighted gradient estimates for div(w grad u) = div(w F).

The package builds an exact sawtooth construction of a weight ``w`` and a
profile ``u`` on ``(0, 1)``, audits it, estimates Muckenhoupt
characteristics, and certifies the blow-up of the gradient ratio.
"""
from .sequences import SequenceTable, build_table, verify_identities
from .construct import BuildParams, Construction, audit, build

__all__ = ["SequenceTable", "build_table", "verify_identities", "BuildParams", "Construction", "audit", "build"]
__version__ = "0.1.0"
