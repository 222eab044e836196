"""Verification of Wait-Only broadcast protocols."""

from .protocol import (Protocol, Transition, parse_protocol, serialize_protocol, classify,
                       check_wait_only, check_single_wait_only, normalize_self_loops,
                       add_uncoverable_state)
from .semantics import Semantics, Step, Trace, Lasso

__all__ = [
    "Protocol", "Transition", "parse_protocol", "serialize_protocol", "classify",
    "check_wait_only", "check_single_wait_only", "normalize_self_loops",
    "add_uncoverable_state", "Semantics", "Step", "Trace", "Lasso",
]
__version__ = "0.1.0"
