"""Burn-and-reissue token transfers on an append-only bulletin board.

Users move tokens by burning them (a signed commitment to a fresh sender
key) and reissuing a new token whose 1-out-of-n proof shows its sender key
sits in some bucket of burns, without revealing which one.
"""

from .groups import DEFAULT_GROUP, ED25519, TOY
from .ledger import BulletinBoard, ValidSet, is_valid, live_view
from .orproof import crs_gen, extract, prove, simulate, verify
from .protocol import System, cb_setup, user_init

__all__ = ["DEFAULT_GROUP", "ED25519", "TOY", "BulletinBoard", "ValidSet", "is_valid", "live_view",
           "crs_gen", "prove", "verify", "simulate", "extract", "System", "cb_setup", "user_init"]
__version__ = "0.1.0"
