"""Fiat-Shamir oracles.

``HashOracle`` is the real hash and cannot be programmed. ``ProgrammableOracle``
is the simulation trapdoor used in hybrid and negative-control experiments;
it can only be built when test mode is enabled (``DCASH_TEST_ORACLE=1`` or
``enable_test_oracle()``), so ordinary runs have no simulation path.
"""

from __future__ import annotations

import hashlib
import os

from .groups import DEFAULT_GROUP

TAG_FS = b"dcash/v1/fiat-shamir\x00"
_ENV = "DCASH_TEST_ORACLE"


class OracleError(RuntimeError):
    pass


class OracleUnavailable(OracleError):
    pass


_forced = False


def enable_test_oracle(on: bool = True) -> None:
    global _forced
    _forced = on


def test_oracle_enabled() -> bool:
    return _forced or os.environ.get(_ENV, "") not in ("", "0")


class HashOracle:
    programmable = False

    def __init__(self, group=DEFAULT_GROUP):
        self.group = group

    def __call__(self, data: bytes) -> int:
        return int.from_bytes(hashlib.sha512(TAG_FS + data).digest(), "big") % self.group.order

    def program(self, data: bytes, value: int) -> None:
        raise OracleError("unprogrammable oracle")


class ProgrammableOracle(HashOracle):
    """Random oracle whose unprogrammed points fall through to the real hash."""

    programmable = True

    def __init__(self, group=DEFAULT_GROUP):
        if not test_oracle_enabled():
            raise OracleUnavailable("oracle unavailable")
        super().__init__(group)
        self._table: dict[bytes, int] = {}
        self._queried: set[bytes] = set()
        self.log: list[bytes] = []

    def __call__(self, data: bytes) -> int:
        data = bytes(data)
        self._queried.add(data)
        self.log.append(data)
        if data in self._table:
            return self._table[data]
        return super().__call__(data)

    def program(self, data: bytes, value: int) -> None:
        data = bytes(data)
        if data in self._table or data in self._queried:
            raise OracleError("point already defined")
        self._table[data] = value % self.group.order


HASH_ORACLE = HashOracle()
