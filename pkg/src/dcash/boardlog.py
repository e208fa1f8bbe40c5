"""Hash-chained board log files and offline verification.

One JSON object per line, compact and key-ordered::

    {"index":0,"poster":"CB","type":"crs","payload":"<hex>","chain":"<hex>"}

``chain_i = sha256(chain_{i-1} || record_i)`` where ``record_i`` is the line
without its ``chain`` field. The last line is a summary of the resulting
valid set with a digest over itself. Verification replays ingest from
scratch against a trusted VK_CB file and checks the balance at every prefix.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .games import audit_entries
from .groups import DecodeError, ED25519
from .ledger import CENTRAL_BANK, BulletinBoard, Entry, UnauthorizedPoster, ValidSet
from .ledger import decode_payload, encode_payload, find_crs

GENESIS_CHAIN = bytes(32)
RECORD_KEYS = ("index", "poster", "type", "payload", "chain")


def _dump(obj) -> str:
    return json.dumps(obj, separators=(",", ":"))


def _link(prev: bytes, record: dict) -> bytes:
    return hashlib.sha256(prev + _dump(record).encode()).digest()


def _validset_cls(variant: str):
    if variant == "minter":
        from .minter import MinterValidSet
        return MinterValidSet
    return ValidSet


def summarize(vs: ValidSet, entries: int, head: bytes, banks, variant: str) -> dict:
    s = {
        "entries": entries,
        "head": head.hex(),
        "variant": variant,
        "banks": sorted(banks),
        "genesis": vs.genesis_count,
        "valid": sorted(vs.valid),
        "burns": sorted(vs.burns),
        "ignored": sorted(i for i, (st, _) in vs.status.items() if st == "ignored"),
        "live": vs.live_count,
        "in_flight": vs.in_flight,
        "balance": vs.balance,
        "validset": vs.digest(),
    }
    if variant == "minter":
        s["flagged"] = sorted(k.hex() for k in vs.flagged())
        s["forged"] = sorted(vs.forged)
        s["rescued"] = sorted(vs.rescued)
    return s


def _summary_line(summary: dict) -> str:
    return _dump({"summary": summary, "digest": hashlib.sha256(_dump(summary).encode()).hexdigest()})


def render_log(entries, vs: ValidSet, banks, variant: str = "pi-dc") -> str:
    lines, prev = [], GENESIS_CHAIN
    for e in entries:
        rec = {"index": e.index, "poster": e.poster, "type": e.payload.kind,
               "payload": encode_payload(e.payload).hex()}
        prev = _link(prev, rec)
        rec["chain"] = prev.hex()
        lines.append(_dump(rec))
    lines.append(_summary_line(summarize(vs, len(lines), prev, banks, variant)))
    return "\n".join(lines) + "\n"


def export_log(board: BulletinBoard, path, vs: ValidSet, variant: str = "pi-dc") -> str:
    banks = sorted(board.authorized - {CENTRAL_BANK})
    text = render_log(board.read(), vs, banks, variant)
    Path(path).write_text(text, encoding="utf-8")
    return text


def write_vkcb(path, vk_cb, vk_crs) -> None:
    doc = {"group": ED25519.name, "vk_cb": sorted(k.to_bytes().hex() for k in vk_cb),
           "vk_crs": vk_crs.to_bytes().hex()}
    Path(path).write_text(_dump(doc) + "\n", encoding="utf-8")


def read_vkcb(path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("group") != ED25519.name:
        raise ValueError("vkcb file is for a different group")
    vk_cb = frozenset(bytes.fromhex(h) for h in doc["vk_cb"])
    return vk_cb, ED25519.decode(bytes.fromhex(doc["vk_crs"]))


@dataclass
class LogVerdict:
    ok: bool
    index: int | None = None
    reason: str = ""
    entries: int = 0
    summary: dict | None = None

    def line(self) -> str:
        return _dump({"ok": self.ok, "index": self.index, "reason": self.reason, "entries": self.entries})


def _bad(index, reason, entries=0):
    return LogVerdict(False, index, reason, entries)


def parse_log(data: bytes):
    """Syntactic pass: returns ``(entries, summary, head)`` or a failing ``LogVerdict``."""
    if not data.endswith(b"\n"):
        return _bad(data.count(b"\n"), "unexpected end")
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        return _bad(data[:exc.start].count(b"\n"), "not utf-8")
    lines = text.split("\n")[:-1]
    if not lines:
        return _bad(0, "unexpected end")
    # cheap pass first: JSON shape and hash chain; payloads are decoded
    # only once the whole file is known to be intact
    records, prev = [], GENESIS_CHAIN
    for i, line in enumerate(lines[:-1]):
        try:
            rec = json.loads(line)
        except ValueError:
            return _bad(i, "malformed record")
        if not isinstance(rec, dict) or tuple(rec) != RECORD_KEYS or _dump(rec) != line:
            if isinstance(rec, dict) and "summary" in rec:
                return _bad(i, "summary before end")
            return _bad(i, "non-canonical record")
        if rec["index"] != i:
            return _bad(i, "index out of order")
        chain = dict(rec)
        claimed = chain.pop("chain")
        prev = _link(prev, chain)
        if claimed != prev.hex():
            return _bad(i, "chain mismatch")
        records.append(rec)
    last = len(lines) - 1
    try:
        tail = json.loads(lines[last])
    except ValueError:
        return _bad(last, "malformed summary")
    if not isinstance(tail, dict) or "summary" not in tail:
        return _bad(last + 1, "unexpected end")
    if tuple(tail) != ("summary", "digest") or not isinstance(tail["summary"], dict):
        return _bad(last, "malformed summary")
    if _summary_line(tail["summary"]) != lines[last] or tail["digest"] != hashlib.sha256(
            _dump(tail["summary"]).encode()).hexdigest():
        return _bad(last, "summary digest mismatch")
    entries = []
    for i, rec in enumerate(records):
        try:
            raw = bytes.fromhex(rec["payload"])
            payload = decode_payload(raw)
        except (ValueError, TypeError, DecodeError):
            return _bad(i, "undecodable payload")
        if raw.hex() != rec["payload"] or encode_payload(payload) != raw or payload.kind != rec["type"]:
            return _bad(i, "non-canonical payload")
        entries.append(Entry(i, payload, rec["poster"]))
    return entries, tail["summary"], prev


def verify_log_bytes(data: bytes, vk_cb, vk_crs, oracle=None) -> LogVerdict:
    parsed = parse_log(data)
    if isinstance(parsed, LogVerdict):
        return parsed
    entries, summary, head = parsed
    n = len(entries)
    if summary.get("entries") != n or summary.get("head") != head.hex():
        return _bad(n, "summary does not match records", n)
    variant = summary.get("variant")
    if variant not in ("pi-dc", "minter"):
        return _bad(n, "unknown variant", n)
    banks = summary.get("banks")
    if not isinstance(banks, list) or not all(isinstance(b, str) for b in banks):
        return _bad(n, "malformed summary", n)
    board = BulletinBoard(banks)
    for e in entries:
        try:
            board.post(e.payload, e.poster)
        except UnauthorizedPoster:
            return _bad(e.index, "unauthorized poster", n)
    crs = find_crs(entries, vk_crs)
    if crs is None:
        return _bad(0, "crs not found", n)
    cls = _validset_cls(variant)
    audit = audit_entries(entries, cls(frozenset(vk_cb), crs, oracle), summary.get("genesis"))
    vs = audit.vs
    if not audit.ok:
        return _bad(audit.failure if audit.failure is not None else n, audit.reason, n)
    if summarize(vs, n, head, banks, variant) != summary:
        return _bad(n, "summary does not match replay", n)
    return LogVerdict(True, None, "ok", n, summary)


def verify_log(path, vkcb_path, oracle=None) -> LogVerdict:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        return _bad(None, f"unreadable log: {exc.strerror}")
    vk_cb, vk_crs = read_vkcb(vkcb_path)
    return verify_log_bytes(data, vk_cb, vk_crs, oracle)

