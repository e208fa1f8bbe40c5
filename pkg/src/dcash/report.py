"""Line-delimited run reports and matplotlib figures.

Report lines are JSON objects with a stable field order so two runs with
the same seed diff cleanly. Wall-clock timing is not deterministic, so it
goes to its own file and figure instead of the report.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _line(kind: str, **fields) -> str:
    return json.dumps({"record": kind, **fields}, separators=(",", ":"))


def report_lines(result, log_head: str) -> list[str]:
    cfg = result.config
    out = [_line("config", **cfg.to_dict())]
    for k, t in enumerate(result.transfers):
        out.append(_line("transfer", n=k, **t))
    for entries, live, flight, bal, bound in result.audit.rows:
        out.append(_line("prefix", entries=entries, live=live, in_flight=flight, balance=bal, bound=bound))
    if result.minter_audit is not None:
        for row in result.minter_audit.lines():
            out.append(_line("minter", **json.loads(row)))
        for r in result.rescues:
            out.append(_line("rescue", **r))
    vs = result.audit.vs
    out.append(_line("summary", attempted=result.attempted, accepted=result.accepted,
                     live=vs.live_count, in_flight=vs.in_flight, balance=vs.balance,
                     balance_ok=result.audit.ok, balance_reason=result.audit.reason,
                     flagged=len(result.minter_audit.flagged) if result.minter_audit else 0,
                     log_head=log_head))
    return out


def plot_balance(rows, path, title="") -> None:
    xs = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(7, 3.2))
    ax.step(xs, [r[1] for r in rows], where="post", label="live tokens")
    ax.step(xs, [r[3] for r in rows], where="post", label="live + in flight", linestyle="--")
    ax.step(xs, [r[2] for r in rows], where="post", label="in flight", alpha=0.6)
    ax.set_xlabel("board prefix (entries)")
    ax.set_ylabel("tokens")
    if title:
        ax.set_title(title)
    ax.legend(loc="lower right", fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)


def plot_timing(timing: dict, path) -> None:
    names = list(timing)
    fig, ax = plt.subplots(figsize=(5, 2.6))
    ax.barh(names, [timing[k] for k in names])
    ax.set_xlabel("seconds")
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)


def write_outputs(result, out_dir, log_head: str) -> dict:
    out = Path(out_dir)
    lines = report_lines(result, log_head)
    (out / "report.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (out / "timing.json").write_text(json.dumps({k: round(v, 6) for k, v in result.timing.items()}) + "\n",
                                     encoding="utf-8")
    plot_balance(result.audit.rows, out / "balance.png", f"{result.config.variant}, seed {result.config.seed}")
    plot_timing(result.timing, out / "timing.png")
    return {"report": out / "report.jsonl", "timing": out / "timing.json",
            "balance_fig": out / "balance.png", "timing_fig": out / "timing.png"}
