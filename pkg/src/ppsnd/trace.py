"""Transcripts, JSON-lines traces and byte-level privacy scanning."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .wire import decode, encode, peek_tag  # noqa: F401  (re-exported codec)

SCAN_WINDOW = 8


@dataclass(frozen=True)
class TraceEntry:
    t_ps: int
    direction: str  # "tx" | "rx"
    node: str
    tag: str
    data: bytes = field(repr=False)

    def to_record(self) -> dict:
        return {
            "t_ps": self.t_ps,
            "dir": self.direction,
            "node": self.node,
            "tag": self.tag,
            "len": len(self.data),
            "sha256": hashlib.sha256(self.data).hexdigest(),
        }


class Transcript:
    """Append-only, time-ordered log of frames seen by one party or observer."""

    def __init__(self, entries: Iterable[TraceEntry] = ()):
        self._entries: list[TraceEntry] = []
        for entry in entries:
            self.append(entry)

    def append(self, entry: TraceEntry) -> None:
        if self._entries and entry.t_ps < self._entries[-1].t_ps:
            raise ValueError("transcript times must be non-decreasing")
        self._entries.append(entry)

    def record(self, t_ps: int, direction: str, node: str, data: bytes) -> None:
        self.append(TraceEntry(t_ps, direction, node, peek_tag(data), bytes(data)))

    def __iter__(self):
        return iter(self._entries)

    def __len__(self):
        return len(self._entries)

    def __getitem__(self, item):
        return self._entries[item]

    @property
    def tags(self) -> list[str]:
        return [e.tag for e in self._entries]

    def frames(self) -> list[bytes]:
        return [e.data for e in self._entries]

    def to_bytes(self) -> bytes:
        """Concatenation of all frame bytes, in order."""
        return b"".join(e.data for e in self._entries)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e.to_record(), sort_keys=True) + "\n" for e in self._entries)


class Finding(NamedTuple):
    offset: int
    secret_index: int


def privacy_scan(transcript_bytes: bytes, secrets: list[bytes], window: int = SCAN_WINDOW) -> list[Finding]:
    """Report every (offset, secret index) where a ``window``-byte slice of a
    secret occurs in ``transcript_bytes``. Secrets shorter than the window are
    ignored.
    """
    findings: set[Finding] = set()
    for index, secret in enumerate(secrets):
        if len(secret) < window:
            continue
        pieces = windows(secret, window)
        for piece in pieces:
            start = transcript_bytes.find(piece)
            while start != -1:
                findings.add(Finding(start, index))
                start = transcript_bytes.find(piece, start + 1)
    return sorted(findings)


def windows(data: bytes, window: int = SCAN_WINDOW) -> set[bytes]:
    return {data[i:i + window] for i in range(len(data) - window + 1)}


def write_jsonl(path, entries: Iterable[TraceEntry]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry.to_record(), sort_keys=True) + "\n")
