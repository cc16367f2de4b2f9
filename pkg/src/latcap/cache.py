"""Persistent value cache, results log and CSV helpers.

The count cache is a UTF-8 text file with one record per line,

    kind m n profile flags count

where ``profile`` is a comma-separated integer list (``-`` when empty),
``flags`` is ``s2s`` or ``nos2s`` and ``count`` is a base-10 integer.  The
file is only ever appended to.  The results log starts with a schema header
line followed by one JSON object per line.  Both live in the directory named
by ``LATCAP_CACHE_DIR`` (default ``~/.cache/latcap``).
"""

from __future__ import annotations

import csv
import fcntl
import io
import json
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Sequence, Tuple

import mpmath

__all__ = [
    "CACHE_ENV",
    "RESULTS_SCHEMA",
    "CacheError",
    "cache_dir",
    "CountCache",
    "ResultsLog",
    "decimal_str",
    "write_csv",
    "csv_text",
]

CACHE_ENV = "LATCAP_CACHE_DIR"
RESULTS_SCHEMA = "# latcap-results schema 1"

Key = Tuple[str, int, int, Tuple[int, ...], str]


class CacheError(ValueError):
    """Malformed or conflicting cache content."""


def cache_dir() -> Path:
    d = os.environ.get(CACHE_ENV)
    return Path(d) if d else Path.home() / ".cache" / "latcap"


@contextmanager
def _locked(path: Path, mode: str):
    """Open with an advisory lock: exclusive for writers, shared for readers."""
    fh = open(path, mode, encoding="utf-8")
    try:
        fcntl.flock(fh, fcntl.LOCK_EX if "a" in mode or "w" in mode else fcntl.LOCK_SH)
        yield fh
    finally:
        fcntl.flock(fh, fcntl.LOCK_UN)
        fh.close()


def _profile_str(profile: Sequence[int]) -> str:
    return ",".join(str(int(p)) for p in profile) if profile else "-"


def _parse_profile(s: str) -> Tuple[int, ...]:
    return () if s == "-" else tuple(int(p) for p in s.split(","))


def _flag_str(forbid_side_to_side: bool) -> str:
    return "nos2s" if forbid_side_to_side else "s2s"


class CountCache:
    """Append-only store of exact counts keyed by (kind, m, n, profile, flags)."""

    FILENAME = "counts.txt"

    def __init__(self, path: Path | str | None = None):
        self.path = Path(path) if path is not None else cache_dir() / self.FILENAME

    @staticmethod
    def key(kind: str, m: int, n: int, profile: Sequence[int] = (), forbid_side_to_side: bool = False) -> Key:
        return (kind, int(m), int(n), tuple(int(p) for p in profile), _flag_str(forbid_side_to_side))

    def records(self) -> Iterator[Tuple[Key, int]]:
        if not self.path.exists():
            return
        with _locked(self.path, "r") as fh:
            lines = fh.read().splitlines()
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 6 or parts[4] not in ("s2s", "nos2s"):
                raise CacheError(f"{self.path}:{lineno}: malformed record {line!r}")
            kind, m, n, prof, flags, count = parts
            yield (kind, int(m), int(n), _parse_profile(prof), flags), int(count)

    def load(self) -> Dict[Key, int]:
        out: Dict[Key, int] = {}
        for k, v in self.records():
            if k in out and out[k] != v:
                raise CacheError(f"conflicting cached values for {k}")
            out[k] = v
        return out

    def get(self, key: Key) -> int | None:
        return self.load().get(key)

    def put(self, key: Key, count: int) -> bool:
        """Append a record unless the key is already present; returns True if written."""
        if count < 0:
            raise CacheError("counts are non-negative")
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with _locked(self.path, "a+") as fh:
            fh.seek(0)
            for line in fh.read().splitlines():
                parts = line.split()
                if len(parts) == 6:
                    k = (parts[0], int(parts[1]), int(parts[2]), _parse_profile(parts[3]), parts[4])
                    if k == key:
                        if int(parts[5]) != count:
                            raise CacheError(f"conflicting cached values for {key}")
                        return False
            kind, m, n, prof, flags = key
            fh.write(f"{kind} {m} {n} {_profile_str(prof)} {flags} {count}\n")
        return True


class ResultsLog:
    """Append-only log of machine-readable result records."""

    FILENAME = "results.jsonl"

    def __init__(self, path: Path | str | None = None):
        self.path = Path(path) if path is not None else cache_dir() / self.FILENAME

    def append(self, record: dict) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with _locked(self.path, "a+") as fh:
            fh.seek(0)
            first = fh.readline().rstrip("\n")
            if not first:
                fh.write(RESULTS_SCHEMA + "\n")
            elif first != RESULTS_SCHEMA:
                raise CacheError(f"{self.path}: unexpected header {first!r}")
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    def read(self) -> List[dict]:
        if not self.path.exists():
            return []
        with _locked(self.path, "r") as fh:
            lines = fh.read().splitlines()
        if not lines:
            return []
        if lines[0] != RESULTS_SCHEMA:
            raise CacheError(f"{self.path}: unexpected header {lines[0]!r}")
        return [json.loads(line) for line in lines[1:] if line.strip()]


def decimal_str(value, digits: int) -> str:
    """Decimal string of ``value`` with ``digits`` significant digits."""
    digits = max(1, int(digits))
    with mpmath.workdps(max(30, digits + 5)):
        out = mpmath.nstr(mpmath.mpf(value), digits, strip_zeros=False, min_fixed=-4, max_fixed=digits + 2)
    return out[:-1] if out.endswith(".") else out


def csv_text(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def write_csv(path: Path | str | None, header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    """Write a CSV table to ``path`` (stdout handled by the caller when None)."""
    text = csv_text(header, rows)
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")
    return text
