"""Embedded, transactional, single-file key-value store.

On-disk format (little-endian), versioned by the file header:

    header  b"AFKV1\\n"
    record  u32 body_len | u32 crc32(body) | body
    body    u8 tombstone | u16 ns_len | ns utf-8 | u32 key_len | key utf-8
            | u64 version | u32 value_len | value bytes

Writes append one fsynced record; the in-memory index is updated only after
the bytes hit the file, so a torn append is dropped on the next open and a
reader always sees the old or the new value, never a mix. Optimistic
concurrency: a put may assert the version it expects to replace.

Event- and fix-like records use keys of the form
"<owner>/<zero-padded epoch seconds>/<id>" (see time_key) so time-range scans
are plain ordered prefix scans.
"""

from __future__ import annotations

import os
import threading
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Union

_HEADER = b"AFKV1\n"

# Namespaces used by the service; the store itself accepts any string.
NS_USERS = "users"
NS_EVENTS = "events"
NS_FIXES = "fixes"
NS_FENCES = "fences"
NS_FEEDBACK = "feedback"
NS_POSTS = "posts"
NS_NOTIFICATIONS = "notifications"
NS_MODELS = "models"
NS_TOKENS = "tokens"
NS_POIS = "pois"


class VersionConflict(RuntimeError):
    pass


class SerializationError(TypeError):
    pass


class StoreCorrupt(RuntimeError):
    pass


@dataclass(frozen=True)
class Record:
    namespace: str
    key: str
    value: bytes
    version: int


def time_key(owner: str, epoch_s: int, suffix: str) -> str:
    """Key with a zero-padded timestamp segment; lexicographic order equals
    time order for a fixed owner."""
    return f"{owner}/{epoch_s:011d}/{suffix}"


def _encode(namespace: str, key: str, value: bytes, version: int, tombstone: bool) -> bytes:
    ns = namespace.encode("utf-8")
    k = key.encode("utf-8")
    body = (
        bytes([1 if tombstone else 0])
        + len(ns).to_bytes(2, "little")
        + ns
        + len(k).to_bytes(4, "little")
        + k
        + version.to_bytes(8, "little")
        + len(value).to_bytes(4, "little")
        + value
    )
    return len(body).to_bytes(4, "little") + zlib.crc32(body).to_bytes(4, "little") + body


def _decode_body(body: bytes) -> tuple[bool, str, str, int, bytes]:
    tombstone = body[0] == 1
    pos = 1
    ns_len = int.from_bytes(body[pos : pos + 2], "little")
    pos += 2
    ns = body[pos : pos + ns_len].decode("utf-8")
    pos += ns_len
    k_len = int.from_bytes(body[pos : pos + 4], "little")
    pos += 4
    key = body[pos : pos + k_len].decode("utf-8")
    pos += k_len
    version = int.from_bytes(body[pos : pos + 8], "little")
    pos += 8
    v_len = int.from_bytes(body[pos : pos + 4], "little")
    pos += 4
    value = body[pos : pos + v_len]
    if pos + v_len != len(body):
        raise ValueError("record body length mismatch")
    return tombstone, ns, key, version, value


class Store:
    """Single-node store; safe to share across threads. Writers are
    serialized by one lock, readers see committed records only."""

    def __init__(self, path: Union[str, Path]):
        self._path = Path(path)
        self._lock = threading.RLock()
        self._index: dict[tuple[str, str], tuple[bytes, int]] = {}
        # deleted keys keep their last version so delete + re-put still increments
        self._tombstone_versions: dict[tuple[str, str], int] = {}
        self._broken = False
        self._open_and_recover()

    def _open_and_recover(self) -> None:
        fresh = not self._path.exists() or self._path.stat().st_size == 0
        if fresh:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            with open(self._path, "wb") as fh:
                fh.write(_HEADER)
                fh.flush()
                os.fsync(fh.fileno())
        data = self._path.read_bytes()
        if data[: len(_HEADER)] != _HEADER:
            raise StoreCorrupt(f"{self._path}: bad header")
        pos = len(_HEADER)
        good_end = pos
        while pos + 8 <= len(data):
            body_len = int.from_bytes(data[pos : pos + 4], "little")
            crc = int.from_bytes(data[pos + 4 : pos + 8], "little")
            body = data[pos + 8 : pos + 8 + body_len]
            if len(body) < body_len or zlib.crc32(body) != crc:
                break  # torn tail from an interrupted write
            try:
                tombstone, ns, key, version, value = _decode_body(body)
            except (ValueError, IndexError, UnicodeDecodeError):
                break
            if tombstone:
                self._index.pop((ns, key), None)
                self._tombstone_versions[(ns, key)] = version
            else:
                self._index[(ns, key)] = (value, version)
            pos += 8 + body_len
            good_end = pos
        self._fh = open(self._path, "r+b")
        self._fh.truncate(good_end)
        self._fh.seek(good_end)

    def _current_version(self, ns: str, key: str) -> int:
        entry = self._index.get((ns, key))
        if entry is not None:
            return entry[1]
        return self._tombstone_versions.get((ns, key), 0)

    def _append(self, blob: bytes) -> None:
        if self._broken:
            raise StoreCorrupt("store needs reopen after a failed write")
        offset = self._fh.tell()
        try:
            self._fh.write(blob)
            self._fh.flush()
            os.fsync(self._fh.fileno())
        except Exception:
            try:
                self._fh.truncate(offset)
                self._fh.seek(offset)
            except Exception:
                self._broken = True
            raise

    def put(
        self, namespace: str, key: str, value: bytes, expected_version: Optional[int] = None
    ) -> int:
        """Atomic durable write; returns the new version. With
        expected_version set, fails unless it matches the committed version
        (0 for an absent key)."""
        if not isinstance(value, (bytes, bytearray)):
            raise SerializationError(f"value must be bytes, got {type(value).__name__}")
        value = bytes(value)
        with self._lock:
            current = self._current_version(namespace, key)
            if expected_version is not None and expected_version != current:
                raise VersionConflict(f"{namespace}/{key}: expected {expected_version}, at {current}")
            version = current + 1
            self._append(_encode(namespace, key, value, version, tombstone=False))
            self._index[(namespace, key)] = (value, version)
            return version

    def get(self, namespace: str, key: str) -> Optional[tuple[bytes, int]]:
        with self._lock:
            return self._index.get((namespace, key))

    def delete(self, namespace: str, key: str, expected_version: Optional[int] = None) -> None:
        with self._lock:
            if (namespace, key) not in self._index:
                return
            current = self._index[(namespace, key)][1]
            if expected_version is not None and expected_version != current:
                raise VersionConflict(f"{namespace}/{key}: expected {expected_version}, at {current}")
            version = current + 1
            self._append(_encode(namespace, key, b"", version, tombstone=True))
            del self._index[(namespace, key)]
            self._tombstone_versions[(namespace, key)] = version

    def scan(
        self,
        namespace: str,
        key_prefix: str = "",
        time_range: Optional[tuple[int, int]] = None,
    ) -> Iterator[Record]:
        """Key-ordered iteration over a namespace. With time_range=(t1, t2),
        keys must follow the time_key scheme under key_prefix and the scan is
        the half-open window [t1, t2)."""
        lo = hi = None
        if time_range is not None:
            t1, t2 = time_range
            lo = time_key(key_prefix.rstrip("/"), t1, "") if key_prefix else f"{t1:011d}/"
            hi = time_key(key_prefix.rstrip("/"), t2, "") if key_prefix else f"{t2:011d}/"
        with self._lock:
            keys = sorted(k for (ns, k) in self._index if ns == namespace and k.startswith(key_prefix))
            snapshot = []
            for k in keys:
                if lo is not None and not (lo <= k < hi):
                    continue
                value, version = self._index[(namespace, k)]
                snapshot.append(Record(namespace, k, value, version))
        yield from snapshot

    def close(self) -> None:
        with self._lock:
            try:
                self._fh.flush()
                os.fsync(self._fh.fileno())
            finally:
                self._fh.close()

    def __enter__(self) -> "Store":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
