"""Atomic file writes and configuration hashing for artifact provenance."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile


def atomic_write_bytes(path: str, data: bytes) -> None:
    """Write via a temp file and rename, so no partial file survives a crash."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def config_hash(config: dict) -> str:
    """Stable hash of a JSON-serializable configuration block."""
    scrubbed = {k: v for k, v in config.items() if k != "config_hash"}
    canonical = json.dumps(scrubbed, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
