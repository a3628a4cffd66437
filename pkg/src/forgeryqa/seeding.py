"""Deterministic per-item seed derivation (stable across runs and platforms)."""

from __future__ import annotations

import zlib


def derive_seed(global_seed: int, *parts: object) -> int:
    """Fold (global_seed, parts...) into a 32-bit seed via CRC32."""
    key = ":".join([str(global_seed), *(str(p) for p in parts)])
    return zlib.crc32(key.encode("utf-8"))
