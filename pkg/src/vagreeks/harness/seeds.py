"""Stage-keyed seed derivation.

Every random draw in an experiment takes its seed from the master seed and a
stage name (plus optional indices), so any stage can be rerun on its own.
"""

from __future__ import annotations

import hashlib

__all__ = ["derive_seed", "STAGES"]

STAGES = ("input", "mc", "training", "validation", "representatives", "train")


def derive_seed(master: int, stage: str, *keys: int | str) -> int:
    """63-bit seed from ``sha256("master/stage/key...")``."""
    text = "/".join([str(int(master)), stage, *map(str, keys)])
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1
