"""Named random streams derived from a single integer seed.

``stream(seed, "init/heads")`` always yields the same generator, independent
of which other streams were drawn before it.
"""

import hashlib

import numpy as np


def stream(seed: int, name: str) -> np.random.Generator:
    words = np.frombuffer(hashlib.sha256(name.encode("utf-8")).digest()[:16], dtype="<u4")
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(w) for w in words)))
