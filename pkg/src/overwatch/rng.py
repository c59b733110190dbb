"""Named, counter-based random streams for bit-exact replay.

Every stochastic model in the simulator draws from a stream it owns,
identified by a string name. Stream state depends only on (seed, name,
draw count), so runs are reproducible regardless of how many other
streams exist or in which order they are created.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _name_key(name: str) -> int:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class RngStreams:
    """Factory of independent Philox generators keyed by (seed, name)."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._cache: dict[str, np.random.Generator] = {}

    def get(self, name: str) -> np.random.Generator:
        """Return the generator for `name`, creating it on first use.

        The same name always maps to the same stream; repeated calls
        return the same (stateful) generator object.
        """
        gen = self._cache.get(name)
        if gen is None:
            bitgen = np.random.Philox(key=(self.seed << 64) ^ _name_key(name))
            gen = np.random.Generator(bitgen)
            self._cache[name] = gen
        return gen

    def fresh(self, name: str) -> np.random.Generator:
        """Return a new generator for `name` rewound to its initial state."""
        bitgen = np.random.Philox(key=(self.seed << 64) ^ _name_key(name))
        return np.random.Generator(bitgen)
