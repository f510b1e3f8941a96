"""Counter-based RNG streams split per tester stage."""
from __future__ import annotations

import numpy as np

# Fixed child indices so that changing one stage's draw count never moves
# another stage's stream.
STAGES = {
    "moments": 0,
    "support": 1,
    "fourier": 2,
    "empirical": 3,
    "projection": 4,
    "mle": 5,
    "final": 6,
}


class StageStreams:
    """Independent Philox generators derived from one 64-bit seed."""

    def __init__(self, seed: int):
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self._cache: dict[str, np.random.Generator] = {}

    def __getitem__(self, stage: str) -> np.random.Generator:
        if stage not in STAGES:
            raise KeyError(stage)
        if stage not in self._cache:
            ss = np.random.SeedSequence(self.seed, spawn_key=(STAGES[stage],))
            self._cache[stage] = np.random.Generator(np.random.Philox(ss))
        return self._cache[stage]

    def split_map(self) -> dict:
        return {"seed": self.seed, "bit_generator": "Philox", "spawn_key": dict(STAGES)}


def as_streams(rng) -> StageStreams:
    """Accept a seed, a StageStreams, or a numpy Generator."""
    if isinstance(rng, StageStreams):
        return rng
    if isinstance(rng, np.random.Generator):
        return StageStreams(int(rng.integers(0, 2**63)))
    return StageStreams(int(rng))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
