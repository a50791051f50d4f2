import numpy as np

from src.core.enums import StreamName


def stream(seed: int, name: StreamName) -> np.random.Generator:
    """Independent generator for one named sub-stream of a master seed.
    Asking twice for the same (seed, name) gives identical generators."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(name),)))


def run_seeds(master_seed: int, count: int) -> list[int]:
    return [master_seed + k for k in range(count)]
