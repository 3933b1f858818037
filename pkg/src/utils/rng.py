"""
Seeding and stream splitting.

Every chain owns a numpy Generator on the PCG64 bit generator. Chain i of a run
with master seed s is seeded with s XOR splitmix64(i), truncated to 64 bits.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
BIT_GENERATOR = "PCG64"


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def chain_seed(master_seed: int, index: int) -> int:
    return (int(master_seed) ^ splitmix64(int(index))) & MASK64


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & MASK64))


def chain_rng(master_seed: int, index: int) -> np.random.Generator:
    return make_rng(chain_seed(master_seed, index))
