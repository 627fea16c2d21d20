"""Seed derivation and generator construction.

Every random stream is a numpy ``PCG64`` generator whose 64-bit seed is
derived as the first 8 bytes (big-endian) of
``sha256(f"{seed}:{tag}:{index}")``.  The bit generator is then seeded via
numpy's ``SeedSequence(derived_seed)``, which is itself a documented
algorithm, so a port only has to reproduce the hashing and PCG64.
"""
import hashlib

import numpy as np


def derive_seed(seed, tag="", index=0):
    digest = hashlib.sha256(f"{int(seed)}:{tag}:{int(index)}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def make_rng(seed, tag="", index=0):
    return np.random.Generator(np.random.PCG64(derive_seed(seed, tag, index)))
