"""Seeded random streams and Haar-distributed rotation matrices.

Every source of randomness in the package derives from a root seed plus a
path of string tags and integer indices, so that (for example) the matrix
for rotation ``r`` can be regenerated in isolation, in any order, on any
worker. Tags are hashed to 32-bit words and fed to ``numpy.random.SeedSequence``.
"""
from __future__ import annotations

import hashlib

import numpy as np

from .errors import ConfigError


def _entropy_words(seed: int, path: tuple) -> list[int]:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ConfigError(f"seed must be a nonnegative integer, got {seed!r}")
    words = [int(seed)]
    for part in path:
        if isinstance(part, (int, np.integer)):
            if part < 0:
                raise ConfigError(f"stream index must be nonnegative, got {part!r}")
            words.append(int(part))
        else:
            digest = hashlib.blake2b(str(part).encode("utf-8"), digest_size=4).digest()
            words.append(int.from_bytes(digest, "little"))
    return words


def seeded_rng(seed: int, *path) -> np.random.Generator:
    """Generator for the stream named by (seed, *path); stable across calls."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(_entropy_words(seed, path))))


def derive_seed(seed: int, *path) -> int:
    """Collapse a stream name to a plain nonnegative int seed."""
    ss = np.random.SeedSequence(_entropy_words(seed, path))
    return int(ss.generate_state(1, np.uint32)[0])


def rotation_rng(seed: int, r: int) -> np.random.Generator:
    """The stream that generates rotation matrix number ``r``."""
    return seeded_rng(seed, "rotation", r)


def haar_rotation(d: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a d x d orthogonal matrix from the Haar distribution.

    QR of a standard-Gaussian matrix, with columns flipped so the triangular
    factor has a positive diagonal; that sign convention makes the
    factorization unique and the output exactly Haar. O(d^3) per draw.
    """
    if d < 1:
        raise ConfigError(f"rotation dimension must be positive, got {d}")
    g = rng.standard_normal((d, d))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs
