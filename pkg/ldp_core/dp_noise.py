"""
Calibrated Laplace noise and its tail bound.

All randomness in a run flows through a NoiseSource: an immutable
(mode, scale, key) record. A draw is a pure function of (key, label), where the
label names the consumer, e.g. "counter/17/level/2/epoch/3". Two runs that use
the same labels therefore see the same noise, which is how memoryless and
memoryful users, or neighboring graphs, are coupled.

Draws use the inverse CDF on a 64-bit uniform derived from a keyed blake2b
hash of the label; resolution below 2**-53 is lost to float conversion.
"""

import hashlib
import math
from typing import NamedTuple

import numpy as np

from .config import NOISE_MODES
from .errors import InvalidInputError


class NoiseSource(NamedTuple):
    mode: str
    scale: float
    rng_key: int


def make_noise_source(seed: int, mode: str = 'laplace', scale: float = 1.0) -> NoiseSource:
    if mode not in NOISE_MODES:
        raise InvalidInputError(f"Unknown noise mode {mode!r}; choose from {', '.join(NOISE_MODES)}")
    if mode == 'laplace' and not scale > 0:
        raise InvalidInputError(f"Laplace scale must be positive, got {scale}")
    if not 0 <= seed < 2 ** 64:
        raise InvalidInputError(f"Seed must be an unsigned 64-bit integer, got {seed}")
    return NoiseSource(mode=mode, scale=float(scale), rng_key=int(seed))


def derive(src: NoiseSource, scale: float) -> NoiseSource:
    """Same key and mode, different scale."""
    if src.mode == 'laplace' and not scale > 0:
        raise InvalidInputError(f"Laplace scale must be positive, got {scale}")
    return src._replace(scale=float(scale))


def noise_label(*parts) -> str:
    return '/'.join(str(p) for p in parts)


def _digest(src: NoiseSource, label: str, size: int) -> bytes:
    key = src.rng_key.to_bytes(8, 'little')
    return hashlib.blake2b(label.encode('utf-8'), key=key, digest_size=size).digest()


def uniform_64(src: NoiseSource, label: str) -> float:
    """Uniform in the open interval (0, 1) from 64 hashed bits."""
    bits = int.from_bytes(_digest(src, label, 8), 'little')
    return (bits + 0.5) / 2 ** 64


def sample_laplace(src: NoiseSource, label: str) -> float:
    """
    One Lap(scale) draw for `label`, or exactly 0.0 when noise is disabled.
    """
    if src.mode == 'disabled':
        return 0.0
    if not src.scale > 0:
        raise InvalidInputError(f"Laplace scale must be positive, got {src.scale}")
    # Shift to (-0.5, 0.5) to handle both tails
    u = uniform_64(src, label) - 0.5
    # Inverse CDF: -b * sign(u) * ln(1 - 2|u|)
    if u >= 0:
        return -src.scale * math.log1p(-2 * u)
    return src.scale * math.log1p(2 * u)


def laplace_array(src: NoiseSource, label: str, size: int) -> np.ndarray:
    """
    `size` independent Lap(scale) draws from the substream named by `label`;
    used by Monte Carlo checks where per-draw labels would be wasteful.
    """
    if src.mode == 'disabled':
        return np.zeros(size)
    entropy = np.frombuffer(_digest(src, label, 16), dtype=np.uint32)
    rng = np.random.default_rng(np.random.SeedSequence(entropy.tolist()))
    return rng.laplace(loc=0.0, scale=src.scale, size=size)


def tail_radius(b: float, beta: float) -> float:
    """
    Radius r = b * ln(1/beta) with Pr[|Lap(b)| > r] <= beta.
    """
    if not 0 < beta < 1:
        raise InvalidInputError(f"beta must lie in (0, 1), got {beta}")
    if not b > 0:
        raise InvalidInputError(f"Laplace scale must be positive, got {b}")
    return b * math.log(1.0 / beta)


def laplace_scale(sensitivity: float, epsilon: float) -> float:
    """scale = sensitivity / epsilon."""
    if epsilon <= 0:
        raise InvalidInputError(f"Epsilon must be positive, got {epsilon}")
    if sensitivity < 0:
        raise InvalidInputError(f"Sensitivity must be non-negative, got {sensitivity}")
    return sensitivity / epsilon
