"""Synthetic identities and noisy embedding samples.

Stands in for a face-embedding pipeline so the protocol can be exercised
and measured without biometric data. An identity is a unit-norm Gaussian
reference vector; genuine captures add per-coordinate Gaussian noise
before renormalization, impostor captures are fresh independent vectors.

All operations are pure functions of their seeds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DEFAULT_DIM",
    "MIN_DIM",
    "Embedding",
    "IdentityProfile",
    "NoiseModel",
    "new_identity",
    "sample_genuine",
    "sample_impostor",
]

DEFAULT_DIM = 512
MIN_DIM = 8

_SEED_MASK = (1 << 64) - 1


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed & _SEED_MASK)


@dataclass(frozen=True, eq=False)
class Embedding:
    """Unit-norm real vector standing in for a biometric template."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("embedding must be a non-empty 1-d vector")
        if not np.all(np.isfinite(v)):
            raise ValueError("embedding values must be finite")
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"embedding must be unit norm (got {norm:.8f})")

    @property
    def dim(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True, eq=False)
class IdentityProfile:
    """A synthetic person: reference embedding plus the seed that made it."""

    mean: Embedding
    seed: int


@dataclass(frozen=True)
class NoiseModel:
    """Per-dimension Gaussian capture noise (std-dev before renormalization)."""

    sigma: float

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")


def _normalized(v: np.ndarray) -> Embedding:
    return Embedding(v / np.linalg.norm(v))


def new_identity(seed: int, dim: int = DEFAULT_DIM) -> IdentityProfile:
    """Create a reproducible identity with a unit-norm Gaussian reference."""
    if dim < MIN_DIM:
        raise ValueError(f"dim must be >= {MIN_DIM}, got {dim}")
    mean = _normalized(_rng(seed).standard_normal(dim))
    return IdentityProfile(mean=mean, seed=seed & _SEED_MASK)


def sample_genuine(profile: IdentityProfile, noise: NoiseModel, rng_seed: int) -> Embedding:
    """A noisy capture of the profile: normalize(mean + sigma * g).

    With sigma == 0 the reference is returned unchanged (it is already
    unit norm), so zero-noise captures are bit-identical to the mean.
    """
    if noise.sigma == 0.0:
        return Embedding(profile.mean.values.copy())
    g = _rng(rng_seed).standard_normal(profile.mean.dim)
    return _normalized(profile.mean.values + noise.sigma * g)


def sample_impostor(rng_seed: int, dim: int = DEFAULT_DIM) -> Embedding:
    """An identity-independent capture: a fresh normalized Gaussian vector."""
    if dim < MIN_DIM:
        raise ValueError(f"dim must be >= {MIN_DIM}, got {dim}")
    return _normalized(_rng(rng_seed).standard_normal(dim))
