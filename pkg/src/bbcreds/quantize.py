"""Sign quantization of embeddings into fixed-length bit strings.

Real-valued embeddings are reduced to one bit per selected coordinate
(1 iff the coordinate is >= 0). The resulting bit strings feed the
error-correcting layer, so lengths here are code lengths, not embedding
dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .synthbio import Embedding

__all__ = ["BitString", "QuantizerConfig", "quantize", "hamming"]


@dataclass(frozen=True)
class BitString:
    """Immutable packed bit string of declared length ``n``.

    Bits are packed MSB-first; padding bits up to the byte boundary are
    required to be zero so that equal bit strings have equal bytes.
    """

    data: bytes
    n: int

    def __post_init__(self) -> None:
        if self.n <= 0:
            raise ValueError(f"bit length must be positive, got {self.n}")
        expected = (self.n + 7) // 8
        if len(self.data) != expected:
            raise ValueError(
                f"packed length {len(self.data)} does not match n={self.n} "
                f"(expected {expected} bytes)"
            )
        pad = 8 * expected - self.n
        if pad and (self.data[-1] & ((1 << pad) - 1)):
            raise ValueError("padding bits beyond n must be zero")

    @classmethod
    def from_bits(cls, bits: Iterable[int] | np.ndarray) -> "BitString":
        arr = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits,
                         dtype=np.uint8)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("bits must be a non-empty 1-d sequence")
        if np.any(arr > 1):
            raise ValueError("bits must be 0 or 1")
        return cls(np.packbits(arr).tobytes(), int(arr.size))

    @classmethod
    def zeros(cls, n: int) -> "BitString":
        return cls(bytes((n + 7) // 8), n)

    @classmethod
    def ones(cls, n: int) -> "BitString":
        return cls.from_bits(np.ones(n, dtype=np.uint8))

    def bits(self) -> np.ndarray:
        """Unpacked bits as a uint8 array of length n."""
        return np.unpackbits(np.frombuffer(self.data, dtype=np.uint8))[: self.n]

    def as_int(self) -> int:
        """Bits as an integer; bit j of the string is binary digit n-1-j."""
        return int.from_bytes(self.data, "big") >> (8 * len(self.data) - self.n)

    @classmethod
    def from_int(cls, value: int, n: int) -> "BitString":
        if value < 0 or value >> n:
            raise ValueError(f"value does not fit in {n} bits")
        nbytes = (n + 7) // 8
        return cls((value << (8 * nbytes - n)).to_bytes(nbytes, "big"), n)

    def weight(self) -> int:
        return int.from_bytes(self.data, "big").bit_count()

    def __xor__(self, other: "BitString") -> "BitString":
        if self.n != other.n:
            raise ValueError(f"length mismatch: {self.n} != {other.n}")
        return BitString(bytes(a ^ b for a, b in zip(self.data, other.data)), self.n)

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, j: int) -> int:
        if not 0 <= j < self.n:
            raise IndexError(j)
        return (self.data[j // 8] >> (7 - j % 8)) & 1


@dataclass(frozen=True)
class QuantizerConfig:
    """Which embedding coordinates become bits, and in which order.

    ``selected_positions`` must be strictly increasing indices into the
    embedding; with i.i.d. coordinates every position is statistically
    equivalent, so the default is simply the first ``code_length`` ones.
    """

    dim: int
    code_length: int
    selected_positions: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.code_length <= 0 or self.code_length > self.dim:
            raise ValueError(
                f"code_length must be in [1, dim]; got {self.code_length} for dim {self.dim}"
            )
        pos = self.selected_positions
        if len(pos) != self.code_length:
            raise ValueError("selected_positions length must equal code_length")
        if any(p < 0 or p >= self.dim for p in pos):
            raise ValueError("selected position out of range")
        if any(a >= b for a, b in zip(pos, pos[1:])):
            raise ValueError("selected_positions must be strictly increasing")

    @classmethod
    def default(cls, dim: int, code_length: int) -> "QuantizerConfig":
        return cls(dim, code_length, tuple(range(code_length)))

    def is_prefix_selection(self) -> bool:
        return self.selected_positions == tuple(range(self.code_length))


@lru_cache(maxsize=16)
def _position_array(cfg: QuantizerConfig) -> np.ndarray:
    return np.asarray(cfg.selected_positions, dtype=np.intp)


def quantize(e: Embedding, cfg: QuantizerConfig) -> BitString:
    """Binarize an embedding: bit i is 1 iff the selected coordinate is >= 0."""
    if e.dim != cfg.dim:
        raise ValueError(f"embedding dim {e.dim} does not match quantizer dim {cfg.dim}")
    bits = (e.values[_position_array(cfg)] >= 0.0).astype(np.uint8)
    return BitString(np.packbits(bits).tobytes(), cfg.code_length)


def hamming(a: BitString, b: BitString) -> int:
    """Number of differing bit positions between equal-length bit strings."""
    if a.n != b.n:
        raise ValueError(f"length mismatch: {a.n} != {b.n}")
    return (int.from_bytes(a.data, "big") ^ int.from_bytes(b.data, "big")).bit_count()
