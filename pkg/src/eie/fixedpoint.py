"""16-bit signed fixed-point helpers.

Values are carried as raw two's complement integers. A format with ``f``
fraction bits represents ``raw / 2**f``. Products of two Q(f) numbers are
Q(2f) and are accumulated in int64 before a single narrowing step.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TOTAL_BITS = 16
RAW_MIN = -(1 << (TOTAL_BITS - 1))
RAW_MAX = (1 << (TOTAL_BITS - 1)) - 1


@dataclass(frozen=True)
class FixedPointFormat:
    fraction_bits: int = 8
    total_bits: int = TOTAL_BITS

    def __post_init__(self):
        if self.total_bits != TOTAL_BITS:
            raise ValueError("only 16-bit formats are supported")
        if not 0 <= self.fraction_bits <= 15:
            raise ValueError(f"fraction_bits must be in [0, 15], got {self.fraction_bits}")

    @property
    def scale(self) -> int:
        return 1 << self.fraction_bits

    @property
    def resolution(self) -> float:
        return 1.0 / self.scale

    @property
    def max_real(self) -> float:
        return RAW_MAX / self.scale

    @property
    def min_real(self) -> float:
        return RAW_MIN / self.scale

    def __str__(self):
        return f"Q{self.total_bits - 1 - self.fraction_bits}.{self.fraction_bits}"


Q8_8 = FixedPointFormat(8)


def to_fixed(x, fmt: FixedPointFormat = Q8_8):
    """Round-to-nearest-even, saturating conversion of reals to raw int16.

    Returns ``(raw, n_saturated)``.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot convert non-finite values to fixed point")
    # scaling by a power of two is exact, so rint sees the true tie
    scaled = np.rint(x * fmt.scale)
    n_sat = int(np.count_nonzero((scaled > RAW_MAX) | (scaled < RAW_MIN)))
    raw = np.clip(scaled, RAW_MIN, RAW_MAX).astype(np.int16)
    return raw, n_sat


def to_real(raw, fmt: FixedPointFormat = Q8_8) -> np.ndarray:
    return np.asarray(raw, dtype=np.float64) / fmt.scale


def narrow(acc, fraction_bits: int) -> np.ndarray:
    """Narrow Q(2f) int64 accumulators to 16-bit Q(f).

    Shift right by ``f`` with round-half-to-even, then saturate.
    """
    acc = np.asarray(acc, dtype=np.int64)
    f = fraction_bits
    if f == 0:
        q = acc.copy()
    else:
        q = acc >> f  # floor division by 2**f
        rem = acc - (q << f)
        half = np.int64(1) << (f - 1)
        up = (rem > half) | ((rem == half) & ((q & 1) == 1))
        q = q + up.astype(np.int64)
    return np.clip(q, RAW_MIN, RAW_MAX).astype(np.int16)


def relu(acc):
    return np.maximum(acc, 0)


@dataclass
class ActivationVector:
    """Activation vector held as raw Q(f) int16 values."""

    raw: np.ndarray
    fmt: FixedPointFormat = Q8_8
    saturated: int = field(default=0, compare=False)

    def __post_init__(self):
        self.raw = np.asarray(self.raw)
        if self.raw.ndim != 1:
            raise ValueError("activation vector must be one-dimensional")
        if self.raw.dtype != np.int16:
            if self.raw.size and (self.raw.min() < RAW_MIN or self.raw.max() > RAW_MAX):
                raise ValueError("raw activation values out of int16 range")
            self.raw = self.raw.astype(np.int16)

    def __len__(self):
        return self.raw.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ActivationVector):
            return NotImplemented
        return self.fmt == other.fmt and np.array_equal(self.raw, other.raw)

    @property
    def values(self) -> np.ndarray:
        return to_real(self.raw, self.fmt)

    def nonzero(self) -> np.ndarray:
        return np.flatnonzero(self.raw)

    @property
    def density(self) -> float:
        return np.count_nonzero(self.raw) / max(len(self), 1)


def quantize_activations(x, fmt: FixedPointFormat = Q8_8) -> ActivationVector:
    raw, n_sat = to_fixed(x, fmt)
    return ActivationVector(np.atleast_1d(raw), fmt, saturated=n_sat)
