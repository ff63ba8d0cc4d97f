"""Uniform message quantizers and symmetric-DMC reliability utilities."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Cap for log-likelihood ratios derived from vanishing probabilities.  Far
# beyond any quantizer saturation point, so it never changes a quantized
# output, while keeping downstream sums finite.
D_MAX = 60.0


@dataclass(frozen=True)
class QuantizerSpec:
    """A b-bit uniform quantizer with step ``step`` and 2^b - 1 levels.

    The symbol alphabet is the set of integer indices {-S, ..., S} with
    S = 2^(b-1) - 1; index i represents the value i * step.
    """

    bits: int
    step: float

    def __post_init__(self):
        if self.bits < 2:
            raise ValueError("quantizer needs at least 2 bits")
        if not self.step > 0:
            raise ValueError("quantizer step must be positive")

    @property
    def sat_level(self) -> int:
        return 2 ** (self.bits - 1) - 1

    @property
    def n_symbols(self) -> int:
        return 2 * self.sat_level + 1

    def symbol_values(self) -> np.ndarray:
        """Represented values step * i for i = -S .. S."""
        s = self.sat_level
        return self.step * np.arange(-s, s + 1, dtype=float)


def quantize(x, spec: QuantizerSpec):
    """Quantize reals to symbol indices: sign(x) * min(floor(|x|/step + 1/2), S).

    sign(0) = 0, so quantize(0) = 0.  Accepts scalars or arrays.
    """
    arr = np.asarray(x, dtype=float)
    mag = np.minimum(np.floor(np.abs(arr) / spec.step + 0.5), spec.sat_level)
    idx = (np.sign(arr) * mag).astype(np.int64)
    return int(idx) if idx.ndim == 0 else idx


def reliability_from_pmf(pmf, d_max: float = D_MAX) -> np.ndarray:
    """Reliabilities D_a = ln(pmf[a] / pmf[-a]) for a = 1..S, clamped to [-d_max, d_max].

    Conventions: pmf[-a] = 0 < pmf[a] gives d_max; both zero gives 0.
    """
    p = np.asarray(pmf, dtype=float)
    if p.ndim != 1 or p.size % 2 == 0:
        raise ValueError("pmf must be a 1-D vector of odd length")
    s = p.size // 2
    pos = p[s + 1:]
    neg = p[s - 1::-1]
    d = np.zeros(s)
    both = (pos > 0) & (neg > 0)
    d[both] = np.log(pos[both]) - np.log(neg[both])
    d[(pos > 0) & (neg == 0)] = d_max
    d[(pos == 0) & (neg > 0)] = -d_max
    return np.clip(d, -d_max, d_max)


def llr_of_symbol(i, d: np.ndarray):
    """LLR of symbol index i: sign(i) * d[|i|]; 0 for i = 0."""
    idx = np.asarray(i)
    d = np.asarray(d, dtype=float)
    out = np.where(idx == 0, 0.0,
                   np.sign(idx) * np.take(d, np.abs(idx) - 1, mode="clip"))
    return float(out) if out.ndim == 0 else out


def symbol_llr_table(d: np.ndarray) -> np.ndarray:
    """Full per-symbol LLR table [-d_S, ..., -d_1, 0, d_1, ..., d_S]."""
    d = np.asarray(d, dtype=float)
    return np.concatenate([-d[::-1], [0.0], d])
