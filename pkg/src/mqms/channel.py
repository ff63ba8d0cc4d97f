"""biAWGN channel model, channel LLRs, and quantized-output channels."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .quant import D_MAX, QuantizerSpec, reliability_from_pmf

_SQRT2 = math.sqrt(2.0)


def qfunc(x):
    """Gaussian tail function Q(x) = P{N(0,1) > x}."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / _SQRT2)


@dataclass(frozen=True)
class ChannelSpec:
    """biAWGN channel operating point: E_b/N_0 in dB at code rate ``rate``."""

    ebn0_db: float
    rate: float

    def __post_init__(self):
        if not 0 < self.rate < 1:
            raise ValueError("rate must lie in (0, 1)")

    @property
    def ebn0(self) -> float:
        return 10.0 ** (self.ebn0_db / 10.0)

    @property
    def sigma2(self) -> float:
        """Noise variance of Y = X + N for inputs +-1."""
        return 1.0 / (2.0 * self.rate * self.ebn0)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @property
    def mu_ch(self) -> float:
        """Mean of the channel LLR given X = +1: 4 R E_b/N_0."""
        return 4.0 * self.rate * self.ebn0

    @property
    def sigma_ch(self) -> float:
        """Std of the channel LLR: sigma_ch^2 = 2 mu_ch."""
        return math.sqrt(2.0 * self.mu_ch)


def channel_llr(y, spec: ChannelSpec):
    """LLR of a channel output: 2 y / sigma^2."""
    return 2.0 * np.asarray(y, dtype=float) / spec.sigma2


def sample_output(x, spec: ChannelSpec, rng: np.random.Generator) -> np.ndarray:
    """Sample Y = X + N with N ~ N(0, sigma^2) from the given random stream."""
    x = np.asarray(x, dtype=float)
    return x + spec.sigma * rng.standard_normal(x.shape)


def gaussian_cell_pmf(mu: float, sigma: float, qspec: QuantizerSpec) -> np.ndarray:
    """Mass of N(mu, sigma^2) over the quantizer cells, indexed i = -S .. S.

    Interior cell i covers ((i-1/2) step, (i+1/2) step]; the edge cells take
    the saturated Gaussian tails.
    """
    s = qspec.sat_level
    bounds = qspec.step * (np.arange(-s + 1, s + 1) - 0.5)
    tails = qfunc((bounds - mu) / sigma)
    p = np.empty(2 * s + 1)
    p[0] = 1.0 - tails[0]
    p[-1] = tails[-1]
    p[1:-1] = tails[:-1] - tails[1:]
    np.clip(p, 0.0, None, out=p)
    return p


@dataclass(frozen=True)
class QuantizedChannel:
    """biAWGN output quantized by a b0-bit uniform quantizer.

    ``trans[k]`` is P{quantize(Y) = k | X = +1} over symbol indices
    k = -S0 .. S0, and ``rel`` holds the per-magnitude channel reliabilities
    ln(trans[a] / trans[-a]).
    """

    spec: ChannelSpec
    qspec: QuantizerSpec
    trans: np.ndarray
    rel: np.ndarray

    def llr_table(self) -> np.ndarray:
        """LLR value of every channel symbol, indexed k = -S0 .. S0."""
        from .quant import symbol_llr_table

        return symbol_llr_table(self.rel)


def build_quantized_channel(spec: ChannelSpec, qspec: QuantizerSpec,
                            d_max: float = D_MAX) -> QuantizedChannel:
    trans = gaussian_cell_pmf(1.0, spec.sigma, qspec)
    rel = reliability_from_pmf(trans, d_max=d_max)
    trans.setflags(write=False)
    rel.setflags(write=False)
    return QuantizedChannel(spec=spec, qspec=qspec, trans=trans, rel=rel)
