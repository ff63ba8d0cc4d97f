"""Stability of the DE recursion at the zero-error fixed point.

Builds the Jacobian of the one-iteration DE map at the all-correct message
distribution and tests whether its spectral radius is below one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSpec, QuantizedChannel
from .de import de_init_quantized, de_init_unquantized
from .ensemble import DegreeDistribution
from .quant import QuantizerSpec


class PowerIterationError(RuntimeError):
    """Power iteration failed to converge."""


@dataclass
class StabilityMatrix:
    """Jacobian of the DE map at p = 0, indexed i, j in {-S, ..., S-1}."""

    a: np.ndarray
    alpha: float
    gamma: np.ndarray  # gamma_i for i = -S+1 .. S-1


def build_jacobian(dd: DegreeDistribution, channel,
                   qspec: QuantizerSpec) -> StabilityMatrix:
    """Populate the fixed-point Jacobian from the ensemble and channel.

    ``channel`` is a ChannelSpec (unquantized output) or QuantizedChannel;
    alpha and the gamma vector are the saturated-negative and interior cell
    masses of the initial channel-LLR distribution.
    """
    if min(dd.lam) < 2:
        raise ValueError("stability analysis requires minimum VN degree >= 2")
    if isinstance(channel, QuantizedChannel):
        p0 = de_init_quantized(channel, qspec)
    elif isinstance(channel, ChannelSpec):
        p0 = de_init_unquantized(channel, qspec)
    else:
        raise TypeError("channel must be ChannelSpec or QuantizedChannel")
    s = qspec.sat_level
    alpha = float(p0[0])
    gamma = p0[1:2 * s].copy()
    rp = dd.rho_derivative_at_1()
    lam2 = dd.lam.get(2, 0.0)
    lam3 = dd.lam.get(3, 0.0)
    a = np.zeros((2 * s, 2 * s))
    a[0, 0] = rp * (2.0 * lam3 * alpha + lam2)
    a[0, 1:] = lam2 * alpha * rp
    a[1:, 0] = 2.0 * rp * lam3 * gamma
    a[1:, 1:] = rp * lam2 * gamma[:, None]
    return StabilityMatrix(a=a, alpha=alpha, gamma=gamma)


def spectral_radius(m: StabilityMatrix, *, max_iter: int = 10_000,
                    rel_tol: float = 1e-12) -> float:
    """Largest eigenvalue magnitude via power iteration.

    The matrix is entrywise nonnegative, so the dominant eigenvalue is real
    and nonnegative and is reached from a positive start vector.
    """
    a = m.a if isinstance(m, StabilityMatrix) else np.asarray(m, dtype=float)
    x = np.full(a.shape[0], 1.0 / np.sqrt(a.shape[0]))
    r_prev = np.inf
    for _ in range(max_iter):
        y = a @ x
        r = float(np.linalg.norm(y))
        if r == 0.0:
            return 0.0
        x = y / r
        if abs(r - r_prev) <= rel_tol * r:
            return r
        r_prev = r
    raise PowerIterationError(f"no convergence after {max_iter} iterations "
                              f"(last estimate {r_prev})")


def is_stable(dd: DegreeDistribution, channel,
              qspec: QuantizerSpec) -> tuple[bool, float]:
    """Whether the zero-error fixed point is attractive, plus the radius."""
    r = spectral_radius(build_jacobian(dd, channel, qspec))
    return r < 1.0, r
