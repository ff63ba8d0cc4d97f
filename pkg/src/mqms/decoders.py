"""Message-passing decoders on finite Tanner graphs: MQMS, QMS, SPA.

All decoders use a flooding schedule and syndrome-based early termination.
Quantized messages are stored as small signed integers (symbol indices) so
quantization is exact and traces are directly comparable to DE.  Decoding is
vectorized over edges and over a batch of frames.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSpec, QuantizedChannel, channel_llr
from .de import ReliabilitySchedule
from .graph import TannerGraph
from .quant import QuantizerSpec, llr_of_symbol, quantize

_BIG = np.int64(1) << 40


@dataclass(frozen=True)
class DecoderConfig:
    """Configuration shared by the three decoder kinds.

    kind "mqms": needs ``qspec``, ``schedule`` and ``channel`` (ChannelSpec for
    real observations, QuantizedChannel for channel symbol indices).
    kind "qms": needs ``qspec`` and a ChannelSpec; the channel LLR is quantized
    by ``channel_qspec`` (defaulting to the message quantizer).
    kind "spa": takes channel LLRs directly; ``llr_clamp`` bounds all LLRs.
    """

    kind: str
    l_max: int = 30
    qspec: QuantizerSpec | None = None
    channel: ChannelSpec | QuantizedChannel | None = None
    channel_qspec: QuantizerSpec | None = None
    schedule: ReliabilitySchedule | None = None
    llr_clamp: float = 30.0

    def __post_init__(self):
        if self.kind not in ("mqms", "qms", "spa"):
            raise ValueError(f"unknown decoder kind {self.kind!r}")
        if self.kind in ("mqms", "qms") and self.qspec is None:
            raise ValueError(f"{self.kind} requires a message quantizer")
        if self.kind == "mqms" and self.schedule is not None and len(self.schedule) == 0:
            raise ValueError("mqms schedule must be non-empty when given")


@dataclass
class DecodeResult:
    hard_bits: np.ndarray  # +-1 per VN
    success: bool
    iterations_used: int
    bit_errors: int  # versus the all-zeros (all +1) codeword


class EdgeArrays:
    """Edge-indexed view of a Tanner graph for vectorized message passing."""

    def __init__(self, g: TannerGraph):
        ev, ec = [], []
        for v, row in enumerate(g.vn_adj):
            ev.extend([v] * len(row))
            ec.extend(row)
        self.graph = g
        self.n, self.m = g.n, g.m
        self.edge_vn = np.asarray(ev, dtype=np.int64)
        self.edge_cn = np.asarray(ec, dtype=np.int64)
        self.n_edges = self.edge_vn.size
        vn_degs = np.asarray([len(r) for r in g.vn_adj], dtype=np.int64)
        cn_degs = np.asarray([len(r) for r in g.cn_adj], dtype=np.int64)
        if (cn_degs < 1).any():
            raise ValueError("decoders require every CN degree >= 1")
        self.vn_ptr = np.concatenate([[0], np.cumsum(vn_degs)])
        self.cn_ptr = np.concatenate([[0], np.cumsum(cn_degs)])
        # Permutation from VN-major edge order to CN-major and back.
        self.to_cn = np.lexsort((self.edge_vn, self.edge_cn))
        self.to_vn = np.argsort(self.to_cn)
        self.cn_of_edge = np.repeat(np.arange(self.m), cn_degs)  # CN-major
        self.vn_of_edge_cn = self.edge_vn[self.to_cn]            # CN-major

    def vn_sum(self, per_edge: np.ndarray) -> np.ndarray:
        """Sum a VN-major per-edge array over each VN -> (..., n)."""
        return np.add.reduceat(per_edge, self.vn_ptr[:-1], axis=-1)

    def syndrome_ok(self, hard: np.ndarray) -> np.ndarray:
        """True per frame iff every CN sees an even number of -1 bits."""
        neg = (hard[..., self.vn_of_edge_cn] < 0).astype(np.int64)
        counts = np.add.reduceat(neg, self.cn_ptr[:-1], axis=-1)
        return (counts % 2 == 0).all(axis=-1)


def syndrome_check(g: TannerGraph, hard_bits) -> bool:
    """True iff every CN has an even number of -1 neighbors."""
    hard = np.asarray(hard_bits)
    if not np.isin(hard, (-1, 1)).all():
        raise ValueError("hard bits must be resolved to +-1")
    return bool(EdgeArrays(g).syndrome_ok(hard[None, :])[0])


def _cn_minsum(ea: EdgeArrays, m_vn: np.ndarray) -> np.ndarray:
    """Extrinsic min-sum CN outputs (integer symbols), VN-major order."""
    mc = m_vn[..., ea.to_cn]
    mag = np.abs(mc)
    neg = mc < 0
    nneg = np.add.reduceat(neg.astype(np.int64), ea.cn_ptr[:-1], axis=-1)
    cols = np.arange(ea.n_edges, dtype=np.int64)
    coded = mag.astype(np.int64) * ea.n_edges + cols
    c1 = np.minimum.reduceat(coded, ea.cn_ptr[:-1], axis=-1)
    min1 = c1 // ea.n_edges
    arg1 = c1 % ea.n_edges
    mag2 = mag.astype(np.int64).copy()
    np.put_along_axis(mag2, arg1, _BIG, axis=-1)
    min2 = np.minimum.reduceat(mag2, ea.cn_ptr[:-1], axis=-1)
    is_arg = cols[None, :] == np.take(arg1, ea.cn_of_edge, axis=-1)
    emag = np.where(is_arg, np.take(min2, ea.cn_of_edge, axis=-1),
                    np.take(min1, ea.cn_of_edge, axis=-1))
    n_other = np.take(nneg, ea.cn_of_edge, axis=-1) - neg.astype(np.int64)
    sign = 1 - 2 * (n_other & 1)
    return (sign * emag)[..., ea.to_vn]


def _cn_spa(ea: EdgeArrays, m_vn: np.ndarray, clamp: float) -> np.ndarray:
    """Extrinsic tanh-rule CN outputs, VN-major order."""
    mc = np.clip(m_vn[..., ea.to_cn], -clamp, clamp)
    t = np.tanh(0.5 * mc)
    logt = np.log(np.maximum(np.abs(t), 1e-300))
    neg = (t < 0).astype(np.int64)
    slog = np.add.reduceat(logt, ea.cn_ptr[:-1], axis=-1)
    nneg = np.add.reduceat(neg, ea.cn_ptr[:-1], axis=-1)
    elog = np.take(slog, ea.cn_of_edge, axis=-1) - logt
    n_other = np.take(nneg, ea.cn_of_edge, axis=-1) - neg
    sign = 1 - 2 * (n_other & 1)
    prod = np.clip(np.exp(elog), 0.0, 1.0 - 1e-16)
    return (2.0 * np.arctanh(prod) * sign)[..., ea.to_vn]


def decode_batch(graph, observations, cfg: DecoderConfig,
                 record_iters=()) -> tuple[list[DecodeResult], dict[int, np.ndarray]]:
    """Decode a batch of frames; observations shape (batch, n).

    ``record_iters`` selects iteration numbers whose VN-to-CN message arrays
    (VN-major, integer symbols or LLRs) are returned alongside the results.
    """
    ea = graph if isinstance(graph, EdgeArrays) else EdgeArrays(graph)
    obs = np.asarray(observations)
    if obs.ndim != 2 or obs.shape[1] != ea.n:
        raise ValueError("observations must have shape (batch, n)")
    nb = obs.shape[0]
    record = {}

    if cfg.kind == "mqms":
        if cfg.schedule is None:
            raise ValueError("mqms decoding requires a reliability schedule "
                             "(run density evolution first)")
        if isinstance(cfg.channel, QuantizedChannel):
            lch = llr_of_symbol(obs.astype(np.int64), cfg.channel.rel)
        else:
            lch = channel_llr(obs, cfg.channel)
        m = quantize(lch, cfg.qspec)[..., ea.edge_vn]
    elif cfg.kind == "qms":
        chq = cfg.channel_qspec or cfg.qspec
        lch = chq.step * quantize(channel_llr(obs, cfg.channel), chq)
        m = quantize(lch, cfg.qspec)[..., ea.edge_vn]
    else:
        lch = np.clip(obs.astype(float), -cfg.llr_clamp, cfg.llr_clamp)
        m = lch[..., ea.edge_vn]
    if 0 in record_iters:
        record[0] = m.copy()

    hard = np.where(lch > 0, 1, -1).astype(np.int8)
    done = ea.syndrome_ok(hard)
    hard_out = hard.copy()
    iters = np.where(done, 0, cfg.l_max).astype(np.int64)
    success = done.copy()

    for it in range(1, cfg.l_max + 1):
        if done.all():
            break
        if cfg.kind == "mqms":
            extr = _cn_minsum(ea, m)
            d = cfg.schedule.reliability(it)
            lex = llr_of_symbol(extr, d)
            tot = lch + ea.vn_sum(lex)
            m = quantize(tot[..., ea.edge_vn] - lex, cfg.qspec)
        elif cfg.kind == "qms":
            extr = cfg.qspec.step * _cn_minsum(ea, m)
            tot = lch + ea.vn_sum(extr)
            m = quantize(tot[..., ea.edge_vn] - extr, cfg.qspec)
        else:
            extr = _cn_spa(ea, m, cfg.llr_clamp)
            tot = np.clip(lch + ea.vn_sum(extr), -cfg.llr_clamp, cfg.llr_clamp)
            m = np.clip(tot[..., ea.edge_vn] - extr, -cfg.llr_clamp, cfg.llr_clamp)
        if it in record_iters:
            record[it] = m.copy()
        hard = np.where(tot > 0, 1, -1).astype(np.int8)
        ok = ea.syndrome_ok(hard)
        newly = ok & ~done
        if newly.any():
            hard_out[newly] = hard[newly]
            iters[newly] = it
            success |= newly
            done |= newly

    still = ~done
    if still.any():
        hard_out[still] = hard[still]

    results = [DecodeResult(hard_bits=hard_out[b], success=bool(success[b]),
                            iterations_used=int(iters[b]),
                            bit_errors=int((hard_out[b] < 0).sum()))
               for b in range(nb)]
    return results, record


def _decode_one(graph, observations, cfg: DecoderConfig) -> DecodeResult:
    results, _ = decode_batch(graph, np.asarray(observations)[None, :], cfg)
    return results[0]


def mqms_decode(graph, observations, cfg: DecoderConfig) -> DecodeResult:
    """Matched quantized min-sum decoding of one frame."""
    if cfg.kind != "mqms":
        raise ValueError("config kind must be 'mqms'")
    return _decode_one(graph, observations, cfg)


def qms_decode(graph, observations, cfg: DecoderConfig) -> DecodeResult:
    """Quantized min-sum baseline decoding of one frame."""
    if cfg.kind != "qms":
        raise ValueError("config kind must be 'qms'")
    return _decode_one(graph, observations, cfg)


def spa_decode(graph, llrs, cfg: DecoderConfig) -> DecodeResult:
    """Sum-product decoding of one frame of channel LLRs."""
    if cfg.kind != "spa":
        raise ValueError("config kind must be 'spa'")
    return _decode_one(graph, llrs, cfg)
