import numpy as np
import pytest

from mqms.channel import ChannelSpec, build_quantized_channel, channel_llr
from mqms.de import ReliabilitySchedule, de_run
from mqms.decoders import (DecoderConfig, decode_batch, mqms_decode, qms_decode,
                           spa_decode, syndrome_check)
from mqms.ensemble import DegreeDistribution
from mqms.graph import TannerGraph, degree_sequence, peg_construct
from mqms.quant import QuantizerSpec, llr_of_symbol, quantize


@pytest.fixture(scope="module")
def small_graph():
    dd = DegreeDistribution.regular(3, 6)
    vn, cn = degree_sequence(48, dd)
    return peg_construct(vn, cn, seed=0)


@pytest.fixture(scope="module")
def channel():
    return ChannelSpec(ebn0_db=3.0, rate=0.5)


@pytest.fixture(scope="module")
def schedule(channel):
    dd = DegreeDistribution.regular(3, 6)
    rep = de_run(dd, QuantizerSpec(3, 1.0), channel)
    return rep.schedule


def _mqms_cfg(channel, schedule, l_max=30):
    return DecoderConfig(kind="mqms", l_max=l_max, qspec=QuantizerSpec(3, 1.0),
                         channel=channel, schedule=schedule)


def test_syndrome_check_toy_code():
    # single CN over three VNs: parity of the three bits
    g = TannerGraph(n=3, m=2, vn_adj=[[0, 1], [0, 1], [0, 1]])
    assert syndrome_check(g, [1, 1, 1])
    assert syndrome_check(g, [1, -1, -1])
    assert not syndrome_check(g, [-1, 1, 1])
    with pytest.raises(ValueError):
        syndrome_check(g, [0, 1, 1])


def test_noiseless_decodes_in_zero_iterations(small_graph, channel, schedule):
    cfg = _mqms_cfg(channel, schedule)
    y = np.ones(small_graph.n)
    res = mqms_decode(small_graph, y, cfg)
    assert res.success
    assert res.iterations_used == 0
    assert res.bit_errors == 0


def test_mqms_corrects_small_noise(small_graph, channel, schedule):
    cfg = _mqms_cfg(channel, schedule)
    rng = np.random.default_rng(2)
    ok = 0
    for _ in range(50):
        y = 1.0 + channel.sigma * rng.standard_normal(small_graph.n)
        res = mqms_decode(small_graph, y, cfg)
        ok += res.success and res.bit_errors == 0
    # uncoded, ~33% of frames would be error-free at 3 dB; decoding must do
    # far better even on this toy-sized code
    assert ok >= 38


def test_sign_negation_symmetry(small_graph, channel, schedule):
    """Flipping all observation signs flips every hard decision bit-exactly."""
    cfg = _mqms_cfg(channel, schedule)
    rng = np.random.default_rng(3)
    y = 1.0 + channel.sigma * rng.standard_normal((4, small_graph.n))
    res_pos, rec_pos = decode_batch(small_graph, y, cfg, record_iters=(0, 1, 2))
    res_neg, rec_neg = decode_batch(small_graph, -y, cfg, record_iters=(0, 1, 2))
    for rp, rn in zip(res_pos, res_neg):
        np.testing.assert_array_equal(rp.hard_bits, -rn.hard_bits)
        assert rp.iterations_used == rn.iterations_used
    for it in rec_pos:
        np.testing.assert_array_equal(rec_pos[it], -rec_neg[it])


def _reference_mqms(g, y, cfg):
    """Per-node dictionary implementation of MQMS message passing."""
    lch = 2.0 * np.asarray(y) / cfg.channel.sigma2
    msgs = {(v, c): quantize(float(lch[v]), cfg.qspec)
            for v in range(g.n) for c in g.vn_adj[v]}
    traces = {0: dict(msgs)}
    for it in range(1, cfg.l_max + 1):
        d = cfg.schedule.reliability(it)
        cn_out = {}
        for c in range(g.m):
            for v in g.cn_adj[c]:
                others = [msgs[(u, c)] for u in g.cn_adj[c] if u != v]
                sign = np.prod([np.sign(o) for o in others])
                cn_out[(c, v)] = int(sign * min(abs(o) for o in others))
        new = {}
        for v in range(g.n):
            lex = {c: llr_of_symbol(cn_out[(c, v)], d) for c in g.vn_adj[v]}
            tot = float(lch[v]) + sum(lex.values())
            for c in g.vn_adj[v]:
                new[(v, c)] = quantize(tot - lex[c], cfg.qspec)
        msgs = new
        traces[it] = dict(msgs)
    return traces


def test_mqms_matches_reference_trace(channel, schedule):
    dd = DegreeDistribution.regular(3, 6)
    vn, cn = degree_sequence(24, dd)
    g = peg_construct(vn, cn, seed=5)
    cfg = _mqms_cfg(channel, schedule, l_max=4)
    rng = np.random.default_rng(9)
    y = 1.0 + channel.sigma * rng.standard_normal(g.n)
    # disable early termination effects by checking recorded iterations only
    # on a frame that does not satisfy the syndrome immediately
    _, rec = decode_batch(g, y[None, :], cfg, record_iters=(0, 1, 2, 3, 4))
    ref = _reference_mqms(g, y, cfg)
    edge_order = [(v, c) for v in range(g.n) for c in g.vn_adj[v]]
    for it in sorted(rec):
        want = np.array([ref[it][e] for e in edge_order])
        got = rec[it][0]
        # early termination freezes messages once the syndrome holds; compare
        # only while the batch decoder was still iterating
        np.testing.assert_array_equal(got, want, err_msg=f"iteration {it}")
        if syndrome_check(g, np.where(
                2 * y / channel.sigma2 > 0, 1, -1)) or it >= cfg.l_max:
            break


def test_qms_decodes_noiseless(small_graph, channel):
    cfg = DecoderConfig(kind="qms", l_max=20, qspec=QuantizerSpec(4, 0.5),
                        channel=channel, channel_qspec=QuantizerSpec(4, 0.5))
    res = qms_decode(small_graph, np.ones(small_graph.n), cfg)
    assert res.success and res.bit_errors == 0


def test_spa_decodes_noisy_frames(small_graph, channel):
    cfg = DecoderConfig(kind="spa", l_max=30, llr_clamp=30.0)
    rng = np.random.default_rng(4)
    ok = 0
    for _ in range(50):
        y = 1.0 + channel.sigma * rng.standard_normal(small_graph.n)
        res = spa_decode(small_graph, channel_llr(y, channel), cfg)
        ok += res.success and res.bit_errors == 0
    assert ok >= 46


def test_mqms_quantized_channel_inputs(small_graph, channel):
    ch_q = QuantizerSpec(4, 0.4)
    qc = build_quantized_channel(channel, ch_q)
    dd = DegreeDistribution.regular(3, 6)
    rep = de_run(dd, QuantizerSpec(4, 0.5), qc)
    cfg = DecoderConfig(kind="mqms", l_max=30, qspec=QuantizerSpec(4, 0.5),
                        channel=qc, schedule=rep.schedule)
    rng = np.random.default_rng(6)
    y = 1.0 + channel.sigma * rng.standard_normal(small_graph.n)
    sym = quantize(y, ch_q)
    res = mqms_decode(small_graph, sym, cfg)
    assert res.hard_bits.shape == (small_graph.n,)


def test_decoder_config_validation(channel, schedule):
    with pytest.raises(ValueError):
        DecoderConfig(kind="nope")
    with pytest.raises(ValueError):
        DecoderConfig(kind="qms", channel=channel)


def test_mqms_without_schedule_fails_at_decode(small_graph, channel):
    # schedule=None is legal at config time (the harness derives one from DE)
    # but decoding without one must fail loudly.
    cfg = DecoderConfig(kind="mqms", qspec=QuantizerSpec(3, 1.0),
                        channel=channel)
    y = np.ones(small_graph.n)
    with pytest.raises(ValueError, match="schedule"):
        mqms_decode(small_graph, y, cfg)


def test_failure_reported_honestly(small_graph, channel, schedule):
    cfg = _mqms_cfg(channel, schedule, l_max=2)
    rng = np.random.default_rng(12)
    # hopeless noise level: decoding must report failure, not success
    y = 1.0 + 5.0 * rng.standard_normal(small_graph.n)
    res = mqms_decode(small_graph, y, cfg)
    if not res.success:
        assert res.iterations_used == cfg.l_max
