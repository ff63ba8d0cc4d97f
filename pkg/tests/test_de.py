import itertools
import math

import numpy as np
import pytest
from scipy.stats import norm

from mqms.channel import ChannelSpec, build_quantized_channel
from mqms.de import (cn_update, de_init_quantized, de_init_unquantized, de_run,
                     lin_distribution, make_de_runner, pe_of_pmf,
                     threshold_search)
from mqms.ensemble import DegreeDistribution
from mqms.quant import QuantizerSpec, llr_of_symbol


def _random_symmetric_pmf(s, rng):
    p = rng.random(2 * s + 1)
    return p / p.sum()


def _cn_oracle(p, dc):
    """Check-node output law by exhaustive enumeration of dc-1 inputs."""
    s = (len(p) - 1) // 2
    syms = np.arange(-s, s + 1)
    out = np.zeros_like(p)
    for combo in itertools.product(range(2 * s + 1), repeat=dc - 1):
        vals = syms[list(combo)]
        prob = np.prod(p[list(combo)])
        m = np.prod(np.sign(vals)) * np.min(np.abs(vals))
        out[int(m) + s] += prob
    return out


@pytest.mark.parametrize("bits,dc", [(2, 3), (2, 4), (3, 3), (3, 4)])
def test_cn_update_matches_enumeration(bits, dc):
    rng = np.random.default_rng(bits * 10 + dc)
    s = 2 ** (bits - 1) - 1
    p = _random_symmetric_pmf(s, rng)
    dd = DegreeDistribution.regular(3, dc)
    got = cn_update(p, dd)
    want = _cn_oracle(p, dc)
    np.testing.assert_allclose(got, want, atol=1e-12)
    assert got.sum() == pytest.approx(1.0, abs=1e-12)


def test_cn_update_mixture_of_degrees():
    rng = np.random.default_rng(0)
    p = _random_symmetric_pmf(3, rng)
    dd = DegreeDistribution({3: 1.0}, {3: 0.4, 4: 0.6})
    got = cn_update(p, dd)
    want = 0.4 * _cn_oracle(p, 3) + 0.6 * _cn_oracle(p, 4)
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_cn_update_degree_two_is_identity_like():
    # dc = 2: one input edge, the output equals the input law
    rng = np.random.default_rng(1)
    p = _random_symmetric_pmf(3, rng)
    dd = DegreeDistribution({3: 1.0}, {2: 1.0})
    np.testing.assert_allclose(cn_update(p, dd), p, atol=1e-14)


def _lin_oracle(q, rel, d):
    """Sum of d-1 iid edge LLRs by exhaustive enumeration."""
    s = (len(q) - 1) // 2
    syms = np.arange(-s, s + 1)
    atoms = {}
    for combo in itertools.product(range(2 * s + 1), repeat=d - 1):
        vals = syms[list(combo)]
        val = float(np.sum([llr_of_symbol(int(v), rel) for v in vals]))
        prob = float(np.prod(q[list(combo)]))
        key = round(val, 9)
        atoms[key] = atoms.get(key, 0.0) + prob
    keys = sorted(atoms)
    return np.array(keys), np.array([atoms[k] for k in keys])


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_lin_distribution_matches_enumeration(d):
    rng = np.random.default_rng(d)
    q = _random_symmetric_pmf(1, rng)  # b = 2
    rel = np.array([0.83])
    v, p = lin_distribution(q, rel, d)
    ov, op = _lin_oracle(q, rel, d)
    assert v.size == ov.size
    np.testing.assert_allclose(v, ov, atol=1e-7)
    np.testing.assert_allclose(p, op, atol=1e-12)


def test_lin_distribution_merges_coincident_atoms():
    q = np.array([0.25, 0.5, 0.25])
    rel = np.array([1.0])
    v, p = lin_distribution(q, rel, 3)
    # sums of two values in {-1, 0, 1}: {-2, -1, 0, 1, 2}
    np.testing.assert_allclose(v, [-2, -1, 0, 1, 2], atol=1e-12)
    np.testing.assert_allclose(p, [1 / 16, 1 / 4, 3 / 8, 1 / 4, 1 / 16], atol=1e-12)


def test_de_init_unquantized_cell_mass():
    # b = 3, step 1, Eb/N0 with mu_ch = 2, sigma_ch = 2: the symbol-0 cell is
    # Pr{-0.5 < L <= 0.5} for L ~ N(2, 4)
    spec = ChannelSpec(ebn0_db=10 * math.log10(1.0), rate=0.5)
    assert spec.mu_ch == pytest.approx(2.0)
    q = QuantizerSpec(3, 1.0)
    p = de_init_unquantized(spec, q)
    want = norm.cdf(0.5, loc=2, scale=2) - norm.cdf(-0.5, loc=2, scale=2)
    assert p[3] == pytest.approx(want, abs=1e-12)
    assert p[3] == pytest.approx(0.1209775787100129, abs=1e-9)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


def test_de_init_unquantized_monte_carlo():
    from mqms.channel import channel_llr, sample_output
    from mqms.quant import quantize
    spec = ChannelSpec(ebn0_db=1.0, rate=0.5)
    q = QuantizerSpec(3, 0.8)
    p = de_init_unquantized(spec, q)
    rng = np.random.default_rng(11)
    llr = channel_llr(sample_output(np.ones(300_000), spec, rng), spec)
    sym = quantize(llr, q)
    counts = np.bincount(sym + q.sat_level, minlength=q.n_symbols) / sym.size
    np.testing.assert_allclose(counts, p, atol=4e-3)


def test_de_init_quantized_consistency():
    spec = ChannelSpec(ebn0_db=2.0, rate=0.5)
    ch_q = QuantizerSpec(3, 0.7)
    qc = build_quantized_channel(spec, ch_q)
    q = QuantizerSpec(4, 0.4)
    p = de_init_quantized(qc, q)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    # mass is a reshuffling of the transition probabilities
    assert pe_of_pmf(p) <= 1.0


def test_pe_counts_zero_symbol():
    p = np.array([0.1, 0.2, 0.3, 0.25, 0.15])
    assert pe_of_pmf(p) == pytest.approx(0.6)


def test_de_run_converges_at_high_snr():
    dd = DegreeDistribution.regular(3, 6)
    rep = de_run(dd, QuantizerSpec(3, 1.0), ChannelSpec(ebn0_db=3.0, rate=0.5))
    assert rep.converged
    assert rep.pe_trajectory[-1] < 1e-9
    assert np.all(np.diff(rep.pe_trajectory) <= 1e-12)
    assert len(rep.schedule.per_iter) == rep.iterations_run
    # reliabilities stay positive once DE is converging
    assert np.all(rep.schedule.reliability(1) >= 0)


def test_de_run_fails_at_low_snr():
    dd = DegreeDistribution.regular(3, 6)
    rep = de_run(dd, QuantizerSpec(3, 1.0), ChannelSpec(ebn0_db=0.3, rate=0.5))
    assert not rep.converged


def test_exact_and_grid_engines_agree():
    dd = DegreeDistribution.regular(3, 6)
    q = QuantizerSpec(3, 1.0)
    ch = ChannelSpec(ebn0_db=2.0, rate=0.5)
    exact = de_run(dd, q, ch, lin_mode="exact", l_max=10)
    grid = de_run(dd, q, ch, lin_mode="grid", grid_resolution=64, l_max=10)
    np.testing.assert_allclose(grid.pe_trajectory, exact.pe_trajectory,
                               rtol=0.02, atol=1e-12)


def test_threshold_search_brackets_and_bisects():
    dd = DegreeDistribution.regular(3, 6)
    runner = make_de_runner(dd, QuantizerSpec(2, 1.4), mode="unquantized")
    th = threshold_search(runner, tol_db=0.02)
    assert 2.0 < th < 2.2
    assert runner(th).converged
    assert not runner(th - 0.03).converged


def test_schedule_round_trip(tmp_path):
    dd = DegreeDistribution.regular(3, 6)
    rep = de_run(dd, QuantizerSpec(3, 1.0), ChannelSpec(ebn0_db=3.0, rate=0.5))
    path = tmp_path / "sched.json"
    rep.schedule.dump(str(path))
    from mqms.de import ReliabilitySchedule
    back = ReliabilitySchedule.load(str(path))
    assert back.bits == rep.schedule.bits
    assert back.delta == pytest.approx(rep.schedule.delta)
    for i in range(1, len(rep.schedule.per_iter) + 1):
        np.testing.assert_allclose(back.reliability(i), rep.schedule.reliability(i))
    # padding beyond the recorded length repeats the last entry
    np.testing.assert_allclose(back.reliability(10_000),
                               rep.schedule.reliability(len(rep.schedule.per_iter)))


def test_qms_de_runs_and_is_worse_than_mqms():
    dd = DegreeDistribution.regular(3, 6)
    q = QuantizerSpec(4, 0.6)
    ch = ChannelSpec(ebn0_db=1.4, rate=0.5)
    mq = de_run(dd, q, ch)
    qm = de_run(dd, q, ch, decoder="qms", channel_qspec=QuantizerSpec(4, 0.6))
    assert mq.converged
    assert not qm.converged  # QMS threshold is ~0.4 dB worse here
