"""Density evolution for quantized min-sum decoding over irregular ensembles.

Tracks the PMF of the exchanged messages over the quantized alphabet,
extracts per-iteration extrinsic reliabilities, and searches decoding
thresholds and optimal quantizer steps.  Two engines compute the
variable-node update: an exact atom-list convolution for small check
fan-ins, and a fine uniform grid for large irregular degrees where the
exact atom list would grow combinatorially.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSpec, QuantizedChannel, gaussian_cell_pmf, qfunc
from .ensemble import DegreeDistribution
from .quant import (D_MAX, QuantizerSpec, quantize, reliability_from_pmf,
                    symbol_llr_table)

PE_TARGET = 1e-9
L_MAX = 200
MERGE_TOL = 1e-9
PRUNE_TOL = 1e-300
_NEG_TOL = 1e-12
_NORM_TOL = 1e-10
_STALL_TOL = 1e-14
# Exact atom lists stay tractable while (max fan-in) * S is small.
_EXACT_WORK_LIMIT = 60


class DEConsistencyError(RuntimeError):
    """A PMF produced by an update violates nonnegativity/normalization."""


def _cleanup_pmf(p: np.ndarray) -> np.ndarray:
    worst = p.min()
    if worst < -_NEG_TOL:
        raise DEConsistencyError(f"PMF entry {worst} below -{_NEG_TOL}")
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if abs(total - 1.0) > _NORM_TOL:
        raise DEConsistencyError(f"PMF sums to {total}")
    return p / total


def pe_of_pmf(p: np.ndarray) -> float:
    """Error probability of a message PMF: total mass on i <= 0."""
    s = p.size // 2
    return float(p[:s + 1].sum())


# ---------------------------------------------------------------------------
# Initialization


def de_init_unquantized(spec: ChannelSpec, qspec: QuantizerSpec) -> np.ndarray:
    """Initial message PMF: Gaussian channel LLRs over the quantizer cells."""
    return gaussian_cell_pmf(spec.mu_ch, spec.sigma_ch, qspec)


def de_init_quantized(qc: QuantizedChannel, qspec: QuantizerSpec) -> np.ndarray:
    """Initial message PMF when the channel output is quantized."""
    s = qspec.sat_level
    idx = quantize(qc.llr_table(), qspec) + s
    p = np.zeros(2 * s + 1)
    np.add.at(p, idx, qc.trans)
    return p


# ---------------------------------------------------------------------------
# Check-node update


def cn_update(p: np.ndarray, dd: DegreeDistribution) -> np.ndarray:
    """One check-to-variable DE update via the message-tail recursion."""
    s = p.size // 2
    suffix = np.cumsum(p[::-1])[::-1]   # suffix[k] = sum_{t >= k} p[t]
    prefix = np.cumsum(p)               # prefix[k] = sum_{t <= k} p[t]
    # A_j = P{M >= step*j}, B_j = P{M <= -step*j} for j = 1..S, plus A_{S+1}=B_{S+1}=0.
    a = np.concatenate([suffix[s + 1:], [0.0]])
    b = np.concatenate([prefix[s - 1::-1], [0.0]])
    rp = dd.eval_rho(a + b)
    rm = dd.eval_rho(a - b)
    qpos = 0.5 * (rp[:-1] + rm[:-1] - rp[1:] - rm[1:])
    qneg = 0.5 * (rp[:-1] - rm[:-1] - rp[1:] + rm[1:])
    q = np.empty_like(p)
    q[s] = 1.0 - dd.eval_rho(1.0 - p[s])
    q[s + 1:] = qpos
    q[:s] = qneg[::-1]
    return _cleanup_pmf(q)


# ---------------------------------------------------------------------------
# Exact LLR-sum distributions (atom lists)


def _merge_atoms(values: np.ndarray, probs: np.ndarray,
                 tol: float = MERGE_TOL) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(values, kind="stable")
    v = values[order]
    pr = probs[order]
    if v.size == 0:
        return v, pr
    starts = np.flatnonzero(np.concatenate([[True], np.diff(v) > tol]))
    psum = np.add.reduceat(pr, starts)
    vsum = np.add.reduceat(v * pr, starts)
    # Zero-weight groups (e.g. after pruning) keep the first atom's value.
    rep = np.where(psum > 0.0, vsum / np.where(psum > 0.0, psum, 1.0), v[starts])
    return rep, psum


def _edge_atoms(q: np.ndarray, rel: np.ndarray,
                tol: float = MERGE_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Per-edge LLR law: value sign(i) * rel[|i|] with probability q[i]."""
    values = symbol_llr_table(rel)
    keep = q > 0
    return _merge_atoms(values[keep], q[keep], tol)


def _convolve_atoms(v1, p1, v2, p2, tol=MERGE_TOL, prune=PRUNE_TOL):
    values = (v1[:, None] + v2[None, :]).ravel()
    probs = (p1[:, None] * p2[None, :]).ravel()
    values, probs = _merge_atoms(values, probs, tol)
    keep = probs > prune
    return values[keep], probs[keep]


def lin_distribution(q: np.ndarray, rel: np.ndarray, d: int,
                     tol: float = MERGE_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Distribution of the sum of d-1 independent per-edge LLRs.

    Returns (values, probs) with strictly increasing values; equals the
    multinomial enumeration over incoming-message counts up to the merge
    tolerance.
    """
    if d < 2:
        raise ValueError("variable-node degree must be >= 2")
    base = _edge_atoms(q, rel, tol)
    acc = base
    for _ in range(d - 2):
        acc = _convolve_atoms(*acc, *base, tol=tol)
    return acc


def _lin_folds(q, rel, degrees, tol=MERGE_TOL):
    """Atom lists of the (d-1)-fold sums for every needed VN degree."""
    base = _edge_atoms(q, rel, tol)
    folds = {1: base}
    acc = base
    for k in range(2, max(degrees)):
        acc = _convolve_atoms(*acc, *base, tol=tol)
        folds[k] = acc
    return {d: folds[d - 1] for d in degrees}


def _gaussian_cells_shifted(values, probs, mu, sigma, qspec):
    """PMF of quantize(L + v) with L ~ N(mu, sigma^2) and v the atom values."""
    s = qspec.sat_level
    bounds = qspec.step * (np.arange(-s + 1, s + 1) - 0.5)
    tails = qfunc((bounds[None, :] - values[:, None] - mu) / sigma)
    cells = np.empty((values.size, 2 * s + 1))
    cells[:, 0] = 1.0 - tails[:, 0]
    cells[:, -1] = tails[:, -1]
    cells[:, 1:-1] = tails[:, :-1] - tails[:, 1:]
    return probs @ cells


def vn_update_unquantized(q, dd, spec: ChannelSpec, qspec, rel,
                          tol=MERGE_TOL) -> np.ndarray:
    """Variable-to-check DE update for unquantized channel output (exact)."""
    folds = _lin_folds(q, rel, list(dd.lam), tol)
    p = np.zeros_like(q)
    for d, ld in dd.lam.items():
        values, probs = folds[d]
        p += ld * _gaussian_cells_shifted(values, probs, spec.mu_ch,
                                          spec.sigma_ch, qspec)
    return _cleanup_pmf(p)


def vn_update_quantized(q, dd, qc: QuantizedChannel, qspec, rel,
                        tol=MERGE_TOL) -> np.ndarray:
    """Variable-to-check DE update for quantized channel output (exact)."""
    s = qspec.sat_level
    cvals = qc.llr_table()
    folds = _lin_folds(q, rel, list(dd.lam), tol)
    p = np.zeros_like(q)
    for d, ld in dd.lam.items():
        values, probs = folds[d]
        total = cvals[:, None] + values[None, :]
        idx = quantize(total, qspec) + s
        w = (ld * qc.trans[:, None]) * probs[None, :]
        np.add.at(p, idx.ravel(), w.ravel())
    return _cleanup_pmf(p)


# ---------------------------------------------------------------------------
# Grid engine for large fan-ins


class _GridEngine:
    """LLR-sum accumulation on a uniform grid.

    Per-edge LLR atoms are snapped to multiples of h once per iteration; the
    (d-1)-fold convolution is then exact on the grid, with out-of-range mass
    collected in the saturating edge bins.
    """

    def __init__(self, qspec: QuantizerSpec, channel, resolution: int = 64):
        self.qspec = qspec
        self.h = qspec.step / resolution
        s = qspec.sat_level
        if isinstance(channel, ChannelSpec):
            span = (s + 1) * qspec.step + channel.mu_ch + 12.0 * channel.sigma_ch
        else:
            span = (s + 1) * qspec.step + float(np.abs(channel.llr_table()).max()) + self.h
        self.half = int(np.ceil(span / self.h))
        self.x = self.h * np.arange(-self.half, self.half + 1)
        self.weights = self._cell_weights(channel)

    def _cell_weights(self, channel) -> np.ndarray:
        """weights[i, j]: P{output symbol = i | L_in = x_j}."""
        s = self.qspec.sat_level
        n = self.x.size
        if isinstance(channel, ChannelSpec):
            bounds = self.qspec.step * (np.arange(-s + 1, s + 1) - 0.5)
            tails = qfunc((bounds[:, None] - self.x[None, :] - channel.mu_ch)
                          / channel.sigma_ch)
            w = np.empty((2 * s + 1, n))
            w[0] = 1.0 - tails[0]
            w[-1] = tails[-1]
            w[1:-1] = tails[:-1] - tails[1:]
            return w
        w = np.zeros((2 * s + 1, n))
        cvals = channel.llr_table()
        cols = np.arange(n)
        for cval, tp in zip(cvals, channel.trans):
            idx = quantize(cval + self.x, self.qspec) + s
            np.add.at(w, (idx, cols), tp)
        return w

    def _shift_add(self, out, vec, shift, weight):
        n = vec.size
        if shift >= n or shift <= -n:
            edge = -1 if shift > 0 else 0
            out[edge] += weight * vec.sum()
            return
        if shift >= 0:
            out[shift:] += weight * vec[:n - shift]
            if shift:
                out[-1] += weight * vec[n - shift:].sum()
        else:
            out[:shift] += weight * vec[-shift:]
            out[0] += weight * vec[:-shift].sum()

    def update(self, q, rel, dd: DegreeDistribution) -> np.ndarray:
        values = symbol_llr_table(rel)
        keep = q > 0
        shifts = np.rint(values[keep] / self.h).astype(np.int64)
        probs = q[keep]
        # Base per-edge law on the grid.
        vec = np.zeros(self.x.size)
        idx = np.clip(shifts + self.half, 0, self.x.size - 1)
        np.add.at(vec, idx, probs)
        mix = np.zeros(self.x.size)
        degrees = sorted(dd.lam)
        folds_needed = {d - 1: dd.lam[d] for d in degrees}
        acc = vec
        for k in range(1, max(folds_needed) + 1):
            if k > 1:
                nxt = np.zeros(self.x.size)
                for sh, pr in zip(shifts, probs):
                    self._shift_add(nxt, acc, int(sh), pr)
                acc = nxt
            if k in folds_needed:
                mix += folds_needed[k] * acc
        return _cleanup_pmf(self.weights @ mix)


# ---------------------------------------------------------------------------
# QMS recursion (face-value variable-node sums)


def qms_init(kpmf: np.ndarray, kvals: np.ndarray, qspec: QuantizerSpec) -> np.ndarray:
    s = qspec.sat_level
    p = np.zeros(2 * s + 1)
    np.add.at(p, quantize(kvals, qspec) + s, kpmf)
    return p


def qms_vn_update(q, dd, kpmf, kvals, qspec) -> np.ndarray:
    """Variable-to-check update for the QMS baseline (messages at face value)."""
    s = qspec.sat_level
    p = np.zeros_like(q)
    degrees = sorted(dd.lam)
    acc = q
    folds = {1: q}
    for k in range(2, max(degrees)):
        acc = np.convolve(acc, q)
        folds[k] = acc
    for d, ld in dd.lam.items():
        sdist = folds[d - 1]
        shalf = (sdist.size - 1) // 2
        svals = qspec.step * np.arange(-shalf, shalf + 1)
        total = kvals[:, None] + svals[None, :]
        idx = quantize(total, qspec) + s
        w = (ld * kpmf[:, None]) * sdist[None, :]
        np.add.at(p, idx.ravel(), w.ravel())
    return _cleanup_pmf(p)


# ---------------------------------------------------------------------------
# Full recursion


@dataclass
class ReliabilitySchedule:
    """Per-iteration extrinsic reliabilities driving the runtime decoder."""

    bits: int
    delta: float
    per_iter: list[np.ndarray]
    channel_rel: np.ndarray | None = None
    delta0: float | None = None

    def __len__(self) -> int:
        return len(self.per_iter)

    def reliability(self, iteration: int) -> np.ndarray:
        """Reliability vector for VN iteration `iteration` (1-based), padded."""
        if not self.per_iter:
            raise ValueError("empty schedule")
        return self.per_iter[min(iteration, len(self.per_iter)) - 1]

    def to_json_dict(self) -> dict:
        return {
            "b": self.bits,
            "delta": self.delta,
            "delta0": self.delta0,
            "iters": [d.tolist() for d in self.per_iter],
            "channel_rel": None if self.channel_rel is None else self.channel_rel.tolist(),
        }

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ReliabilitySchedule":
        return cls(
            bits=int(obj["b"]),
            delta=float(obj["delta"]),
            delta0=None if obj.get("delta0") is None else float(obj["delta0"]),
            per_iter=[np.asarray(d, dtype=float) for d in obj["iters"]],
            channel_rel=(None if obj.get("channel_rel") is None
                         else np.asarray(obj["channel_rel"], dtype=float)),
        )

    @classmethod
    def load(cls, path) -> "ReliabilitySchedule":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass
class DEReport:
    pe_trajectory: np.ndarray
    converged: bool
    schedule: ReliabilitySchedule | None
    iterations_run: int
    final_pmf: np.ndarray = field(repr=False, default=None)


def de_run(dd: DegreeDistribution, qspec: QuantizerSpec, channel, *,
           decoder: str = "mqms", channel_qspec: QuantizerSpec | None = None,
           l_max: int = L_MAX, pe_target: float = PE_TARGET,
           lin_mode: str = "auto", grid_resolution: int = 64,
           merge_tol: float = MERGE_TOL) -> DEReport:
    """Run the DE recursion and report the error-probability trajectory.

    ``channel`` is a ChannelSpec (unquantized output) or a QuantizedChannel.
    ``decoder`` selects the VN rule: "mqms" (reliability-matched) or "qms"
    (face-value baseline; channel term quantized by ``channel_qspec``,
    defaulting to the message quantizer).
    """
    quantized = isinstance(channel, QuantizedChannel)
    if decoder == "qms":
        if quantized:
            raise ValueError("QMS takes a ChannelSpec plus channel_qspec")
        ch_q = channel_qspec or qspec
        kpmf = gaussian_cell_pmf(channel.mu_ch, channel.sigma_ch, ch_q)
        kvals = ch_q.symbol_values()
        p = qms_init(kpmf, kvals, qspec)
        step = lambda q, rel: qms_vn_update(q, dd, kpmf, kvals, qspec)  # noqa: E731
        channel_rel = None
        delta0 = ch_q.step
    elif decoder == "mqms":
        if channel_qspec is not None:
            raise ValueError("channel_qspec is only meaningful for decoder='qms'")
        if quantized:
            p = de_init_quantized(channel, qspec)
            channel_rel = channel.rel
            delta0 = channel.qspec.step
        else:
            p = de_init_unquantized(channel, qspec)
            channel_rel = None
            delta0 = None
        if lin_mode == "auto":
            lin_mode = ("exact" if (dd.max_vn_degree - 1) * qspec.sat_level
                        <= _EXACT_WORK_LIMIT else "grid")
        if lin_mode == "grid":
            engine = _GridEngine(qspec, channel, resolution=grid_resolution)
            step = lambda q, rel: engine.update(q, rel, dd)  # noqa: E731
        elif lin_mode == "exact":
            if quantized:
                step = lambda q, rel: vn_update_quantized(  # noqa: E731
                    q, dd, channel, qspec, rel, merge_tol)
            else:
                step = lambda q, rel: vn_update_unquantized(  # noqa: E731
                    q, dd, channel, qspec, rel, merge_tol)
        else:
            raise ValueError(f"unknown lin_mode {lin_mode!r}")
    else:
        raise ValueError(f"unknown decoder {decoder!r}")

    pe = [pe_of_pmf(p)]
    rels: list[np.ndarray] = []
    converged = pe[-1] < pe_target
    iterations = 0
    for _ in range(l_max):
        if converged:
            break
        q = cn_update(p, dd)
        rel = reliability_from_pmf(q)
        rels.append(rel)
        p = step(q, rel)
        pe.append(pe_of_pmf(p))
        iterations += 1
        if pe[-1] < pe_target:
            converged = True
            break
        if abs(pe[-1] - pe[-2]) < _STALL_TOL:
            break
    schedule = None
    if decoder == "mqms":
        schedule = ReliabilitySchedule(bits=qspec.bits, delta=qspec.step,
                                       per_iter=rels, channel_rel=channel_rel,
                                       delta0=delta0)
    return DEReport(pe_trajectory=np.asarray(pe), converged=converged,
                    schedule=schedule, iterations_run=iterations, final_pmf=p)


# ---------------------------------------------------------------------------
# Threshold search and quantizer-step optimization


class BracketNotFoundError(RuntimeError):
    """No convergent E_b/N_0 found below the search cap."""


def make_de_runner(dd: DegreeDistribution, qspec: QuantizerSpec, *,
                   mode: str = "unquantized", decoder: str = "mqms",
                   channel_qspec: QuantizerSpec | None = None,
                   rate: float | None = None, l_max: int = L_MAX,
                   pe_target: float = PE_TARGET, lin_mode: str = "auto",
                   grid_resolution: int = 64):
    """Callable ebn0_db -> DEReport for a fixed configuration.

    ``mode`` is "unquantized" or "quantized" (the latter builds the quantized
    biAWGN channel from ``channel_qspec``); for decoder="qms" the channel term
    is always the LLR quantized by ``channel_qspec``.
    """
    r = dd.design_rate() if rate is None else rate
    cache: dict[float, DEReport] = {}

    def runner(ebn0_db: float) -> DEReport:
        key = round(float(ebn0_db), 9)
        if key not in cache:
            spec = ChannelSpec(ebn0_db=key, rate=r)
            if decoder == "qms":
                channel = spec
            elif mode == "quantized":
                if channel_qspec is None:
                    raise ValueError("quantized mode needs channel_qspec")
                from .channel import build_quantized_channel

                channel = build_quantized_channel(spec, channel_qspec)
            elif mode == "unquantized":
                channel = spec
            else:
                raise ValueError(f"unknown mode {mode!r}")
            cache[key] = de_run(dd, qspec, channel, decoder=decoder,
                                channel_qspec=(channel_qspec if decoder == "qms" else None),
                                l_max=l_max, pe_target=pe_target,
                                lin_mode=lin_mode, grid_resolution=grid_resolution)
        return cache[key]

    return runner


def threshold_search(runner, *, tol_db: float = 0.01, hi: float | None = None,
                     lo: float | None = None, hi_cap: float = 10.0,
                     scan_step: float = 0.5) -> float:
    """Bisect the minimum converging E_b/N_0 (dB) to within tol_db."""
    def ok(x):
        return runner(x).converged

    if hi is None:
        x = 0.0
        while x <= hi_cap and not ok(x):
            lo = x
            x += scan_step
        if x > hi_cap:
            raise BracketNotFoundError(f"no convergence up to {hi_cap} dB")
        hi = x
    if lo is None:
        lo = hi - scan_step
        while lo > -10.0 and ok(lo):
            hi = lo
            lo -= scan_step
    while hi - lo > tol_db:
        mid = 0.5 * (hi + lo)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass
class StepOptResult:
    delta: float
    delta0: float | None
    threshold_db: float


def _scan_deltas(make_runner, points, best, tol_db):
    """Grid scan with a best-so-far prune: a point is fully bisected only if
    it converges at the incumbent threshold."""
    for pt in points:
        runner = make_runner(*pt)
        if best.threshold_db < np.inf:
            if not runner(best.threshold_db).converged:
                continue
            thr = threshold_search(runner, tol_db=tol_db, hi=best.threshold_db)
        else:
            try:
                thr = threshold_search(runner, tol_db=tol_db)
            except BracketNotFoundError:
                continue
        if thr < best.threshold_db:
            best.threshold_db = thr
            best.delta, best.delta0 = pt[0], (pt[1] if len(pt) > 1 else None)
    return best


def optimize_steps(dd: DegreeDistribution, bits: int, channel_bits: int | None = None,
                   *, decoder: str = "mqms", l_max: int = L_MAX,
                   pe_target: float = PE_TARGET, tol_db: float = 0.01,
                   coarse: tuple[float, float, float] = (0.1, 4.0, 0.1),
                   coarse0: tuple[float, float, float] = (0.1, 4.0, 0.2),
                   lin_mode: str = "auto",
                   grid_resolution: int = 64) -> StepOptResult:
    """Grid-search the quantizer step(s) minimizing the decoding threshold.

    For the matched decoder with ``channel_bits`` set, searches jointly over
    the message step and the channel step (coarse scan followed by two local
    refinement passes down to a 0.005 resolution); without ``channel_bits``,
    a 1-D search over the message step with the same refinement.

    For decoder="qms" the channel quantizer is not free: its full-scale range
    is fixed at +/-4 (step 4 / 2**(channel_bits - 1)), a conventional
    front-end ADC design for the LLR magnitudes that matter near threshold,
    and only the message step is optimized, on a 0.05 grid.  Searching both
    steps freely instead lets mismatched step ratios act as a crude
    nonlinear corrector and yields thresholds that do not reflect plain
    min-sum arithmetic.
    """
    two_d = channel_bits is not None or decoder == "qms"
    if decoder == "qms" and channel_bits is None:
        channel_bits = bits

    def make_runner(delta, delta0=None):
        qspec = QuantizerSpec(bits=bits, step=delta)
        ch_q = None if delta0 is None else QuantizerSpec(bits=channel_bits, step=delta0)
        mode = "quantized" if (two_d and decoder == "mqms") else "unquantized"
        return make_de_runner(dd, qspec, mode=mode, decoder=decoder,
                              channel_qspec=ch_q, l_max=l_max,
                              pe_target=pe_target, lin_mode=lin_mode,
                              grid_resolution=grid_resolution)

    best = StepOptResult(delta=np.nan, delta0=None, threshold_db=np.inf)

    def grid(lo, hi, step):
        lo = max(lo, 0.01)
        return np.arange(lo, hi + step / 2, step)

    if decoder == "qms":
        delta0 = 4.0 / 2 ** (channel_bits - 1)
        pts = [(d, delta0) for d in grid(coarse[0], coarse[1], 0.05)]
        best = _scan_deltas(make_runner, pts, best, tol_db)
    elif two_d:
        pts = [(d, d0) for d in grid(*coarse) for d0 in grid(*coarse0)]
        best = _scan_deltas(make_runner, pts, best, tol_db)
        for width, fine in ((0.1, 0.025), (0.02, 0.005)):
            pts = [(d, d0)
                   for d in grid(best.delta - width, best.delta + width, fine)
                   for d0 in grid(best.delta0 - width, best.delta0 + width, fine)]
            best = _scan_deltas(make_runner, pts, best, tol_db)
    else:
        pts = [(d,) for d in grid(*coarse)]
        best = _scan_deltas(make_runner, pts, best, tol_db)
        for width, fine in ((0.08, 0.02), (0.016, 0.005)):
            pts = [(d,) for d in grid(best.delta - width, best.delta + width, fine)]
            best = _scan_deltas(make_runner, pts, best, tol_db)
    if not np.isfinite(best.threshold_db):
        raise BracketNotFoundError("no quantizer step converges below the cap")
    return best
