"""Tanner graphs: degree-sequence realization, PEG construction, alist I/O."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ensemble import DegreeDistribution


class AlistError(ValueError):
    """Malformed alist text (message carries the offending line number)."""


@dataclass
class TannerGraph:
    """Sparse bipartite VN/CN adjacency; immutable after construction."""

    n: int
    m: int
    vn_adj: list[list[int]]
    cn_adj: list[list[int]] = field(default=None, repr=False)

    def __post_init__(self):
        if self.cn_adj is None:
            cn_adj = [[] for _ in range(self.m)]
            for v, row in enumerate(self.vn_adj):
                for c in row:
                    cn_adj[c].append(v)
            self.cn_adj = [sorted(r) for r in cn_adj]
        self.vn_adj = [sorted(r) for r in self.vn_adj]
        self.validate()

    def validate(self):
        if len(self.vn_adj) != self.n or len(self.cn_adj) != self.m:
            raise ValueError("adjacency sizes disagree with n/m")
        ecount = 0
        for v, row in enumerate(self.vn_adj):
            if len(row) < 2:
                raise ValueError(f"VN {v} has degree {len(row)} < 2")
            if len(set(row)) != len(row):
                raise ValueError(f"VN {v} has parallel edges")
            if row and (row[0] < 0 or row[-1] >= self.m):
                raise ValueError(f"VN {v} has a CN index out of range")
            ecount += len(row)
        if ecount != sum(len(r) for r in self.cn_adj):
            raise ValueError("VN and CN edge totals disagree")
        for c, row in enumerate(self.cn_adj):
            for v in row:
                if c not in self.vn_adj[v]:
                    raise ValueError(f"edge ({v},{c}) missing from VN adjacency")

    @property
    def n_edges(self) -> int:
        return sum(len(r) for r in self.vn_adj)

    @property
    def realized_rate(self) -> float:
        return (self.n - self.m) / self.n

    def __eq__(self, other) -> bool:
        return (isinstance(other, TannerGraph) and self.n == other.n
                and self.m == other.m and self.vn_adj == other.vn_adj)


def degree_sequence(n: int, dd: DegreeDistribution) -> tuple[list[int], list[int]]:
    """Integer VN/CN degree sequences realizing the ensemble at block length n.

    Node counts come from largest-remainder rounding of the node-perspective
    fractions; the CN side is balanced to the exact VN edge total by moving
    checks between the two largest CN degrees (extending the top degree when
    unavoidable).
    """
    if n < 10:
        raise ValueError("block length must be at least 10")
    vn_frac, cn_frac = dd.node_perspective()
    vn_counts = _apportion(vn_frac, n)
    e_total = sum(d * c for d, c in vn_counts.items())
    m = max(1, round(e_total * sum(c / d for d, c in dd.rho.items())))
    cn_counts = _apportion(cn_frac, m)
    _balance_cn(cn_counts, e_total)
    vn_degs = sorted(d for d, c in vn_counts.items() for _ in range(c))
    cn_degs = sorted(d for d, c in cn_counts.items() for _ in range(c))
    return vn_degs, cn_degs


def _apportion(fracs: dict[int, float], total: int) -> dict[int, int]:
    base = {d: int(np.floor(f * total)) for d, f in fracs.items()}
    rem = total - sum(base.values())
    by_frac = sorted(fracs, key=lambda d: fracs[d] * total - base[d], reverse=True)
    for d in by_frac[:rem]:
        base[d] += 1
    return {d: c for d, c in base.items() if c > 0}


def _balance_cn(cn_counts: dict[int, int], e_total: int) -> None:
    diff = e_total - sum(d * c for d, c in cn_counts.items())
    top = max(cn_counts)
    # Moving one check from degree d to d+1 changes the edge total by 1.
    while diff > 0:
        if cn_counts.get(top - 1, 0) > 0:
            src = top - 1
        else:
            src, top = top, top + 1
        cn_counts[src] -= 1
        cn_counts[top] = cn_counts.get(top, 0) + 1
        if cn_counts[src] == 0:
            del cn_counts[src]
        diff -= 1
    while diff < 0:
        top = max(cn_counts)
        if top - 1 < 2:
            raise ValueError("cannot balance CN degrees within bounds")
        cn_counts[top] -= 1
        cn_counts[top - 1] = cn_counts.get(top - 1, 0) + 1
        if cn_counts[top] == 0:
            del cn_counts[top]
        diff += 1


def peg_construct(vn_degs: list[int], cn_degs: list[int],
                  seed: int | None = None) -> TannerGraph:
    """Progressive edge growth with girth-greedy CN selection.

    VNs are placed in nondecreasing degree order (the seed only permutes
    VNs of equal degree); each edge attaches to a CN at maximum BFS distance
    from the VN in the current graph, preferring unreachable CNs, with ties
    broken by lowest current CN degree, then lowest CN index.
    """
    n, m = len(vn_degs), len(cn_degs)
    if sum(vn_degs) != sum(cn_degs):
        raise ValueError("edge totals disagree between VN and CN sequences")
    order = np.argsort(np.asarray(vn_degs), kind="stable")
    if seed is not None:
        rng = np.random.default_rng(seed)
        order = list(order)
        start = 0
        while start < n:
            stop = start
            while stop < n and vn_degs[order[stop]] == vn_degs[order[start]]:
                stop += 1
            chunk = order[start:stop]
            rng.shuffle(chunk)
            order[start:stop] = chunk
            start = stop

    vn_adj: list[list[int]] = [[] for _ in range(n)]
    cn_adj: list[list[int]] = [[] for _ in range(m)]
    cn_deg_now = [0] * m
    # BFS scratch with stamping to avoid O(n+m) reinitialization per edge.
    seen_vn = [0] * n
    seen_cn = [0] * m
    stamp = 0

    def best_check(v: int, exclude: list[int]) -> int:
        nonlocal stamp
        stamp += 1
        seen_vn[v] = stamp
        reached = 0
        for c in exclude:
            seen_cn[c] = stamp
            reached += 1
        frontier_cn = list(exclude)
        levels: list[list[int]] = []
        while True:
            next_vn = []
            for c in frontier_cn:
                for u in cn_adj[c]:
                    if seen_vn[u] != stamp:
                        seen_vn[u] = stamp
                        next_vn.append(u)
            new_cn = []
            for u in next_vn:
                for c in vn_adj[u]:
                    if seen_cn[c] != stamp:
                        seen_cn[c] = stamp
                        new_cn.append(c)
            if not new_cn:
                break
            reached += len(new_cn)
            levels.append(new_cn)
            frontier_cn = new_cn
            if reached == m:
                break
        if reached < m:
            pool = [c for c in range(m)
                    if seen_cn[c] != stamp and cn_deg_now[c] < cn_degs[c]]
            if pool:
                return min(pool, key=lambda c: (cn_deg_now[c], c))
        # All unreachable checks (if any) are at their prescribed degree; pick
        # the non-full check at maximum BFS distance so the added edge closes
        # the longest possible cycle while the degree sequence stays exact.
        for level in reversed(levels):
            pool = [c for c in level if cn_deg_now[c] < cn_degs[c]]
            if pool:
                return min(pool, key=lambda c: (cn_deg_now[c], c))
        raise ValueError("no open check available for PEG edge placement")

    for v in order:
        v = int(v)
        for k in range(vn_degs[v]):
            if k == 0:
                c = min((c for c in range(m) if cn_deg_now[c] < cn_degs[c]),
                        key=lambda c: (cn_deg_now[c], c))
            else:
                c = best_check(v, vn_adj[v])
            vn_adj[v].append(c)
            cn_adj[c].append(v)
            cn_deg_now[c] += 1
    _break_four_cycles(vn_adj, cn_adj)
    return TannerGraph(n=n, m=m, vn_adj=vn_adj, cn_adj=[sorted(r) for r in cn_adj])


def _makes_four_cycle(vn_adj, cn_adj, v: int, d: int) -> bool:
    """Would adding edge (v, d) put v in a 4-cycle?"""
    for e in vn_adj[v]:
        if e == d:
            return True  # parallel edge
        for w in cn_adj[d]:
            if w != v and w in cn_adj[e]:
                return True
    return False


def _break_four_cycles(vn_adj, cn_adj, max_rounds: int = 20) -> None:
    """Remove 4-cycles left by the capacity-constrained endgame via edge swaps.

    The exact degree sequence can force the last few edges onto the only
    remaining open checks, closing 4-cycles.  For each check pair sharing two
    VNs, swap one offending edge (v, c) with some edge (u, d) such that the
    two replacement edges (v, d) and (u, c) close no 4-cycle.  Degrees are
    untouched.  Gives up (leaving the cycle) if no clean swap exists.
    """
    m = len(cn_adj)
    for _ in range(max_rounds):
        swapped = False
        clean = True
        for c in range(m):
            for v in list(cn_adj[c]):
                shared = [e for e in vn_adj[v]
                          if e != c and any(w != v and w in cn_adj[e]
                                            for w in cn_adj[c])]
                if not shared:
                    continue
                clean = False
                done = False
                for d in range(m):
                    if done:
                        break
                    if d == c or v in cn_adj[d]:
                        continue
                    for u in cn_adj[d]:
                        if u == v or c in vn_adj[u]:
                            continue
                        vn_adj[v].remove(c); cn_adj[c].remove(v)
                        vn_adj[u].remove(d); cn_adj[d].remove(u)
                        if (not _makes_four_cycle(vn_adj, cn_adj, v, d)
                                and not _makes_four_cycle(vn_adj, cn_adj, u, c)):
                            vn_adj[v].append(d); cn_adj[d].append(v)
                            vn_adj[u].append(c); cn_adj[c].append(u)
                            swapped = done = True
                            break
                        vn_adj[v].append(c); cn_adj[c].append(v)
                        vn_adj[u].append(d); cn_adj[d].append(u)
        if clean or not swapped:
            return


def girth(g: TannerGraph, cap: int = 20) -> int:
    """Shortest cycle length (in edges), or cap + 2 if none below the cap.

    Plain BFS from every vertex over the combined node set; intended for
    small graphs (exhaustive verification in tests).
    """
    adj = [list(r) for r in g.vn_adj]
    for c, row in enumerate(g.cn_adj):
        adj.append([u for u in row])
    # Combined ids: VNs are 0..n-1, CNs are n..n+m-1.
    for v in range(g.n):
        adj[v] = [g.n + c for c in g.vn_adj[v]]
    best = cap + 2
    total = g.n + g.m
    for root in range(total):
        dist = {root: 0}
        parent = {root: -1}
        frontier = [root]
        while frontier and 2 * dist[frontier[0]] + 1 < best:
            nxt = []
            for u in frontier:
                for w in adj[u]:
                    if w not in dist:
                        dist[w] = dist[u] + 1
                        parent[w] = u
                        nxt.append(w)
                    elif w != parent[u]:
                        best = min(best, dist[u] + dist[w] + 1)
            frontier = nxt
    return best


def alist_write(g: TannerGraph) -> str:
    """Serialize to the standard alist layout (1-based, zero-padded rows)."""
    vn_degs = [len(r) for r in g.vn_adj]
    cn_degs = [len(r) for r in g.cn_adj]
    dmax_v, dmax_c = max(vn_degs), max(cn_degs)
    lines = [f"{g.n} {g.m}", f"{dmax_v} {dmax_c}",
             " ".join(map(str, vn_degs)), " ".join(map(str, cn_degs))]
    for row, dmax in ((g.vn_adj, dmax_v), (g.cn_adj, dmax_c)):
        for adj in row:
            padded = [a + 1 for a in adj] + [0] * (dmax - len(adj))
            lines.append(" ".join(map(str, padded)))
    return "\n".join(lines) + "\n"


def alist_read(text: str) -> TannerGraph:
    lines = text.splitlines()

    def ints(lineno: int, expected: int | None = None) -> list[int]:
        if lineno >= len(lines):
            raise AlistError(f"line {lineno + 1}: unexpected end of file")
        try:
            vals = [int(t) for t in lines[lineno].split()]
        except ValueError as exc:
            raise AlistError(f"line {lineno + 1}: non-integer token") from exc
        if expected is not None and len(vals) != expected:
            raise AlistError(f"line {lineno + 1}: expected {expected} values, "
                             f"got {len(vals)}")
        return vals

    n, m = ints(0, 2)
    if n <= 0 or m <= 0:
        raise AlistError("line 1: dimensions must be positive")
    dmax_v, dmax_c = ints(1, 2)
    vn_degs = ints(2, n)
    cn_degs = ints(3, m)
    for lineno, degs, dmax, side in ((2, vn_degs, dmax_v, "VN"),
                                     (3, cn_degs, dmax_c, "CN")):
        for d in degs:
            if d < 1 or d > dmax:
                raise AlistError(f"line {lineno + 1}: {side} degree {d} outside "
                                 f"[1, {dmax}]")
    vn_adj = []
    for v in range(n):
        row = ints(4 + v)
        entries = [e - 1 for e in row if e != 0]
        if len(entries) != vn_degs[v]:
            raise AlistError(f"line {5 + v}: VN {v} lists {len(entries)} edges, "
                             f"declared degree {vn_degs[v]}")
        for e in entries:
            if not 0 <= e < m:
                raise AlistError(f"line {5 + v}: CN index {e + 1} out of range")
        vn_adj.append(sorted(entries))
    try:
        g = TannerGraph(n=n, m=m, vn_adj=vn_adj)
    except ValueError as exc:
        raise AlistError(str(exc)) from exc
    for c in range(m):
        row = ints(4 + n + c)
        entries = sorted(e - 1 for e in row if e != 0)
        if entries != g.cn_adj[c]:
            raise AlistError(f"line {5 + n + c}: CN {c} row disagrees with the "
                             f"VN adjacency")
    for lineno in range(4 + n + m, len(lines)):
        if lines[lineno].strip():
            raise AlistError(f"line {lineno + 1}: trailing content")
    return g
