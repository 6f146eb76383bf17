"""Exact maximum-flow / minimum-cut on integer-capacity s-t networks.

Highest-label push-relabel with gap relabeling and an initial reverse-BFS
height labeling.  Runs to a feasible maximum flow (no leftover excess), so
the minimum-cut source side can be extracted canonically as the set of
nodes reachable from the source in the final residual network, which is
the inclusion-minimal minimum-cut source set.

Capacities must be nonnegative integers; Python integers do not overflow,
so no capacity-range check is needed.  Parallel arcs are summed into a
single residual entry.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class FlowNetwork:
    """s-t network. Arcs are (from, to, capacity) with integer capacity >= 0."""

    node_count: int
    arcs: tuple
    source: int
    sink: int

    def __post_init__(self):
        if not (0 <= self.source < self.node_count and 0 <= self.sink < self.node_count):
            raise ValueError("source/sink out of range")
        if self.source == self.sink:
            raise ValueError("source and sink must differ")
        arcs = []
        for u, v, c in self.arcs:
            u, v = int(u), int(v)
            if not (0 <= u < self.node_count and 0 <= v < self.node_count):
                raise ValueError(f"arc endpoint out of range: ({u}, {v})")
            if isinstance(c, float):
                raise ValueError("capacities must be integers, got float")
            c = int(c)
            if c < 0:
                raise ValueError("capacities must be nonnegative")
            arcs.append((u, v, c))
        object.__setattr__(self, "arcs", tuple(arcs))


@dataclass(frozen=True)
class CutResult:
    """Max-flow value plus the canonical minimum-cut source side."""

    max_flow_value: int
    source_set: frozenset


class PushRelabelSolver:
    """Single-use solver instance; owns its working state.

    After solve(), `net_flows()` yields the per-pair net flows for
    diagnostics (conservation checks in tests).
    """

    def __init__(self, net: FlowNetwork):
        self.net = net
        n = net.node_count
        # Sum parallel arcs, then lay out antiparallel pairs as xor-paired
        # residual entries: arc e is u->v, arc e^1 is v->u.
        capmap: dict = {}
        pairs = []  # unordered pairs in first-appearance order (determinism)
        seen = set()
        for u, v, c in net.arcs:
            if u == v:
                continue  # self-loops carry no flow
            capmap[(u, v)] = capmap.get((u, v), 0) + c
            key = (min(u, v), max(u, v))
            if key not in seen:
                seen.add(key)
                pairs.append(key)
        to = []
        cap = []
        adj = [[] for _ in range(n)]
        for a, b in pairs:
            ca = capmap.get((a, b), 0)
            cb = capmap.get((b, a), 0)
            if ca == 0 and cb == 0:
                continue
            e = len(to)
            to.append(b)
            cap.append(ca)
            to.append(a)
            cap.append(cb)
            adj[a].append(e)
            adj[b].append(e + 1)
        self._to = to
        self._cap = cap
        self._orig_cap = list(cap)
        self._adj = adj
        self._solved = False
        self._result = None

    # -- core ------------------------------------------------------------

    def solve(self) -> CutResult:
        if self._solved:
            return self._result
        n = self.net.node_count
        s, t = self.net.source, self.net.sink
        to, cap, adj = self._to, self._cap, self._adj
        H = self._bfs_heights()
        H[s] = n
        excess = [0] * n
        cur = [0] * n
        max_h = 2 * n + 1
        cnt = [0] * (max_h + 1)
        for v in range(n):
            cnt[H[v]] += 1
        buckets = [[] for _ in range(max_h + 1)]

        # saturate all source arcs
        for e in adj[s]:
            d = cap[e]
            if d > 0:
                v = to[e]
                cap[e] = 0
                cap[e ^ 1] += d
                excess[v] += d
                excess[s] -= d
                if v != t and v != s:
                    buckets[H[v]].append(v)

        hi = max_h
        while hi >= 0:
            if not buckets[hi]:
                hi -= 1
                continue
            u = buckets[hi].pop()
            if u == s or u == t or excess[u] == 0 or H[u] != hi:
                continue  # stale entry
            # discharge u until its excess is gone or it is relabeled
            eu = excess[u]
            arcs_u = adj[u]
            deg = len(arcs_u)
            c = cur[u]
            hu = H[u]
            while eu > 0:
                if c == deg:
                    # relabel
                    new_h = max_h
                    for e in arcs_u:
                        if cap[e] > 0:
                            hv = H[to[e]]
                            if hv + 1 < new_h:
                                new_h = hv + 1
                    old_h = hu
                    cnt[old_h] -= 1
                    cnt[new_h] += 1
                    H[u] = new_h
                    cur[u] = 0
                    excess[u] = eu
                    if cnt[old_h] == 0 and 0 < old_h < n:
                        # gap: nodes strictly above the gap and below n can
                        # never reach t again; lift them past n.
                        for v in range(n):
                            hv = H[v]
                            if old_h < hv < n and v != s:
                                cnt[hv] -= 1
                                H[v] = n + 1
                                cnt[n + 1] += 1
                                if excess[v] > 0 and v != t:
                                    buckets[n + 1].append(v)
                                    if n + 1 > hi:
                                        hi = n + 1
                    if H[u] <= max_h and excess[u] > 0:
                        buckets[H[u]].append(u)
                        if H[u] > hi:
                            hi = H[u]
                    break
                e = arcs_u[c]
                ce = cap[e]
                if ce > 0:
                    v = to[e]
                    if hu == H[v] + 1:
                        d = eu if eu < ce else ce
                        cap[e] = ce - d
                        cap[e ^ 1] += d
                        eu -= d
                        was = excess[v]
                        excess[v] = was + d
                        if was == 0 and v != s and v != t:
                            buckets[H[v]].append(v)
                        continue
                c += 1
            else:
                excess[u] = 0
                cur[u] = c

        flow = excess[t]
        source_set = self._residual_reachable(s)
        self._result = CutResult(max_flow_value=flow, source_set=frozenset(source_set))
        self._solved = True
        return self._result

    def _bfs_heights(self):
        """Exact distance-to-sink labels over positive-capacity arcs."""
        n = self.net.node_count
        t = self.net.sink
        to, cap, adj = self._to, self._cap, self._adj
        H = [n] * n
        H[t] = 0
        queue = [t]
        qi = 0
        while qi < len(queue):
            x = queue[qi]
            qi += 1
            hx = H[x]
            for e in adj[x]:
                # arc e^1 is to[e] -> x; usable if it has capacity
                y = to[e]
                if H[y] == n and cap[e ^ 1] > 0:
                    H[y] = hx + 1
                    queue.append(y)
        return H

    def _residual_reachable(self, s):
        to, cap, adj = self._to, self._cap, self._adj
        seen = {s}
        stack = [s]
        while stack:
            u = stack.pop()
            for e in adj[u]:
                if cap[e] > 0:
                    v = to[e]
                    if v not in seen:
                        seen.add(v)
                        stack.append(v)
        return seen

    def net_flows(self):
        """(u, v, flow) per residual pair with positive net u->v flow."""
        out = []
        for e in range(0, len(self._to), 2):
            f = self._orig_cap[e] - self._cap[e]
            v, u = self._to[e], self._to[e ^ 1]
            if f > 0:
                out.append((u, v, f))
            elif f < 0:
                out.append((v, u, -f))
        return out


def max_flow_min_cut(net: FlowNetwork) -> CutResult:
    """Exact max flow and the inclusion-minimal min-cut source set."""
    return PushRelabelSolver(net).solve()
