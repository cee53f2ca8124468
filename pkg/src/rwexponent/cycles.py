"""Minimum mean cycle search on a strongly connected digraph.

Karp's recurrence gives the optimal mean. Shifting costs by that mean and
computing Bellman-Ford potentials leaves a "tight" subgraph whose cycles
are exactly the optimal ones; a BFS there returns the shortest,
lexicographically smallest optimal cycle so ties break deterministically.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .errors import NoCycle


class EdgeGraph:
    """Padded in-edge layout of a fixed edge list, reused across cost vectors."""

    def __init__(self, n: int, src: np.ndarray, dst: np.ndarray):
        self.n = n
        self.src = np.asarray(src, dtype=np.intp)
        self.dst = np.asarray(dst, dtype=np.intp)
        m = self.src.size
        indeg = np.bincount(self.dst, minlength=n)
        width = max(1, int(indeg.max()) if m else 1)
        self.in_edge = np.full((n, width), -1, dtype=np.intp)
        fill = np.zeros(n, dtype=np.intp)
        for e in range(m):
            v = self.dst[e]
            self.in_edge[v, fill[v]] = e
            fill[v] += 1
        self.pad = self.in_edge < 0
        self.in_src = np.where(self.pad, 0, self.src[self.in_edge])
        order = np.lexsort((self.dst, self.src))
        self.out_sorted = [[] for _ in range(n)]
        for e in order:
            self.out_sorted[self.src[e]].append(int(e))

    def _padded_cost(self, cost: np.ndarray) -> np.ndarray:
        c = cost[np.where(self.pad, 0, self.in_edge)]
        c[self.pad] = np.inf
        return c

    def karp_value(self, cost: np.ndarray) -> float:
        n = self.n
        c = self._padded_cost(cost)
        d = np.full((n + 1, n), np.inf)
        d[0, 0] = 0.0
        for k in range(1, n + 1):
            d[k] = np.min(d[k - 1][self.in_src] + c, axis=1)
        finite = np.isfinite(d[n])
        if not finite.any():
            raise NoCycle("graph has no cycle reachable from node 0")
        with np.errstate(invalid="ignore"):
            ks = np.arange(n)[:, None]
            ratios = (d[n][None, :] - d[:n]) / (n - ks)
        ratios[~np.isfinite(d[:n])] = -np.inf
        worst = np.max(ratios, axis=0)
        return float(np.min(worst[finite]))

    def potentials(self, reduced: np.ndarray) -> np.ndarray:
        c = self._padded_cost(reduced)
        phi = np.zeros(self.n)
        for _ in range(self.n):
            nxt = np.minimum(phi, np.min(phi[self.in_src] + c, axis=1))
            if np.array_equal(nxt, phi):
                break
            phi = nxt
        return phi

    def _smallest_cycle(self, tight: np.ndarray) -> tuple[int, ...] | None:
        best: tuple[int, ...] | None = None
        out = [[e for e in self.out_sorted[u] if tight[e]] for u in range(self.n)]
        for s in range(self.n):
            if not out[s]:
                continue
            if best is not None and len(best) == 1:
                break
            parent = {s: None}
            depth = {s: 0}
            queue = deque([s])
            found = None
            while queue and found is None:
                u = queue.popleft()
                if best is not None and depth[u] + 1 > len(best):
                    break
                for e in out[u]:
                    v = int(self.dst[e])
                    if v == s:
                        found = u
                        break
                    if v > s and v not in parent:
                        parent[v] = u
                        depth[v] = depth[u] + 1
                        queue.append(v)
            if found is None:
                continue
            path = []
            node = found
            while node is not None:
                path.append(node)
                node = parent[node]
            cyc = tuple(reversed(path))
            if best is None or (len(cyc), cyc) < (len(best), best):
                best = cyc
        return best

    def min_mean_cycle(self, cost) -> tuple[float, tuple[int, ...]]:
        """Return ``(mean cost, cycle)`` for the optimal simple cycle.

        ``cycle`` lists its nodes starting from the smallest index; a
        self-loop at ``i`` is ``(i,)``.
        """
        cost = np.asarray(cost, dtype=float)
        if cost.shape != self.src.shape or not np.all(np.isfinite(cost)):
            raise ValueError("costs must be finite and given on every edge")
        mu = self.karp_value(cost)
        reduced = cost - mu
        phi = self.potentials(reduced)
        slack = reduced + phi[self.src] - phi[self.dst]
        scale = max(1.0, float(np.max(np.abs(cost))))
        tol = 1e-13 * self.n * scale
        for _ in range(8):
            cyc = self._smallest_cycle(slack <= tol)
            if cyc is not None:
                return self.cycle_mean(cost, cyc), cyc
            tol *= 10.0
        raise NoCycle("no tight cycle found; costs may be badly scaled")

    def cycle_edges(self, cycle: tuple[int, ...]) -> np.ndarray:
        idx = []
        for a, b in zip(cycle, cycle[1:] + cycle[:1]):
            e = next((e for e in self.out_sorted[a] if self.dst[e] == b), None)
            if e is None:
                raise NoCycle(f"({a}, {b}) is not an edge")
            idx.append(e)
        return np.array(idx, dtype=np.intp)

    def cycle_mean(self, cost: np.ndarray, cycle: tuple[int, ...]) -> float:
        return float(np.mean(cost[self.cycle_edges(cycle)]))

