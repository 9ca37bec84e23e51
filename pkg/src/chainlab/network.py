"""Peer graph and end-to-end propagation delays.

Each broadcast draws one delay per receiver; there is no hop-by-hop
flooding.  The default graph is complete.  A partition schedule removes
edges during time windows, and a node that the origin cannot reach at send
time gets nothing.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np


class MeanBelowMedian(ValueError):
    pass


def calibrate_lognormal(median: float, mean: float) -> tuple[float, float]:
    """``(mu, sigma)`` of the log-normal with the given median and mean."""
    if not median > 0:
        raise ValueError("median must be positive")
    if mean < median:
        raise MeanBelowMedian(f"mean {mean} < median {median}")
    return math.log(median), math.sqrt(2.0 * math.log(mean / median))


@dataclass
class LatencyModel:
    family: str = "lognormal"   # lognormal | fixed | per_edge
    median: float = 6.5
    mean: float = 12.6

    def __post_init__(self) -> None:
        if self.family not in ("lognormal", "fixed", "per_edge"):
            raise ValueError(f"unknown latency family {self.family!r}")
        if self.family == "lognormal":
            self.mu, self.sigma = calibrate_lognormal(self.median, self.mean)

    def scaled(self, factor: float) -> "LatencyModel":
        return LatencyModel(self.family, self.median * factor, self.mean * factor)

    def draw(self, stream: np.random.Generator, size: int | None = None):
        if self.family == "lognormal":
            if self.sigma == 0.0:
                return self.median if size is None else np.full(size, self.median)
            return stream.lognormal(self.mu, self.sigma, size)
        return self.median if size is None else np.full(size, float(self.median))

    @property
    def max_credible(self) -> float:
        """A delay that almost no honest delivery exceeds (99.9th percentile)."""
        if self.family == "lognormal":
            return math.exp(self.mu + 3.09 * self.sigma)
        return self.median


@dataclass
class Partition:
    start: float
    end: float
    edges: frozenset[frozenset[str]]

    def active(self, t: float) -> bool:
        return self.start <= t < self.end


@dataclass
class PeerGraph:
    """Nodes plus undirected edges with a base delay (used by ``per_edge``)."""

    nodes: list[str]
    edges: dict[frozenset[str], float] = field(default_factory=dict)
    partitions: list[Partition] = field(default_factory=list)

    @classmethod
    def complete(cls, nodes: Iterable[str], base_delay: float = 0.0) -> "PeerGraph":
        nodes = list(nodes)
        edges = {frozenset((a, b)): base_delay for i, a in enumerate(nodes) for b in nodes[i + 1:]}
        return cls(nodes, edges)

    def partition(self, start: float, end: float, group: Iterable[str]) -> None:
        """Cut every edge between ``group`` and the rest during ``[start, end)``."""
        group = set(group)
        cut = frozenset(e for e in self.edges if len(e & group) == 1)
        self.partitions.append(Partition(start, end, cut))

    def _live(self, t: float) -> dict[str, list[tuple[str, float]]]:
        cut: set[frozenset[str]] = set()
        for p in self.partitions:
            if p.active(t):
                cut |= p.edges
        adj: dict[str, list[tuple[str, float]]] = {n: [] for n in self.nodes}
        for e, d in self.edges.items():
            if e in cut:
                continue
            a, b = tuple(e)
            adj[a].append((b, d))
            adj[b].append((a, d))
        return adj

    def reachable(self, origin: str, t: float) -> dict[str, float]:
        """Shortest base-delay distance to every node reachable at time ``t``."""
        adj = self._live(t)
        dist = {origin: 0.0}
        heap = [(0.0, origin)]
        while heap:
            d, n = heapq.heappop(heap)
            if d > dist[n]:
                continue
            for m, w in adj[n]:
                nd = d + w
                if nd < dist.get(m, math.inf):
                    dist[m] = nd
                    heapq.heappush(heap, (nd, m))
        return dist

    def is_connected(self, t: float = 0.0) -> bool:
        return not self.nodes or len(self.reachable(self.nodes[0], t)) == len(self.nodes)


def broadcast(graph: PeerGraph, latency: LatencyModel, origin: str, at: float,
              stream: np.random.Generator) -> list[tuple[str, float]]:
    """Arrival time of one payload at every node reachable from ``origin``.

    The origin itself receives at ``at``.  Receivers are returned in graph
    order; unreachable nodes are absent.
    """
    if origin not in graph.nodes:
        raise KeyError(origin)
    if graph.partitions:
        dist = graph.reachable(origin, at)
    else:
        dist = None
    out = [(origin, at)]
    receivers = [n for n in graph.nodes if n != origin and (dist is None or n in dist)]
    if not receivers:
        return out
    if latency.family == "per_edge":
        dist = dist if dist is not None else graph.reachable(origin, at)
        out.extend((n, at + dist[n]) for n in receivers)
        return out
    delays = latency.draw(stream, len(receivers))
    out.extend((n, at + float(d)) for n, d in zip(receivers, delays))
    return out
