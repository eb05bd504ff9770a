"""Follower communication digraph with leader pinning.

Conventions: followers and leaders are numbered from 1. An edge ``(j, i, w)``
means follower ``j`` is a neighbour of follower ``i`` (information flows
j -> i), stored as ``adjacency[i-1, j-1] = w``. A pin ``(k, i, g)`` means
leader ``k`` feeds follower ``i`` with gain ``g``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .errors import (
    Assumption1Violated,
    NonPositiveWeight,
    SelfLoop,
    TopologyError,
    ZeroInDegree,
)


class Edge(NamedTuple):
    src: int
    dst: int
    weight: float = 1.0


class Pin(NamedTuple):
    leader: int
    follower: int
    gain: float = 1.0


@dataclass(frozen=True, eq=False)
class DiGraphTopology:
    N: int
    M: int
    edges: tuple[Edge, ...]
    pins: tuple[Pin, ...]
    adjacency: np.ndarray
    pinning: np.ndarray  # (M, N); row k holds the diagonal of G_k

    @property
    def in_degree(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    @property
    def degree_matrix(self) -> np.ndarray:
        return np.diag(self.in_degree)

    @property
    def laplacian(self) -> np.ndarray:
        return self.degree_matrix - self.adjacency

    def G(self, k: int) -> np.ndarray:
        """Pinning matrix of leader ``k`` (1-based)."""
        return np.diag(self.pinning[k - 1])

    def neighbors(self, i: int) -> list[int]:
        return [j + 1 for j in np.flatnonzero(self.adjacency[i - 1] > 0)]

    def neighbor_pairs(self) -> list[tuple[int, int]]:
        rows, cols = np.nonzero(self.adjacency > 0)
        return [(int(i) + 1, int(j) + 1) for i, j in zip(rows, cols)]

    def __eq__(self, other):
        if not isinstance(other, DiGraphTopology):
            return NotImplemented
        return (self.N == other.N and self.M == other.M
                and np.array_equal(self.adjacency, other.adjacency)
                and np.array_equal(self.pinning, other.pinning))


def build_topology(N: int, M: int, edges: Iterable, pins: Iterable,
                   *, check_assumption1: bool = True) -> DiGraphTopology:
    """Validate and assemble a topology.

    ``edges`` holds ``(src, dst, weight)`` follower triples, ``pins`` holds
    ``(leader, follower, gain)`` triples; the weight/gain defaults to 1.
    Parallel entries are summed.
    """
    if N < 1 or M < 1:
        raise TopologyError(f"need at least one follower and one leader (N={N}, M={M})")
    edges = tuple(Edge(*e) for e in edges)
    pins = tuple(Pin(*p) for p in pins)
    adjacency = np.zeros((N, N))
    pinning = np.zeros((M, N))
    for e in edges:
        if not (1 <= e.src <= N and 1 <= e.dst <= N):
            raise TopologyError(f"edge {e.src}->{e.dst} references an unknown follower")
        if e.src == e.dst:
            raise SelfLoop(f"self-loop on follower {e.src}")
        if not e.weight > 0:
            raise NonPositiveWeight(f"edge {e.src}->{e.dst} has weight {e.weight}")
        adjacency[e.dst - 1, e.src - 1] += e.weight
    for p in pins:
        if not (1 <= p.leader <= M and 1 <= p.follower <= N):
            raise TopologyError(f"pin {p.leader}->{p.follower} references an unknown agent")
        if not p.gain > 0:
            raise NonPositiveWeight(f"pin {p.leader}->{p.follower} has gain {p.gain}")
        pinning[p.leader - 1, p.follower - 1] += p.gain
    zero = [i + 1 for i, d in enumerate(adjacency.sum(axis=1)) if d <= 0]
    if zero:
        raise ZeroInDegree(f"follower(s) {zero} have zero in-degree")
    topo = DiGraphTopology(N, M, edges, pins, adjacency, pinning)
    if check_assumption1:
        missing = unreachable_followers(topo)
        if missing:
            raise Assumption1Violated(missing)
    return topo


def unreachable_followers(topology: DiGraphTopology) -> list[int]:
    """Followers with no directed path from any leader (breadth-first search)."""
    N = topology.N
    seen = np.zeros(N, dtype=bool)
    queue = deque(int(i) for i in np.flatnonzero(topology.pinning.sum(axis=0) > 0))
    seen[list(queue)] = True
    adj = topology.adjacency
    while queue:
        j = queue.popleft()
        for i in np.flatnonzero(adj[:, j] > 0):
            if not seen[i]:
                seen[i] = True
                queue.append(int(i))
    return [int(i) + 1 for i in np.flatnonzero(~seen)]


def validate_assumption1(topology: DiGraphTopology) -> bool:
    return not unreachable_followers(topology)


def psi_matrices(topology: DiGraphTopology) -> tuple[list[np.ndarray], np.ndarray]:
    """``Psi_k = L / M + G_k`` for every leader, and their sum ``L + sum_k G_k``."""
    L = topology.laplacian
    psi = [L / topology.M + topology.G(k) for k in range(1, topology.M + 1)]
    psi_sum = L + np.diag(topology.pinning.sum(axis=0))
    return psi, psi_sum


class Lemma1Report(NamedTuple):
    min_real_eig: float
    min_sym_eig: float
    nonsingular: bool

    @property
    def spectrum_ok(self) -> bool:
        """All eigenvalues in the open right half-plane (what the coupling-gain argument uses)."""
        return self.min_real_eig > 0 and self.nonsingular

    @property
    def symmetric_part_pd(self) -> bool:
        return self.min_sym_eig > 0 and self.nonsingular


def lemma1_report(psi_sum, tol: float = 1e-9) -> Lemma1Report:
    psi_sum = np.atleast_2d(np.asarray(psi_sum, dtype=float))
    min_re = float(np.linalg.eigvals(psi_sum).real.min())
    min_sym = float(np.linalg.eigvalsh(0.5 * (psi_sum + psi_sum.T)).min())
    s = np.linalg.svd(psi_sum, compute_uv=False)
    nonsingular = bool(s.min() > tol * max(1.0, s.max()))
    return Lemma1Report(min_re, min_sym, nonsingular)


def verify_lemma1(psi_sum) -> bool:
    """Symmetric part of ``PsiSum`` positive-definite and ``PsiSum`` nonsingular.

    Use :func:`lemma1_report` for the weaker spectral condition ``Re(lambda) > 0``.
    """
    return lemma1_report(psi_sum).symmetric_part_pd


def default_topology() -> DiGraphTopology:
    """Six followers on a bidirected chain closed by ``6 -> 1``; four leaders pinned to 1, 2, 4, 6."""
    edges = []
    for i in range(1, 6):
        edges += [(i, i + 1, 1.0), (i + 1, i, 1.0)]
    edges.append((6, 1, 1.0))
    pins = [(1, 1, 1.0), (2, 2, 1.0), (3, 4, 1.0), (4, 6, 1.0)]
    return build_topology(6, 4, edges, pins)
