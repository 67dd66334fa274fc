"""Directed weighted topologies, Laplacians and periodic switching schedules.

Node indices are 1-based everywhere in the public API.  An edge
``Edge(src=j, dst=i, weight=w)`` means node ``i`` receives the state of
node ``j``; row ``i`` of the Laplacian aggregates in-neighbours.
"""

from collections import deque
from dataclasses import dataclass
import math

import numpy as np

from .errors import ValidationError
from .linalg import as_matrix

__all__ = [
    "Edge",
    "Topology",
    "Phase",
    "SwitchingSchedule",
    "LaplacianSet",
    "laplacian",
    "laplacian_set",
    "has_spanning_tree",
    "validate_laplacian",
]

DWELL_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    weight: float = 1.0


@dataclass(frozen=True)
class Topology:
    node_count: int
    edges: tuple = ()

    def __post_init__(self):
        if int(self.node_count) != self.node_count or self.node_count < 1:
            raise ValidationError(f"node_count must be a positive integer, got {self.node_count!r}",
                                  code="E_NODE_COUNT", path="node_count")
        edges = tuple(e if isinstance(e, Edge) else Edge(*e) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        seen = set()
        for k, e in enumerate(edges):
            path = f"edges[{k}]"
            for end in (e.src, e.dst):
                if int(end) != end or not 1 <= end <= self.node_count:
                    raise ValidationError(f"node index {end!r} outside [1, {self.node_count}]",
                                          code="E_NODE_INDEX", path=path)
            if e.src == e.dst:
                raise ValidationError(f"self-loop on node {e.src}", code="E_SELF_LOOP", path=path)
            if not (math.isfinite(e.weight) and e.weight > 0):
                raise ValidationError(f"edge weight must be positive, got {e.weight!r}",
                                      code="E_NEGATIVE_WEIGHT", path=f"{path}.weight")
            if (e.src, e.dst) in seen:
                raise ValidationError(f"duplicate edge {e.src}->{e.dst}", code="E_DUPLICATE_EDGE", path=path)
            seen.add((e.src, e.dst))

    @classmethod
    def from_adjacency(cls, adjacency):
        """Build from ``adjacency[i][j] = weight of edge j -> i`` (0 = absent)."""
        a = np.asarray(adjacency, dtype=float)
        n = a.shape[0]
        edges = [Edge(j + 1, i + 1, float(a[i, j])) for i in range(n) for j in range(n) if i != j and a[i, j] != 0]
        return cls(n, tuple(edges))


@dataclass(frozen=True)
class Phase:
    topology: Topology
    dwell_fraction: float


@dataclass(frozen=True)
class SwitchingSchedule:
    """Periodic sequence of topologies; phase ``k`` lasts ``dwell_fraction_k * period``."""

    phases: tuple
    period: float

    def __post_init__(self):
        phases = tuple(p if isinstance(p, Phase) else Phase(*p) for p in self.phases)
        object.__setattr__(self, "phases", phases)
        if not phases:
            raise ValidationError("schedule needs at least one phase", code="E_NO_PHASES", path="phases")
        if not (math.isfinite(self.period) and self.period > 0):
            raise ValidationError(f"period must be positive, got {self.period!r}", code="E_PERIOD", path="period")
        n = phases[0].topology.node_count
        for k, p in enumerate(phases):
            if p.topology.node_count != n:
                raise ValidationError("all phases must share node_count", code="E_NODE_COUNT",
                                      path=f"phases[{k}]")
            if not (0 < p.dwell_fraction <= 1):
                raise ValidationError(f"dwell_fraction must lie in (0, 1], got {p.dwell_fraction!r}",
                                      code="E_DWELL", path=f"phases[{k}].dwell_fraction")
        total = math.fsum(p.dwell_fraction for p in phases)
        if abs(total - 1.0) > DWELL_SUM_TOL:
            raise ValidationError(f"dwell fractions sum to {total!r}, expected 1", code="E_DWELL_SUM",
                                  path="schedule.phases")

    @classmethod
    def equal_dwell(cls, topologies, period):
        """Phases of equal length ``period / p``, in the given order."""
        topologies = tuple(topologies)
        p = len(topologies)
        return cls(tuple(Phase(t, 1.0 / p) for t in topologies), period)

    @property
    def node_count(self):
        return self.phases[0].topology.node_count

    @property
    def dwell_fractions(self):
        return tuple(p.dwell_fraction for p in self.phases)

    @property
    def dwell_times(self):
        return tuple(p.dwell_fraction * self.period for p in self.phases)

    def phase_starts(self):
        """Offsets of the switching instants within one period."""
        starts = [0.0]
        acc = 0.0
        for f in self.dwell_fractions[:-1]:
            acc += f
            starts.append(acc * self.period)
        return tuple(starts)

    def with_period(self, period):
        return SwitchingSchedule(self.phases, float(period))


@dataclass(frozen=True, eq=False)
class LaplacianSet:
    per_phase: tuple
    average: np.ndarray


def laplacian(topology):
    """In-degree Laplacian: ``l_ij = -w(j->i)`` and ``l_ii = sum_j w(j->i)``."""
    n = topology.node_count
    L = np.zeros((n, n))
    for e in topology.edges:
        i, j = e.dst - 1, e.src - 1
        L[i, j] -= e.weight
    L[np.diag_indices(n)] = -L.sum(axis=1)
    return L


def laplacian_set(schedule):
    per_phase = tuple(laplacian(p.topology) for p in schedule.phases)
    average = sum(f * L for f, L in zip(schedule.dwell_fractions, per_phase))
    return LaplacianSet(per_phase, average)


def validate_laplacian(L, tol=1e-12):
    a = as_matrix(L, "L")
    if a.shape[0] != a.shape[1]:
        raise ValidationError(f"Laplacian must be square, got {a.shape}", code="E_DIMENSION")
    off = a - np.diag(np.diag(a))
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.any(off > tol * scale):
        raise ValidationError("Laplacian has positive off-diagonal entries", code="E_LAPLACIAN")
    if np.any(np.abs(a.sum(axis=1)) > tol * scale * a.shape[0]):
        raise ValidationError("Laplacian rows do not sum to zero", code="E_LAPLACIAN")
    return a


def has_spanning_tree(L):
    """True iff some root reaches every node along influence edges ``j -> i`` (``l_ij < 0``)."""
    a = validate_laplacian(L)
    n = a.shape[0]
    # out[j] lists the nodes that node j influences
    out = [np.nonzero(a[:, j] < 0)[0] for j in range(n)]
    for root in range(n):
        seen = np.zeros(n, dtype=bool)
        seen[root] = True
        queue = deque([root])
        while queue:
            j = queue.popleft()
            for i in out[j]:
                if not seen[i]:
                    seen[i] = True
                    queue.append(i)
        if seen.all():
            return True
    return False
