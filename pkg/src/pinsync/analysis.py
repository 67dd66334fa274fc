"""Pinning-control analysis of periodically switched networks.

For a single pinned node ``i`` with gain ``w`` the error system in phase
``k`` is ``D_k = I_N (x) A - (r L_k + W_i) (x) Lambda``.  Over one period the
error is mapped by the monodromy matrix
``R = exp(tau_{p-1} D_{p-1}) ... exp(tau_0 D_0)``, and the synchronization
speed is ``ln rho(R) / T``.  More negative means faster, so the most
influential driver node is the one with the smallest speed.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math

import numpy as np

from .errors import DimensionError, PreconditionError, ValidationError
from .linalg import as_matrix, kron, mat_exp, max_real_part, spectral_norm, spectral_radius
from .network import laplacian_set

__all__ = [
    "SystemSpec",
    "PinConfig",
    "NodeSpeedReport",
    "ThresholdReport",
    "error_matrix",
    "phase_matrices",
    "monodromy",
    "sync_speed",
    "rank_nodes",
    "average_matrix",
    "average_speed",
    "bound_constant",
    "threshold_T0",
    "threshold_gap",
    "solve_threshold",
    "upper_envelope",
    "lower_envelope",
]

T0_GRID_MIN = 1e-9
T0_GRID_POINTS = 2000
T0_RTOL = 1e-10
DEFAULT_T_MAX = 1e2


def _readonly(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """Node dynamics ``A``, inner coupling ``Lambda`` and coupling strength ``r``."""

    A: np.ndarray
    Lambda: np.ndarray
    r: float = 1.0

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        Lam = as_matrix(self.Lambda, "Lambda")
        if A.shape[0] != A.shape[1]:
            raise DimensionError(f"A must be square, got {A.shape}", path="A")
        if Lam.shape != A.shape:
            raise DimensionError(f"Lambda shape {Lam.shape} does not match A shape {A.shape}", path="Lambda")
        if not (math.isfinite(self.r) and self.r > 0):
            raise ValidationError(f"coupling strength r must be positive, got {self.r!r}",
                                  code="E_COUPLING", path="r")
        object.__setattr__(self, "A", _readonly(A))
        object.__setattr__(self, "Lambda", _readonly(Lam))
        object.__setattr__(self, "r", float(self.r))

    @property
    def n(self):
        return self.A.shape[0]

    def with_A(self, A):
        return SystemSpec(A, self.Lambda, self.r)


@dataclass(frozen=True)
class PinConfig:
    """Pinned nodes (1-based) with their control gains."""

    pins: tuple

    def __post_init__(self):
        pins = tuple((int(i), float(w)) for i, w in self.pins)
        nodes = [i for i, _ in pins]
        if len(set(nodes)) != len(nodes):
            raise ValidationError(f"pinned nodes must be distinct, got {nodes}", code="E_PIN")
        for i, w in pins:
            if i < 1:
                raise ValidationError(f"pinned node index {i} must be >= 1", code="E_NODE_INDEX")
            if not (math.isfinite(w) and w > 0):
                raise ValidationError(f"pinning gain must be positive, got {w!r}", code="E_GAIN")
        object.__setattr__(self, "pins", pins)

    @classmethod
    def single(cls, node, gain):
        return cls(((node, gain),))

    def gain_matrix(self, N):
        W = np.zeros((N, N))
        for i, w in self.pins:
            if i > N:
                raise ValidationError(f"pinned node {i} outside [1, {N}]", code="E_NODE_INDEX")
            W[i - 1, i - 1] = w
        return W


@dataclass(frozen=True)
class NodeSpeedReport:
    node: int
    rho: float
    speed: float
    stable: bool


@dataclass(frozen=True)
class ThresholdReport:
    best_node: int
    nodes: tuple
    avg_speeds: tuple
    bound_constants: tuple
    T0: float
    residual: float
    saturated: bool = False

    def as_dict(self):
        return {
            "best_node": self.best_node,
            "nodes": list(self.nodes),
            "avg_speeds": list(self.avg_speeds),
            "bound_constants": list(self.bound_constants),
            "T0": self.T0,
            "residual": self.residual,
            "saturated": self.saturated,
        }


def error_matrix(spec, L_phase, pins):
    """``I_N (x) A - (r L + W) (x) Lambda`` for one topology phase."""
    L = as_matrix(L_phase, "L")
    if L.shape[0] != L.shape[1]:
        raise DimensionError(f"Laplacian must be square, got {L.shape}")
    N = L.shape[0]
    W = pins.gain_matrix(N)
    return kron(np.eye(N), spec.A) - kron(spec.r * L + W, spec.Lambda)


def _check_nodes(schedule, nodes):
    N = schedule.node_count
    for i in nodes:
        if not 1 <= i <= N:
            raise ValidationError(f"node {i} outside [1, {N}]", code="E_NODE_INDEX")


def phase_matrices(spec, schedule, pins):
    lap = laplacian_set(schedule)
    _check_nodes(schedule, [i for i, _ in pins.pins])
    return [error_matrix(spec, L, pins) for L in lap.per_phase]


def monodromy(spec, schedule, pins):
    """Transition matrix over one period; later phases multiply on the left."""
    D = phase_matrices(spec, schedule, pins)
    R = np.eye(D[0].shape[0])
    for Dk, tau in zip(D, schedule.dwell_times):
        R = mat_exp(Dk, tau) @ R
    return R


def _speed_report(node, rho, T):
    speed = -math.inf if rho == 0.0 else math.log(rho) / T
    return NodeSpeedReport(node=node, rho=rho, speed=speed, stable=rho < 1.0)


def sync_speed(spec, schedule, pin_node, gain):
    """Monodromy spectral radius, speed ``ln(rho)/T`` and stability for one pinned node."""
    R = monodromy(spec, schedule, PinConfig.single(pin_node, gain))
    return _speed_report(pin_node, spectral_radius(R), schedule.period)


def _map(fn, items, workers=None):
    items = list(items)
    if workers and workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def rank_nodes(spec, schedule, gain, candidates=None, workers=None):
    """Single-node pinning reports, most influential (smallest speed) first.

    Ties are broken by the lower node index.
    """
    nodes = list(candidates) if candidates else list(range(1, schedule.node_count + 1))
    _check_nodes(schedule, nodes)
    reports = _map(lambda i: sync_speed(spec, schedule, i, gain), nodes, workers)
    return sorted(reports, key=lambda rep: (rep.speed, rep.node))


def average_matrix(spec, schedule, pin_node, gain):
    lap = laplacian_set(schedule)
    _check_nodes(schedule, [pin_node])
    return error_matrix(spec, lap.average, PinConfig.single(pin_node, gain))


def average_speed(spec, schedule, pin_node, gain):
    """Convergence speed of the average system, max Re eig of the averaged error matrix."""
    return max_real_part(average_matrix(spec, schedule, pin_node, gain))


def bound_constant(spec, schedule, pin_node, gain):
    """max over phases of the spectral norm of the per-phase error matrix."""
    D = phase_matrices(spec, schedule, PinConfig.single(pin_node, gain))
    return max(spectral_norm(Dk) for Dk in D)


def _phi(x):
    # exp(x) - 1 - x without cancellation for small x
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-3
    with np.errstate(over="ignore", invalid="ignore"):
        big = np.expm1(x) - x
    series = x * x * (0.5 + x * (1.0 / 6 + x * (1.0 / 24 + x * (1.0 / 120))))
    return np.where(small, series, big)


def upper_envelope(b, d, T):
    """``exp(b T) + 2 (exp(d T) - 1 - d T)``, the bound on the best node's error."""
    return 1.0 + np.expm1(b * np.asarray(T, dtype=float)) + 2.0 * _phi(d * np.asarray(T, dtype=float))


def lower_envelope(b, d, T):
    """``exp(b T) - 2 (exp(d T) - 1 - d T)``, the bound on a competitor's error."""
    return 1.0 + np.expm1(b * np.asarray(T, dtype=float)) - 2.0 * _phi(d * np.asarray(T, dtype=float))


def threshold_gap(b_best, d_best, b_others, d_others, T):
    """``min_j lower_j(T) - upper_best(T)``, evaluated without the leading 1 cancelling.

    Positive while the bounds certify that the average-system best node
    remains best.  Non-finite values are mapped to ``-inf``.
    """
    T = np.atleast_1d(np.asarray(T, dtype=float))
    with np.errstate(over="ignore", invalid="ignore"):
        best = np.expm1(b_best * T) + 2.0 * _phi(d_best * T)
        others = np.array([np.expm1(b * T) - 2.0 * _phi(d * T) for b, d in zip(b_others, d_others)])
        gap = others.min(axis=0) - best
    return np.where(np.isfinite(gap), gap, -np.inf)


def solve_threshold(b, d, best, t_max=DEFAULT_T_MAX):
    """First ``T > 0`` where ``upper_best(T) = min_j lower_j(T)``.

    ``b`` and ``d`` are average speeds and bound constants per candidate,
    ``best`` the position of the strictly fastest one.  A log-spaced scan
    from 1e-9 to ``t_max`` brackets the first sign change of
    :func:`threshold_gap`; bisection refines it to 1e-10 relative.

    Returns ``(T0, residual, saturated)``; without a crossing below
    ``t_max`` this is ``(t_max, residual, True)``.
    """
    b = np.asarray(b, dtype=float)
    d = np.asarray(d, dtype=float)
    others = [k for k in range(b.size) if k != best]

    def gap(T):
        return threshold_gap(b[best], d[best], b[others], d[others], T)

    grid = np.logspace(math.log10(T0_GRID_MIN), math.log10(t_max), T0_GRID_POINTS)
    crossing = np.nonzero(gap(grid) <= 0)[0]
    if crossing.size == 0:
        return float(t_max), float(abs(gap(t_max)[0])), True
    k = crossing[0]
    lo = 0.0 if k == 0 else grid[k - 1]
    hi = grid[k]
    while hi - lo > T0_RTOL * hi:
        mid = 0.5 * (lo + hi)
        if gap(mid)[0] > 0:
            lo = mid
        else:
            hi = mid
    T0 = float(0.5 * (lo + hi))
    return T0, float(abs(gap(T0)[0])), False


def threshold_T0(spec, schedule, gain, candidates=None, t_max=DEFAULT_T_MAX, tie_tol=1e-9, workers=None):
    """Switching-period threshold below which the average-system best node stays best.

    Raises
    ------
    PreconditionError
        If the smallest average speed is not strictly smallest (gap
        below ``tie_tol * max(1, |b|)``), or fewer than two candidates.
    """
    nodes = list(candidates) if candidates else list(range(1, schedule.node_count + 1))
    _check_nodes(schedule, nodes)
    if len(nodes) < 2:
        raise PreconditionError("threshold needs at least two candidate nodes")

    def per_node(i):
        return average_speed(spec, schedule, i, gain), bound_constant(spec, schedule, i, gain)

    bd = _map(per_node, nodes, workers)
    b = np.array([x[0] for x in bd])
    d = np.array([x[1] for x in bd])
    order = np.lexsort((np.array(nodes), b))
    k0, k1 = order[0], order[1]
    if b[k1] - b[k0] <= tie_tol * max(1.0, abs(b[k0])):
        raise PreconditionError(
            f"average-system speeds tie between nodes {nodes[k0]} and {nodes[k1]} "
            f"({b[k0]!r} vs {b[k1]!r}); best node is not strict"
        )
    T0, residual, saturated = solve_threshold(b, d, int(k0), t_max)
    return ThresholdReport(
        best_node=nodes[k0],
        nodes=tuple(nodes),
        avg_speeds=tuple(float(x) for x in b),
        bound_constants=tuple(float(x) for x in d),
        T0=T0,
        residual=residual,
        saturated=saturated,
    )
