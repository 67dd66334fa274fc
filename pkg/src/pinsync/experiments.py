"""Period sweeps, bifurcation detection and threshold comparison."""

from dataclasses import dataclass, field
import csv
import io
import math

import numpy as np

from .analysis import _map, sync_speed, threshold_T0
from .errors import InsufficientDataError, ValidationError

__all__ = [
    "SweepTable",
    "BifurcationReport",
    "default_grid",
    "sweep_periods",
    "find_bifurcation",
    "threshold_vs_bifurcation",
]

BIFURCATION_RTOL = 1e-6


def default_grid(t_min=1e-3, t_max=10.0, points=200):
    """Log-spaced switching periods."""
    if not (0 < t_min < t_max) or points < 1:
        raise ValidationError(f"invalid grid t_min={t_min!r} t_max={t_max!r} points={points!r}", code="E_GRID")
    if points == 1:
        return np.array([float(t_min)])
    return np.logspace(math.log10(t_min), math.log10(t_max), int(points))


def _best(row, nodes):
    # lowest speed, ties to the lower node index
    k = min(range(len(nodes)), key=lambda j: (row[j], nodes[j]))
    return nodes[k]


@dataclass(eq=False)
class SweepTable:
    """Speeds ``speeds[k, j]`` of pinning ``nodes[j]`` at period ``periods[k]``.

    ``speed_fn`` (optional) maps a period to a fresh row of speeds; when
    present, :func:`find_bifurcation` refines crossings by bisection.
    """

    periods: np.ndarray
    nodes: tuple
    speeds: np.ndarray
    best_node: np.ndarray = None
    speed_fn: object = field(default=None, repr=False)

    def __post_init__(self):
        self.periods = np.asarray(self.periods, dtype=float)
        self.speeds = np.asarray(self.speeds, dtype=float).reshape(self.periods.size, len(self.nodes))
        self.nodes = tuple(int(i) for i in self.nodes)
        if self.periods.size and (np.any(self.periods <= 0) or np.any(np.diff(self.periods) <= 0)):
            raise ValidationError("sweep periods must be positive and strictly increasing", code="E_GRID")
        if self.best_node is None:
            self.best_node = np.array([_best(row, self.nodes) for row in self.speeds], dtype=int)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["period"] + [f"b_node_{i}" for i in self.nodes] + ["best_node"])
        for T, row, best in zip(self.periods, self.speeds, self.best_node):
            w.writerow([repr(float(T))] + [repr(float(b)) for b in row] + [int(best)])
        return buf.getvalue()


def sweep_periods(spec, schedule, gain, T_grid, candidates=None, workers=None):
    """Table of single-node speeds over ``T_grid`` with the schedule's dwell fractions held fixed."""
    periods = np.asarray(T_grid, dtype=float)
    if periods.ndim != 1 or periods.size == 0:
        raise ValidationError("T_grid must be a non-empty 1-D sequence", code="E_GRID")
    if np.any(periods <= 0) or np.any(np.diff(periods) <= 0):
        raise ValidationError("T_grid must be positive and strictly increasing", code="E_GRID")
    nodes = tuple(candidates) if candidates else tuple(range(1, schedule.node_count + 1))

    def row(T):
        sched = schedule.with_period(float(T))
        return [sync_speed(spec, sched, i, gain).speed for i in nodes]

    pairs = [(T, i) for T in periods for i in nodes]
    flat = _map(lambda p: sync_speed(spec, schedule.with_period(float(p[0])), p[1], gain).speed, pairs, workers)
    speeds = np.array(flat, dtype=float).reshape(periods.size, len(nodes))
    return SweepTable(periods, nodes, speeds, speed_fn=row)


def find_bifurcation(table, speed_fn=None, rtol=BIFURCATION_RTOL):
    """First period at which the best node departs from the one at the smallest period.

    Returns ``None`` if the best node never changes on the grid.  The
    crossing between the bracketing grid points is refined by bisection on
    the best-node identity when a speed function is available, otherwise
    by linear interpolation of ``b_i0 - min_{j != i0} b_j``.
    """
    if table.periods.size < 2:
        raise InsufficientDataError("bifurcation search needs at least two periods")
    speed_fn = speed_fn or table.speed_fn
    i0 = int(table.best_node[0])
    changed = np.nonzero(table.best_node != i0)[0]
    if changed.size == 0:
        return None
    k = int(changed[0])
    lo, hi = float(table.periods[k - 1]), float(table.periods[k])
    nodes = table.nodes
    if speed_fn is not None:
        while hi - lo > rtol * hi:
            mid = 0.5 * (lo + hi)
            if _best(speed_fn(mid), nodes) == i0:
                lo = mid
            else:
                hi = mid
        return hi
    j0 = nodes.index(i0)

    def gap(row):
        rest = [b for j, b in enumerate(row) if j != j0]
        return row[j0] - min(rest)

    g_lo, g_hi = gap(table.speeds[k - 1]), gap(table.speeds[k])
    if not (math.isfinite(g_lo) and math.isfinite(g_hi)) or g_hi == g_lo:
        return hi
    return float(lo + (hi - lo) * (0 - g_lo) / (g_hi - g_lo))


@dataclass(frozen=True)
class BifurcationReport:
    T0: float
    bifurcation: object
    conservative: bool
    no_bifurcation: bool
    threshold: object
    grid_best_at_start: int

    def as_dict(self):
        return {
            "T0": self.T0,
            "bifurcation": self.bifurcation,
            "conservative": self.conservative,
            "no_bifurcation": self.no_bifurcation,
            "grid_best_at_start": self.grid_best_at_start,
            "threshold": self.threshold.as_dict(),
        }


def threshold_vs_bifurcation(spec, schedule, gain, T_grid=None, candidates=None, workers=None, table=None):
    """Compare the estimated threshold with the first bifurcation on the sweep grid.

    ``conservative`` is ``T0 <= bifurcation``, vacuously true (and flagged by
    ``no_bifurcation``) when the best node never changes on the grid.
    """
    rep = threshold_T0(spec, schedule, gain, candidates=candidates, workers=workers)
    if table is None:
        grid = default_grid() if T_grid is None else T_grid
        table = sweep_periods(spec, schedule, gain, grid, candidates=candidates, workers=workers)
    bif = find_bifurcation(table)
    return BifurcationReport(
        T0=rep.T0,
        bifurcation=bif,
        conservative=True if bif is None else rep.T0 <= bif,
        no_bifurcation=bif is None,
        threshold=rep,
        grid_best_at_start=int(table.best_node[0]),
    )
