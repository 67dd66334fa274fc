"""Piecewise-exact time-domain propagation.

Within each constant-topology interval the state is advanced by matrix
exponentials.  The state at each switching instant is obtained from the
previous one by the cached whole-phase exponential; samples inside an
interval are projected from the interval start, so the trajectory at
switching instants does not depend on ``sample_dt``.
"""

from dataclasses import dataclass
import math

import numpy as np

from .analysis import phase_matrices
from .errors import DegenerateTraceError, InsufficientDataError, ValidationError
from .linalg import mat_exp

__all__ = [
    "InitialCondition",
    "SimulationTrace",
    "propagate_error",
    "propagate_full",
    "empirical_rate",
    "OVERFLOW_LIMIT",
]

OVERFLOW_LIMIT = 1e150
_MERGE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class InitialCondition:
    """Initial node states ``x_i(0)`` (N x n) and reference ``c(0)`` (n)."""

    node_states: np.ndarray
    reference: np.ndarray

    def __post_init__(self):
        x = np.array(self.node_states, dtype=float)
        c = np.array(self.reference, dtype=float).reshape(-1)
        if x.ndim == 1:
            x = x.reshape(-1, 1) if c.size == 1 else x.reshape(1, -1)
        if x.ndim != 2 or x.shape[1] != c.size:
            raise ValidationError(
                f"node_states shape {x.shape} incompatible with reference of length {c.size}",
                code="E_DIMENSION", path="init",
            )
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(c))):
            raise ValidationError("initial states must be finite", code="E_NONFINITE", path="init")
        x.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "node_states", x)
        object.__setattr__(self, "reference", c)

    @property
    def error(self):
        return (self.node_states - self.reference[None, :]).reshape(-1)

    @property
    def e0(self):
        return float(np.linalg.norm(self.error))


@dataclass(frozen=True, eq=False)
class SimulationTrace:
    times: np.ndarray
    error_norms: np.ndarray
    errors: np.ndarray = None
    node_states: np.ndarray = None
    reference: np.ndarray = None
    overflowed: bool = False


def _sample_times(schedule, t_end, sample_dt):
    """Sorted sample instants: the ``sample_dt`` grid, switching instants and ``t_end``.

    Returns ``(times, is_switch)``.  A grid point within a relative 1e-12
    of a switching instant (or of an already kept point) is dropped.
    """
    T = schedule.period
    starts = schedule.phase_starts()
    limit = t_end * (1 + _MERGE_TOL)
    n_periods = int(math.floor(t_end / T)) + 1
    switch = [m * T + s for m in range(n_periods) for s in starts]
    n_grid = int(math.floor(t_end / sample_dt * (1 + _MERGE_TOL))) + 1
    grid = [k * sample_dt for k in range(n_grid)]
    cands = [(t, True) for t in switch if t <= limit]
    cands += [(t, False) for t in grid if t <= limit]
    cands.append((float(t_end), False))
    # switching instants sort ahead of coincident grid points
    cands.sort(key=lambda c: (c[0], not c[1]))
    times, flags = [], []
    for t, sw in cands:
        if times and t - times[-1] <= _MERGE_TOL * max(1.0, t):
            if sw and not flags[-1]:
                times[-1], flags[-1] = t, True
            continue
        times.append(t)
        flags.append(sw)
    return np.array(times), np.array(flags, dtype=bool)


def _row_norms(rows):
    # scaled per row: a plain sum of squares underflows below ~1e-154
    rows = np.asarray(rows, dtype=float).reshape(len(rows), -1)
    scale = np.max(np.abs(rows), axis=1, initial=0.0)
    safe = np.where(scale > 0, scale, 1.0)
    return scale * np.sqrt(np.sum((rows / safe[:, None]) ** 2, axis=1))


def _piecewise(mats, schedule, y0, t_end, sample_dt, norm_of):
    if not (t_end > 0 and math.isfinite(t_end)):
        raise ValidationError(f"t_end must be positive, got {t_end!r}", code="E_T_END")
    if not (sample_dt > 0 and math.isfinite(sample_dt)):
        raise ValidationError(f"sample_dt must be positive, got {sample_dt!r}", code="E_SAMPLE_DT")
    times, is_switch = _sample_times(schedule, t_end, sample_dt)
    p = len(mats)
    whole = [mat_exp(M, tau) for M, tau in zip(mats, schedule.dwell_times)]
    states = np.empty((times.size, y0.size))
    y_start = np.array(y0, dtype=float)
    t_start = 0.0
    phase = 0
    overflowed = False
    n_out = times.size
    switch_count = 0
    for k, (t, sw) in enumerate(zip(times, is_switch)):
        if sw:
            if switch_count > 0:
                with np.errstate(over="ignore", invalid="ignore"):
                    y_start = whole[phase] @ y_start
                phase = (phase + 1) % p
            t_start = t
            switch_count += 1
            y = y_start
        else:
            with np.errstate(over="ignore", invalid="ignore"):
                y = mat_exp(mats[phase], t - t_start) @ y_start
        if not np.all(np.isfinite(y)) or norm_of(y) > OVERFLOW_LIMIT:
            overflowed = True
            n_out = k
            break
        states[k] = y
    return times[:n_out], states[:n_out], overflowed


def propagate_error(spec, schedule, pins, init, t_end, sample_dt):
    """Propagate the error system ``de/dt = D(t) e`` from ``init``.

    Traces that exceed 1e150 in norm are truncated and flagged with
    ``overflowed``.
    """
    mats = phase_matrices(spec, schedule, pins)
    e0 = _initial_error(spec, schedule, init)
    times, states, overflowed = _piecewise(mats, schedule, e0, t_end, sample_dt, np.linalg.norm)
    N, n = schedule.node_count, spec.n
    return SimulationTrace(
        times=times,
        error_norms=_row_norms(states),
        errors=states.reshape(-1, N, n),
        overflowed=overflowed,
    )


def _initial_error(spec, schedule, init):
    if init.node_states.shape != (schedule.node_count, spec.n):
        raise ValidationError(
            f"initial node states must be {schedule.node_count} x {spec.n}, got {init.node_states.shape}",
            code="E_DIMENSION", path="init.node_states",
        )
    return init.error


def full_matrix(spec, D, pins, N):
    """Stacked generator for ``[x_1..x_N, c]``: pinned nodes are driven towards ``c``."""
    n = spec.n
    Nn = N * n
    F = np.zeros((Nn + n, Nn + n))
    F[:Nn, :Nn] = D
    W = pins.gain_matrix(N)
    F[:Nn, Nn:] = np.kron(W @ np.ones((N, 1)), spec.Lambda)
    F[Nn:, Nn:] = spec.A
    return F


def propagate_full(spec, schedule, pins, init, t_end, sample_dt):
    """Propagate node states and the reference trajectory together."""
    N, n = schedule.node_count, spec.n
    _initial_error(spec, schedule, init)
    mats = [full_matrix(spec, D, pins, N) for D in phase_matrices(spec, schedule, pins)]
    y0 = np.concatenate([init.node_states.reshape(-1), init.reference])

    def err_norm(y):
        return np.linalg.norm(y[:N * n] - np.tile(y[N * n:], N))

    times, states, overflowed = _piecewise(mats, schedule, y0, t_end, sample_dt, err_norm)
    x = states[:, :N * n].reshape(-1, N, n)
    c = states[:, N * n:]
    e = x - c[:, None, :]
    return SimulationTrace(
        times=times,
        error_norms=_row_norms(e.reshape(len(times), -1)),
        errors=e,
        node_states=x,
        reference=c,
        overflowed=overflowed,
    )


def empirical_rate(trace, window=0.5, min_samples=10):
    """Least-squares slope of ``ln ||e(t)||`` against ``t`` over the last ``window`` of samples."""
    t = np.asarray(trace.times, dtype=float)
    y = np.asarray(trace.error_norms, dtype=float)
    start = int(math.floor(t.size * (1.0 - window)))
    t, y = t[start:], y[start:]
    if t.size < min_samples:
        raise InsufficientDataError(f"need at least {min_samples} samples in the fit window, got {t.size}")
    if np.any(y <= 0):
        raise DegenerateTraceError("error norm vanishes inside the fit window")
    slope, _ = np.polyfit(t, np.log(y), 1)
    return float(slope)
