import math

import numpy as np
import pytest

from pinsync.analysis import (
    PinConfig,
    SystemSpec,
    _speed_report,
    average_matrix,
    average_speed,
    bound_constant,
    error_matrix,
    monodromy,
    phase_matrices,
    rank_nodes,
    solve_threshold,
    sync_speed,
    threshold_T0,
    threshold_gap,
)
from pinsync.errors import DimensionError, PreconditionError, ValidationError
from pinsync.linalg import mat_exp, max_real_part, spectral_norm
from pinsync.network import Edge, Phase, SwitchingSchedule, Topology, laplacian
from pinsync.scenario import random_scenario

from conftest import kron_loops, rk4_transition

SCALAR = SystemSpec([[0.0]], [[1.0]], 1.0)


def static(L, period=1.0):
    return SwitchingSchedule((Phase(Topology.from_adjacency(-(np.array(L) - np.diag(np.diag(L)))), 1.0),), period)


SYM = static([[1.0, -1.0], [-1.0, 1.0]])
ASYM = static([[2.0, -2.0], [-1.0, 1.0]])

# closed forms of the 2x2 matrices r L + W_i with w = 5
ASYM_SPEED_1 = -(4 - math.sqrt(11))   # [[7, -2], [-1, 1]]: trace 8, det 5
ASYM_SPEED_2 = -(4 - math.sqrt(6))    # [[2, -2], [-1, 6]]: trace 8, det 10


# ---------------------------------------------------------------- error matrix


def test_error_matrix_single_node():
    spec = SystemSpec([[0.3, 1.0], [-1.0, 0.2]], [[1.0, 0.5], [0.0, 2.0]], 1.0)
    D = error_matrix(spec, np.zeros((1, 1)), PinConfig.single(1, 4.0))
    assert np.allclose(D, spec.A - 4.0 * spec.Lambda, atol=0)


def test_error_matrix_identity_coupling():
    spec = SystemSpec(np.zeros((1, 1)), np.eye(1), 2.0)
    L = np.array([[1.0, -1.0, 0], [0, 2.0, -2.0], [-0.5, 0, 0.5]])
    D = error_matrix(spec, L, PinConfig.single(2, 3.0))
    assert np.array_equal(D, -(2.0 * L + np.diag([0, 3.0, 0])))


def test_error_matrix_matches_kron_expansion(rng):
    A = rng.standard_normal((2, 2))
    Lam = rng.standard_normal((2, 2))
    L = laplacian(Topology(2, (Edge(1, 2, 0.7), Edge(2, 1, 1.9))))
    spec = SystemSpec(A, Lam, 1.3)
    pins = PinConfig(((2, 4.5),))
    W = np.diag([0.0, 4.5])
    expected = kron_loops(np.eye(2), A) - kron_loops(1.3 * L + W, Lam)
    assert np.allclose(error_matrix(spec, L, pins), expected, rtol=0, atol=1e-14)


def test_error_matrix_dimension_errors():
    spec = SystemSpec(np.eye(2), np.eye(2), 1.0)
    with pytest.raises(DimensionError):
        error_matrix(spec, np.ones((2, 3)), PinConfig.single(1, 1.0))
    with pytest.raises(ValidationError):
        error_matrix(spec, np.zeros((2, 2)), PinConfig.single(3, 1.0))
    with pytest.raises(DimensionError):
        SystemSpec(np.eye(2), np.eye(3), 1.0)


def test_pinconfig_validation():
    with pytest.raises(ValidationError):
        PinConfig(((1, 1.0), (1, 2.0)))
    with pytest.raises(ValidationError):
        PinConfig.single(1, 0.0)
    with pytest.raises(ValidationError):
        PinConfig.single(0, 1.0)


# ---------------------------------------------------------------- monodromy


def test_monodromy_single_phase(rng):
    sc = random_scenario(rng, phases=1)
    pins = PinConfig.single(1, sc.gain)
    (D,) = phase_matrices(sc.spec, sc.schedule, pins)
    assert np.allclose(monodromy(sc.spec, sc.schedule, pins), mat_exp(D, sc.schedule.period), rtol=1e-13, atol=1e-15)


def test_monodromy_commuting_phases():
    spec = SystemSpec(np.diag([0.2, -0.1]), np.eye(2), 1.0)
    sched = SwitchingSchedule((Phase(Topology(1), 0.3), Phase(Topology(1), 0.7)), 2.0)
    pins = PinConfig.single(1, 1.5)
    D0, D1 = phase_matrices(spec, sched, pins)
    R = monodromy(spec, sched, pins)
    assert np.allclose(R, mat_exp(0.6 * D0 + 1.4 * D1), rtol=1e-13)


def test_monodromy_matches_fine_step_integration(rng):
    for _ in range(3):
        sc = random_scenario(rng, N=3, n=2, phases=2, period=1.0)
        pins = PinConfig.single(2, sc.gain)
        mats = phase_matrices(sc.spec, sc.schedule, pins)
        R = monodromy(sc.spec, sc.schedule, pins)
        oracle = rk4_transition(mats, sc.schedule.dwell_times, steps_per_phase=2000)
        assert np.max(np.abs(R - oracle)) <= 1e-8


def test_monodromy_ordering_latest_phase_leftmost(rng):
    sc = random_scenario(rng, N=3, n=1, phases=3)
    pins = PinConfig.single(1, sc.gain)
    mats = phase_matrices(sc.spec, sc.schedule, pins)
    E = [mat_exp(D, tau) for D, tau in zip(mats, sc.schedule.dwell_times)]
    assert np.allclose(monodromy(sc.spec, sc.schedule, pins), E[2] @ E[1] @ E[0], rtol=1e-13, atol=1e-15)


def test_splitting_phase_leaves_monodromy_unchanged(rng):
    for _ in range(5):
        sc = random_scenario(rng, phases=1)
        topo = sc.schedule.phases[0].topology
        split = SwitchingSchedule((Phase(topo, 0.5), Phase(topo, 0.5)), sc.schedule.period)
        pins = PinConfig.single(1, sc.gain)
        R1 = monodromy(sc.spec, sc.schedule, pins)
        R2 = monodromy(sc.spec, split, pins)
        assert np.linalg.norm(R1 - R2, 2) <= 1e-10 * max(1.0, np.linalg.norm(R1, 2))


def test_multi_node_pins_accepted():
    pins = PinConfig(((1, 5.0), (2, 5.0)))
    R = monodromy(SCALAR, ASYM, pins)
    # r L + 5 I has eigenvalues {5, 8}
    assert math.log(max(abs(np.linalg.eigvals(R)))) == pytest.approx(-5.0, abs=1e-12)


# ---------------------------------------------------------------- speeds


@pytest.mark.parametrize("a, w", [(0.5, 2.0), (3.0, 1.0), (-1.0, 0.5)])
def test_scalar_node_speed(a, w):
    spec = SystemSpec([[a]], [[1.0]], 1.0)
    sched = SwitchingSchedule((Phase(Topology(1), 0.4), Phase(Topology(1), 0.6)), 2.7)
    rep = sync_speed(spec, sched, 1, w)
    assert rep.speed == pytest.approx(a - w, abs=1e-12)
    assert rep.stable == (a < w)


def test_symmetric_pair_speed():
    rep = sync_speed(SCALAR, SYM, 1, 5.0)
    assert rep.speed == pytest.approx(-(7 - math.sqrt(29)) / 2, abs=1e-12)
    assert rep.speed == pytest.approx(-0.8074, abs=1e-4)
    assert rep.stable


def test_asymmetric_pair_speeds():
    assert sync_speed(SCALAR, ASYM, 1, 5.0).speed == pytest.approx(ASYM_SPEED_1, abs=1e-12)
    assert sync_speed(SCALAR, ASYM, 2, 5.0).speed == pytest.approx(ASYM_SPEED_2, abs=1e-12)


def test_speed_report_for_zero_radius():
    rep = _speed_report(3, 0.0, 2.0)
    assert rep.speed == -math.inf and rep.stable


def test_rank_symmetric_tie_breaks_by_index():
    reports = rank_nodes(SCALAR, SYM, 5.0)
    assert [r.node for r in reports] == [1, 2]
    assert reports[0].speed == pytest.approx(reports[1].speed, abs=1e-12)


def test_rank_asymmetric():
    reports = rank_nodes(SCALAR, ASYM, 5.0)
    assert [r.node for r in reports] == [2, 1]
    assert [r.speed for r in reports] == pytest.approx([ASYM_SPEED_2, ASYM_SPEED_1], abs=1e-12)


def test_rank_head_is_exhaustive_argmin(rng):
    for _ in range(5):
        sc = random_scenario(rng, N=4, phases=2)
        speeds = {i: sync_speed(sc.spec, sc.schedule, i, sc.gain).speed for i in range(1, 5)}
        best = min(speeds, key=lambda i: (speeds[i], i))
        reports = rank_nodes(sc.spec, sc.schedule, sc.gain)
        assert reports[0].node == best
        assert [r.speed for r in reports] == sorted(speeds.values())


def test_rank_concurrent_matches_sequential(rng):
    sc = random_scenario(rng, N=5)
    seq = rank_nodes(sc.spec, sc.schedule, sc.gain)
    par = rank_nodes(sc.spec, sc.schedule, sc.gain, workers=4)
    assert seq == par


def test_rank_candidates_subset(rng):
    sc = random_scenario(rng, N=4)
    assert {r.node for r in rank_nodes(sc.spec, sc.schedule, sc.gain, candidates=[2, 4])} == {2, 4}
    with pytest.raises(ValidationError):
        rank_nodes(sc.spec, sc.schedule, sc.gain, candidates=[5])


# ---------------------------------------------------------------- average system


def test_average_speed_scalar():
    spec = SystemSpec([[0.7]], [[1.0]], 1.0)
    sched = SwitchingSchedule((Phase(Topology(1), 0.5), Phase(Topology(1), 0.5)), 1.0)
    assert average_speed(spec, sched, 1, 2.0) == pytest.approx(0.7 - 2.0, abs=1e-14)


def test_average_speed_identity_coupling(rng):
    sc = random_scenario(rng, n=1, identity_coupling=True)
    spec = SystemSpec([[0.0]], [[1.0]], sc.spec.r)
    from pinsync.network import laplacian_set

    Lav = laplacian_set(sc.schedule).average
    M = spec.r * Lav + np.diag([sc.gain if k == 0 else 0.0 for k in range(sc.node_count)])
    expected = -min(np.linalg.eigvals(M).real)
    assert average_speed(spec, sc.schedule, 1, sc.gain) == pytest.approx(expected, abs=1e-10)


def test_identical_phases_average_equals_switched(rng):
    for _ in range(5):
        sc = random_scenario(rng, phases=1)
        topo = sc.schedule.phases[0].topology
        for T in (0.1, 1.0, 7.0):
            sched = SwitchingSchedule.equal_dwell([topo, topo, topo], T)
            i = int(rng.integers(1, sc.node_count + 1))
            b = sync_speed(sc.spec, sched, i, sc.gain).speed
            assert b == pytest.approx(average_speed(sc.spec, sched, i, sc.gain), abs=1e-9)


def test_average_limit_small_period(rng):
    for _ in range(5):
        sc = random_scenario(rng).with_period(1e-4)
        for i in range(1, sc.node_count + 1):
            b = sync_speed(sc.spec, sc.schedule, i, sc.gain).speed
            assert abs(b - average_speed(sc.spec, sc.schedule, i, sc.gain)) <= 1e-3


def test_operator_error_bound(rng):
    for _ in range(5):
        sc = random_scenario(rng)
        i = int(rng.integers(1, sc.node_count + 1))
        d = bound_constant(sc.spec, sc.schedule, i, sc.gain)
        Dbar = average_matrix(sc.spec, sc.schedule, i, sc.gain)
        for T in rng.uniform(0.01, 1.0, 5):
            sched = sc.schedule.with_period(T)
            R = monodromy(sc.spec, sched, PinConfig.single(i, sc.gain))
            lhs = spectral_norm(R - mat_exp(Dbar, T))
            assert lhs <= 2 * (math.exp(d * T) - 1 - d * T)


def test_bound_constant_is_phase_max(rng):
    sc = random_scenario(rng, phases=3)
    mats = phase_matrices(sc.spec, sc.schedule, PinConfig.single(2, sc.gain))
    assert bound_constant(sc.spec, sc.schedule, 2, sc.gain) == max(np.linalg.norm(D, 2) for D in mats)


# ---------------------------------------------------------------- independence of A


def test_speed_shift_by_system_matrix(rng):
    for _ in range(5):
        sc = random_scenario(rng, identity_coupling=True)
        zero = sc.spec.with_A(np.zeros_like(sc.spec.A))
        shift = max_real_part(sc.spec.A)
        for i in range(1, sc.node_count + 1):
            b = sync_speed(sc.spec, sc.schedule, i, sc.gain).speed
            b0 = sync_speed(zero, sc.schedule, i, sc.gain).speed
            assert abs(b - b0 - shift) <= 1e-8


# ---------------------------------------------------------------- threshold


def _oracle_T0(b, d, best, t_max=100.0, n_grid=400000):
    """Dense linear grid on the closed-form envelopes, then plain bisection."""
    def h(T):
        up = math.exp(b[best] * T) + 2 * (math.exp(d[best] * T) - 1 - d[best] * T)
        lo = min(math.exp(b[j] * T) - 2 * (math.exp(d[j] * T) - 1 - d[j] * T) for j in range(len(b)) if j != best)
        return lo - up

    # log-dense init step, since h > 0 only on a short interval near zero
    Ts = np.concatenate([np.geomspace(1e-12, 1e-3, n_grid // 2), np.linspace(1e-3, t_max, n_grid // 2)])
    prev = 0.0
    for T in Ts:
        if h(T) <= 0:
            lo, hi = prev, T
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if h(mid) > 0:
                    lo = mid
                else:
                    hi = mid
            return 0.5 * (lo + hi)
        prev = T
    return None


def test_threshold_static_pair_matches_oracle():
    rep = threshold_T0(SCALAR, ASYM, 5.0)
    assert rep.best_node == 2
    assert rep.avg_speeds == pytest.approx((ASYM_SPEED_1, ASYM_SPEED_2), abs=1e-12)
    d = [np.linalg.norm([[7.0, -2.0], [-1.0, 1.0]], 2), np.linalg.norm([[2.0, -2.0], [-1.0, 6.0]], 2)]
    assert rep.bound_constants == pytest.approx(d, rel=1e-12)
    oracle = _oracle_T0(list(rep.avg_speeds), d, 1)
    assert rep.T0 == pytest.approx(oracle, rel=1e-8)
    assert rep.residual <= 1e-8
    assert not rep.saturated


def test_solve_threshold_literal_speeds_matches_oracle():
    b, d = [-5.0, -1.55], [7.5, 6.7]
    T0, residual, saturated = solve_threshold(b, d, 0)
    assert T0 == pytest.approx(_oracle_T0(b, d, 0), rel=1e-8)
    assert residual <= 1e-8 and not saturated


def test_threshold_envelope_ordering_below_T0(rng):
    for _ in range(5):
        sc = random_scenario(rng)
        rep = threshold_T0(sc.spec, sc.schedule, sc.gain)
        k0 = rep.nodes.index(rep.best_node)
        others = [k for k in range(len(rep.nodes)) if k != k0]
        b, d = np.array(rep.avg_speeds), np.array(rep.bound_constants)
        Ts = rep.T0 * np.concatenate([np.geomspace(1e-6, 0.999, 60)])
        assert np.all(threshold_gap(b[k0], d[k0], b[others], d[others], Ts) > 0)


def test_threshold_decreases_as_bound_constants_grow():
    b = np.array([-2.0, -1.0, -0.5])
    d0 = np.array([3.0, 2.5, 4.0])
    T0s = [solve_threshold(b, c * d0, 0)[0] for c in (1, 2, 4, 8, 16)]
    assert all(x > y for x, y in zip(T0s, T0s[1:]))


def test_threshold_validity_of_ranking(rng):
    for _ in range(5):
        sc = random_scenario(rng, N=int(rng.integers(2, 5)))
        rep = threshold_T0(sc.spec, sc.schedule, sc.gain)
        for frac in (1e-3, 0.1, 0.5, 0.99):
            head = rank_nodes(sc.spec, sc.schedule.with_period(frac * rep.T0), sc.gain)[0]
            assert head.node == rep.best_node


def test_threshold_tie_is_precondition_error():
    with pytest.raises(PreconditionError):
        threshold_T0(SCALAR, SYM, 5.0)


def test_threshold_saturation_flag():
    b, d = [-2.0, -1.0], [1e-3, 1e-3]
    T0, _, saturated = solve_threshold(b, d, 0, t_max=1.0)
    assert saturated and T0 == 1.0
