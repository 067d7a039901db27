import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asyncpilot.delays import equally_divided_schedule
from asyncpilot.model import (
    DelaySchedule,
    PilotKind,
    SystemConfig,
    build_A,
    build_pilots,
    build_R,
    build_R_NN,
    build_R_P,
    coupling_block,
    detect_duplicate_delays,
    overlap_coeffs,
    pilot_gram,
    pilot_rows,
    read_matrix_csv,
    shift_pilot,
    training_matrices,
    write_matrix_csv,
)


def brute_overlap(tau_a, tau_b, T=1.0, n=200001):
    """Numerically integrate a rectangular pulse at tau_a against windows of the
    sampler synced to tau_b: (same-symbol window, next-symbol window)."""
    t = np.linspace(-2 * T, 3 * T, n)
    dt = t[1] - t[0]
    pulse = ((t >= tau_a) & (t < tau_a + T)).astype(float)
    same = ((t >= tau_b) & (t < tau_b + T)).astype(float)
    nxt = ((t >= tau_b + T) & (t < tau_b + 2 * T)).astype(float)
    prev = ((t >= tau_b - T) & (t < tau_b)).astype(float)
    return (pulse * same).sum() * dt / T, (pulse * nxt).sum() * dt / T, (pulse * prev).sum() * dt / T


@st.composite
def schedules(draw, max_K=4, max_N=3, distinct=True):
    K = draw(st.integers(1, max_K))
    N = draw(st.integers(1, max_N))
    vals = draw(st.lists(st.floats(0.0, 1.0), min_size=K * N, max_size=K * N,
                         unique=distinct))
    if distinct and K * N > 1:
        s = np.sort(vals)
        if np.min(np.diff(s)) < 1e-3:
            vals = list(np.linspace(0, 1, K * N)[np.argsort(np.argsort(vals))])
    return DelaySchedule.from_flat(vals, K, N)


@pytest.mark.parametrize("args,expected", [
    ((0.2, 0.5, 1.0), (0.7, 0.3)),
    ((0.4, 0.4, 1.0), (1.0, 0.0)),
    ((0.0, 1.0, 1.0), (0.0, 1.0)),
])
def test_overlap_coeffs_examples(args, expected):
    assert overlap_coeffs(*args) == pytest.approx(expected, abs=1e-15)


def test_overlap_coeffs_domain():
    with pytest.raises(ValueError):
        overlap_coeffs(-0.1, 0.5)
    with pytest.raises(ValueError):
        overlap_coeffs(0.2, 1.5)
    with pytest.raises(ValueError):
        overlap_coeffs(0.2, 0.5, T=0.0)


@given(st.floats(0, 1), st.floats(0, 1))
def test_overlap_coeffs_sum_to_one(a, b):
    d, s = overlap_coeffs(a, b)
    assert d + s == pytest.approx(1.0)
    assert 0 <= d <= 1 and 0 <= s <= 1


def test_system_config_validation():
    for bad in (dict(K=0, N=1), dict(K=1, N=0), dict(K=1, N=1, M=0), dict(K=1, N=1, T=0.0),
                dict(K=1, N=1, gamma=-1.0), dict(K=1.5, N=1)):
        with pytest.raises(ValueError):
            SystemConfig(**bad)
    cfg = SystemConfig(K=3, N=2)
    assert cfg.L == 2 and cfg.NK == 6
    assert [cfg.ue(cfg.index(k, n)) for k in (1, 2, 3) for n in (1, 2)] == [
        (k, n) for k in (1, 2, 3) for n in (1, 2)]


def test_delay_schedule_validation_and_order():
    with pytest.raises(ValueError):
        DelaySchedule(np.array([[0.2, 1.2]]))
    with pytest.raises(ValueError):
        DelaySchedule(np.array([0.2, 0.3]))
    s = DelaySchedule(np.array([[0.5, 0.1], [0.5, 0.0]]))
    # ties at 0.5 between (1,1) and (2,1) broken by (n, k)
    assert s.order() == [(2, 2), (1, 2), (1, 1), (2, 1)]
    assert s[1, 2] == 0.1
    assert s == DelaySchedule.from_flat([0.5, 0.1, 0.5, 0.0], 2, 2)
    with pytest.raises(ValueError):
        s.tau[0, 0] = 0.3


def test_pilot_rows_examples():
    np.testing.assert_array_equal(pilot_rows(2, PilotKind.IDENTITY), np.eye(2))
    dft = pilot_rows(2, PilotKind.DFT)
    np.testing.assert_allclose(dft, np.array([[1, 1], [1, -1]]) / np.sqrt(2), atol=1e-15)


@pytest.mark.parametrize("N", [1, 2, 3, 5])
@pytest.mark.parametrize("kind", list(PilotKind))
def test_pilots_orthonormal(N, kind):
    P = pilot_rows(N, kind)
    np.testing.assert_allclose(P @ P.conj().T, np.eye(N), atol=1e-12)


def test_build_pilots_block_diagonal():
    pm = build_pilots(SystemConfig(K=2, N=2))
    assert pm.P.shape == (4, 8)
    expected = np.zeros((4, 8))
    for r, col in enumerate([0, 3, 4, 7]):
        expected[r, col] = 1.0
    np.testing.assert_array_equal(pm.P, expected)


def test_shift_pilot():
    p = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(shift_pilot(p, 1), [2.0, 3.0, 0.0])
    np.testing.assert_array_equal(shift_pilot(p, -1), [0.0, 1.0, 2.0])
    np.testing.assert_array_equal(shift_pilot(p, 0), p)


def test_coupling_block_example():
    np.testing.assert_allclose(coupling_block(0.0, 0.3, 2), [[0.7, 0.0], [0.3, 0.7]], atol=1e-15)
    np.testing.assert_allclose(coupling_block(0.3, 0.0, 2), [[0.7, 0.3], [0.0, 0.7]], atol=1e-15)
    np.testing.assert_array_equal(coupling_block(0.4, 0.4, 3), np.eye(3))


@pytest.mark.parametrize("ta,tb", [(0.0, 0.3), (0.3, 0.0), (0.25, 0.8), (0.9, 0.1)])
def test_coupling_block_matches_integration(ta, tb):
    same, nxt, prev = brute_overlap(ta, tb)
    B = coupling_block(ta, tb, 3)
    # symbol i of UE a lands in window i of sampler b and in window i+1 (a later) or i-1 (a earlier)
    assert B[1, 1] == pytest.approx(same, abs=1e-4)
    if ta > tb:
        assert B[1, 2] == pytest.approx(nxt, abs=1e-4)
        assert B[1, 0] == 0.0
    else:
        assert B[1, 0] == pytest.approx(prev, abs=1e-4)
        assert B[1, 2] == 0.0


def test_R_P_all_equal_has_identity_blocks():
    cfg = SystemConfig(K=3, N=2)
    R_P = build_R_P(DelaySchedule.synchronous(3, 2, value=0.4), cfg)
    np.testing.assert_array_equal(R_P, np.kron(np.ones((6, 6)), np.eye(2)))


def test_R_P_pattern_k2n2():
    # 0 = tau11 < tau12 < tau21 < tau22
    cfg = SystemConfig(K=2, N=2)
    s = DelaySchedule(np.array([[0.0, 0.2], [0.5, 0.9]]))
    R_P = build_R_P(s, cfg)
    assert R_P.shape == (8, 8)
    np.testing.assert_array_equal(np.diag(R_P), np.ones(8))
    # UE11 (earliest) seen by the sampler of UE21: direct 0.5, leaks into the previous window
    np.testing.assert_allclose(R_P[0:2, 4:6], [[0.5, 0.0], [0.5, 0.5]], atol=1e-15)
    # UE22 (latest) seen by the sampler of UE11: direct 0.1, leaks into the next window
    np.testing.assert_allclose(R_P[6:8, 0:2], [[0.1, 0.9], [0.0, 0.1]], atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(schedules(distinct=False), st.sampled_from(list(PilotKind)))
def test_R_factorization(sched, kind):
    cfg = SystemConfig(K=sched.K, N=sched.N, pilot_kind=kind)
    pm = build_pilots(cfg)
    R_P = build_R_P(sched, cfg)
    R = build_R(sched, pm, cfg)
    assert np.max(np.abs(R - pm.P @ R_P)) < 1e-12


@settings(max_examples=60, deadline=None)
@given(schedules(distinct=False))
def test_R_NN_equals_R_P(sched):
    cfg = SystemConfig(K=sched.K, N=sched.N)
    R_NN = build_R_NN(sched, cfg)
    assert np.max(np.abs(R_NN - build_R_P(sched, cfg))) < 1e-12
    lam = np.linalg.eigvalsh((R_NN + R_NN.T) / 2)
    assert lam[0] > -1e-12


def test_R_synchronous_stacks_pilots():
    cfg = SystemConfig(K=2, N=2)
    s = DelaySchedule.synchronous(2, 2)
    R = build_R(s, build_pilots(cfg), cfg)
    for t in range(4):
        np.testing.assert_array_equal(R[:, 2 * t:2 * t + 2], np.vstack([np.eye(2), np.eye(2)]))


def test_R_contamination_rows():
    cfg = SystemConfig(K=2, N=2)
    s = DelaySchedule(np.array([[0.2, 0.4], [0.2, 0.7]]))
    R = build_R(s, build_pilots(cfg), cfg)
    np.testing.assert_array_equal(R[0], R[2])
    assert np.linalg.matrix_rank(R) < 4


def test_build_A_examples():
    cfg = SystemConfig(K=2, N=1)
    tm = training_matrices(DelaySchedule(np.array([[0.0], [1.0]])), cfg)
    np.testing.assert_allclose(tm.A, np.eye(2), atol=1e-15)
    cfg3 = SystemConfig(K=3, N=1)
    tm3 = training_matrices(DelaySchedule(np.array([[0.0], [0.5], [1.0]])), cfg3)
    np.testing.assert_allclose(tm3.A, [[1, .5, 0], [.5, 1, .5], [0, .5, 1]], atol=1e-15)
    tm_sync = training_matrices(DelaySchedule.synchronous(2, 1), cfg)
    assert abs(np.linalg.det(tm_sync.A)) < 1e-15


@settings(max_examples=60, deadline=None)
@given(schedules(), st.sampled_from(list(PilotKind)))
def test_A_hermitian_unit_diag_pd(sched, kind):
    # open interval: no pair of UEs a whole symbol apart
    sched = DelaySchedule(sched.tau * 0.999)
    cfg = SystemConfig(K=sched.K, N=sched.N, pilot_kind=kind)
    A = training_matrices(sched, cfg).A
    np.testing.assert_allclose(A, A.conj().T, atol=1e-14)
    np.testing.assert_allclose(np.diag(A), 1.0, atol=1e-12)
    assert np.linalg.eigvalsh(A)[0] > 0


def test_A_full_symbol_offset_aliases_pilots():
    # pilot 1 delayed by exactly T arrives as pilot 2 at the early sampler
    cfg = SystemConfig(K=1, N=2)
    A = training_matrices(DelaySchedule(np.array([[1.0, 0.0]])), cfg).A
    assert np.linalg.eigvalsh(A)[0] == pytest.approx(0.0, abs=1e-15)
    # the same offset in pilot order is harmless
    A = training_matrices(DelaySchedule(np.array([[0.0, 1.0]])), cfg).A
    np.testing.assert_allclose(A, np.eye(2), atol=1e-15)


def test_A_complex_for_dft():
    cfg = SystemConfig(K=2, N=3, pilot_kind="dft")
    A = training_matrices(DelaySchedule(np.array([[0.0, 0.1, 0.4], [0.45, 0.6, 0.95]])), cfg).A
    assert np.max(np.abs(A.imag)) > 1e-3


@settings(max_examples=40, deadline=None)
@given(schedules(distinct=False), st.sampled_from(list(PilotKind)))
def test_pilot_gram_matches_build_A(sched, kind):
    cfg = SystemConfig(K=sched.K, N=sched.N, pilot_kind=kind)
    pm = build_pilots(cfg)
    A = build_A(pm, build_R_P(sched, cfg))
    batched = pilot_gram(sched.flat()[None, :], pm.rows)[0]
    np.testing.assert_allclose(batched, A, atol=1e-13)


def test_training_matrices_shape_check():
    with pytest.raises(ValueError):
        training_matrices(DelaySchedule.synchronous(2, 2), SystemConfig(K=3, N=2))


def test_detect_duplicate_delays():
    assert detect_duplicate_delays(DelaySchedule(np.array([[0.1, 0.2], [0.3, 0.4]]))) == []
    assert len(detect_duplicate_delays(DelaySchedule.synchronous(2, 2))) == 6
    s = DelaySchedule(np.array([[0.2, 0.3], [0.2, 0.6]]))
    assert detect_duplicate_delays(s) == [((1, 1), (2, 1))]


def test_equally_divided_has_boundary_coincidences():
    # last UE of a group shares its delay with the first UE of the next group
    s = equally_divided_schedule(2, 2)
    assert detect_duplicate_delays(s) == [((1, 2), (2, 1))]


@pytest.mark.parametrize("kind", list(PilotKind))
def test_matrix_csv_round_trip(tmp_path, kind):
    cfg = SystemConfig(K=2, N=2, pilot_kind=kind)
    A = training_matrices(DelaySchedule(np.array([[0.0, 0.15], [0.55, 0.9]])), cfg).A
    path = tmp_path / "A.csv"
    write_matrix_csv(path, A)
    np.testing.assert_array_equal(read_matrix_csv(path), A)
