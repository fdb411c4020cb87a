import math

import numpy as np
import pytest

from fbdiv.analytic import (
    DomainError,
    bopt_bruteforce,
    bopt_stationary,
    db_to_linear,
    diversity_term,
    loss_term,
    objective,
    objective_derivative,
    rate_approx,
    rows_to_csv,
    scaling_study,
    stationarity_lhs,
)

GRID_M = (2, 4, 6, 8)
GRID_P_DB = (0.0, 10.0, 20.0)
GRID_T = (100, 300, 1000, 5000)


def test_rate_approx_reference_point():
    # M=4, P=10, T=1000, B=25 evaluated by hand: 14.9356 - 0.2334
    assert rate_approx(10.0, 4, 1000, 25) == pytest.approx(14.702, abs=0.005)


def test_rate_decomposition():
    r = rate_approx(10.0, 4, 1000, 25)
    assert r == pytest.approx(diversity_term(10.0, 4, 1000, 25) - loss_term(10.0, 4, 1000, 25), abs=1e-12)


def test_loss_vanishes_with_fixed_user_count():
    # T/B fixed at 8 users, B growing
    losses = [loss_term(10.0, 4, 8 * B, B) for B in (10, 20, 40, 80, 160)]
    assert all(a > b for a, b in zip(losses, losses[1:]))
    assert losses[-1] < 1e-12
    limit = 4 * math.log2(10.0 / 4 * 3)
    assert rate_approx(10.0, 4, 8 * 160, 160) == pytest.approx(limit, abs=1e-9)


def test_objective_identity():
    for M in GRID_M:
        for p_db in (10.0, 20.0):
            P = db_to_linear(p_db)
            for T in GRID_T:
                for B in np.linspace(1 + math.log2(M), T / M, 7):
                    try:
                        r = rate_approx(P, M, T, B)
                    except DomainError:
                        continue
                    assert abs(objective(P, M, T, B) - (r / M - math.log2(P / M))) < 1e-12


@pytest.mark.parametrize("args", [(10.0, 4, 100, 100), (10.0, 4, 100, 200), (1.0, 8, 100, 50), (10.0, 1, 100, 5)])
def test_domain_errors(args):
    with pytest.raises(DomainError):
        rate_approx(*args)


def test_derivative_matches_finite_differences():
    h = 1e-5
    for P, M, T in [(10.0, 4, 1000), (100.0, 6, 300), (1.0, 2, 5000)]:
        for B in np.linspace(1 + math.log2(M) + 0.5, T / M - 0.5, 9):
            fd = (objective(P, M, T, B + h) - objective(P, M, T, B - h)) / (2 * h)
            assert objective_derivative(P, M, T, B) == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_bruteforce_t1000():
    # objective is flat between 24 and 25
    assert objective(10.0, 4, 1000, 24) == pytest.approx(2.3540, abs=1e-4)
    assert objective(10.0, 4, 1000, 25) == pytest.approx(2.3537, abs=1e-4)
    assert bopt_bruteforce(10.0, 4, 1000) in (24, 25)


def test_bruteforce_t150():
    assert abs(bopt_bruteforce(10.0, 4, 150) - 18) <= 1


def test_bruteforce_single_point_range():
    assert bopt_bruteforce(10.0, 4, 12) == 3
    st = bopt_stationary(10.0, 4, 12)
    assert st.b == 3 and st.boundary


def test_bruteforce_empty_range():
    with pytest.raises(DomainError):
        bopt_bruteforce(10.0, 4, 8)


def test_bruteforce_matches_dense_scan():
    for P, M, T in [(10.0, 4, 1000), (100.0, 6, 2000), (1.0, 2, 300)]:
        bs = range(math.ceil(1 + math.log2(M)), T // M + 1)
        vals = [objective(P, M, T, b) for b in bs]
        assert bopt_bruteforce(P, M, T) == list(bs)[int(np.argmax(vals))]


def test_stationary_reference_points():
    b1000 = bopt_stationary(10.0, 4, 1000)
    assert not b1000.boundary
    assert abs(b1000.b - bopt_bruteforce(10.0, 4, 1000)) <= 1.5
    assert 18.0 <= bopt_stationary(10.0, 4, 150).b <= 19.0


def test_stationary_root_is_flat():
    for P, M, T in [(10.0, 4, 1000), (10.0, 4, 150), (100.0, 6, 5000)]:
        st = bopt_stationary(P, M, T)
        assert not st.boundary
        assert abs(objective_derivative(P, M, T, st.b)) < 1e-6


def test_stationary_boundary_flag():
    # at very low SNR the interference term never dominates: more users always help
    st = bopt_stationary(1e-3, 2, 100)
    assert st.boundary and st.b == 2.0


def test_stationary_shift_with_snr():
    shift = bopt_stationary(100.0, 4, 1000).b - bopt_stationary(10.0, 4, 1000).b
    assert shift == pytest.approx(3 * math.log2(10), abs=1.5)


def test_small_interference_condition_near_one():
    for P, M, T in [(10.0, 4, 1000), (100.0, 4, 1000), (100.0, 6, 5000)]:
        st = bopt_stationary(P, M, T)
        assert 0.7 < stationarity_lhs(P, M, T, st.b) < 1.5


def test_bhat_nondecreasing_in_T():
    Ts = [100, 200, 500, 1000, 2000, 5000, 10_000, 100_000]
    b = [bopt_stationary(10.0, 4, T).b for T in Ts]
    assert all(x <= y + 1e-9 for x, y in zip(b, b[1:]))
    assert bopt_stationary(10.0, 4, 10_000).b - bopt_stationary(10.0, 4, 1000).b <= 5


@pytest.mark.parametrize("M", [4, 6])
def test_bhat_slope_in_log_snr(M):
    p_db = np.arange(0.0, 30.1, 2.5)
    b = [bopt_stationary(db_to_linear(p), M, 1000).b for p in p_db]
    slope = np.polyfit(p_db / (10 * math.log10(2)), b, 1)[0]
    assert 0.7 * (M - 1) <= slope <= 1.3 * (M - 1)


def test_grid_consistency():
    for M in GRID_M:
        for p_db in GRID_P_DB:
            P = db_to_linear(p_db)
            for T in GRID_T:
                assert abs(bopt_bruteforce(P, M, T) - round(bopt_stationary(P, M, T).b)) <= 2


def test_scaling_study_rows_and_csv():
    rows = scaling_study([10.0], [4], [150, 1000])
    assert [r["T"] for r in rows] == [150, 1000]
    assert rows[1]["B_brute"] == bopt_bruteforce(10.0, 4, 1000)
    text = rows_to_csv(rows)
    assert text.splitlines()[0] == "M,P_dB,T,B_hat,B_brute,objective_value"
    assert len(text.splitlines()) == 3
