import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from discstab.adapted_norms import SequenceWindow, growth_table
from discstab.dynamics import (
    build_cache, example1_family, example2_family, geometric_family, identity_family, matrix_family,
)
from discstab.evolution_operators import (
    PreconditionError, T_norm, apply_G, apply_T, inverse_norm_bounds, residual, sigma_ap_gap,
    solve_G, spectral_radius_estimate,
)
from discstab.oracles import brute_force_solve_G

from conftest import E1

C0 = 1.0 / (1.0 - E1)


def test_apply_T_examples():
    N = 6
    ci = build_cache(identity_family(), N)
    assert np.array_equal(apply_T(ci, SequenceWindow.zeros(N)).dense(), np.zeros((N + 1, 1)))
    u = SequenceWindow(np.arange(1.0, N + 2))
    assert np.allclose(apply_T(ci, u).dense()[:, 0], np.r_[0.0, np.arange(1.0, N + 1)])
    cg = build_cache(geometric_family(E1), N)
    out = apply_T(cg, SequenceWindow.spike(N, 0, [1.0])).dense()[:, 0]
    assert out[1] == pytest.approx(E1) and np.count_nonzero(out) == 1


def test_apply_G_examples():
    N = 6
    ci = build_cache(identity_family(), N)
    out = apply_G(ci, SequenceWindow(np.full(N + 1, 2.5))).dense()[:, 0]
    assert np.allclose(out, np.r_[-2.5, np.zeros(N)])
    cg = build_cache(geometric_family(E1), N)
    out = apply_G(cg, SequenceWindow.spike(N, 1, [1.0])).dense()[:, 0]
    assert np.allclose(out, [0, -1, E1, 0, 0, 0, 0])


def test_solve_G_examples():
    N = 10
    cg = build_cache(geometric_family(E1), N)
    assert not np.any(solve_G(cg, SequenceWindow.zeros(N)).values)
    u = solve_G(cg, SequenceWindow(np.r_[0.0, np.ones(N)])).dense()[:, 0]
    assert u[3] == pytest.approx((1 - math.exp(-3)) / (1 - E1), rel=1e-14)
    assert u[3] == pytest.approx(1 + E1 + E1 ** 2, rel=1e-14)
    ce = build_cache(example1_family(), N)
    u = solve_G(ce, SequenceWindow.spike(N, 1, [2.0])).dense()[:, 0]
    assert u[0] == 0.0
    assert np.allclose(u[1:], [2.0 * ce.operator_norm(m, 1) for m in range(1, N + 1)], rtol=1e-13)
    with pytest.raises(PreconditionError):
        solve_G(cg, SequenceWindow.spike(N, 0, [1.0]))
    with pytest.raises(PreconditionError):
        brute_force_solve_G(cg, SequenceWindow.spike(N, 0, [1.0]))


def test_T_norm_examples():
    assert T_norm(growth_table(build_cache(identity_family(), 64), 0.0)) == pytest.approx(1.0)
    assert T_norm(growth_table(build_cache(geometric_family(E1), 64), 0.0)) == pytest.approx(E1, rel=1e-12)


def test_spectral_radius():
    r, seq = spectral_radius_estimate(growth_table(build_cache(geometric_family(E1), 128), 0.0))
    assert r == pytest.approx(E1, abs=1e-6)
    assert all(b <= a for a, b in zip(seq, seq[1:]))
    assert spectral_radius_estimate(growth_table(build_cache(identity_family(), 64), 0.0))[0] == pytest.approx(1.0)
    r1, _ = spectral_radius_estimate(growth_table(build_cache(example1_family(), 256), -1 / 3), 12)
    assert r1 < 1.0


def test_inverse_bounds_geometric_and_identity():
    b = inverse_norm_bounds(growth_table(build_cache(geometric_family(E1), 512), 0.0))
    assert b.upper == pytest.approx(C0, abs=1e-6)
    assert b.lower == pytest.approx(b.upper, rel=1e-8)
    bi = inverse_norm_bounds(growth_table(build_cache(identity_family(), 256), 0.0))
    assert math.isinf(bi.upper)
    assert bi.row_sum_slope == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("fam,alpha", [(example1_family(), 0.2), (example2_family(), -0.5),
                                       (geometric_family(0.5), 0.2)])
def test_inverse_bounds_scalar_two_sided(fam, alpha):
    b = inverse_norm_bounds(growth_table(build_cache(fam, 256), alpha))
    assert b.finite
    assert b.lower <= b.upper * (1 + 1e-12)
    assert b.lower == pytest.approx(b.upper, rel=1e-8)


def test_inverse_bounds_matrix_is_upper():
    fam = matrix_family([[[0.5, 0.2], [0.1, 0.3]], [[0.2, -0.4], [0.3, 0.6]]])
    b = inverse_norm_bounds(growth_table(build_cache(fam, 64), 0.0))
    assert b.finite and b.lower <= b.upper * (1 + 1e-12)


def test_sigma_ap_gap():
    g = sigma_ap_gap(growth_table(build_cache(geometric_family(E1), 256), 0.0))
    assert g.theta_hat <= C0 * (1 + 1e-9)
    assert g.theta_hat == pytest.approx(C0, rel=1e-6)
    gi = [sigma_ap_gap(growth_table(build_cache(identity_family(), N), 0.0)).theta_hat for N in (32, 128)]
    assert gi[1] > 3 * gi[0]


def test_injectivity_on_window():
    c = build_cache(example1_family(), 16)
    u = SequenceWindow.zeros(16)
    assert not np.any(apply_G(c, u).values)
    v = SequenceWindow(np.r_[0.0, np.ones(16)])
    assert np.max(np.abs(solve_G(c, apply_G(c, v)).dense() + v.dense())) <= 1e-10


instances = st.tuples(st.integers(1, 4), st.integers(1, 64), st.integers(1, 4), st.integers(0, 2 ** 32 - 1))


@given(instances)
def test_round_trip_and_oracle(inst):
    d, N, L, seed = inst
    rng = np.random.default_rng(seed)
    c = build_cache(matrix_family(rng.standard_normal((L, d, d)) * 0.6), N)
    vals = rng.standard_normal((N + 1, d))
    vals[0] = 0.0
    v = SequenceWindow(vals)
    u = solve_G(c, v)
    assert residual(c, u, v) <= 1e-10
    ref = brute_force_solve_G(c, v).dense()
    got = u.dense()
    assert np.max(np.abs(got - ref)) <= 1e-10 * max(1.0, float(np.max(np.abs(ref))))


@given(st.integers(1, 3), st.integers(2, 40), st.floats(-0.5, 1.0), st.integers(0, 1000))
def test_T_norm_bound(d, N, alpha, seed):
    rng = np.random.default_rng(seed)
    c = build_cache(matrix_family(rng.standard_normal((3, d, d))), N)
    ctx = growth_table(c, alpha)
    assert T_norm(ctx, 4, seed) <= math.exp(alpha) + 1e-9
