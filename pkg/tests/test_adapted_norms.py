import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from discstab.adapted_norms import (
    SequenceWindow, adapted_norm, admissible_scan, growth_table, is_uniformly_bounded,
    membership_c00alpha, window_alpha_norm,
)
from discstab.dynamics import (
    DomainError, build_cache, example1_family, example2_family, geometric_family,
    identity_family, matrix_family,
)
from discstab.oracles import brute_force_sup

from conftest import E1


def test_adapted_norm_identity_and_geometric():
    ci = build_cache(identity_family(3), 16)
    x = np.array([1.0, -4.0, 2.0])
    assert adapted_norm(growth_table(ci, 0.0), 5, x).value == pytest.approx(4.0)
    cg = build_cache(geometric_family(E1), 16)
    assert adapted_norm(growth_table(cg, 0.0), 3, [1.0]).value == 1.0


def test_adapted_norm_example1_odd_index():
    c = build_cache(example1_family(), 64)
    ctx = growth_table(c, -1 / 3)
    assert adapted_norm(ctx, 1, [1.0]).value == pytest.approx(math.exp(2 / 3), rel=1e-12)
    assert adapted_norm(ctx, 1, [1.0]).value == pytest.approx(1.9477, abs=1e-4)


def test_zero_vector_is_exactly_zero():
    c = build_cache(example1_family(), 16)
    assert adapted_norm(growth_table(c, 0.0), 3, [0.0]).value == 0.0


def test_dimension_mismatch():
    c = build_cache(identity_family(2), 4)
    with pytest.raises(DomainError):
        adapted_norm(growth_table(c, 0.0), 1, [1.0, 2.0, 3.0])
    with pytest.raises(DomainError):
        window_alpha_norm(growth_table(c, 0.0), SequenceWindow.zeros(4, 3))


def test_growth_tables():
    assert np.all(growth_table(build_cache(identity_family(), 32), 0.0).log_M == 0.0)
    gm = growth_table(build_cache(geometric_family(E1), 32), -1.0)
    assert np.max(np.abs(gm.log_M)) <= 1e-14
    N = 64
    e1 = growth_table(build_cache(example1_family(), N), -1 / 3)
    n = np.arange(N)
    expect = np.where(n % 2 == 1, 2 * n / 3, 0.0)
    assert np.max(np.abs(e1.log_M[:N] - expect)) <= 1e-12


def test_margin_certifies_tail_for_closed_forms():
    ctx = growth_table(build_cache(geometric_family(E1), 64), 0.0, margin_exponent=-0.5)
    assert set(ctx.tail_status) == {"certified"}
    h = growth_table(build_cache(matrix_family([[[0.5]]]), 8), 0.0)
    assert set(h.tail_status) == {"heuristic"}
    with pytest.raises(DomainError):
        growth_table(build_cache(geometric_family(E1), 8), 0.0, margin_exponent=0.1)


def test_scan_verdicts_example1():
    recs = admissible_scan(build_cache(example1_family(), 512), [-0.5, -1 / 3, 0.0])
    assert [r.verdict for r in recs] == ["not-admissible", "nonuniform-admissible", "nonuniform-admissible"]
    assert recs[1].slope == pytest.approx(2 / 3, abs=1e-3)
    assert recs[1].trend == "growing"


def test_scan_verdicts_example2():
    recs = admissible_scan(build_cache(example2_family(), 512), [-0.5, 0.0])
    assert not recs[0].uniform and recs[0].admissible
    assert recs[1].uniform and recs[1].trend == "bounded"


def test_is_uniformly_bounded():
    assert is_uniformly_bounded(growth_table(build_cache(identity_family(), 64), 0.0)) == (True, 1.0)
    N = 64
    u, sup_M = is_uniformly_bounded(growth_table(build_cache(example1_family(), N), -1 / 3))
    assert not u
    assert sup_M == pytest.approx(math.exp(2 * 63 / 3), rel=1e-12)
    assert not is_uniformly_bounded(growth_table(build_cache(example2_family(), 512), -0.5))[0]


def test_window_alpha_norm_examples():
    N = 16
    ci = growth_table(build_cache(identity_family(), N), 0.0)
    assert window_alpha_norm(ci, SequenceWindow.zeros(N)) == 0.0
    assert window_alpha_norm(ci, SequenceWindow(1.0 / (np.arange(N + 1) + 1.0))) == 1.0
    ce = growth_table(build_cache(example1_family(), N), -1 / 3)
    assert window_alpha_norm(ce, SequenceWindow.spike(N, 1, [1.0])) == pytest.approx(math.exp(2 / 3))


def test_membership():
    N = 64
    ctx = growth_table(build_cache(geometric_family(E1), N), 0.0)
    assert membership_c00alpha(ctx, SequenceWindow.zeros(N)) == "yes"
    assert membership_c00alpha(ctx, SequenceWindow.spike(N, 0, [1.0])) == "no"
    grow = SequenceWindow(np.ones(N + 1), np.arange(N + 1, dtype=float))
    grow.values[0] = 0.0
    assert membership_c00alpha(ctx, grow) == "no"
    flat = SequenceWindow(np.r_[0.0, np.ones(N)])
    assert membership_c00alpha(ctx, flat) == "inconclusive"


families = st.sampled_from([
    lambda: geometric_family(0.8), lambda: example1_family(), lambda: example2_family(),
    lambda: matrix_family([[[0.9, 0.3], [-0.2, 1.1]], [[0.5, 0.0], [0.4, 0.7]]]),
    lambda: identity_family(3),
])


@given(families, st.integers(2, 64), st.floats(-0.4, 1.0), st.data())
def test_sandwich_and_monotonicity(make, N, alpha, data):
    c = build_cache(make(), N)
    ctx = growth_table(c, alpha)
    ctx2 = growth_table(c, alpha + 0.25)
    n = data.draw(st.integers(0, N))
    x = np.array(data.draw(st.lists(st.floats(-5, 5), min_size=c.dimension, max_size=c.dimension)))
    nx = float(np.max(np.abs(x)))
    v = adapted_norm(ctx, n, x)
    assert nx <= v.value * (1 + 1e-10) + 1e-300
    if nx:
        assert v.log_value <= ctx.log_M[n] + math.log(nx) + 1e-10 * (1 + abs(ctx.log_M[n]))
    else:
        assert v.value == 0.0
    assert adapted_norm(ctx2, n, x).log_value <= v.log_value + 1e-12
    assert np.all(ctx.log_M >= -1e-12)
    assert np.all(ctx2.log_M <= ctx.log_M + 1e-12)


@given(families, st.integers(2, 48), st.floats(-0.3, 0.5), st.floats(-3, 3), st.data())
def test_norm_axioms(make, N, alpha, lam, data):
    c = build_cache(make(), N)
    ctx = growth_table(c, alpha)
    d = c.dimension
    n = data.draw(st.integers(0, N))
    vec = st.lists(st.floats(-5, 5), min_size=d, max_size=d).map(np.array)
    x, y = data.draw(vec), data.draw(vec)
    nx, ny = adapted_norm(ctx, n, x).value, adapted_norm(ctx, n, y).value
    assert adapted_norm(ctx, n, lam * x).value == pytest.approx(abs(lam) * nx, rel=1e-10, abs=1e-300)
    assert adapted_norm(ctx, n, x + y).value <= (nx + ny) * (1 + 1e-10) + 1e-300


@given(families, st.integers(1, 48), st.floats(-0.3, 0.5), st.data())
def test_brute_force_sup_agrees(make, N, alpha, data):
    c = build_cache(make(), N)
    ctx = growth_table(c, alpha)
    n = data.draw(st.integers(0, N))
    x = np.array(data.draw(st.lists(st.floats(-5, 5).filter(lambda t: t != 0),
                                    min_size=c.dimension, max_size=c.dimension)))
    got = adapted_norm(ctx, n, x).log_value
    ref = brute_force_sup(c, n, alpha, x)
    if c.is_diagonal and c.dimension == 1:
        assert got == ref
    else:
        assert got == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_brute_force_sup_bit_exact_scalar_100_probes(rng):
    for fam in (example1_family(), example2_family(), geometric_family(E1)):
        c = build_cache(fam, 128)
        ctx = growth_table(c, -0.2)
        for _ in range(100):
            n = int(rng.integers(0, 129))
            x = rng.standard_normal(1)
            assert adapted_norm(ctx, n, x).log_value == brute_force_sup(c, n, -0.2, x)


def test_example1_norm_comparison():
    c = build_cache(example1_family(), 128)
    base = growth_table(c, -1 / 3)
    for a in (0.0, 0.5, 1.0):
        ctx = growth_table(c, a)
        for n in range(128):
            r = adapted_norm(base, n, [1.0]).log_value - adapted_norm(ctx, n, [1.0]).log_value
            assert r <= a + 1 / 3 + 1e-12
