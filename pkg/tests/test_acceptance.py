"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""
import math
import os
import sys
import tempfile

import numpy as np
import pytest

from discstab.adapted_norms import (
    SequenceWindow, fit_slope, growth_profile, growth_table, membership_c00alpha,
)
from discstab.certificates import (
    certify_bounded_orbit, certify_stability, space_equivalence_evidence, verify_bounded_orbit,
    verify_certificate, verify_step_chain,
)
from discstab.cli import main as cli_main
from discstab.dynamics import (
    build_cache, example1_family, example2_family, geometric_family, identity_family, matrix_family,
)
from discstab.evolution_operators import T_norm, apply_G, inverse_norm_bounds, residual, solve_G
from discstab.examples import (
    Ex2Geometry, ex1_f, ex1_f_sup, ex2_chi, ex2_E, ex2_lambda, ex2_n0, ex2_phi, ex2_psi, ex2_witness,
)
from discstab.oracles import brute_force_solve_G, convolution_limit, faulhaber_lower_bound

E1 = math.exp(-1.0)
C0 = 1.0 / (1.0 - E1)


def _report(num, ok, detail, capsys=None):
    line = f"{'PASS' if ok else 'FAIL'} criterion {num}: {detail}"
    if capsys is not None:
        with capsys.disabled():
            print("\n" + line)
    else:
        print(line)


def criterion_1():
    rng = np.random.default_rng(2024)
    worst_rt = worst_bf = worst_abs = 0.0
    for _ in range(200):
        d, N, L = int(rng.integers(1, 5)), int(rng.integers(1, 65)), int(rng.integers(1, 5))
        cache = build_cache(matrix_family(rng.standard_normal((L, d, d)) * 0.7), N)
        vals = rng.standard_normal((N + 1, d))
        vals[0] = 0.0
        v = SequenceWindow(vals)
        u = solve_G(cache, v)
        vd = v.dense()
        scale = max(1.0, float(np.max(np.abs(vd))))
        worst_rt = max(worst_rt, residual(cache, u, v))
        worst_abs = max(worst_abs, float(np.max(np.abs(apply_G(cache, u).dense() + vd))) / scale)
        ref = brute_force_solve_G(cache, v).dense()
        worst_bf = max(worst_bf, float(np.max(np.abs(u.dense() - ref))) / max(1.0, float(np.max(np.abs(ref)))))
    ok = worst_rt <= 1e-10 and worst_bf <= 1e-10
    return ok, (f"round trip {worst_rt:.3g} relative to operand scale (|Gu + v| / |v| alone: {worst_abs:.3g}), "
                f"oracle {worst_bf:.3g} (tol 1e-10, 200 instances)")


def criterion_2():
    contexts = [
        (example1_family(), [-0.5, -1 / 3, 0.0]),
        (example2_family(), [-0.5, 0.0]),
        (identity_family(), [0.0]),
        (geometric_family(E1), [0.0, -1.0]),
        (matrix_family([[[0.9, 0.4], [-0.3, 1.2]], [[0.5, 0.0], [0.7, 0.2]]]), [-0.2, 0.0, 0.5]),
    ]
    worst = -math.inf
    for fam, grid in contexts:
        cache = build_cache(fam, 256)
        for a in grid:
            worst = max(worst, T_norm(growth_table(cache, a), 16) - math.exp(a))
    return worst <= 1e-9, f"max ||T_alpha|| - e^alpha = {worst:.3g} (tol 1e-9)"


def criterion_3():
    cache = build_cache(geometric_family(E1), 512)
    ctx = growth_table(cache, 0.0)
    b = inverse_norm_bounds(ctx)
    cert = certify_stability(ctx, b)
    ratio, _ = verify_certificate(cert, cache)
    chain = verify_step_chain(ctx, b, 12)
    ok = (abs(b.upper - C0) <= 1e-6 and abs(cert.nu - (1 - E1) / 2) <= 1e-6
          and abs(ratio - 0.5) <= 1e-6 and max(chain) <= 1 + 1e-9)
    return ok, (f"c0 {b.upper:.12f}, nu {cert.nu:.12f}, ratio {ratio:.12f}, "
                f"max step-chain ratio {max(chain):.12f}")


def criterion_4():
    ctx = growth_table(build_cache(identity_family(), 512), 0.0)
    b = inverse_norm_bounds(ctx)
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "r.jsonl")
        code = cli_main(["certify", "--family", "identity", "--alpha", "0", "-o", out])
        with open(out) as fh:
            text = fh.read()
    ok = (math.isinf(b.upper) and abs(b.row_sum_slope - 1.0) <= 1e-6 and code == 2
          and "not certifiable" in text)
    return ok, f"upper {b.upper}, row-sum slope {b.row_sum_slope:.9f}, certify exit {code}"


def criterion_5():
    cache = build_cache(geometric_family(E1), 512)
    ctx = growth_table(cache, 0.0)
    worst, peak_ok = 0.0, True
    for n in (0, 7, 100, 400):
        oc = certify_bounded_orbit(ctx, n, [1.0], C0, 0.5)
        ver = verify_bounded_orbit(oc, cache, 5)
        worst = max(worst, ver["sup_decay"], ver["growth_decay"], ver["exponential"], max(ver["factorial"]))
        peak_ok = peak_ok and oc.m0 - n <= C0
    return worst <= 1 + 1e-9 and peak_ok, f"max orbit ratio {worst:.12f}, m0 - n <= theta: {peak_ok}"


def criterion_6():
    N = 512
    cache = build_cache(example1_family(), N)
    ms = np.arange(N + 1)
    ns = np.arange(N)
    brute = np.array([np.max(ex1_f(ms[n:], n)) for n in ns])
    table_ok = bool(np.array_equal(brute, ex1_f_sup(ns)))
    base = growth_table(cache, -1 / 3)
    ratio_ok = True
    ratios = []
    for a in (0.0, 1.0):
        ev = space_equivalence_evidence(growth_table(cache, a), base, 1000)
        ratios.append(ev.ratio_bound)
        ratio_ok = ratio_ok and ev.ratio_bound <= math.exp(a + 1 / 3) * (1 + 1e-9)
    prof = growth_profile(growth_table(cache, -1 / 3 - 0.1), 0)
    ks = np.arange(N // 2 + 1)
    slope = fit_slope(prof[2 * ks], ks.astype(float))
    ok = table_ok and ratio_ok and abs(slope - 0.2) <= 0.01
    return ok, f"f_n table exact {table_ok}, ratios {ratios[0]:.9f}/{ratios[1]:.9f}, even slope {slope:.6f}"


def criterion_7():
    alpha, beta = -0.5, -0.2
    geo = Ex2Geometry(alpha)
    th, ze = geo.theta, Ex2Geometry(beta).theta
    ns = np.arange(51)
    ident = float(np.max(np.abs(ex2_E(geo.t_dprime(ns), geo.s(ns), alpha)
                                - (4 * ns * math.pi * ex2_phi(th) + ex2_psi(th)))))
    n0 = ex2_n0(alpha)
    r = np.arange(n0, 41)
    top = ex2_E(geo.t_dprime(r), geo.s(r), alpha)
    d1 = top - ex2_E(geo.q(r).astype(float), geo.p(r).astype(float), alpha)
    d2 = top - np.array([ex2_chi(alpha, int(p)) for p in geo.p(r)])
    rl = np.arange(max(n0, ex2_n0(beta)), 41)
    lam = np.array([ex2_lambda(int(n), alpha, beta) for n in rl])
    g = 4 * rl * math.pi * (ex2_phi(th) - ex2_phi(ze)) + (ex2_psi(th) - ex2_psi(ze))
    gap = float(np.max(np.abs(g - lam)))
    N = 8192
    cache = build_cache(example2_family(), N)
    w = ex2_witness(alpha, beta, N)
    mb = membership_c00alpha(growth_table(cache, beta), w)
    ma = membership_c00alpha(growth_table(cache, alpha), w)
    ok = (ident <= 1e-9 and d1.min() >= 0 and d1.max() <= 4 and d2.min() >= 0 and d2.max() <= 4
          and gap <= 8 and (mb, ma) == ("yes", "no"))
    return ok, (f"identity {ident:.3g}, sandwiches [{d1.min():.4f}, {d1.max():.4f}] and "
                f"[{d2.min():.4f}, {d2.max():.4f}], |g - lambda| {gap:.4f}, witness beta {mb} / alpha {ma}")


def criterion_8():
    faul = all(faulhaber_lower_bound(n, p)["holds"] for n in range(1, 101) for p in range(11))
    a = lambda k: 2.0 ** -k
    b = lambda k: 1.0 / (k + 1)
    x200 = convolution_limit(a, b, 200)[200]
    x400 = convolution_limit(a, b, 400)[400]
    q = x200 / x400
    ok = faul and x200 < 0.02 and 1.0 <= q <= 4.0
    return ok, f"Faulhaber all hold {faul}, x_200 {x200:.6f}, x_200 / x_400 {q:.6f}"


def criterion_9():
    runs = [
        ["analyze", "--family", "example1", "--alpha-grid=-0.5,-1/3,0", "--probes", "32"],
        ["analyze", "--family", "example2", "--alpha-grid=-0.5,0", "--seed", "7", "--probes", "32"],
        ["example", "ex1"],
        ["example", "ex2"],
    ]
    same = True
    with tempfile.TemporaryDirectory() as tmp:
        for i, argv in enumerate(runs):
            texts = []
            for j in range(2):
                out = os.path.join(tmp, f"{i}_{j}.jsonl")
                cli_main(argv + ["-o", out])
                with open(out, "rb") as fh:
                    texts.append(fh.read())
            same = same and texts[0] == texts[1] and len(texts[0]) > 0
    return same, f"byte-identical reports across repeated runs: {same}"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9]


@pytest.mark.parametrize("num", range(1, len(CRITERIA) + 1))
def test_criterion(num, capsys):
    ok, detail = CRITERIA[num - 1]()
    _report(num, ok, detail, capsys)
    assert ok, detail


if __name__ == "__main__":
    results = []
    for i, fn in enumerate(CRITERIA, 1):
        ok, detail = fn()
        _report(i, ok, detail)
        results.append(ok)
    sys.exit(0 if all(results) else 1)
