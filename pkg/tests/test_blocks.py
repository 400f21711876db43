import math

import numpy as np
import pytest

from airybeta.blocks import (
    BlockFunction,
    BlockProcess,
    VirtualBlocks,
    BlockHeight,
    Blocks,
    validate_blocks,
    xi_partition,
    integrand,
    enumerate_strata,
    l_beta_truncated,
    epsilon_extrapolate,
)
from airybeta.bridges import gauss_F0, gauss_F00
from airybeta.errors import ValidationError


def reference_configuration():
    """Three-segment configuration with one extra block, two virtual offsets,
    five interior jumps; used as the validator fidelity fixture."""
    Q = (0.0, 9.0, 17.0, 28.0)
    p1 = BlockFunction(())
    p2 = BlockFunction(((6.0, 2.0), (9.0, 0.0)))
    p3 = BlockFunction(((3.0, 1.5), (12.0, 1.0), (17.0, 0.0)))
    p4 = BlockFunction(((15.0, 1.7), (24.0, 0.0)))
    proc = BlockProcess(m=3, u=1, Q=Q, blocks=(p1, p2, p3, p4))
    virt = VirtualBlocks((None, 2.0, 1.5))
    pts = [0.0, 3.0, 6.0, 9.0, 11.0, 12.0, 15.0, 17.0, 18.5, 24.0, 28.0]
    hval = [0, 2.7, 5.6, 3.5, 3.5, 1.9, 4.1, 2.7, 2.7, 1.7, 0]
    return Blocks(proc, virt, BlockHeight(tuple(zip(pts, hval))))


def test_reference_configuration_validates():
    assert validate_blocks(reference_configuration()) == []


def test_reference_xi_partition():
    xi = xi_partition(reference_configuration())
    classes = {}
    for idx, iv in enumerate(xi, start=1):
        classes.setdefault(iv.xi_class, []).append(idx)
    assert classes == {1: [4, 8], 2: [1], 3: [3, 7, 9, 10], 4: [2, 5, 6]}


def test_validator_flags_broken_height():
    blk = reference_configuration()
    vals = list(blk.height.values)
    vals[3] = (vals[3][0], 0.5)   # H(Q_1) must equal the left block sum 3.5
    bad = Blocks(blk.process, blk.virtual, BlockHeight(tuple(vals)))
    assert any("H(Q_1)" in e for e in validate_blocks(bad))


def test_validator_flags_virtual_on_dead_block():
    blk = reference_configuration()
    bad = Blocks(blk.process, VirtualBlocks((2.0, 2.0, 1.5)), blk.height)
    errs = validate_blocks(bad)
    assert any("upsilon_1" in e for e in errs)


def test_validator_flags_sign_condition():
    blk = reference_configuration()
    vals = list(blk.height.values)
    # the jump at 12 is downward (1.5 -> 1.0 in block 3): H must stay within
    # [block sum left, block sum left + value after]; push it above
    vals[5] = (12.0, 10.0)
    bad = Blocks(blk.process, blk.virtual, BlockHeight(tuple(vals)))
    assert any("sign condition" in e for e in validate_blocks(bad))


def test_block_function_semantics():
    f = BlockFunction(((1.0, 2.0), (3.0, 0.0)))
    assert f.at(0.5) == 0 and f.at(1.0) == 2.0 and f.at(2.9) == 2.0
    assert f.at(3.0) == 0.0 and f.left(3.0) == 2.0 and f.left(1.0) == 0.0
    with pytest.raises(ValidationError):
        BlockFunction(((2.0, 1.0), (1.0, 0.0)))


def test_enumerate_strata_m1():
    sts = enumerate_strata(1, 2)
    keys = {(s.u, s.delta, s.virtual) for s in sts}
    assert keys == {(0, ((0,),), (False,)),
                    (1, ((0,), (2,)), (False,))}


def test_enumerate_strata_m2_counts():
    sts = enumerate_strata(2, 2)
    # atom; main 2 with 1 or 2 jumps in segment 1 (each with optional
    # upsilon_2); one extra with 2 jumps split over segments
    assert any(s.total_delta == 0 for s in sts)
    assert all(s.total_delta <= 2 for s in sts)
    for s in sts:
        for j, pat in enumerate(s.delta[:2], start=1):
            assert all(c == 0 for c in pat[j - 1:]), "main jumps before own segment"
        for pat in s.delta[2:]:
            assert sum(pat) >= 2, "extras need >= 2 jumps"


def test_atom_integrand_is_product_of_zero_kernels():
    res = l_beta_truncated((1.0, 2.0), (0.0, 0.5), beta=None, delta_max=0,
                           n_samples=10, seed=0)
    assert res.value == pytest.approx(gauss_F00(1.0) * gauss_F00(2.0))
    assert res.stderr == 0.0


def test_delta2_stratum_matches_quadrature_beta_infinity():
    # independent deterministic oracle: Gauss-Legendre quadrature of the
    # single delta=2 stratum with exact Gaussian kernels
    eps = 0.1
    ga, wa = np.polynomial.legendre.leggauss(80)
    gs, ws = np.polynomial.legendre.leggauss(60)
    L = 8.0
    a = 0.5 * L * (ga + 1)
    wA = 0.5 * L * wa

    def f0(x, h):       # vectorized copy of gauss_F0
        return 2 * h / np.sqrt(2 * np.pi * x ** 3) * np.exp(-h ** 2 / (2 * x))

    total = 0.0
    A, C = a[:, None], a[None, :]
    W = wA[:, None] * wA[None, :]
    for s, wsv in zip(0.5 * (1 - eps) * (gs + 1) + eps, 0.5 * (1 - eps) * ws):
        for t, wtv in zip(0.5 * (1 - s) * (gs + 1) + s, 0.5 * (1 - s) * ws):
            f = f0(s, A + C) * f0(t - s, C) * f0(1 - t, A)
            total += wsv * wtv * float((f * W).sum())
    oracle = -0.25 * total
    assert abs(f0(1.3, 0.4) - gauss_F0(1.3, 0.4)) < 1e-15
    res = l_beta_truncated((1.0,), (0.0,), beta=None, delta_max=2,
                           epsilon=eps, n_samples=40_000, seed=5)
    st = next(p for p in res.per_stratum if p.stratum.u == 1)
    assert abs(st.value - oracle) < 4 * st.stderr
    assert abs(st.value - oracle) / abs(oracle) < 0.1


def test_integrand_beta_infinity_reference_configuration():
    est = integrand(reference_configuration(), None)
    assert est.stderr == 0.0
    assert est.value != 0.0
    # prefactor 2^{-delta - #virtual} = 2^{-7}
    prod = 1.0
    for _, val, _ in est.per_interval:
        prod *= val
    assert est.value == pytest.approx(prod / 2 ** 7)


def test_epsilon_extrapolate_exact_sqrt_fit():
    eps = [0.4, 0.2, 0.1]
    vals = [3.0 + 2.0 * math.sqrt(e) for e in eps]
    fit = epsilon_extrapolate(eps, vals)
    assert fit["value"] == pytest.approx(3.0)
    assert fit["slope"] == pytest.approx(2.0)


def test_l_beta_rejects_bad_query():
    with pytest.raises(ValidationError):
        l_beta_truncated((1.0,), (0.0, 1.0), beta=2.0)
    with pytest.raises(ValidationError):
        l_beta_truncated((-1.0,), (0.0,), beta=2.0)
