import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate, stats

from airybeta.dunkl import MomentQuery, corners_moment
from airybeta.ensembles import (
    sample_gbe,
    gbe_sum_sq_mean,
    corners_level_down,
    corners_step_beta,
    sample_gbe_corners,
    simulate_dbm,
    mc_joint_moment,
    edge_rescale_moment,
)
from airybeta.errors import ValidationError


def test_sample_gbe_shapes_and_order():
    lam = sample_gbe(5, 2.0, 1.0, size=7, seed=0)
    assert lam.shape == (7, 5)
    assert np.all(np.diff(lam, axis=1) >= 0)


def test_sample_gbe_seed_determinism():
    a = sample_gbe(4, 1.5, 2.0, size=3, seed=11)
    b = sample_gbe(4, 1.5, 2.0, size=3, seed=11)
    assert np.array_equal(a, b)


def test_sample_gbe_validation():
    with pytest.raises(ValidationError):
        sample_gbe(0, 2.0, 1.0)
    with pytest.raises(ValidationError):
        sample_gbe(3, -1.0, 1.0)


def test_gbe_sum_sq_identity():
    rng = np.random.default_rng(1)
    for N, beta, tau in [(3, 1.5, 1.0), (5, 0.5, 2.0), (2, 7 / 3, 1.0)]:
        lam = sample_gbe(N, beta, tau, size=200_000, rng=rng)
        s2 = (lam ** 2).sum(axis=1)
        z = (s2.mean() - gbe_sum_sq_mean(N, beta, tau)) \
            / (s2.std() / math.sqrt(s2.size))
        assert abs(z) < 4


def test_gbe_n1_quartic_moment_vs_quadrature():
    # N=1 is a plain Gaussian: E[lam^4] = 3 tau^2; also check the tridiagonal
    # N=2 quartic against direct density quadrature
    rng = np.random.default_rng(2)
    lam = sample_gbe(1, 2.0, 1.5, size=300_000, rng=rng)
    assert abs((lam ** 4).mean() - 3 * 1.5 ** 2) / (3 * 1.5 ** 2) < 0.02
    beta, tau = 1.7, 1.0

    def dens(a, b):
        return abs(a - b) ** beta * np.exp(-(a * a + b * b) / (2 * tau))

    znorm, _ = integrate.dblquad(dens, -12, 12, -12, 12)
    num, _ = integrate.dblquad(lambda a, b: (a ** 4 + b ** 4) * dens(a, b),
                               -12, 12, -12, 12)
    lam = sample_gbe(2, beta, tau, size=300_000, rng=rng)
    mc = (lam ** 4).sum(axis=1)
    z = (mc.mean() - num / znorm) / (mc.std() / math.sqrt(mc.size))
    assert abs(z) < 4


def test_corners_interlacing():
    rng = np.random.default_rng(3)
    lam = sample_gbe(5, 1.0, 1.0, size=1, rng=rng)[0]
    mu = corners_level_down(lam, 1.0, rng=rng)
    assert mu.size == 4
    assert np.all(mu >= lam[:-1]) and np.all(mu <= lam[1:])


def test_corners_two_to_one_matches_closed_form():
    # root-finding path vs the exact Beta(beta/2, beta/2) convex-combination
    # law: compare first three conditional moments given the pair
    rng = np.random.default_rng(4)
    beta = 1.5
    pair = np.array([-0.8, 1.1])
    ys = np.array([corners_level_down(pair, beta, rng=rng)[0]
                   for _ in range(20_000)])
    w = (ys - pair[0]) / (pair[1] - pair[0])
    # w should be Beta(beta/2, beta/2)
    ks = stats.kstest(w, "beta", args=(beta / 2, beta / 2))
    assert ks.pvalue > 0.01
    direct = corners_step_beta(np.tile(pair, (20_000, 1)), beta, rng=rng)
    assert abs(ys.mean() - direct.mean()) < 0.02


def test_joint_corners_moment_vs_exact():
    rng = np.random.default_rng(5)
    q = MomentQuery(mode="corners", N=3, powers=(2, 2), rows=(3, 2),
                    tau=Fraction(1))
    exact = float(corners_moment(q, Fraction(3, 2)))
    samp = sample_gbe_corners(3, [3, 2], 1.5, 1.0, size=50_000, rng=rng)
    mc, err = mc_joint_moment(samp, [2, 2])
    assert abs(mc - exact) < 4 * err


def test_dbm_requires_beta_ge_one():
    with pytest.raises(ValidationError):
        simulate_dbm(3, 0.5, [1.0])


def test_dbm_marginal_is_exact_at_first_time():
    res = simulate_dbm(4, 2.0, [1.0], size=50_000, dt=1e-2, seed=6)
    s2 = (res.samples[0] ** 2).sum(axis=1)
    z = (s2.mean() - gbe_sum_sq_mean(4, 2.0, 1.0)) \
        / (s2.std() / math.sqrt(s2.size))
    assert abs(z) < 4


@pytest.mark.slow
def test_dbm_joint_moment_vs_exact():
    from airybeta.dunkl import dbm_moment
    q = MomentQuery(mode="dbm", N=4, powers=(2, 2),
                    taus=(Fraction(1, 2), Fraction(1)))
    exact = float(dbm_moment(q, Fraction(2)))
    res = simulate_dbm(4, 2.0, [0.5, 1.0], size=100_000, dt=2e-3, seed=7)
    mc, err = mc_joint_moment(res.samples, [2, 2])
    dt_budget = 0.5 * res.dt * abs(exact)    # linear-in-dt weak error budget
    assert abs(mc - exact) < 3 * err + dt_budget


def test_edge_rescale_moment_consistency():
    # rescaled MC moment against the exact scaled edge moment, small N
    from airybeta.dunkl import scaled_edge_moment
    N = 16
    res = scaled_edge_moment(N, [1.0], [0.0], Fraction(2))
    rng = np.random.default_rng(8)
    lam = sample_gbe(N, 2.0, 2 * N / 2.0, size=400_000, rng=rng)
    mc, err = edge_rescale_moment([lam], list(res.k_int), [N], N)
    assert abs(mc - res.value) < 4 * err
